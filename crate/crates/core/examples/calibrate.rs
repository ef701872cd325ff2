//! Scratch calibration runs (not part of the deliverable).

use std::time::Instant;

use nncoop::analytic::{
    self, expected_interference_pairs, expected_interference_singles, IntegrationDomain,
    LaplaceSeriesSpec, QuadratureSpec, SeriesTruncation,
};
use nncoop::grouping::{build_nn_map, classify_k2, SubprocessKind};
use nncoop::interference::{
    empirical_laplace, FadingModel, InterferenceProfile, PathLossModel,
};
use nncoop::pattern::sample_ppp;
use nncoop::seeding::{Lane, SeedSpec};
use nncoop::stats::{
    default_radii, estimate_class_fractions, estimate_empty_space, estimate_nn_function,
    estimate_voronoi_shares, j_function, ks_poisson_count_test, ProcessClass, ReplicationPlan,
};
use nncoop::{BoundaryPolicy, CooperationScheme, Window};
use rayon::prelude::*;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    match which.as_str() {
        "fractions" => fractions(),
        "voronoi" => voronoi(),
        "curves" => curves(),
        "ks" => ks(),
        "mcquad" => mcquad(),
        "laplace" => laplace(),
        _ => {
            fractions();
            voronoi();
            curves();
            ks();
        }
    }
}

fn fractions() {
    let t = Instant::now();
    let plan = ReplicationPlan {
        n_replications: 700,
        lambda: 1.0,
        window: Window::square(50.0).unwrap(),
        policy: BoundaryPolicy::GuardMargin { margin: 5.0 },
        seed: SeedSpec::new(0xC0, 0),
    };
    let f = estimate_class_fractions(&plan).unwrap();
    println!(
        "fractions: n={} paired={:.5} +- {:.5} (target 0.62150) singles={:.5} dt={:?}",
        f.n_atoms, f.paired.value, f.paired.stderr, f.single.value, t.elapsed()
    );
    // intensity per unit area
    let reporting = plan.policy.reporting_window(&plan.window).unwrap();
    let area = reporting.area() * plan.n_replications as f64;
    println!(
        "intensity: singles {:.5} vs {:.5}; pairs {:.5} vs {:.5}",
        f.n_atoms as f64 * f.single.value / area,
        analytic::intensity_density(1.0, SubprocessKind::Singles).unwrap(),
        f.n_atoms as f64 * f.paired.value / area,
        analytic::intensity_density(1.0, SubprocessKind::Pairs).unwrap(),
    );
}

fn voronoi() {
    let t = Instant::now();
    let plan = ReplicationPlan {
        n_replications: 50,
        lambda: 1.0,
        window: Window::square(50.0).unwrap(),
        policy: BoundaryPolicy::GuardMargin { margin: 5.0 },
        seed: SeedSpec::new(0xC1, 0),
    };
    let v = estimate_voronoi_shares(&plan, 1_200_000).unwrap();
    println!(
        "voronoi: singles={:.5} +- {:.5} (target 0.4602) pairs={:.5} n={} dt={:?}",
        v.singles.value, v.singles.stderr, v.pairs.value, v.n_probes, t.elapsed()
    );
}

fn curves() {
    let t = Instant::now();
    let plan = ReplicationPlan {
        n_replications: 260,
        lambda: 1.0,
        window: Window::square(50.0).unwrap(),
        policy: BoundaryPolicy::GuardMargin { margin: 5.0 },
        seed: SeedSpec::new(0xC2, 0),
    };
    let radii = default_radii(1.0);
    let g2 = estimate_nn_function(&plan, ProcessClass::Pairs, &radii).unwrap();
    let sup = g2.sup_deviation_from(|r| analytic::nn_cdf_pairs(r, 1.0).unwrap());
    println!("G2: n={} sup-dev={:.5} (budget 0.02) dt={:?}", g2.n_samples(), sup, t.elapsed());

    let g1 = estimate_nn_function(&plan, ProcessClass::Singles, &radii).unwrap();
    let f1 = estimate_empty_space(&plan, ProcessClass::Singles, &radii, 2_000_000).unwrap();
    let f2 = estimate_empty_space(&plan, ProcessClass::Pairs, &radii, 2_000_000).unwrap();
    let j1 = j_function(&g1, &f1, None).unwrap();
    let j2 = j_function(&g2, &f2, None).unwrap();
    let j1_min = j1.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let j2_max = j2.values().iter().cloned().fold(0.0, f64::max);
    println!(
        "J1 len={} min={:.4} first5={:?}",
        j1.len(),
        j1_min,
        &j1.values()[..5.min(j1.len())]
    );
    println!(
        "J1 margins first5: {:?}",
        j1.values()
            .iter()
            .zip(j1.stderr())
            .take(5)
            .map(|(v, s)| format!("{:.4}+-{:.4}", v, s))
            .collect::<Vec<_>>()
    );
    println!("J2 len={} max={:.4} (must stay < 1) dt={:?}", j2.len(), j2_max, t.elapsed());

    // reference empty-space closeness (F1 vs reference law)
    let sup_f1 = f1.sup_deviation_from(|r| {
        analytic::nn_cdf_reference(r, 1.0 - analytic::p_star()).unwrap()
    });
    println!("F1 vs reference law sup-dev = {sup_f1:.4} (tolerance 0.03)");
}

fn ks() {
    let t = Instant::now();
    for (reps, side) in [(2000u64, 20.0), (10_000, 20.0), (20_000, 20.0)] {
        let plan = ReplicationPlan {
            n_replications: reps,
            lambda: 1.0,
            window: Window::square(side).unwrap(),
            policy: BoundaryPolicy::GuardMargin { margin: 5.0 },
            seed: SeedSpec::new(0xC3, 0),
        };
        let k1 = ks_poisson_count_test(&plan, SubprocessKind::Singles).unwrap();
        let k2 = ks_poisson_count_test(&plan, SubprocessKind::Pairs).unwrap();
        println!(
            "ks reps={reps}: singles D={:.4} p={:.2e}; pairs D={:.4} p={:.2e} dt={:?}",
            k1.statistic, k1.p_value, k2.statistic, k2.p_value, t.elapsed()
        );
    }
}

fn mcquad() {
    // MC interference vs quadrature, lambda 0.1 on 100x100, observer centre
    let t = Instant::now();
    let lambda = 0.1;
    let window = Window::square(100.0).unwrap();
    let n_reps: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60_000);
    let betas = [2.5, 4.0];
    let r_grid: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let schemes =
        [CooperationScheme::NoCooperation, CooperationScheme::StrongestOn];
    let base = SeedSpec::new(0xC4, 0);

    // per (beta, scheme, r): sums of i1, i2
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let block = base.replication(rep);
            let pattern = sample_ppp(lambda, &window, block.lane(Lane::Pattern)).unwrap();
            let grouping = if pattern.len() >= 2 {
                let nn =
                    build_nn_map(&pattern, &BoundaryPolicy::GuardMargin { margin: 0.0 }).unwrap();
                classify_k2(&pattern, &nn).unwrap()
            } else {
                nncoop::GroupingResult::all_singles(pattern.len())
            };
            let profile = InterferenceProfile::build(
                &pattern,
                &grouping,
                &window.center(),
                FadingModel::Rayleigh,
                1.0,
                block.lane(Lane::Fading),
            )
            .unwrap();
            let mut out = Vec::new();
            for beta in betas {
                for scheme in &schemes {
                    let samples = profile.evaluate(scheme, beta, &r_grid).unwrap();
                    for s in samples {
                        out.push((s.i1, s.i2, s.i1 * s.i1, s.i2 * s.i2));
                    }
                }
            }
            out
        })
        .collect();

    println!("mc done dt={:?}", t.elapsed());
    let quad = QuadratureSpec { rel_tol: 1e-5, abs_tol: 1e-12, ..Default::default() };
    let domain = IntegrationDomain::disc_matching_area(&window);
    let nf = n_reps as f64;
    let mut idx = 0;
    for beta in betas {
        for scheme in &schemes {
            for &r in &r_grid {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                let mut q1 = 0.0;
                let mut q2 = 0.0;
                for row in &rows {
                    let (a, b, c, d) = row[idx];
                    s1 += a;
                    s2 += b;
                    q1 += c;
                    q2 += d;
                }
                idx += 1;
                let m1 = s1 / nf;
                let m2 = s2 / nf;
                let se1 = ((q1 / nf - m1 * m1) / nf).sqrt();
                let se2 = ((q2 / nf - m2 * m2) / nf).sqrt();
                let pl = PathLossModel::new(beta, 1.0, r).unwrap();
                let qi1 = expected_interference_singles(lambda, &pl, &quad, domain).unwrap();
                let qi2 = expected_interference_pairs(lambda, &pl, scheme, &quad, domain).unwrap();
                println!(
                    "b={beta} {} R={r:.1}: i1 {m1:.5}+-{se1:.5} q={qi1:.5} rd={:+.2}% | i2 {m2:.5}+-{se2:.5} q={qi2:.5} rd={:+.2}%",
                    scheme.token(),
                    100.0 * (m1 - qi1) / qi1,
                    100.0 * (m2 - qi2) / qi2,
                );
            }
        }
    }
    println!("quad+mc total dt={:?}", t.elapsed());
}

fn laplace() {
    let t = Instant::now();
    let lambda = 0.1;
    let window = Window::square(20.0f64.sqrt()).unwrap();
    let pl = PathLossModel::new(4.0, 1.0, 1.0).unwrap();
    let s_grid = vec![0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
    let spec = LaplaceSeriesSpec {
        truncation: SeriesTruncation::TailBound(1e-13),
        mc_samples_per_term: 100_000,
        s_grid: s_grid.clone(),
        seed: SeedSpec::new(0xC5, 0),
    };
    let (lt1, diag) = analytic::laplace_transform_singles(lambda, &window, &pl, &spec).unwrap();
    let (lt2, _) = analytic::laplace_transform_pairs(
        lambda,
        &window,
        &pl,
        &CooperationScheme::NoCooperation,
        &spec,
    )
    .unwrap();
    println!("series dt={:?} n_max={} tail={:.2e}", t.elapsed(), diag.n_max, diag.tail_bound);

    // empirical side
    let n_sims: u64 = 200_000;
    let base = SeedSpec::new(0xC6, 0);
    let samples: Vec<(f64, f64)> = (0..n_sims)
        .into_par_iter()
        .map(|rep| {
            let block = base.replication(rep);
            let pattern = sample_ppp(lambda, &window, block.lane(Lane::Pattern)).unwrap();
            let grouping = if pattern.len() >= 2 {
                let nn =
                    build_nn_map(&pattern, &BoundaryPolicy::GuardMargin { margin: 0.0 }).unwrap();
                classify_k2(&pattern, &nn).unwrap()
            } else {
                nncoop::GroupingResult::all_singles(pattern.len())
            };
            let profile = InterferenceProfile::build(
                &pattern,
                &grouping,
                &window.center(),
                FadingModel::Rayleigh,
                1.0,
                block.lane(Lane::Fading),
            )
            .unwrap();
            let s = profile.evaluate(&CooperationScheme::NoCooperation, pl.beta, &[pl.exclusion_radius]).unwrap();
            (s[0].i1, s[0].i2)
        })
        .collect();
    let i1: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let i2: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let e1 = empirical_laplace(&i1, &s_grid).unwrap();
    let e2 = empirical_laplace(&i2, &s_grid).unwrap();
    println!("sims dt={:?}", t.elapsed());
    for k in 0..s_grid.len() {
        println!(
            "s={:<5} singles: series {:.5}+-{:.5} emp {:.5}+-{:.5} rd={:+.3}% | pairs: series {:.5}+-{:.5} emp {:.5}+-{:.5} rd={:+.3}%",
            s_grid[k],
            lt1[k].value, lt1[k].stderr, e1[k].value, e1[k].stderr,
            100.0 * (lt1[k].value - e1[k].value) / e1[k].value,
            lt2[k].value, lt2[k].stderr, e2[k].value, e2[k].stderr,
            100.0 * (lt2[k].value - e2[k].value) / e2[k].value,
        );
    }
    // mean interference vs derivative at 0+
    let m1 = i1.iter().sum::<f64>() / i1.len() as f64;
    let m2 = i2.iter().sum::<f64>() / i2.len() as f64;
    let h = 0.01;
    let fd = |pts: &[nncoop::interference::LaplacePoint]| (1.0 - pts[1].value / pts[0].value) / h;
    let spech = LaplaceSeriesSpec {
        truncation: SeriesTruncation::TailBound(1e-10),
        mc_samples_per_term: 100_000,
        s_grid: vec![0.0, h],
        seed: SeedSpec::new(0xC7, 0),
    };
    let (lt1h, _) = analytic::laplace_transform_singles(lambda, &window, &pl, &spech).unwrap();
    let (lt2h, _) = analytic::laplace_transform_pairs(
        lambda,
        &window,
        &pl,
        &CooperationScheme::NoCooperation,
        &spech,
    )
    .unwrap();
    println!(
        "derivative check: singles fd={:.5} vs mean {:.5}; pairs fd={:.5} vs mean {:.5}",
        fd(&lt1h), m1, fd(&lt2h), m2
    );
    println!("laplace total dt={:?}", t.elapsed());
}
