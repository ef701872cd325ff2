//! Monte Carlo estimators for everything measured on simulated patterns:
//! class fractions, Voronoi surface shares, nearest-neighbour (G), empty
//! space (F) and J functions, and Poisson-ness tests on counts.
//!
//! Estimators pool over independent replications, one seed-stream block per
//! replication. Replications run in parallel but are reduced serially in
//! replication order, so results are bit-identical for any worker count.
//! Under a guard-margin policy, classification uses every atom in the window
//! while statistics are collected only from atoms and probe points in the
//! eroded interior (minus sampling).

use std::io::Write;

use rayon::prelude::*;
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPolicy, Window};
use crate::grid::NeighborGrid;
use crate::grouping::{
    build_nn_map, classify_k2, GroupingResult, Membership, SubprocessKind,
};
use crate::pattern::{independent_thin, sample_ppp, uniform_point_in, PointPattern};
use crate::seeding::{Lane, SeedSpec};

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// A function of radius estimated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCurve {
    radii: Vec<f64>,
    values: Vec<f64>,
    stderr: Vec<f64>,
    n_samples: u64,
}

impl EmpiricalCurve {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>, n_samples: u64) -> Result<Self> {
        validate_radii(&radii)?;
        if values.len() != radii.len() || stderr.len() != radii.len() {
            return Err(Error::invalid("curve columns must have equal length"));
        }
        Ok(EmpiricalCurve { radii, values, stderr, n_samples })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Largest absolute deviation from `f` over the grid.
    pub fn sup_deviation_from(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| (v - f(r)).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `r,value,stderr` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,value,stderr")?;
        for i in 0..self.radii.len() {
            writeln!(out, "{},{},{}", self.radii[i], self.values[i], self.stderr[i])?;
        }
        Ok(())
    }
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::invalid("radius grid is empty"));
    }
    if radii[0] < 0.0 || !radii.iter().all(|r| r.is_finite()) {
        return Err(Error::invalid("radii must be finite and non-negative"));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radii must be strictly increasing"));
    }
    Ok(())
}

/// Default radius grid: 64 points up to two mean nearest-neighbour spacings,
/// 2 / sqrt(lambda), starting strictly above zero.
pub fn default_radii(lambda: f64) -> Vec<f64> {
    let rmax = 2.0 / lambda.sqrt();
    (1..=64).map(|j| rmax * j as f64 / 64.0).collect()
}

/// A reproducible batch of replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationPlan {
    pub n_replications: u64,
    pub lambda: f64,
    pub window: Window,
    pub policy: BoundaryPolicy,
    pub seed: SeedSpec,
}

impl ReplicationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_replications == 0 {
            return Err(Error::invalid("plan needs at least one replication"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("plan lambda must be finite and >= 0"));
        }
        self.policy.validate_for(&self.window)
    }

    fn reporting_window(&self) -> Result<Window> {
        self.policy.reporting_window(&self.window)
    }
}

/// Which subprocess a statistic is computed on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessClass {
    Singles,
    Pairs,
    /// Independent thinning of the parent pattern with this keep
    /// probability; the PPP reference against the dependently thinned
    /// classes.
    Reference { keep_prob: f64 },
}

/// Fractions of atoms classified single and paired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFractions {
    pub single: Estimate,
    pub paired: Estimate,
    pub n_atoms: u64,
}

/// Voronoi surface shares attributed to each class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiShares {
    pub singles: Estimate,
    pub pairs: Estimate,
    pub n_probes: u64,
}

/// Kolmogorov-Smirnov test summary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: u64,
}

/// Runs `work` once per replication (in parallel) and returns the outputs in
/// replication order. `work` receives the pattern and its K=2 grouping;
/// patterns with fewer than two atoms are classified all-single.
fn map_replications<T: Send>(
    plan: &ReplicationPlan,
    work: impl Fn(u64, SeedSpec, &PointPattern, &GroupingResult) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    plan.validate()?;
    (0..plan.n_replications)
        .into_par_iter()
        .map(|rep| {
            let block = plan.seed.replication(rep);
            let pattern = sample_ppp(plan.lambda, &plan.window, block.lane(Lane::Pattern))?;
            let grouping = if pattern.len() >= 2 {
                let nn = build_nn_map(&pattern, &plan.policy)?;
                classify_k2(&pattern, &nn)?
            } else {
                GroupingResult::all_singles(pattern.len())
            };
            work(rep, block, &pattern, &grouping)
        })
        .collect()
}

/// Pooled ratio estimate sum(x_i) / sum(n_i) with a replication-batched
/// standard error (delta method over replications).
fn pooled_ratio(parts: &[(f64, f64)]) -> Estimate {
    let sx: f64 = parts.iter().map(|p| p.0).sum();
    let sn: f64 = parts.iter().map(|p| p.1).sum();
    if sn == 0.0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN };
    }
    let p = sx / sn;
    let m = parts.iter().filter(|p| p.1 > 0.0).count() as f64;
    let mut var = 0.0;
    if m > 1.0 {
        for (x, n) in parts {
            let d = x - p * n;
            var += d * d;
        }
        var *= m / (m - 1.0);
        var /= sn * sn;
    }
    Estimate { value: p, stderr: var.sqrt() }
}

/// Fractions of interior atoms classified single / paired, pooled over
/// replications, with binomial-style standard errors.
pub fn estimate_class_fractions(plan: &ReplicationPlan) -> Result<ClassFractions> {
    let reporting = plan.reporting_window()?;
    let per_rep = map_replications(plan, |_, _, pattern, grouping| {
        let mut singles = 0u64;
        let mut paired = 0u64;
        for (i, p) in pattern.points().iter().enumerate() {
            if !reporting.contains(p) {
                continue;
            }
            match grouping.membership(i) {
                Membership::Single => singles += 1,
                Membership::Paired { .. } => paired += 1,
                Membership::InTriplet { .. } => {}
            }
        }
        Ok((singles, paired))
    })?;

    let total_singles: u64 = per_rep.iter().map(|r| r.0).sum();
    let total_paired: u64 = per_rep.iter().map(|r| r.1).sum();
    let n = total_singles + total_paired;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let binom = |p: f64| Estimate { value: p, stderr: (p * (1.0 - p) / nf).sqrt() };
    Ok(ClassFractions {
        single: binom(total_singles as f64 / nf),
        paired: binom(total_paired as f64 / nf),
        n_atoms: n,
    })
}

/// Attributes uniform probe points in the interior window to the class of
/// their nearest atom (exactly Voronoi-cell membership) and returns the
/// attribution shares. `n_probes` is the total probe budget, split evenly
/// across replications. The two shares sum to one.
pub fn estimate_voronoi_shares(plan: &ReplicationPlan, n_probes: u64) -> Result<VoronoiShares> {
    if n_probes == 0 {
        return Err(Error::invalid("need at least one probe point"));
    }
    let reporting = plan.reporting_window()?;
    let probes_per_rep = n_probes.div_ceil(plan.n_replications).max(1);
    let per_rep = map_replications(plan, |_, block, pattern, grouping| {
        if pattern.is_empty() {
            log::debug!("voronoi replication skipped: empty pattern");
            return Ok((0u64, 0u64));
        }
        let grid = NeighborGrid::build(pattern.points(), pattern.window(), &plan.policy);
        let mut rng = block.lane(Lane::Probes).rng();
        let mut to_singles = 0u64;
        let mut to_pairs = 0u64;
        for _ in 0..probes_per_rep {
            let probe = uniform_point_in(&reporting, &mut rng);
            let (idx, _) = grid.nearest(&probe, None).expect("pattern not empty");
            match grouping.membership(idx) {
                Membership::Single => to_singles += 1,
                _ => to_pairs += 1,
            }
        }
        Ok((to_singles, to_pairs))
    })?;

    let parts_singles: Vec<(f64, f64)> =
        per_rep.iter().map(|&(s, p)| (s as f64, (s + p) as f64)).collect();
    let parts_pairs: Vec<(f64, f64)> =
        per_rep.iter().map(|&(s, p)| (p as f64, (s + p) as f64)).collect();
    let total: u64 = per_rep.iter().map(|&(s, p)| s + p).sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    Ok(VoronoiShares {
        singles: pooled_ratio(&parts_singles),
        pairs: pooled_ratio(&parts_pairs),
        n_probes: total,
    })
}

/// Points of the selected subprocess for one replication.
fn subprocess_points(
    class: ProcessClass,
    block: SeedSpec,
    pattern: &PointPattern,
    grouping: &GroupingResult,
) -> Result<Vec<crate::geometry::Point>> {
    Ok(match class {
        ProcessClass::Singles => grouping
            .singles()
            .into_iter()
            .map(|i| pattern.points()[i])
            .collect(),
        ProcessClass::Pairs => pattern
            .points()
            .iter()
            .enumerate()
            .filter(|(i, _)| matches!(grouping.membership(*i), Membership::Paired { .. }))
            .map(|(_, p)| *p)
            .collect(),
        ProcessClass::Reference { keep_prob } => {
            independent_thin(pattern, keep_prob, block.lane(Lane::Thinning))?
                .points()
                .to_vec()
        }
    })
}

/// Per-replication cumulative counts of sample values below each radius.
struct CurveAccumulator {
    radii: Vec<f64>,
    // per replication: (cumulative counts per radius, total samples)
    parts: Vec<(Vec<u64>, u64)>,
}

impl CurveAccumulator {
    fn bin(radii: &[f64], values: impl Iterator<Item = f64>) -> (Vec<u64>, u64) {
        let mut diff = vec![0u64; radii.len() + 1];
        let mut total = 0u64;
        for v in values {
            let idx = radii.partition_point(|r| *r < v);
            diff[idx] += 1;
            total += 1;
        }
        // prefix sums: cum[j] = #values <= radii[j]
        let mut cum = vec![0u64; radii.len()];
        let mut acc = 0u64;
        for j in 0..radii.len() {
            acc += diff[j];
            cum[j] = acc;
        }
        (cum, total)
    }

    fn finish(self) -> Result<EmpiricalCurve> {
        let total: u64 = self.parts.iter().map(|p| p.1).sum();
        if total == 0 {
            return Err(Error::EmptySample);
        }
        let mut values = Vec::with_capacity(self.radii.len());
        let mut stderr = Vec::with_capacity(self.radii.len());
        for j in 0..self.radii.len() {
            let parts: Vec<(f64, f64)> =
                self.parts.iter().map(|(cum, n)| (cum[j] as f64, *n as f64)).collect();
            let est = pooled_ratio(&parts);
            values.push(est.value);
            stderr.push(est.stderr);
        }
        EmpiricalCurve::new(self.radii, values, stderr, total)
    }
}

/// Empirical nearest-neighbour function G of a subprocess: the cdf of the
/// distance from an interior atom of the subprocess to the nearest other
/// atom of the same subprocess.
pub fn estimate_nn_function(
    plan: &ReplicationPlan,
    class: ProcessClass,
    radii: &[f64],
) -> Result<EmpiricalCurve> {
    validate_radii(radii)?;
    let reporting = plan.reporting_window()?;
    let parts = map_replications(plan, |_, block, pattern, grouping| {
        let pts = subprocess_points(class, block, pattern, grouping)?;
        if pts.len() < 2 {
            log::debug!("nn-function replication skipped: subprocess has {} atoms", pts.len());
            return Ok((vec![0u64; radii.len()], 0u64));
        }
        let grid = NeighborGrid::build(&pts, pattern.window(), &plan.policy);
        let dists = pts.iter().enumerate().filter(|(_, p)| reporting.contains(p)).map(
            |(i, p)| grid.nearest(p, Some(i)).expect("subprocess has >= 2 atoms").1,
        );
        Ok(CurveAccumulator::bin(radii, dists))
    })?;
    CurveAccumulator { radii: radii.to_vec(), parts }.finish()
}

/// Empirical empty-space function F of a subprocess: the cdf of the distance
/// from a uniform interior probe point to the nearest subprocess atom.
pub fn estimate_empty_space(
    plan: &ReplicationPlan,
    class: ProcessClass,
    radii: &[f64],
    n_probes: u64,
) -> Result<EmpiricalCurve> {
    validate_radii(radii)?;
    if n_probes == 0 {
        return Err(Error::invalid("need at least one probe point"));
    }
    let reporting = plan.reporting_window()?;
    let probes_per_rep = n_probes.div_ceil(plan.n_replications).max(1);
    let parts = map_replications(plan, |_, block, pattern, grouping| {
        let pts = subprocess_points(class, block, pattern, grouping)?;
        if pts.is_empty() {
            log::debug!("empty-space replication skipped: empty subprocess");
            return Ok((vec![0u64; radii.len()], 0u64));
        }
        let grid = NeighborGrid::build(&pts, pattern.window(), &plan.policy);
        let mut rng = block.lane(Lane::Probes).rng();
        let dists = (0..probes_per_rep).map(|_| {
            let probe = uniform_point_in(&reporting, &mut rng);
            grid.nearest(&probe, None).expect("subprocess not empty").1
        });
        Ok(CurveAccumulator::bin(radii, dists))
    })?;
    CurveAccumulator { radii: radii.to_vec(), parts }.finish()
}

/// Pointwise J(r) = (1 - G(r)) / (1 - F(r)) with propagated standard errors.
///
/// Radii where 1 - F falls to `floor` (default 1e-3) or below are truncated
/// from the output; both curves must share one radius grid.
pub fn j_function(g: &EmpiricalCurve, f: &EmpiricalCurve, floor: Option<f64>) -> Result<EmpiricalCurve> {
    if g.radii() != f.radii() {
        return Err(Error::GridMismatch);
    }
    let floor = floor.unwrap_or(1e-3);
    let mut radii = Vec::new();
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for j in 0..g.len() {
        let sg = 1.0 - g.values()[j];
        let sf = 1.0 - f.values()[j];
        if sf <= floor {
            break;
        }
        let jv = sg / sf;
        let rel_g = g.stderr()[j] / sf;
        let rel_f = jv * f.stderr()[j] / sf;
        radii.push(g.radii()[j]);
        values.push(jv);
        stderr.push((rel_g * rel_g + rel_f * rel_f).sqrt());
    }
    if radii.is_empty() {
        return Err(Error::EmptySample);
    }
    EmpiricalCurve::new(radii, values, stderr, g.n_samples().min(f.n_samples()))
}

/// Survival function of the Kolmogorov distribution,
/// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
fn kolmogorov_q(t: f64) -> f64 {
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS distance between the empirical cdf of `counts` and Poisson fitted to
/// the sample mean, with the asymptotic Kolmogorov p-value.
///
/// Two caveats, both deliberate: evaluating the classical Kolmogorov p-value
/// on a discrete distribution is conservative (the true p-value is smaller),
/// while fitting the mean from the same sample pulls the other way. The test
/// is used here to *reject* Poisson-ness, where the conservative reading is
/// the safe one.
pub(crate) fn poisson_ks_from_counts(counts: &[u64]) -> Result<KsTest> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::invalid("all counts are zero; Poisson fit is degenerate"));
    }
    let pois = PoissonDist::new(mean).map_err(|e| Error::invalid(format!("Poisson fit: {e}")))?;
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let max = *sorted.last().unwrap();
    let mut d = 0.0f64;
    let mut below = 0usize;
    for k in 0..=max {
        while below < sorted.len() && sorted[below] <= k {
            below += 1;
        }
        let ecdf = below as f64 / n;
        let diff = (ecdf - pois.cdf(k)).abs();
        d = d.max(diff);
    }
    Ok(KsTest { statistic: d, p_value: kolmogorov_q(n.sqrt() * d), n: counts.len() as u64 })
}

/// Tests whether per-replication interior counts of a subprocess are Poisson
/// distributed (mean fitted from the sample). Needs at least 100
/// replications.
pub fn ks_poisson_count_test(plan: &ReplicationPlan, class: SubprocessKind) -> Result<KsTest> {
    if plan.n_replications < 100 {
        return Err(Error::invalid("KS count test needs at least 100 replications"));
    }
    let reporting = plan.reporting_window()?;
    let counts = map_replications(plan, |_, _, pattern, grouping| {
        let mut c = 0u64;
        for (i, p) in pattern.points().iter().enumerate() {
            if !reporting.contains(p) {
                continue;
            }
            let keep = match class {
                SubprocessKind::Singles => matches!(grouping.membership(i), Membership::Single),
                SubprocessKind::Pairs => {
                    matches!(grouping.membership(i), Membership::Paired { .. })
                }
            };
            if keep {
                c += 1;
            }
        }
        Ok(c)
    })?;
    poisson_ks_from_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::geometry::Point;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn plan(lambda: f64, side: f64, margin: f64, reps: u64, stream: u64) -> ReplicationPlan {
        ReplicationPlan {
            n_replications: reps,
            lambda,
            window: Window::square(side).unwrap(),
            policy: BoundaryPolicy::GuardMargin { margin },
            seed: SeedSpec::new(0xABCD, stream),
        }
    }

    #[test]
    fn class_fractions_near_pair_constant() {
        let p = plan(1.0, 30.0, 5.0, 60, 0);
        let f = estimate_class_fractions(&p).unwrap();
        assert!(f.n_atoms > 20_000);
        assert_relative_eq!(f.single.value + f.paired.value, 1.0, epsilon = 1e-12);
        assert!((f.paired.value - analytic::p_star()).abs() < 0.02, "paired = {:?}", f.paired);
        assert!(f.paired.stderr > 0.0 && f.paired.stderr < 0.01);
    }

    #[test]
    fn voronoi_shares_sum_to_one() {
        let p = plan(1.0, 30.0, 5.0, 30, 1000);
        let v = estimate_voronoi_shares(&p, 120_000).unwrap();
        assert_relative_eq!(v.singles.value + v.pairs.value, 1.0, epsilon = 1e-12);
        assert!((v.singles.value - 0.4602).abs() < 0.03, "singles share {:?}", v.singles);
    }

    #[test]
    fn nn_function_of_pairs_tracks_closed_form() {
        let p = plan(1.0, 30.0, 5.0, 60, 2000);
        let radii = default_radii(1.0);
        let g = estimate_nn_function(&p, ProcessClass::Pairs, &radii).unwrap();
        let sup = g.sup_deviation_from(|r| analytic::nn_cdf_pairs(r, 1.0).unwrap());
        assert!(sup < 0.05, "sup deviation {sup}");
        // cdf-ness
        assert!(g.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(g.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn nn_function_of_reference_is_poissonian() {
        let keep = analytic::p_star();
        let p = plan(1.0, 30.0, 5.0, 60, 3000);
        let radii = default_radii(1.0);
        let g = estimate_nn_function(&p, ProcessClass::Reference { keep_prob: keep }, &radii).unwrap();
        let sup = g.sup_deviation_from(|r| analytic::nn_cdf_reference(r, keep).unwrap());
        assert!(sup < 0.05, "sup deviation {sup}");
    }

    #[test]
    fn empty_space_is_a_cdf_reaching_one() {
        let p = plan(1.0, 24.0, 5.0, 30, 4000);
        let radii = default_radii(1.0);
        let f = estimate_empty_space(&p, ProcessClass::Pairs, &radii, 60_000).unwrap();
        assert!(f.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(f.values()[0] < 0.05);
        assert!(*f.values().last().unwrap() > 0.99);
    }

    #[test]
    fn j_of_identical_curves_is_one() {
        let radii = vec![0.1, 0.2, 0.3];
        let g = EmpiricalCurve::new(radii.clone(), vec![0.1, 0.4, 0.8], vec![0.0; 3], 100).unwrap();
        let j = j_function(&g, &g, None).unwrap();
        assert!(j.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn j_truncates_saturated_tail() {
        let radii = vec![0.1, 0.2, 0.3];
        let g = EmpiricalCurve::new(radii.clone(), vec![0.1, 0.4, 0.9], vec![0.0; 3], 100).unwrap();
        let f = EmpiricalCurve::new(radii.clone(), vec![0.2, 0.5, 0.9995], vec![0.0; 3], 100).unwrap();
        let j = j_function(&g, &f, None).unwrap();
        assert_eq!(j.len(), 2);
        let g2 = EmpiricalCurve::new(vec![0.1, 0.2], vec![0.1, 0.4], vec![0.0; 2], 100).unwrap();
        assert!(matches!(j_function(&g2, &f, None), Err(Error::GridMismatch)));
    }

    #[test]
    fn ks_accepts_true_poisson_counts() {
        let mut rng = SeedSpec::new(5, 5).rng();
        let pois = rand_distr::Poisson::new(40.0).unwrap();
        let counts: Vec<u64> =
            (0..2000).map(|_| rand_distr::Distribution::sample(&pois, &mut rng) as u64).collect();
        let t = poisson_ks_from_counts(&counts).unwrap();
        assert!(t.p_value > 0.05, "true Poisson rejected: {t:?}");
    }

    #[test]
    fn ks_rejects_even_only_counts() {
        // pair atoms arrive two at a time, so their counts are always even
        let mut rng = SeedSpec::new(6, 6).rng();
        let pois = rand_distr::Poisson::new(20.0).unwrap();
        let counts: Vec<u64> = (0..2000)
            .map(|_| 2 * rand_distr::Distribution::sample(&pois, &mut rng) as u64)
            .collect();
        let t = poisson_ks_from_counts(&counts).unwrap();
        assert!(t.p_value < 0.01, "even-only counts accepted: {t:?}");
    }

    #[test]
    fn ks_on_raw_ppp_counts_does_not_reject() {
        let p = plan(1.0, 14.0, 2.0, 400, 5000);
        // raw pattern counts: use the Pairs+Singles union by summing both
        let reporting = p.policy.reporting_window(&p.window).unwrap();
        let counts = map_replications(&p, |_, _, pattern, _| {
            Ok(pattern.points().iter().filter(|q| reporting.contains(q)).count() as u64)
        })
        .unwrap();
        let t = poisson_ks_from_counts(&counts).unwrap();
        assert!(t.p_value > 0.05, "PPP counts rejected: {t:?}");
    }

    #[test]
    fn curve_csv_and_validation() {
        let c = EmpiricalCurve::new(vec![0.5, 1.0], vec![0.1, 0.2], vec![0.01, 0.02], 10).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "r,value,stderr\n0.5,0.1,0.01\n1,0.2,0.02\n");
        assert!(EmpiricalCurve::new(vec![1.0, 0.5], vec![0.0; 2], vec![0.0; 2], 1).is_err());
        assert!(EmpiricalCurve::new(vec![0.5, 0.5], vec![0.0; 2], vec![0.0; 2], 1).is_err());
    }

    #[test]
    fn probe_points_land_in_reporting_window() {
        let p = plan(0.5, 20.0, 4.0, 1, 6000);
        let reporting = p.policy.reporting_window(&p.window).unwrap();
        let mut rng = p.seed.lane(Lane::Probes).rng();
        for _ in 0..1000 {
            let q = uniform_point_in(&reporting, &mut rng);
            assert!(reporting.contains(&q));
            assert!(rng.random::<f64>() <= 1.0);
        }
    }
}
