//! Sampling of the interference fields generated by single and paired atoms,
//! under the four cooperation schemes, with an exclusion radius and Rayleigh
//! or unit fading.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grouping::GroupingResult;
use crate::pattern::PointPattern;
use crate::seeding::SeedSpec;

/// How a cooperating pair forms its transmitted signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CooperationScheme {
    /// Both members transmit individually; the signals add in power.
    NoCooperation,
    /// Only the member with the stronger received signal transmits.
    StrongestOn,
    /// One member transmits, chosen by a coin with P(first) = q.
    RandomOn { q: f64 },
    /// Complex amplitudes combine coherently with their random phases.
    InPhase,
}

impl CooperationScheme {
    pub fn validate(&self) -> Result<()> {
        if let CooperationScheme::RandomOn { q } = self {
            if !(0.0..=1.0).contains(q) {
                return Err(Error::invalid(format!("RandomOn probability must lie in [0, 1], got {q}")));
            }
        }
        Ok(())
    }

    /// Short token used in file names and config values.
    pub fn token(&self) -> &'static str {
        match self {
            CooperationScheme::NoCooperation => "nc",
            CooperationScheme::StrongestOn => "of1",
            CooperationScheme::RandomOn { .. } => "of2",
            CooperationScheme::InPhase => "ph",
        }
    }
}

/// Per-link fading draw: power gain and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSample {
    pub nu: f64,
    pub theta: f64,
}

/// Fading law for the link power gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    /// Rayleigh fading: gain exponential with mean equal to the transmit
    /// power; phases uniform.
    Rayleigh,
    /// Deterministic unit gain (phases still uniform).
    Unit,
}

/// One draw of the two interference fields seen by the observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceSample {
    /// Interference from single atoms.
    pub i1: f64,
    /// Interference from cooperating pairs.
    pub i2: f64,
}

impl InterferenceSample {
    pub fn total(&self) -> f64 {
        self.i1 + self.i2
    }
}

/// Received power from one base station: nu * d^(-beta).
pub fn channel_gain(observer: &Point, bs: &Point, nu: f64, beta: f64) -> Result<f64> {
    if !(beta > 2.0) {
        return Err(Error::invalid(format!("path-loss exponent must exceed 2, got {beta}")));
    }
    if !(nu >= 0.0) {
        return Err(Error::invalid(format!("fading gain must be >= 0, got {nu}")));
    }
    let d = observer.euclidean_distance(bs);
    if d == 0.0 {
        return Err(Error::invalid("observer coincides with a base station"));
    }
    Ok(nu * d.powf(-beta))
}

/// Signal power received from a cooperating pair with link powers `hx`, `hy`.
///
/// `coin` is a uniform draw on [0, 1) consumed only by
/// [`CooperationScheme::RandomOn`].
pub fn pair_signal(
    hx: f64,
    hy: f64,
    theta_x: f64,
    theta_y: f64,
    scheme: &CooperationScheme,
    coin: f64,
) -> f64 {
    match scheme {
        CooperationScheme::NoCooperation => hx + hy,
        CooperationScheme::StrongestOn => hx.max(hy),
        CooperationScheme::RandomOn { q } => {
            if coin < *q {
                hx
            } else {
                hy
            }
        }
        // |sqrt(hx) e^(i tx) + sqrt(hy) e^(i ty)|^2
        CooperationScheme::InPhase => hx + hy + 2.0 * (hx * hy).sqrt() * (theta_x - theta_y).cos(),
    }
}

#[derive(Debug, Clone, Copy)]
struct SingleLink {
    dist: f64,
    nu: f64,
}

#[derive(Debug, Clone, Copy)]
struct PairLink {
    dist_a: f64,
    dist_b: f64,
    fading_a: FadingSample,
    fading_b: FadingSample,
    coin: f64,
}

/// One realization's links to the observer, with fading frozen, ready to be
/// evaluated under any scheme, path-loss exponent and exclusion radius.
///
/// Freezing the fading is what makes pathwise scheme comparisons meaningful:
/// the same profile evaluated under two schemes reuses identical gains and
/// phases. Fading is drawn per atom in index order (gain, then phase), then
/// one coin per pair in ascending pair order, so the draws consumed do not
/// depend on the scheme evaluated later.
#[derive(Debug, Clone)]
pub struct InterferenceProfile {
    singles: Vec<SingleLink>,
    pairs: Vec<PairLink>,
}

impl InterferenceProfile {
    pub fn build(
        pattern: &PointPattern,
        grouping: &GroupingResult,
        observer: &Point,
        fading: FadingModel,
        power: f64,
        seed: SeedSpec,
    ) -> Result<Self> {
        if grouping.n_atoms() != pattern.len() {
            return Err(Error::invalid("grouping does not match pattern"));
        }
        if !pattern.window().contains(observer) {
            return Err(Error::PointOutsideWindow { x: observer.x, y: observer.y });
        }
        if !(power > 0.0) {
            return Err(Error::invalid(format!("transmit power must be positive, got {power}")));
        }
        let mut rng = seed.rng();
        let exp = Exp::new(1.0 / power)
            .map_err(|e| Error::invalid(format!("invalid fading rate: {e}")))?;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> FadingSample {
            let nu = match fading {
                FadingModel::Rayleigh => exp.sample(rng),
                FadingModel::Unit => 1.0,
            };
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            FadingSample { nu, theta }
        };

        let mut dist = Vec::with_capacity(pattern.len());
        let mut fades = Vec::with_capacity(pattern.len());
        for p in pattern.points() {
            let d = observer.euclidean_distance(p);
            if d == 0.0 {
                return Err(Error::invalid("an atom coincides with the observer"));
            }
            dist.push(d);
            fades.push(draw(&mut rng));
        }

        let mut singles: Vec<SingleLink> = grouping
            .singles()
            .into_iter()
            .map(|i| SingleLink { dist: dist[i], nu: fades[i].nu })
            .collect();
        let mut pairs: Vec<PairLink> = grouping
            .pairs()
            .into_iter()
            .map(|(i, j)| PairLink {
                dist_a: dist[i],
                dist_b: dist[j],
                fading_a: fades[i],
                fading_b: fades[j],
                coin: rng.random::<f64>(),
            })
            .collect();
        singles.sort_unstable_by(|a, b| a.dist.total_cmp(&b.dist));
        pairs.sort_unstable_by(|a, b| a.dist_a.min(a.dist_b).total_cmp(&b.dist_a.min(b.dist_b)));
        Ok(InterferenceProfile { singles, pairs })
    }

    /// Interference for every exclusion radius in the ascending grid
    /// `r_grid`, under one scheme and path-loss exponent.
    ///
    /// A single contributes when its distance exceeds R; a pair contributes
    /// only when both members lie outside R, and is counted once.
    pub fn evaluate(
        &self,
        scheme: &CooperationScheme,
        beta: f64,
        r_grid: &[f64],
    ) -> Result<Vec<InterferenceSample>> {
        scheme.validate()?;
        if !(beta > 2.0) {
            return Err(Error::invalid(format!("path-loss exponent must exceed 2, got {beta}")));
        }
        if r_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("exclusion radii must be ascending"));
        }

        let single_contrib: Vec<f64> =
            self.singles.iter().map(|l| l.nu * l.dist.powf(-beta)).collect();
        let pair_contrib: Vec<f64> = self
            .pairs
            .iter()
            .map(|p| {
                let hx = p.fading_a.nu * p.dist_a.powf(-beta);
                let hy = p.fading_b.nu * p.dist_b.powf(-beta);
                pair_signal(hx, hy, p.fading_a.theta, p.fading_b.theta, scheme, p.coin)
            })
            .collect();
        // suffix sums over links sorted by (minimum) distance
        let suffix = |contrib: &[f64]| -> Vec<f64> {
            let mut s = vec![0.0; contrib.len() + 1];
            for i in (0..contrib.len()).rev() {
                s[i] = s[i + 1] + contrib[i];
            }
            s
        };
        let single_suffix = suffix(&single_contrib);
        let pair_suffix = suffix(&pair_contrib);

        Ok(r_grid
            .iter()
            .map(|&r| {
                let si = self.singles.partition_point(|l| l.dist <= r);
                let pi = self.pairs.partition_point(|p| p.dist_a.min(p.dist_b) <= r);
                InterferenceSample { i1: single_suffix[si], i2: pair_suffix[pi] }
            })
            .collect())
    }
}

/// Path-loss model shared by the samplers and the analytic formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    /// Path-loss exponent, must exceed 2.
    pub beta: f64,
    /// Transmit power; also the mean of the Rayleigh fading gain.
    pub power: f64,
    /// Contributions from atoms closer than this radius are dropped.
    pub exclusion_radius: f64,
}

impl PathLossModel {
    pub fn new(beta: f64, power: f64, exclusion_radius: f64) -> Result<Self> {
        let m = PathLossModel { beta, power, exclusion_radius };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 2.0) {
            return Err(Error::invalid(format!(
                "path-loss exponent must exceed 2, got {}",
                self.beta
            )));
        }
        if !(self.power > 0.0) {
            return Err(Error::invalid(format!(
                "transmit power must be positive, got {}",
                self.power
            )));
        }
        if !(self.exclusion_radius >= 0.0) {
            return Err(Error::invalid("exclusion radius must be >= 0"));
        }
        Ok(())
    }
}

/// Draws one realization of the two interference fields.
pub fn sample_interference(
    pattern: &PointPattern,
    grouping: &GroupingResult,
    observer: &Point,
    scheme: &CooperationScheme,
    pl: &PathLossModel,
    fading: FadingModel,
    seed: SeedSpec,
) -> Result<InterferenceSample> {
    pl.validate()?;
    let profile = InterferenceProfile::build(pattern, grouping, observer, fading, pl.power, seed)?;
    Ok(profile.evaluate(scheme, pl.beta, &[pl.exclusion_radius])?[0])
}

/// One point of an (empirical or series) interference Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePoint {
    pub s: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Empirical Laplace transform of non-negative samples: the mean of
/// exp(-s x) per grid point, with its standard error.
pub fn empirical_laplace(samples: &[f64], s_grid: &[f64]) -> Result<Vec<LaplacePoint>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::invalid("Laplace grid values must be finite and >= 0"));
    }
    let n = samples.len() as f64;
    Ok(s_grid
        .iter()
        .map(|&s| {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for &x in samples {
                let v = (-s * x).exp();
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n;
            let var = ((sumsq - sum * sum / n) / (n - 1.0).max(1.0)).max(0.0);
            LaplacePoint { s, value: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

/// Writes `rep,i1,i2,total` rows.
pub fn write_samples_csv<W: Write>(samples: &[InterferenceSample], mut out: W) -> Result<()> {
    writeln!(out, "rep,i1,i2,total")?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", s.i1, s.i2, s.total())?;
    }
    Ok(())
}
