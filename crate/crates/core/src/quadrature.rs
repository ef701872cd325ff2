//! Adaptive Simpson quadrature with a subdivision budget.

use crate::error::{Error, Result};

/// Tolerances and budget for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64, max_subdivisions: usize) -> Self {
        Tolerance { rel, abs, max_subdivisions }
    }

    /// Splits the budget and tolerances for an inner integral of a nested
    /// quadrature: one order tighter relatively, same subdivision budget.
    pub fn inner(&self) -> Tolerance {
        Tolerance { rel: self.rel * 0.1, abs: self.abs * 0.1, max_subdivisions: self.max_subdivisions }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-9, abs: 1e-12, max_subdivisions: 200_000 }
    }
}

#[inline]
fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Panels split until the classic `|S_half - S| / 15` estimate meets the
/// panel's tolerance share; the budget caps the total number of splits and
/// exceeding it is a hard error rather than a silent loss of accuracy.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }

    // coarse composite pass to anchor the relative tolerance
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        coarse += simpson(f(x0), f(x0 + 0.5 * h), f(x0 + h), h);
    }
    let global_tol = tol.abs.max(tol.rel * coarse.abs());

    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    let mut budget = tol.max_subdivisions;
    split(&f, a, b, fa, fm, fb, whole, global_tol, &mut budget, 0)
}

#[allow(clippy::too_many_arguments)]
fn split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    budget: &mut usize,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    // depth 52: panel width has reached rounding scale, stop refining
    if delta.abs() / 15.0 <= tol || depth >= 52 {
        return Ok(left + right + delta / 15.0);
    }
    if *budget == 0 {
        return Err(Error::Quadrature(format!(
            "subdivision budget exhausted near [{a}, {b}], error estimate {:.3e}",
            delta.abs() / 15.0
        )));
    }
    *budget -= 1;
    Ok(split(f, a, m, fa, flm, fm, left, tol * 0.5, budget, depth + 1)?
        + split(f, m, b, fm, frm, fb, right, tol * 0.5, budget, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> Tolerance {
        Tolerance::new(1e-10, 1e-14, 100_000)
    }

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x, 0.0, 1.0, &tol()).unwrap();
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn power_law_matches_primitive() {
        for beta in [2.5, 3.0, 4.0] {
            let v = adaptive_simpson(|r| r.powf(1.0 - beta), 1.0, 50.0, &tol()).unwrap();
            let exact = (1.0 - 50.0_f64.powf(2.0 - beta)) / (beta - 2.0);
            assert_relative_eq!(v, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn oscillatory_integrand() {
        let v = adaptive_simpson(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, &tol()).unwrap();
        let exact = (1.0 - (10.0 * std::f64::consts::PI).cos()) / 10.0;
        assert_relative_eq!(v, exact, epsilon = 1e-10);
    }

    #[test]
    fn kinked_integrand() {
        let v = adaptive_simpson(|x| (x - 1.0 / 3.0).abs(), 0.0, 1.0, &tol()).unwrap();
        let exact = (1.0 / 9.0 + 4.0 / 9.0) / 2.0;
        assert_relative_eq!(v, exact, max_relative = 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let tiny = Tolerance::new(1e-14, 1e-16, 4);
        let r = adaptive_simpson(|x| (50.0 * x).sin().abs(), 0.0, 3.0, &tiny);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
