//! Finite realizations of planar point processes and their samplers.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::seeding::SeedSpec;

/// A finite point pattern inside a rectangular window.
///
/// Atom indices are stable identifiers for the life of the pattern. Patterns
/// derived from another pattern (thinning, class restriction) remember the
/// parent indices in `source_indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
    density: f64,
    seed: Option<SeedSpec>,
    source_indices: Option<Vec<usize>>,
}

/// Sidecar metadata stored next to a pattern CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMetadata {
    pub window: Window,
    pub lambda: f64,
    pub seed: Option<SeedSpec>,
}

impl PointPattern {
    /// Builds a pattern after validating every invariant: all points inside
    /// the window, finite coordinates, no duplicated coordinates (duplicates
    /// break nearest-neighbour uniqueness and are rejected at ingestion).
    pub fn new(
        points: Vec<Point>,
        window: Window,
        density: f64,
        seed: Option<SeedSpec>,
    ) -> Result<Self> {
        if !(density >= 0.0) || !density.is_finite() {
            return Err(Error::invalid(format!("density must be finite and >= 0, got {density}")));
        }
        for p in &points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            if !window.contains(p) {
                return Err(Error::PointOutsideWindow { x: p.x, y: p.y });
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            (points[a].x, points[a].y)
                .partial_cmp(&(points[b].x, points[b].y))
                .expect("finite coordinates")
        });
        for pair in order.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if points[a] == points[b] {
                return Err(Error::DuplicateAtoms(a.min(b), a.max(b)));
            }
        }
        Ok(PointPattern { points, window, density, seed, source_indices: None })
    }

    /// Internal constructor for patterns derived from an already validated
    /// one; skips the `O(n log n)` duplicate scan.
    pub(crate) fn derived(
        points: Vec<Point>,
        window: Window,
        density: f64,
        seed: Option<SeedSpec>,
        source_indices: Vec<usize>,
    ) -> Self {
        PointPattern { points, window, density, seed, source_indices: Some(source_indices) }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window(&self) -> &Window {
        self.window_ref()
    }

    #[inline]
    fn window_ref(&self) -> &Window {
        &self.window
    }

    /// Generative intensity in atoms per square meter.
    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed_provenance(&self) -> Option<SeedSpec> {
        self.seed
    }

    /// Indices of these atoms in the pattern this one was derived from, if
    /// any.
    pub fn source_indices(&self) -> Option<&[usize]> {
        self.source_indices.as_deref()
    }

    pub fn metadata(&self) -> PatternMetadata {
        PatternMetadata { window: self.window, lambda: self.density, seed: self.seed }
    }

    /// Writes `index,x,y` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,x,y")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(out, "{i},{},{}", p.x, p.y)?;
        }
        Ok(())
    }

    /// Reads a pattern back from `index,x,y` rows plus its sidecar metadata.
    /// Lines starting with `#` are ignored.
    pub fn read_csv<R: BufRead>(input: R, meta: &PatternMetadata) -> Result<Self> {
        let mut points = Vec::new();
        let mut saw_header = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "index,x,y" {
                    return Err(Error::Parse(format!("expected header 'index,x,y', got '{line}'")));
                }
                saw_header = true;
                continue;
            }
            let mut cols = line.split(',');
            let idx: usize = cols
                .next()
                .ok_or_else(|| Error::Parse("missing index column".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad index: {e}")))?;
            if idx != points.len() {
                return Err(Error::Parse(format!("non-contiguous index {idx}")));
            }
            let x: f64 = cols
                .next()
                .ok_or_else(|| Error::Parse("missing x column".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad x: {e}")))?;
            let y: f64 = cols
                .next()
                .ok_or_else(|| Error::Parse("missing y column".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad y: {e}")))?;
            points.push(Point::new(x, y));
        }
        if !saw_header {
            return Err(Error::Parse("empty pattern file".into()));
        }
        PointPattern::new(points, meta.window, meta.lambda, meta.seed)
    }
}

#[inline]
pub(crate) fn uniform_point_in<R: Rng>(window: &Window, rng: &mut R) -> Point {
    let corner = window.min_corner();
    Point::new(
        corner.x + rng.random::<f64>() * window.width(),
        corner.y + rng.random::<f64>() * window.height(),
    )
}

/// Samples a homogeneous Poisson point process on `window`.
///
/// The atom count is Poisson with mean `lambda * area`; given the count,
/// atoms are i.i.d. uniform on the window. The count is drawn first, then the
/// coordinates in index order, so the same [`SeedSpec`] reproduces the
/// pattern bit for bit. Counts come from `rand_distr`'s Poisson sampler
/// (inversion for small means, transformed rejection for large ones).
pub fn sample_ppp(lambda: f64, window: &Window, seed: SeedSpec) -> Result<PointPattern> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mean = lambda * window.area();
    let mut rng = seed.rng();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::invalid(format!("invalid Poisson mean {mean}: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let points = (0..count).map(|_| uniform_point_in(window, &mut rng)).collect();
    PointPattern::new(points, *window, lambda, Some(seed))
}

/// Keeps each atom independently with probability `keep_prob`.
///
/// The returned pattern's density is `keep_prob` times the input density;
/// retained atoms remember their original indices.
pub fn independent_thin(
    pattern: &PointPattern,
    keep_prob: f64,
    seed: SeedSpec,
) -> Result<PointPattern> {
    if !(0.0..=1.0).contains(&keep_prob) || !keep_prob.is_finite() {
        return Err(Error::invalid(format!("keep probability must lie in [0, 1], got {keep_prob}")));
    }
    let mut rng = seed.rng();
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (i, p) in pattern.points().iter().enumerate() {
        if rng.random::<f64>() < keep_prob {
            points.push(*p);
            kept.push(i);
        }
    }
    Ok(PointPattern::derived(
        points,
        *pattern.window(),
        keep_prob * pattern.density(),
        Some(seed),
        kept,
    ))
}
