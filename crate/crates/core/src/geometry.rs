//! Planar primitives, the observation window, boundary policies and the
//! geometric constants of the two-disc lens region.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A planar point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Plain Euclidean distance, ignoring any boundary policy.
    #[inline]
    pub fn euclidean_distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    min_x: f64,
    min_y: f64,
    width: f64,
    height: f64,
}

impl Window {
    pub fn new(min_corner: Point, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) || !(height > 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(Error::invalid(format!(
                "window sides must be positive and finite, got {width} x {height}"
            )));
        }
        if !min_corner.x.is_finite() || !min_corner.y.is_finite() {
            return Err(Error::invalid("window corner must be finite"));
        }
        Ok(Window {
            min_x: min_corner.x,
            min_y: min_corner.y,
            width,
            height,
        })
    }

    /// Square window with its lower-left corner at the origin.
    pub fn square(side: f64) -> Result<Self> {
        Window::new(Point::new(0.0, 0.0), side, side)
    }

    pub fn min_corner(&self) -> Point {
        Point::new(self.min_x, self.min_y)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.min_x + self.width / 2.0, self.min_y + self.height / 2.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x
            && p.x <= self.min_x + self.width
            && p.y >= self.min_y
            && p.y <= self.min_y + self.height
    }

    /// The window eroded by `margin` on every side.
    pub fn interior(&self, margin: f64) -> Result<Window> {
        if !(margin >= 0.0) {
            return Err(Error::invalid("margin must be non-negative"));
        }
        let w = self.width - 2.0 * margin;
        let h = self.height - 2.0 * margin;
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::invalid(format!(
                "margin {margin} leaves no interior in a {} x {} window",
                self.width, self.height
            )));
        }
        Window::new(Point::new(self.min_x + margin, self.min_y + margin), w, h)
    }
}

/// How distances and edge effects are treated at the window boundary.
///
/// `GuardMargin` keeps plain Euclidean distances and restricts *reported*
/// statistics to atoms and probe points further than `margin` from the
/// boundary (minus sampling), while classification still uses every atom in
/// the window. `Toroidal` wraps the window into a torus, which removes edge
/// bias entirely at the cost of slightly perturbing the distance law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPolicy {
    GuardMargin { margin: f64 },
    Toroidal,
}

impl BoundaryPolicy {
    /// Default guard margin of five mean nearest-neighbour spacings,
    /// 5 / sqrt(lambda).
    pub fn default_margin(lambda: f64) -> f64 {
        if lambda > 0.0 {
            5.0 / lambda.sqrt()
        } else {
            0.0
        }
    }

    pub fn validate_for(&self, window: &Window) -> Result<()> {
        match self {
            BoundaryPolicy::GuardMargin { margin } => {
                if !margin.is_finite() || *margin < 0.0 {
                    return Err(Error::invalid("guard margin must be finite and >= 0"));
                }
                if *margin >= window.width.min(window.height) / 2.0 {
                    return Err(Error::invalid(format!(
                        "guard margin {margin} must be below half the smaller window side"
                    )));
                }
                Ok(())
            }
            BoundaryPolicy::Toroidal => Ok(()),
        }
    }

    /// Sub-window whose atoms contribute to reported statistics.
    pub fn reporting_window(&self, window: &Window) -> Result<Window> {
        match self {
            BoundaryPolicy::GuardMargin { margin } => window.interior(*margin),
            BoundaryPolicy::Toroidal => Ok(*window),
        }
    }
}

/// Distance between in-window points under the active boundary policy.
///
/// Guard-margin keeps the Euclidean metric; toroidal wraps both axes.
pub fn distance(a: &Point, b: &Point, window: &Window, policy: &BoundaryPolicy) -> Result<f64> {
    for p in [a, b] {
        if !window.contains(p) {
            return Err(Error::PointOutsideWindow { x: p.x, y: p.y });
        }
    }
    Ok(match policy {
        BoundaryPolicy::GuardMargin { .. } => a.euclidean_distance(b),
        BoundaryPolicy::Toroidal => torus_distance(a, b, window),
    })
}

/// Wrapped distance on the torus induced by the window. Callers must ensure
/// both points lie inside the window.
#[inline]
pub(crate) fn torus_distance(a: &Point, b: &Point, window: &Window) -> f64 {
    let mut dx = (a.x - b.x).abs();
    dx = dx.min(window.width - dx);
    let mut dy = (a.y - b.y).abs();
    dy = dy.min(window.height - dy);
    (dx * dx + dy * dy).sqrt()
}

/// The constant gamma = 2/3 - sqrt(3)/(2 pi) from the area of the
/// intersection of two unit discs whose centres lie on each other's
/// circumference. Appears in every pair-formation law of this crate.
pub fn gamma_constant() -> f64 {
    2.0 / 3.0 - 3.0_f64.sqrt() / (2.0 * std::f64::consts::PI)
}

/// Area of the lens region C(x, y) = B(x, r) union B(y, r) for two points at
/// distance r: pi r^2 (2 - gamma). Two atoms are mutual nearest neighbours
/// exactly when this region holds no other atom.
pub fn lens_union_area(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("lens radius must be >= 0, got {r}")));
    }
    Ok(std::f64::consts::PI * r * r * (2.0 - gamma_constant()))
}
