//! Uniform cell grid with ring-expansion nearest-neighbour search.
//!
//! Cells are sized for roughly one atom per cell, so a query typically
//! inspects only the first one or two rings. The search is exact: it stops
//! once no unvisited cell can hold a closer point than the incumbent, and
//! ties in distance resolve to the lowest point index, matching a
//! brute-force scan in ascending index order.

use crate::geometry::{BoundaryPolicy, Point, Window};

pub(crate) struct NeighborGrid<'a> {
    points: &'a [Point],
    min_x: f64,
    min_y: f64,
    width: f64,
    height: f64,
    toroidal: bool,
    nx: usize,
    ny: usize,
    cell_w: f64,
    cell_h: f64,
    cell_start: Vec<u32>,
    cell_items: Vec<u32>,
}

impl<'a> NeighborGrid<'a> {
    pub fn build(points: &'a [Point], window: &Window, policy: &BoundaryPolicy) -> Self {
        let n = points.len();
        let (nx, ny) = grid_dims(n, window);
        let corner = window.min_corner();
        let cell_w = window.width() / nx as f64;
        let cell_h = window.height() / ny as f64;

        let mut cell_start = vec![0u32; nx * ny + 1];
        let cell_of = |p: &Point| -> usize {
            let ix = (((p.x - corner.x) / cell_w) as usize).min(nx - 1);
            let iy = (((p.y - corner.y) / cell_h) as usize).min(ny - 1);
            iy * nx + ix
        };
        for p in points {
            cell_start[cell_of(p) + 1] += 1;
        }
        for c in 1..cell_start.len() {
            cell_start[c] += cell_start[c - 1];
        }
        let mut fill = cell_start.clone();
        let mut cell_items = vec![0u32; n];
        // filling in index order keeps each cell's items ascending
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            cell_items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }

        NeighborGrid {
            points,
            min_x: corner.x,
            min_y: corner.y,
            width: window.width(),
            height: window.height(),
            toroidal: matches!(policy, BoundaryPolicy::Toroidal),
            nx,
            ny,
            cell_w,
            cell_h,
            cell_start,
            cell_items,
        }
    }

    #[inline]
    fn dist2(&self, a: &Point, b: &Point) -> f64 {
        let mut dx = (a.x - b.x).abs();
        let mut dy = (a.y - b.y).abs();
        if self.toroidal {
            dx = dx.min(self.width - dx);
            dy = dy.min(self.height - dy);
        }
        dx * dx + dy * dy
    }

    /// Nearest point to `query`, optionally excluding one index. Returns the
    /// point index and its distance. Ties resolve to the lowest index.
    pub fn nearest(&self, query: &Point, exclude: Option<usize>) -> Option<(usize, f64)> {
        let ix = (((query.x - self.min_x) / self.cell_w) as isize).clamp(0, self.nx as isize - 1);
        let iy = (((query.y - self.min_y) / self.cell_h) as isize).clamp(0, self.ny as isize - 1);
        let min_cell = self.cell_w.min(self.cell_h);

        let mut best: Option<(f64, usize)> = None;
        let mut k = 0usize;
        loop {
            let mut ring_nonempty = false;
            self.for_ring_cells(ix, iy, k, |cell| {
                ring_nonempty = true;
                let start = self.cell_start[cell] as usize;
                let end = self.cell_start[cell + 1] as usize;
                for &raw in &self.cell_items[start..end] {
                    let j = raw as usize;
                    if Some(j) == exclude {
                        continue;
                    }
                    let d2 = self.dist2(query, &self.points[j]);
                    let better = match best {
                        None => true,
                        Some((bd2, bj)) => d2 < bd2 || (d2 == bd2 && j < bj),
                    };
                    if better {
                        best = Some((d2, j));
                    }
                }
            });

            // Any point in a later ring sits at least k * min_cell away.
            if let Some((bd2, _)) = best {
                let bound = k as f64 * min_cell;
                if bd2 <= bound * bound {
                    break;
                }
            }
            if !ring_nonempty && self.ring_out_of_range(ix, iy, k) {
                break;
            }
            k += 1;
        }
        best.map(|(d2, j)| (j, d2.sqrt()))
    }

    /// True when ring `k` and all larger rings cannot contain any cell.
    fn ring_out_of_range(&self, ix: isize, iy: isize, k: usize) -> bool {
        let k = k as isize;
        if self.toroidal {
            k > (self.nx as isize) / 2 && k > (self.ny as isize) / 2
        } else {
            let span_x = ix.max(self.nx as isize - 1 - ix);
            let span_y = iy.max(self.ny as isize - 1 - iy);
            k > span_x && k > span_y
        }
    }

    /// Visits every grid cell at Chebyshev cell-offset exactly `k` from
    /// (ix, iy), each cell exactly once, honouring wrapping under the
    /// toroidal policy.
    fn for_ring_cells(&self, ix: isize, iy: isize, k: usize, mut f: impl FnMut(usize)) {
        let k = k as isize;
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        // canonical torus offset range for m cells: [-m/2, (m-1)/2]
        let (lo_dy, hi_dy) = if self.toroidal {
            ((-k).max(-(ny / 2)), k.min((ny - 1) / 2))
        } else {
            ((-k).max(-iy), k.min(ny - 1 - iy))
        };
        for dy in lo_dy..=hi_dy {
            let row_extreme = dy == -k || dy == k;
            let cy = if self.toroidal { (iy + dy).rem_euclid(ny) } else { iy + dy };
            let row_base = cy as usize * self.nx;
            if row_extreme {
                let (lo_dx, hi_dx) = if self.toroidal {
                    ((-k).max(-(nx / 2)), k.min((nx - 1) / 2))
                } else {
                    ((-k).max(-ix), k.min(nx - 1 - ix))
                };
                for dx in lo_dx..=hi_dx {
                    let cx = if self.toroidal { (ix + dx).rem_euclid(nx) } else { ix + dx };
                    f(row_base + cx as usize);
                }
            } else {
                for dx in [-k, k] {
                    // canonical offsets only; -k and +k are distinct there,
                    // so the mirror cell at 2k == nx is visited once
                    let valid = if self.toroidal {
                        (dx == -k && k <= nx / 2) || (dx == k && k <= (nx - 1) / 2)
                    } else {
                        ix + dx >= 0 && ix + dx < nx
                    };
                    if valid {
                        let cx = if self.toroidal { (ix + dx).rem_euclid(nx) } else { ix + dx };
                        f(row_base + cx as usize);
                    }
                }
            }
        }
    }
}

fn grid_dims(n: usize, window: &Window) -> (usize, usize) {
    if n == 0 {
        return (1, 1);
    }
    let density = n as f64 / window.area();
    let side = density.sqrt();
    let nx = ((window.width() * side).round() as usize).max(1);
    let ny = ((window.height() * side).round() as usize).max(1);
    (nx, ny)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::sample_ppp;
    use crate::seeding::SeedSpec;

    fn brute_nearest(
        points: &[Point],
        query: &Point,
        exclude: Option<usize>,
        window: &Window,
        toroidal: bool,
    ) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize)> = None;
        for (j, p) in points.iter().enumerate() {
            if Some(j) == exclude {
                continue;
            }
            let mut dx = (query.x - p.x).abs();
            let mut dy = (query.y - p.y).abs();
            if toroidal {
                dx = dx.min(window.width() - dx);
                dy = dy.min(window.height() - dy);
            }
            let d2 = dx * dx + dy * dy;
            let better = match best {
                None => true,
                Some((bd2, bj)) => d2 < bd2 || (d2 == bd2 && j < bj),
            };
            if better {
                best = Some((d2, j));
            }
        }
        best.map(|(d2, j)| (j, d2.sqrt()))
    }

    #[test]
    fn grid_matches_brute_force_both_policies() {
        for (stream, toroidal) in [(0u64, false), (1, true)] {
            let policy = if toroidal {
                BoundaryPolicy::Toroidal
            } else {
                BoundaryPolicy::GuardMargin { margin: 0.0 }
            };
            for rep in 0..40 {
                let w = Window::square(20.0).unwrap();
                let pat =
                    sample_ppp(0.4, &w, SeedSpec::new(99, 1000 + stream * 100 + rep)).unwrap();
                if pat.len() < 2 {
                    continue;
                }
                let grid = NeighborGrid::build(pat.points(), &w, &policy);
                for (i, q) in pat.points().iter().enumerate() {
                    let got = grid.nearest(q, Some(i));
                    let want = brute_nearest(pat.points(), q, Some(i), &w, toroidal);
                    assert_eq!(got, want, "rep {rep} atom {i} toroidal={toroidal}");
                }
            }
        }
    }

    #[test]
    fn tiny_grids_wrap_correctly() {
        // few points force a small grid where rings wrap onto themselves
        let w = Window::square(10.0).unwrap();
        let pts = vec![
            Point::new(0.5, 0.5),
            Point::new(9.5, 9.5),
            Point::new(5.0, 5.0),
            Point::new(9.4, 0.6),
        ];
        let grid = NeighborGrid::build(&pts, &w, &BoundaryPolicy::Toroidal);
        for (i, q) in pts.iter().enumerate() {
            let got = grid.nearest(q, Some(i));
            let want = brute_nearest(&pts, q, Some(i), &w, true);
            assert_eq!(got, want, "atom {i}");
        }
        // (0.5,0.5) wraps to (9.4,0.6): dx = 1.1, dy = 0.1
        let (j, d) = grid.nearest(&pts[0], Some(0)).unwrap();
        assert_eq!(j, 3);
        assert!((d - 1.22f64.sqrt()).abs() < 1e-12);
    }
}
