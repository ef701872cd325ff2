//! Nearest-neighbour graph construction and classification of atoms into
//! singles, mutual-nearest-neighbour pairs, and (optionally) triplets.
//!
//! Two atoms form a pair exactly when each is the other's nearest neighbour,
//! equivalently when the union of the two discs of radius `|x - y|` centred
//! at `x` and `y` contains no further atom. Classification is grid
//! accelerated; distance ties (probability zero for a Poisson pattern, but
//! possible in synthetic fixtures) resolve to the lowest atom index.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::BoundaryPolicy;
use crate::grid::NeighborGrid;
use crate::pattern::PointPattern;

/// Per-atom nearest neighbour index and distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighbourMap {
    nn_index: Vec<usize>,
    nn_distance: Vec<f64>,
}

impl NearestNeighbourMap {
    pub fn len(&self) -> usize {
        self.nn_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nn_index.is_empty()
    }

    /// Index of atom `i`'s nearest neighbour.
    pub fn neighbour_of(&self, i: usize) -> usize {
        self.nn_index[i]
    }

    /// Distance from atom `i` to its nearest neighbour under the policy the
    /// map was built with.
    pub fn distance_of(&self, i: usize) -> f64 {
        self.nn_distance[i]
    }

    pub fn indices(&self) -> &[usize] {
        &self.nn_index
    }

    pub fn distances(&self) -> &[f64] {
        &self.nn_distance
    }
}

/// Class of an atom in a grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Single,
    /// In a two-atom cooperation group with `partner`.
    Paired { partner: usize },
    /// In a three-atom group with `second` and `third` (ascending indices).
    InTriplet { second: usize, third: usize },
}

/// Subprocess selector for restrictions and intensity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubprocessKind {
    Singles,
    Pairs,
}

/// Partition of a pattern's atoms into singles, pairs and triplets.
///
/// The classes are mutually disjoint and jointly exhaust all atom indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingResult {
    membership: Vec<Membership>,
}

impl GroupingResult {
    /// Grouping with every atom single; the only valid grouping for patterns
    /// with fewer than two atoms.
    pub fn all_singles(n_atoms: usize) -> Self {
        GroupingResult { membership: vec![Membership::Single; n_atoms] }
    }

    pub fn n_atoms(&self) -> usize {
        self.membership.len()
    }

    pub fn membership(&self, i: usize) -> Membership {
        self.membership[i]
    }

    pub fn singles(&self) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| matches!(self.membership[i], Membership::Single))
            .collect()
    }

    /// Unordered pairs as `(i, j)` with `i < j`, ascending.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, m) in self.membership.iter().enumerate() {
            if let Membership::Paired { partner } = m {
                if i < *partner {
                    out.push((i, *partner));
                }
            }
        }
        out
    }

    /// Unordered triples with ascending members, ascending.
    pub fn triplets(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (i, m) in self.membership.iter().enumerate() {
            if let Membership::InTriplet { second, third } = m {
                if i < *second {
                    out.push((i, *second, *third));
                }
            }
        }
        out
    }

    pub fn count_singles(&self) -> usize {
        self.membership.iter().filter(|m| matches!(m, Membership::Single)).count()
    }

    pub fn count_paired_atoms(&self) -> usize {
        self.membership.iter().filter(|m| matches!(m, Membership::Paired { .. })).count()
    }

    /// Writes `index,class,partner1,partner2` rows with class one of S, P, T
    /// and -1 for absent partners.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,class,partner1,partner2")?;
        for (i, m) in self.membership.iter().enumerate() {
            match m {
                Membership::Single => writeln!(out, "{i},S,-1,-1")?,
                Membership::Paired { partner } => writeln!(out, "{i},P,{partner},-1")?,
                Membership::InTriplet { second, third } => writeln!(out, "{i},T,{second},{third}")?,
            }
        }
        Ok(())
    }
}

/// Builds the nearest-neighbour map of a pattern under the given boundary
/// policy. Requires at least two atoms.
pub fn build_nn_map(pattern: &PointPattern, policy: &BoundaryPolicy) -> Result<NearestNeighbourMap> {
    policy.validate_for(pattern.window())?;
    let n = pattern.len();
    if n < 2 {
        return Err(Error::TooFewAtoms(n));
    }
    let grid = NeighborGrid::build(pattern.points(), pattern.window(), policy);
    let results: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            grid.nearest(&pattern.points()[i], Some(i))
                .expect("pattern has >= 2 atoms")
        })
        .collect();
    let mut nn_index = Vec::with_capacity(n);
    let mut nn_distance = Vec::with_capacity(n);
    for (j, d) in results {
        nn_index.push(j);
        nn_distance.push(d);
    }
    Ok(NearestNeighbourMap { nn_index, nn_distance })
}

/// Splits atoms into mutual-nearest-neighbour pairs and singles.
pub fn classify_k2(pattern: &PointPattern, nn: &NearestNeighbourMap) -> Result<GroupingResult> {
    if nn.len() != pattern.len() {
        return Err(Error::invalid("nearest-neighbour map does not match pattern"));
    }
    let mut membership = vec![Membership::Single; nn.len()];
    for i in 0..nn.len() {
        let j = nn.neighbour_of(i);
        if j > i && nn.neighbour_of(j) == i {
            membership[i] = Membership::Paired { partner: j };
            membership[j] = Membership::Paired { partner: i };
        }
    }
    Ok(GroupingResult { membership })
}

/// Extends a K=2 grouping to K=3: every pair may absorb the closest single
/// whose nearest neighbour is one of its members.
///
/// Eligibility follows the atom's own nearest neighbour, so a single is only
/// ever offered to the pair containing that neighbour. When several singles
/// compete for one pair, the one with the smallest nearest-neighbour
/// distance wins (ties to the lowest index); losers stay single and are not
/// re-offered elsewhere. Single pass: not every pair becomes a triplet.
pub fn classify_k3(
    pattern: &PointPattern,
    k2: &GroupingResult,
    nn: &NearestNeighbourMap,
) -> Result<GroupingResult> {
    if k2.n_atoms() != pattern.len() || nn.len() != pattern.len() {
        return Err(Error::invalid("grouping or nearest-neighbour map does not match pattern"));
    }
    let n = pattern.len();
    // best candidate per pair, keyed by the pair's lower index
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    for s in 0..n {
        if !matches!(k2.membership(s), Membership::Single) {
            continue;
        }
        let target = nn.neighbour_of(s);
        let Membership::Paired { partner } = k2.membership(target) else {
            continue;
        };
        let key = target.min(partner);
        let cand = (nn.distance_of(s), s);
        let better = match best[key] {
            None => true,
            Some(b) => cand < b,
        };
        if better {
            best[key] = Some(cand);
        }
    }

    let mut membership = k2.membership.clone();
    for (key, cand) in best.iter().enumerate() {
        if let Some((_, s)) = cand {
            let Membership::Paired { partner } = k2.membership(key) else {
                unreachable!("candidate key is a pair's lower index");
            };
            let mut trio = [key, partner, *s];
            trio.sort_unstable();
            for (slot, &m) in trio.iter().enumerate() {
                let others = match slot {
                    0 => (trio[1], trio[2]),
                    1 => (trio[0], trio[2]),
                    _ => (trio[0], trio[1]),
                };
                membership[m] = Membership::InTriplet { second: others.0, third: others.1 };
            }
        }
    }
    Ok(GroupingResult { membership })
}

/// Restriction of a pattern to one class, preserving original indices in the
/// result's metadata. The restricted pattern's density is the parent density
/// scaled by the class share.
pub fn subpattern(
    pattern: &PointPattern,
    grouping: &GroupingResult,
    which: SubprocessKind,
) -> Result<PointPattern> {
    if grouping.n_atoms() != pattern.len() {
        return Err(Error::invalid("grouping does not match pattern"));
    }
    let keep: Vec<usize> = (0..pattern.len())
        .filter(|&i| match which {
            SubprocessKind::Singles => matches!(grouping.membership(i), Membership::Single),
            SubprocessKind::Pairs => matches!(grouping.membership(i), Membership::Paired { .. }),
        })
        .collect();
    let points = keep.iter().map(|&i| pattern.points()[i]).collect();
    let share = if pattern.is_empty() { 0.0 } else { keep.len() as f64 / pattern.len() as f64 };
    Ok(PointPattern::derived(
        points,
        *pattern.window(),
        pattern.density() * share,
        pattern.seed_provenance(),
        keep,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::pattern::sample_ppp;
    use crate::seeding::SeedSpec;

    const EUCLID: BoundaryPolicy = BoundaryPolicy::GuardMargin { margin: 0.0 };

    fn collinear(xs: &[f64]) -> PointPattern {
        let w = Window::new(Point::new(-1.0, -1.0), 12.0, 2.0).unwrap();
        let pts = xs.iter().map(|&x| Point::new(x, 0.0)).collect();
        PointPattern::new(pts, w, 1.0, None).unwrap()
    }

    /// Reference O(n^2) nearest-neighbour scan, identical tie rule.
    fn brute_nn(pattern: &PointPattern, policy: &BoundaryPolicy) -> (Vec<usize>, Vec<f64>) {
        let pts = pattern.points();
        let w = pattern.window();
        let toroidal = matches!(policy, BoundaryPolicy::Toroidal);
        let mut idx = Vec::new();
        let mut dist = Vec::new();
        for i in 0..pts.len() {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..pts.len() {
                if i == j {
                    continue;
                }
                let mut dx = (pts[i].x - pts[j].x).abs();
                let mut dy = (pts[i].y - pts[j].y).abs();
                if toroidal {
                    dx = dx.min(w.width() - dx);
                    dy = dy.min(w.height() - dy);
                }
                let d2 = dx * dx + dy * dy;
                if d2 < best.0 || (d2 == best.0 && j < best.1) {
                    best = (d2, j);
                }
            }
            idx.push(best.1);
            dist.push(best.0.sqrt());
        }
        (idx, dist)
    }

    #[test]
    fn collinear_fixture_nn_map() {
        let pat = collinear(&[0.0, 1.0, 3.0]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        assert_eq!(nn.indices(), &[1, 0, 1]);
        assert_eq!(nn.distances(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn two_atoms_are_mutual() {
        let pat = collinear(&[0.0, 2.0]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        assert_eq!(nn.indices(), &[1, 0]);
        let g = classify_k2(&pat, &nn).unwrap();
        assert_eq!(g.pairs(), vec![(0, 1)]);
        assert!(g.singles().is_empty());
        // restriction to singles of a two-atom pattern is empty
        assert!(subpattern(&pat, &g, SubprocessKind::Singles).unwrap().is_empty());
    }

    #[test]
    fn fewer_than_two_atoms_is_an_error() {
        let pat = collinear(&[0.0]);
        assert!(matches!(build_nn_map(&pat, &EUCLID), Err(Error::TooFewAtoms(1))));
    }

    #[test]
    fn collinear_three_classification() {
        let pat = collinear(&[0.0, 1.0, 3.0]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        assert_eq!(g.pairs(), vec![(0, 1)]);
        assert_eq!(g.singles(), vec![2]);
        assert!(g.triplets().is_empty());
        // the single at 3 has the pair member at 1 as nearest neighbour
        let k3 = classify_k3(&pat, &g, &nn).unwrap();
        assert_eq!(k3.triplets(), vec![(0, 1, 2)]);
        assert!(k3.singles().is_empty());
        // restriction to pairs keeps original indices
        let sub = subpattern(&pat, &g, SubprocessKind::Pairs).unwrap();
        assert_eq!(sub.source_indices().unwrap(), &[0, 1]);
        assert_eq!(sub.len(), 2);
    }

    #[test]
    fn collinear_four_two_pairs() {
        let pat = collinear(&[0.0, 1.0, 2.5, 3.5]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        assert_eq!(g.pairs(), vec![(0, 1), (2, 3)]);
        assert!(g.singles().is_empty());
        // no singles: K=3 result equals K=2 result
        let k3 = classify_k3(&pat, &g, &nn).unwrap();
        assert_eq!(k3, g);
    }

    #[test]
    fn collinear_formerly_singles_can_pair_up() {
        // 2.6 and 4.0 are closer to each other (1.4) than to the pair (1.6),
        // so they form a second pair rather than competing for the first.
        let pat = collinear(&[0.0, 1.0, 2.6, 4.0]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        assert_eq!(g.pairs(), vec![(0, 1), (2, 3)]);
        assert!(g.singles().is_empty());
    }

    #[test]
    fn closest_of_two_competing_singles_wins() {
        // pair (0,0)-(1,0); two singles whose nearest neighbour is the pair
        // member at (1,0): (2.2, 0) at distance 1.2 and (1, 1.4) at 1.4.
        let w = Window::new(Point::new(-1.0, -1.0), 6.0, 6.0).unwrap();
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.2, 0.0),
            Point::new(1.0, 1.4),
        ];
        let pat = PointPattern::new(pts, w, 1.0, None).unwrap();
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        assert_eq!(nn.indices(), &[1, 0, 1, 1]);
        let g = classify_k2(&pat, &nn).unwrap();
        assert_eq!(g.pairs(), vec![(0, 1)]);
        assert_eq!(g.singles(), vec![2, 3]);
        let k3 = classify_k3(&pat, &g, &nn).unwrap();
        assert_eq!(k3.triplets(), vec![(0, 1, 2)]);
        assert_eq!(k3.singles(), vec![3]);
    }

    #[test]
    fn grid_matches_brute_force_on_random_patterns() {
        for rep in 0..120u64 {
            let policy = if rep % 2 == 0 { EUCLID } else { BoundaryPolicy::Toroidal };
            let w = Window::square(16.0).unwrap();
            let pat = sample_ppp(0.8, &w, SeedSpec::new(7, rep)).unwrap();
            if pat.len() < 2 {
                continue;
            }
            let nn = build_nn_map(&pat, &policy).unwrap();
            let (bidx, bdist) = brute_nn(&pat, &policy);
            assert_eq!(nn.indices(), &bidx[..], "rep {rep}");
            assert_eq!(nn.distances(), &bdist[..], "rep {rep}");
        }
    }

    #[test]
    fn partition_and_symmetry_invariants() {
        let w = Window::square(30.0).unwrap();
        let pat = sample_ppp(1.0, &w, SeedSpec::new(11, 0)).unwrap();
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();

        let mut seen = vec![0u8; pat.len()];
        for i in g.singles() {
            seen[i] += 1;
        }
        for (i, j) in g.pairs() {
            seen[i] += 1;
            seen[j] += 1;
            // mutual relation
            assert_eq!(nn.neighbour_of(i), j);
            assert_eq!(nn.neighbour_of(j), i);
        }
        assert!(seen.iter().all(|&c| c == 1), "classes must partition the atoms");
        assert_eq!(g.count_singles() + g.count_paired_atoms(), pat.len());
    }

    #[test]
    fn lens_emptiness_equivalence() {
        // For tie-free (random) patterns: a pair's lens region holds no third
        // atom, and a single's nearest neighbour has a strictly closer atom.
        let w = Window::square(25.0).unwrap();
        let pat = sample_ppp(0.7, &w, SeedSpec::new(13, 5)).unwrap();
        let pts = pat.points();
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        for (i, j) in g.pairs() {
            let r = pts[i].euclidean_distance(&pts[j]);
            for (k, p) in pts.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let inside =
                    p.euclidean_distance(&pts[i]) < r || p.euclidean_distance(&pts[j]) < r;
                assert!(!inside, "atom {k} lies in the lens of pair ({i}, {j})");
            }
        }
        for s in g.singles() {
            let t = nn.neighbour_of(s);
            let r = nn.distance_of(s);
            let blocked = pts.iter().enumerate().any(|(k, p)| {
                k != s && k != t && p.euclidean_distance(&pts[t]) < r
            });
            assert!(blocked, "single {s} should have a blocked nearest neighbour");
        }
    }

    #[test]
    fn grouping_is_scale_invariant() {
        // powers of two scale coordinates exactly
        let w = Window::square(20.0).unwrap();
        let pat = sample_ppp(0.5, &w, SeedSpec::new(17, 2)).unwrap();
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        for scale in [0.25, 4.0] {
            let scaled_pts: Vec<Point> =
                pat.points().iter().map(|p| Point::new(p.x * scale, p.y * scale)).collect();
            let sw = Window::square(20.0 * scale).unwrap();
            let spat = PointPattern::new(scaled_pts, sw, 0.5 / (scale * scale), None).unwrap();
            let snn = build_nn_map(&spat, &EUCLID).unwrap();
            let sg = classify_k2(&spat, &snn).unwrap();
            assert_eq!(sg.pairs(), g.pairs(), "scale {scale}");
            assert_eq!(sg.singles(), g.singles(), "scale {scale}");
        }
    }

    #[test]
    fn grouping_csv_format() {
        let pat = collinear(&[0.0, 1.0, 3.0]);
        let nn = build_nn_map(&pat, &EUCLID).unwrap();
        let g = classify_k2(&pat, &nn).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,class,partner1,partner2\n0,P,1,-1\n1,P,0,-1\n2,S,-1,-1\n");
        let k3 = classify_k3(&pat, &g, &nn).unwrap();
        let mut buf = Vec::new();
        k3.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,class,partner1,partner2\n0,T,1,2\n1,T,0,2\n2,T,0,1\n");
    }
}
