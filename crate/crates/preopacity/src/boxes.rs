//! Unions of axis-aligned half-open boxes.
//!
//! State, secret, and input sets of a control system are finite unions of
//! boxes `[lo_1, hi_1) × … × [lo_n, hi_n)`. A degenerate axis (`lo == hi`)
//! denotes the single coordinate value `lo`, so a box union can also model
//! a finite set of points (e.g. an input set `{0.05}`).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// `[lo, hi)` if `lo < hi`; the singleton `{lo}` if `lo == hi`.
pub type Interval = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxUnion {
    pub boxes: Vec<Vec<Interval>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("box union is empty")]
    Empty,
    #[error("boxes have inconsistent dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("interval [{lo}, {hi}) is invalid (need finite lo <= hi)")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("grid spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("grid spacing {spacing} exceeds the span {span} of the set")]
    SpacingExceedsSpan { spacing: f64, span: f64 },
}

impl BoxUnion {
    pub fn new(boxes: Vec<Vec<Interval>>) -> BoxUnion {
        BoxUnion { boxes }
    }

    /// A single box, e.g. `BoxUnion::single(&[[0.0, 12.0]])`.
    pub fn single(axes: &[Interval]) -> BoxUnion {
        BoxUnion {
            boxes: vec![axes.to_vec()],
        }
    }

    /// A finite set of points encoded as fully degenerate boxes.
    pub fn points(points: &[Vec<f64>]) -> BoxUnion {
        BoxUnion {
            boxes: points
                .iter()
                .map(|p| p.iter().map(|&v| [v, v]).collect())
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.boxes.first().map(|b| b.len())
    }

    /// Structural checks: finite bounds, `lo <= hi`, consistent dimension.
    pub fn validate(&self) -> Result<(), BoxError> {
        let mut dim = None;
        for bx in &self.boxes {
            match dim {
                None => dim = Some(bx.len()),
                Some(d) if d != bx.len() => {
                    return Err(BoxError::DimensionMismatch(d, bx.len()))
                }
                _ => {}
            }
            for &[lo, hi] in bx {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(BoxError::InvalidInterval { lo, hi });
                }
            }
        }
        Ok(())
    }

    /// True if every box is fully degenerate, i.e. the union is a finite
    /// point set.
    pub fn is_finite_point_set(&self) -> bool {
        !self.boxes.is_empty()
            && self
                .boxes
                .iter()
                .all(|bx| bx.iter().all(|&[lo, hi]| lo == hi))
    }

    /// The points of a finite point set, sorted and deduplicated.
    pub fn point_list(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = self
            .boxes
            .iter()
            .filter(|bx| bx.iter().all(|&[lo, hi]| lo == hi))
            .map(|bx| bx.iter().map(|&[lo, _]| lo).collect())
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        pts.dedup();
        pts
    }

    /// Membership: inside some box, where each axis admits `lo <= v < hi`,
    /// or `v == lo` on a degenerate axis.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|bx| {
            bx.len() == p.len()
                && bx
                    .iter()
                    .zip(p)
                    .all(|(&[lo, hi], &v)| if lo == hi { v == lo } else { lo <= v && v < hi })
        })
    }

    /// Shortest axis length over all boxes: the tightest width the set has
    /// anywhere. Degenerate axes give span 0.
    pub fn span(&self) -> Result<f64, BoxError> {
        self.validate()?;
        self.boxes
            .iter()
            .flat_map(|bx| bx.iter().map(|&[lo, hi]| hi - lo))
            .fold(None, |acc: Option<f64>, w| {
                Some(acc.map_or(w, |a| a.min(w)))
            })
            .ok_or(BoxError::Empty)
    }

    /// Widens every box by `theta` on every axis (degenerate axes become
    /// width-2θ intervals) and clips the result to `within`. Boxes that end
    /// up empty are dropped.
    pub fn inflate(&self, theta: f64, within: &BoxUnion) -> BoxUnion {
        let mut out = Vec::new();
        for bx in &self.boxes {
            let grown: Vec<Interval> = bx.iter().map(|&[lo, hi]| [lo - theta, hi + theta]).collect();
            for clip in &within.boxes {
                if let Some(ix) = intersect_box(&grown, clip) {
                    out.push(ix);
                }
            }
        }
        BoxUnion { boxes: out }
    }

    /// Set difference `self \ other` as a new box union.
    ///
    /// Half-open boxes cannot represent an open-left interval, so cutting a
    /// degenerate (single-point) axis out of a wider interval leaves the
    /// boundary point in place — a measure-zero approximation that never
    /// affects spans or grids.
    pub fn difference(&self, other: &BoxUnion) -> BoxUnion {
        let mut acc: Vec<Vec<Interval>> = self.boxes.clone();
        for cut in &other.boxes {
            let mut next = Vec::new();
            for bx in acc {
                next.extend(subtract_box(&bx, cut));
            }
            acc = next;
        }
        BoxUnion { boxes: acc }
    }

    /// `self ⊆ other`, up to measure-zero slivers produced by the half-open
    /// box arithmetic.
    pub fn is_subset_of(&self, other: &BoxUnion) -> bool {
        self.difference(other)
            .boxes
            .iter()
            .all(|bx| bx.iter().any(|&[lo, hi]| hi - lo <= 0.0))
    }

    /// The grid `{k·spacing : k ∈ Z^n} ∩ self`, as sorted integer
    /// multi-indices. Errors if `spacing` exceeds the set's span — a coarser
    /// grid could miss the set entirely. On degenerate axes a point is kept
    /// only when it is exactly a grid multiple.
    pub fn grid(&self, spacing: f64) -> Result<Vec<Vec<i64>>, BoxError> {
        self.validate()?;
        if self.boxes.is_empty() {
            return Err(BoxError::Empty);
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(BoxError::NonPositiveSpacing(spacing));
        }
        // guard only against non-degenerate extent: degenerate axes keep
        // exact multiples whatever the spacing
        let effective_span = self
            .boxes
            .iter()
            .flat_map(|bx| bx.iter())
            .filter(|&&[lo, hi]| hi > lo)
            .map(|&[lo, hi]| hi - lo)
            .fold(f64::INFINITY, f64::min);
        if effective_span.is_finite() && spacing > effective_span {
            return Err(BoxError::SpacingExceedsSpan {
                spacing,
                span: effective_span,
            });
        }
        let mut keys: BTreeSet<Vec<i64>> = BTreeSet::new();
        for bx in &self.boxes {
            let mut ranges: Vec<Vec<i64>> = Vec::with_capacity(bx.len());
            let mut feasible = true;
            for &[lo, hi] in bx {
                let ks = axis_grid(lo, hi, spacing);
                if ks.is_empty() {
                    feasible = false;
                    break;
                }
                ranges.push(ks);
            }
            if !feasible {
                continue;
            }
            // cross product of the per-axis index lists
            let mut stack = vec![Vec::new()];
            for ks in &ranges {
                let mut next = Vec::with_capacity(stack.len() * ks.len());
                for prefix in &stack {
                    for &k in ks {
                        let mut p = prefix.clone();
                        p.push(k);
                        next.push(p);
                    }
                }
                stack = next;
            }
            keys.extend(stack);
        }
        Ok(keys.into_iter().collect())
    }

    /// A uniformly random point: uniform over boxes, then uniform per axis.
    /// (Not volume-weighted; good enough for randomized checks.)
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        assert!(!self.boxes.is_empty(), "cannot sample from an empty set");
        let bx = &self.boxes[rng.gen_range(0..self.boxes.len())];
        bx.iter()
            .map(|&[lo, hi]| if lo == hi { lo } else { rng.gen_range(lo..hi) })
            .collect()
    }
}

/// Grid multiples on one axis: `{k : lo <= k·spacing, k·spacing < hi}`, or
/// exactly-representable points on a degenerate axis.
fn axis_grid(lo: f64, hi: f64, spacing: f64) -> Vec<i64> {
    if lo == hi {
        let k = (lo / spacing).round() as i64;
        return if k as f64 * spacing == lo { vec![k] } else { vec![] };
    }
    // conservative bounds, then exact filtering
    let k_lo = (lo / spacing).floor() as i64 - 1;
    let k_hi = (hi / spacing).ceil() as i64 + 1;
    (k_lo..=k_hi)
        .filter(|&k| {
            let v = k as f64 * spacing;
            v >= lo && v < hi
        })
        .collect()
}

fn intersect_box(a: &[Interval], b: &[Interval]) -> Option<Vec<Interval>> {
    if a.len() != b.len() {
        return None;
    }
    let mut out = Vec::with_capacity(a.len());
    for (&[alo, ahi], &[blo, bhi]) in a.iter().zip(b) {
        let lo = alo.max(blo);
        let hi = ahi.min(bhi);
        // a degenerate result survives only if both sides contain the point
        if lo > hi || (lo == hi && !(point_on_axis(alo, ahi, lo) && point_on_axis(blo, bhi, lo))) {
            return None;
        }
        out.push([lo, hi]);
    }
    Some(out)
}

fn point_on_axis(lo: f64, hi: f64, v: f64) -> bool {
    if lo == hi {
        v == lo
    } else {
        lo <= v && v < hi
    }
}

/// `a \ b` as disjoint boxes: peel the left/right slabs off along each axis
/// in turn, shrinking `a` to the overlap as we go.
fn subtract_box(a: &[Interval], b: &[Interval]) -> Vec<Vec<Interval>> {
    if intersect_box(a, b).is_none() {
        return vec![a.to_vec()];
    }
    let mut pieces = Vec::new();
    let mut core = a.to_vec();
    for i in 0..a.len() {
        let [alo, ahi] = core[i];
        let [blo, bhi] = b[i];
        if alo < blo {
            let mut slab = core.clone();
            slab[i] = [alo, blo.min(ahi)];
            pieces.push(slab);
        }
        if bhi < ahi {
            let mut slab = core.clone();
            slab[i] = [bhi.max(alo), ahi];
            pieces.push(slab);
        }
        core[i] = [alo.max(blo), ahi.min(bhi)];
    }
    // the strict `<` guards above keep every slab non-empty, so nothing to prune
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn span_of_single_box() {
        let x = BoxUnion::single(&[[0.0, 12.0]]);
        assert_eq!(x.span().unwrap(), 12.0);
    }

    #[test]
    fn span_takes_the_tightest_axis() {
        let u = BoxUnion::new(vec![vec![[0.0, 2.0]], vec![[5.0, 8.0]]]);
        assert_eq!(u.span().unwrap(), 2.0);
        let b = BoxUnion::single(&[[0.0, 10.0], [3.0, 4.0]]);
        assert_eq!(b.span().unwrap(), 1.0);
    }

    #[test]
    fn degenerate_box_has_zero_span() {
        let p = BoxUnion::points(&[vec![0.05]]);
        assert_eq!(p.span().unwrap(), 0.0);
        assert!(p.is_finite_point_set());
        assert_eq!(p.point_list(), vec![vec![0.05]]);
    }

    #[test]
    fn empty_union_errors_on_span() {
        assert_eq!(BoxUnion::new(vec![]).span(), Err(BoxError::Empty));
    }

    #[test]
    fn grid_of_unit_interval() {
        let x = BoxUnion::single(&[[0.0, 12.0]]);
        let g = x.grid(1.0).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.first().unwrap(), &vec![0]);
        assert_eq!(g.last().unwrap(), &vec![11]);
    }

    #[test]
    fn grid_respects_half_open_bounds() {
        // [8.7, 12): multiples of 1 inside are 9, 10, 11 — 12 is excluded
        let x = BoxUnion::single(&[[8.7, 12.0]]);
        let g = x.grid(1.0).unwrap();
        assert_eq!(g, vec![vec![9], vec![10], vec![11]]);
    }

    #[test]
    fn grid_with_fractional_spacing() {
        let x = BoxUnion::single(&[[0.0, 1.0]]);
        let g = x.grid(0.5).unwrap();
        assert_eq!(g, vec![vec![0], vec![1]]);
    }

    #[test]
    fn grid_spacing_coarser_than_span_is_rejected() {
        let x = BoxUnion::single(&[[0.0, 1.0]]);
        assert!(matches!(
            x.grid(1.5),
            Err(BoxError::SpacingExceedsSpan { .. })
        ));
        assert!(matches!(x.grid(0.0), Err(BoxError::NonPositiveSpacing(_))));
    }

    #[test]
    fn inflate_grows_and_clips() {
        let x = BoxUnion::single(&[[0.0, 12.0]]);
        let s = BoxUnion::single(&[[11.0, 12.0]]);
        let grown = s.inflate(2.3, &x);
        assert_eq!(grown.boxes, vec![vec![[8.7, 12.0]]]);
        // theta = 0 changes nothing
        assert_eq!(s.inflate(0.0, &x).boxes, s.boxes);
    }

    #[test]
    fn inflate_clips_on_both_sides() {
        let x = BoxUnion::single(&[[0.0, 10.0]]);
        let s = BoxUnion::single(&[[1.0, 2.0]]);
        assert_eq!(s.inflate(5.0, &x).boxes, vec![vec![[0.0, 7.0]]]);
    }

    #[test]
    fn difference_basic() {
        let x = BoxUnion::single(&[[0.0, 12.0]]);
        let s = BoxUnion::single(&[[11.0, 12.0]]);
        let rest = x.difference(&s);
        assert_eq!(rest.boxes, vec![vec![[0.0, 11.0]]]);
        assert_eq!(rest.span().unwrap(), 11.0);
    }

    #[test]
    fn difference_splits_interior_cut() {
        let x = BoxUnion::single(&[[0.0, 10.0]]);
        let s = BoxUnion::single(&[[4.0, 6.0]]);
        let mut rest = x.difference(&s).boxes;
        rest.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rest, vec![vec![[0.0, 4.0]], vec![[6.0, 10.0]]]);
    }

    #[test]
    fn difference_in_two_dimensions() {
        let x = BoxUnion::single(&[[0.0, 4.0], [0.0, 4.0]]);
        let s = BoxUnion::single(&[[1.0, 2.0], [1.0, 2.0]]);
        let rest = x.difference(&s);
        // total area must be 16 - 1 = 15, pieces disjoint by construction
        let area: f64 = rest
            .boxes
            .iter()
            .map(|bx| bx.iter().map(|&[lo, hi]| hi - lo).product::<f64>())
            .sum();
        assert!((area - 15.0).abs() < 1e-12);
        assert!(!rest.contains(&[1.5, 1.5]));
        assert!(rest.contains(&[0.5, 1.5]));
    }

    #[test]
    fn subset_check() {
        let x = BoxUnion::single(&[[0.0, 12.0]]);
        let s = BoxUnion::single(&[[11.0, 12.0]]);
        assert!(s.is_subset_of(&x));
        assert!(!x.is_subset_of(&s));
        let t = BoxUnion::single(&[[11.0, 12.5]]);
        assert!(!t.is_subset_of(&x));
    }

    #[test]
    fn contains_handles_degenerate_axes() {
        let u = BoxUnion::points(&[vec![0.05], vec![1.0]]);
        assert!(u.contains(&[0.05]));
        assert!(!u.contains(&[0.06]));
        assert!(u.contains(&[1.0]));
    }

    #[test]
    fn grid_on_point_set_keeps_exact_multiples() {
        let u = BoxUnion::new(vec![vec![[0.5, 0.5]], vec![[1.0, 2.0]]]);
        let g = u.grid(0.5).unwrap();
        assert_eq!(g, vec![vec![1], vec![2], vec![3]]);
        // 0.3 is not a multiple of 0.5: dropped
        let v = BoxUnion::points(&[vec![0.3]]);
        assert_eq!(v.grid(0.5).unwrap(), Vec::<Vec<i64>>::new());
    }

    #[test]
    fn sampling_stays_inside() {
        let u = BoxUnion::new(vec![vec![[0.0, 1.0], [5.0, 5.0]], vec![[3.0, 4.0], [0.0, 1.0]]]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = u.sample(&mut rng);
            assert!(u.contains(&p), "{p:?} escaped");
        }
    }

    prop_compose! {
        fn arb_box_union()(
            n_boxes in 1usize..4,
            dim in 1usize..3,
            seeds in proptest::collection::vec((0.0f64..10.0, 0.1f64..5.0), 12),
        ) -> BoxUnion {
            let boxes = (0..n_boxes)
                .map(|b| {
                    (0..dim)
                        .map(|d| {
                            let (lo, w) = seeds[(b * 3 + d) % seeds.len()];
                            [lo, lo + w]
                        })
                        .collect()
                })
                .collect();
            BoxUnion { boxes }
        }
    }

    proptest! {
        // every grid point lies in the set
        #[test]
        fn grid_points_are_members(u in arb_box_union(), spacing in 0.05f64..0.5) {
            let dim = u.dim().unwrap();
            if let Ok(grid) = u.grid(spacing) {
                for k in grid {
                    let p: Vec<f64> = k.iter().map(|&ki| ki as f64 * spacing).collect();
                    prop_assert_eq!(p.len(), dim);
                    prop_assert!(u.contains(&p));
                }
            }
        }

        // every point of the set has a grid point within `spacing` (∞-norm)
        #[test]
        fn grid_covers_the_set(u in arb_box_union(), spacing in 0.05f64..0.5, seed in 0u64..1000) {
            if let Ok(grid) = u.grid(spacing) {
                prop_assume!(!grid.is_empty());
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let p = u.sample(&mut rng);
                let best = grid
                    .iter()
                    .map(|k| {
                        k.iter()
                            .zip(&p)
                            .map(|(&ki, &pi)| (ki as f64 * spacing - pi).abs())
                            .fold(0.0, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(best <= spacing + 1e-9, "nearest grid point at {best}");
            }
        }

        // difference removes exactly the cut: points in the cut are gone,
        // points outside it are preserved
        #[test]
        fn difference_membership(u in arb_box_union(), cut in arb_box_union(), seed in 0u64..1000) {
            prop_assume!(u.dim() == cut.dim());
            let rest = u.difference(&cut);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let p = u.sample(&mut rng);
                let expected = !cut.contains(&p);
                prop_assert_eq!(rest.contains(&p), expected);
            }
        }
    }
}
