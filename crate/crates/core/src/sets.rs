//! Closed convex sets with exact Euclidean projection.

use serde::{Deserialize, Serialize};

use crate::linalg::check_dim;
use crate::rng::SeededRng;
use crate::{Error, Result, Vector};

/// Default absolute membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Half-width of the sampling box used for unbounded coordinates.
pub const SAMPLING_HALF_WIDTH: f64 = 10.0;

/// A closed convex set.
///
/// Instances are validated on construction (and on deserialization), so a
/// `ConvexSet` value always satisfies its invariants: boxes have
/// `lower[i] <= upper[i]`, balls have a finite non-negative radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSet")]
pub enum ConvexSet {
    WholeSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Product { factors: Vec<ConvexSet> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSet {
    WholeSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Product { factors: Vec<ConvexSet> },
}

impl TryFrom<RawSet> for ConvexSet {
    type Error = Error;

    fn try_from(raw: RawSet) -> Result<Self> {
        match raw {
            RawSet::WholeSpace { dim } => Ok(ConvexSet::whole_space(dim)),
            RawSet::Box { lower, upper } => ConvexSet::boxed(lower, upper),
            RawSet::Ball { center, radius } => ConvexSet::ball(center, radius),
            RawSet::Product { factors } => Ok(ConvexSet::product(factors)),
        }
    }
}

impl ConvexSet {
    pub fn whole_space(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            // written so that NaN bounds are rejected too
            if !(l <= u) {
                return Err(Error::MalformedBox {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    /// The box `[lower, upper]^dim`.
    pub fn uniform_box(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        ConvexSet::boxed(vec![lower; dim], vec![upper; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidBall(format!("radius {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBall("non-finite center".into()));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn product(factors: Vec<ConvexSet>) -> Self {
        ConvexSet::Product { factors }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Product { factors } => factors.iter().map(ConvexSet::dim).sum(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::WholeSpace { dim } => *dim == 0,
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .all(|b| b.is_finite()),
            ConvexSet::Ball { .. } => true,
            ConvexSet::Product { factors } => factors.iter().all(ConvexSet::is_bounded),
        }
    }

    /// Euclidean projection of `p` onto the set.
    pub fn project(&self, p: &Vector) -> Result<Vector> {
        check_dim(self.dim(), p.len())?;
        let mut out = p.clone();
        self.project_in_place(out.as_mut_slice());
        Ok(out)
    }

    /// Projects `p` in place. The caller guarantees `p.len() == self.dim()`.
    pub fn project_in_place(&self, p: &mut [f64]) {
        debug_assert_eq!(p.len(), self.dim());
        match self {
            ConvexSet::WholeSpace { .. } => {}
            ConvexSet::Box { lower, upper } => {
                for ((v, &l), &u) in p.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(l, u);
                }
            }
            ConvexSet::Ball { center, radius } => project_ball(p, center, *radius),
            ConvexSet::Product { factors } => {
                let mut off = 0;
                for f in factors {
                    let d = f.dim();
                    f.project_in_place(&mut p[off..off + d]);
                    off += d;
                }
            }
        }
    }

    /// Largest constraint violation of `p` (0 when `p` is in the set).
    pub fn violation(&self, p: &[f64]) -> f64 {
        match self {
            ConvexSet::WholeSpace { .. } => 0.0,
            ConvexSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
                .fold(0.0, f64::max),
            ConvexSet::Ball { center, radius } => {
                let d = p
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                (d - radius).max(0.0)
            }
            ConvexSet::Product { factors } => {
                let mut off = 0;
                let mut worst: f64 = 0.0;
                for f in factors {
                    let d = f.dim();
                    worst = worst.max(f.violation(&p[off..off + d]));
                    off += d;
                }
                worst
            }
        }
    }

    /// True iff `p` violates no constraint by more than `tol`.
    pub fn contains(&self, p: &Vector, tol: f64) -> Result<bool> {
        check_dim(self.dim(), p.len())?;
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} < 0")));
        }
        Ok(self.violation(p.as_slice()) <= tol)
    }

    /// Coordinate bounds of the region random probes are drawn from: the set's
    /// own bounding box, with unbounded coordinates replaced by a box of
    /// half-width [`SAMPLING_HALF_WIDTH`] around the origin.
    pub fn sampling_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        self.push_bounds(&mut lo, &mut hi);
        (lo, hi)
    }

    fn push_bounds(&self, lo: &mut Vec<f64>, hi: &mut Vec<f64>) {
        let w = SAMPLING_HALF_WIDTH;
        match self {
            ConvexSet::WholeSpace { dim } => {
                lo.extend(std::iter::repeat_n(-w, *dim));
                hi.extend(std::iter::repeat_n(w, *dim));
            }
            ConvexSet::Box { lower, upper } => {
                for (&l, &u) in lower.iter().zip(upper) {
                    let (l2, u2) = match (l.is_finite(), u.is_finite()) {
                        (true, true) => (l, u),
                        (true, false) => (l, w.max(l + 2.0 * w)),
                        (false, true) => ((-w).min(u - 2.0 * w), u),
                        (false, false) => (-w, w),
                    };
                    lo.push(l2);
                    hi.push(u2);
                }
            }
            ConvexSet::Ball { center, radius } => {
                lo.extend(center.iter().map(|c| c - radius));
                hi.extend(center.iter().map(|c| c + radius));
            }
            ConvexSet::Product { factors } => {
                for f in factors {
                    f.push_bounds(lo, hi);
                }
            }
        }
    }

    /// A random point of the set: uniform in [`Self::sampling_bounds`], then
    /// projected.
    pub fn sample(&self, rng: &mut SeededRng) -> Vector {
        let (lo, hi) = self.sampling_bounds();
        let mut p = rng.uniform_in(&lo, &hi);
        self.project_in_place(p.as_mut_slice());
        p
    }

    /// Estimate of `min_{q in set} gᵀ(q − p)`.
    ///
    /// Probes are `p` itself, projections of `p − s·g` for a ladder of step
    /// lengths `s` (these reach the exact minimiser of a linear function over a
    /// box or ball), and `probe_count` random points of the set. A value
    /// `>= -tol` certifies the variational inequality `gᵀ(q − p) >= 0`
    /// approximately.
    pub fn normal_cone_residual(
        &self,
        p: &Vector,
        g: &Vector,
        probe_count: usize,
        seed: u64,
    ) -> Result<f64> {
        check_dim(self.dim(), p.len())?;
        check_dim(p.len(), g.len())?;
        let violation = self.violation(p.as_slice());
        if violation > MEMBERSHIP_TOL {
            return Err(Error::NotInSet { violation });
        }
        let eval = |q: &Vector| g.dot(&(q - p));
        let mut best: f64 = 0.0;
        let scale = 1.0 + p.norm();
        for e in -3..=6 {
            let s = scale * 10f64.powi(e);
            let mut q = p - g * s;
            self.project_in_place(q.as_mut_slice());
            best = best.min(eval(&q));
        }
        let mut rng = SeededRng::new(seed);
        for _ in 0..probe_count {
            let q = self.sample(&mut rng);
            best = best.min(eval(&q));
        }
        Ok(best)
    }
}

fn project_ball(p: &mut [f64], center: &[f64], radius: f64) {
    let dist = |p: &[f64]| {
        p.iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    };
    let d = dist(p);
    if d <= radius {
        return;
    }
    let offset: Vec<f64> = p.iter().zip(center).map(|(a, c)| (a - c) / d).collect();
    let mut r = radius;
    loop {
        for ((v, o), c) in p.iter_mut().zip(&offset).zip(center) {
            *v = c + o * r;
        }
        // keep the result inside so that projecting again is a no-op
        if dist(p) <= radius {
            break;
        }
        r *= 1.0 - f64::EPSILON;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn box_clamps() {
        let s = ConvexSet::uniform_box(1, -5.0, 5.0).unwrap();
        assert_eq!(s.project(&v(&[7.0])).unwrap(), v(&[5.0]));
    }

    #[test]
    fn whole_space_is_identity() {
        let s = ConvexSet::whole_space(3);
        let p = v(&[1.0, -2.0, 0.5]);
        assert_eq!(s.project(&p).unwrap(), p);
    }

    #[test]
    fn unit_disc_projection() {
        let s = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let q = s.project(&v(&[3.0, 4.0])).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.8).abs() < 1e-15);
        // grid oracle: nearest point of the disc to (3, 4)
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let n = 4000;
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (a, b) = (t.cos(), t.sin());
            let d = (a - 3.0).powi(2) + (b - 4.0).powi(2);
            if d < best.0 {
                best = (d, a, b);
            }
        }
        assert!((best.1 - q[0]).abs() < 2e-3 && (best.2 - q[1]).abs() < 2e-3);
    }

    #[test]
    fn malformed_box_rejected() {
        assert!(matches!(
            ConvexSet::boxed(vec![1.0], vec![0.0]),
            Err(Error::MalformedBox { index: 0, .. })
        ));
        assert!(ConvexSet::boxed(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = ConvexSet::uniform_box(2, -1.0, 1.0).unwrap();
        assert!(matches!(
            s.project(&v(&[0.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(s.contains(&v(&[0.0, 0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn contains_with_tolerance() {
        let s = ConvexSet::uniform_box(1, -1.0, 1.0).unwrap();
        assert!(s.contains(&v(&[1.0000000001]), 1e-9).unwrap());
        assert!(!s.contains(&v(&[1.1]), 1e-9).unwrap());
    }

    #[test]
    fn example_start_point_is_outside() {
        let s = ConvexSet::product(vec![
            ConvexSet::uniform_box(10, -5.0, 5.0).unwrap(),
            ConvexSet::uniform_box(10, -2.0, 2.0).unwrap(),
        ]);
        assert_eq!(s.dim(), 20);
        assert!(!s.contains(&Vector::from_element(20, 10.0), 0.0).unwrap());
    }

    #[test]
    fn normal_cone_residual_cases() {
        let s = ConvexSet::uniform_box(1, -1.0, 1.0).unwrap();
        assert_eq!(s.normal_cone_residual(&v(&[0.0]), &v(&[0.0]), 50, 0).unwrap(), 0.0);

        // brute force of min_q g(q - 0) over a fine grid of [0, 2]
        let s = ConvexSet::uniform_box(1, 0.0, 2.0).unwrap();
        let brute = |g: f64| {
            (0..=2000)
                .map(|i| g * (i as f64 * 1e-3))
                .fold(f64::INFINITY, f64::min)
        };
        let r = s.normal_cone_residual(&v(&[0.0]), &v(&[1.0]), 50, 0).unwrap();
        assert_eq!(r, brute(1.0));
        assert_eq!(r, 0.0);
        let r = s.normal_cone_residual(&v(&[0.0]), &v(&[-1.0]), 50, 0).unwrap();
        assert_eq!(r, brute(-1.0));
        assert_eq!(r, -2.0);

        assert!(matches!(
            s.normal_cone_residual(&v(&[3.0]), &v(&[1.0]), 5, 0),
            Err(Error::NotInSet { .. })
        ));
    }

    #[test]
    fn sampling_bounds_for_unbounded_coordinates() {
        let s = ConvexSet::boxed(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 50.0]).unwrap();
        let (lo, hi) = s.sampling_bounds();
        assert_eq!(lo, vec![0.0, -10.0]);
        assert_eq!(hi, vec![20.0, 50.0]);
        assert!(!s.is_bounded());
        assert_eq!(ConvexSet::whole_space(2).sampling_bounds().0, vec![-10.0, -10.0]);
    }

    fn arb_box() -> impl Strategy<Value = ConvexSet> {
        prop::collection::vec((-5.0f64..5.0, 0.0f64..4.0), 1..6).prop_map(|v| {
            let lower: Vec<f64> = v.iter().map(|(l, _)| *l).collect();
            let upper: Vec<f64> = v.iter().map(|(l, w)| l + w).collect();
            ConvexSet::boxed(lower, upper).unwrap()
        })
    }

    fn arb_set() -> impl Strategy<Value = ConvexSet> {
        let leaf = prop_oneof![
            arb_box(),
            (1usize..5).prop_map(ConvexSet::whole_space),
            (prop::collection::vec(-3.0f64..3.0, 1..5), 0.0f64..3.0)
                .prop_map(|(c, r)| ConvexSet::ball(c, r).unwrap()),
        ];
        leaf.prop_recursive(2, 8, 3, |inner| {
            prop::collection::vec(inner, 1..4).prop_map(ConvexSet::product)
        })
    }

    fn point_for(set: &ConvexSet, raw: &[f64]) -> Vector {
        Vector::from_iterator(set.dim(), (0..set.dim()).map(|i| raw[i % raw.len()] * (1.0 + i as f64)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_is_feasible_and_idempotent(
            set in arb_set(),
            raw in prop::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            let p = point_for(&set, &raw);
            let q = set.project(&p).unwrap();
            prop_assert!(set.contains(&q, MEMBERSHIP_TOL).unwrap());
            let qq = set.project(&q).unwrap();
            prop_assert_eq!(q, qq);
        }

        #[test]
        fn projection_is_nonexpansive(
            set in arb_set(),
            a in prop::collection::vec(-50.0f64..50.0, 1..8),
            b in prop::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            let (pa, pb) = (point_for(&set, &a), point_for(&set, &b));
            let (qa, qb) = (set.project(&pa).unwrap(), set.project(&pb).unwrap());
            prop_assert!((qa - qb).norm() <= (pa - pb).norm() + 1e-12);
        }

        #[test]
        fn product_projection_is_blockwise(
            a in arb_box(),
            b in arb_box(),
            raw in prop::collection::vec(-20.0f64..20.0, 1..8),
        ) {
            let prod = ConvexSet::product(vec![a.clone(), b.clone()]);
            let p = point_for(&prod, &raw);
            let q = prod.project(&p).unwrap();
            let pa = Vector::from_column_slice(&p.as_slice()[..a.dim()]);
            let pb = Vector::from_column_slice(&p.as_slice()[a.dim()..]);
            let mut expected = a.project(&pa).unwrap().as_slice().to_vec();
            expected.extend_from_slice(b.project(&pb).unwrap().as_slice());
            prop_assert_eq!(q.as_slice(), &expected[..]);
        }
    }
}
