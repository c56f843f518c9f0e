//! The constrained saddle problem `min_{x∈X} max_{y∈Y} f(x, y)`.
//!
//! Iterates are handled as stacked vectors `z = col(x, y)` living in
//! `Λ = X × Y`; the monotone operator driving all methods is
//! `F(z) = col(∇ₓf(x, y), −∇ᵧf(x, y))`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{check_dim, stack};
use crate::oracle::{finite_diff_check, FiniteDiffReport};
use crate::rng::SeededRng;
use crate::sets::ConvexSet;
use crate::{Error, Result, Vector};

/// Smooth convex-concave function with gradient oracles. Implementations must
/// be pure.
pub trait SaddleFunction: Send + Sync + fmt::Debug {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, x: &Vector, y: &Vector) -> f64;
    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector;
    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector;

    /// `F(z) = col(∇ₓf, −∇ᵧf)` at stacked `z`.
    fn operator(&self, z: &Vector) -> Vector {
        let (x, y) = split_xy(z, self.dim_x());
        let gx = self.grad_x(&x, &y);
        let gy = -self.grad_y(&x, &y);
        stack([&gx, &gy])
    }
}

pub(crate) fn split_xy(z: &Vector, dim_x: usize) -> (Vector, Vector) {
    let s = z.as_slice();
    (
        Vector::from_column_slice(&s[..dim_x]),
        Vector::from_column_slice(&s[dim_x..]),
    )
}

/// Blockwise Lipschitz constants of the gradients.
///
/// `l_xx`, `l_xy`: of `∇ₓf` in `x` and in `y`; `l_yx`, `l_yy`: of `∇ᵧf` in `x`
/// and in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub l_xx: f64,
    pub l_xy: f64,
    pub l_yx: f64,
    pub l_yy: f64,
}

impl Lipschitz {
    /// Bilinear `xᵀBy`: only the cross terms are non-zero, both equal `‖B‖₂`.
    pub fn bilinear(norm: f64) -> Self {
        Self {
            l_xx: 0.0,
            l_xy: norm,
            l_yx: norm,
            l_yy: 0.0,
        }
    }

    /// `κ_m = 2·max(l_xx, l_xy, l_yx, l_yy)`.
    pub fn kappa(&self) -> f64 {
        2.0 * self.l_xx.max(self.l_xy).max(self.l_yx).max(self.l_yy)
    }
}

/// How the Lipschitz constant of `F` is declared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LipschitzBound {
    Blockwise(Lipschitz),
    /// A bound on `F` as a whole (used for the networked problems).
    Operator { kappa: f64 },
}

impl LipschitzBound {
    pub fn kappa(&self) -> f64 {
        match self {
            LipschitzBound::Blockwise(l) => l.kappa(),
            LipschitzBound::Operator { kappa } => *kappa,
        }
    }
}

/// A primal-dual point `z = col(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vector,
    pub y: Vector,
}

impl Iterate {
    pub fn new(x: Vector, y: Vector) -> Self {
        Self { x, y }
    }

    pub fn stacked(&self) -> Vector {
        stack([&self.x, &self.y])
    }

    pub fn from_stacked(z: &Vector, dim_x: usize) -> Self {
        let (x, y) = split_xy(z, dim_x);
        Self { x, y }
    }
}

#[derive(Clone)]
pub struct SaddleProblem {
    name: String,
    func: Arc<dyn SaddleFunction>,
    set_x: ConvexSet,
    set_y: ConvexSet,
    lambda: ConvexSet,
    bound: LipschitzBound,
}

impl fmt::Debug for SaddleProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SaddleProblem")
            .field("name", &self.name)
            .field("dim_x", &self.dim_x())
            .field("dim_y", &self.dim_y())
            .field("kappa", &self.kappa())
            .finish()
    }
}

impl SaddleProblem {
    pub fn new(
        name: impl Into<String>,
        func: Arc<dyn SaddleFunction>,
        set_x: ConvexSet,
        set_y: ConvexSet,
        bound: LipschitzBound,
    ) -> Result<Self> {
        check_dim(func.dim_x(), set_x.dim())?;
        check_dim(func.dim_y(), set_y.dim())?;
        let k = bound.kappa();
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("Lipschitz bound {k}")));
        }
        let lambda = ConvexSet::product(vec![set_x.clone(), set_y.clone()]);
        Ok(Self {
            name: name.into(),
            func,
            set_x,
            set_y,
            lambda,
            bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn function(&self) -> &Arc<dyn SaddleFunction> {
        &self.func
    }
    pub fn dim_x(&self) -> usize {
        self.set_x.dim()
    }
    pub fn dim_y(&self) -> usize {
        self.set_y.dim()
    }
    pub fn dim(&self) -> usize {
        self.dim_x() + self.dim_y()
    }
    pub fn set_x(&self) -> &ConvexSet {
        &self.set_x
    }
    pub fn set_y(&self) -> &ConvexSet {
        &self.set_y
    }
    /// `Λ = X × Y`.
    pub fn feasible_set(&self) -> &ConvexSet {
        &self.lambda
    }
    pub fn bound(&self) -> LipschitzBound {
        self.bound
    }
    /// Declared Lipschitz constant `κ` of `F`.
    pub fn kappa(&self) -> f64 {
        self.bound.kappa()
    }

    pub fn split(&self, z: &Vector) -> (Vector, Vector) {
        split_xy(z, self.dim_x())
    }

    /// `f` at stacked `z`.
    pub fn value(&self, z: &Vector) -> f64 {
        let (x, y) = self.split(z);
        self.func.value(&x, &y)
    }

    /// `F(z) = col(∇ₓf, −∇ᵧf)`.
    pub fn operator(&self, z: &Vector) -> Result<Vector> {
        check_dim(self.dim(), z.len())?;
        Ok(self.func.operator(z))
    }

    /// `F` without the dimension check, for the solver hot loop.
    pub(crate) fn operator_unchecked(&self, z: &Vector) -> Vector {
        self.func.operator(z)
    }

    /// `P_Λ(z)` in place.
    pub fn project_in_place(&self, z: &mut Vector) {
        self.lambda.project_in_place(z.as_mut_slice());
    }

    /// Natural-map residual `‖z − P_Λ(z − F(z))‖`; zero exactly at solutions
    /// of the variational inequality.
    pub fn vi_residual(&self, z: &Vector) -> Result<f64> {
        let f = self.operator(z)?;
        Ok(self.natural_map_residual(z, &f))
    }

    /// Natural-map residual given a precomputed `F(z)`.
    pub fn natural_map_residual(&self, z: &Vector, fz: &Vector) -> f64 {
        let mut p = z - fz;
        self.project_in_place(&mut p);
        (z - p).norm()
    }

    /// Sampled monotonicity check: `(F(z₁) − F(z₂))ᵀ(z₁ − z₂) >= −1e-10` over
    /// `samples` random pairs in `Λ`.
    pub fn check_monotone(&self, samples: usize, seed: u64) -> Result<MonotoneReport> {
        if samples == 0 {
            return Err(Error::InvalidArgument("samples must be >= 1".into()));
        }
        let mut rng = SeededRng::new(seed);
        let mut min_inner = f64::INFINITY;
        let mut worst_pair = 0;
        for i in 0..samples {
            let z1 = self.lambda.sample(&mut rng);
            let z2 = self.lambda.sample(&mut rng);
            let d = self.operator_unchecked(&z1) - self.operator_unchecked(&z2);
            let inner = d.dot(&(&z1 - &z2));
            if inner < min_inner {
                min_inner = inner;
                worst_pair = i;
            }
        }
        Ok(MonotoneReport {
            samples,
            min_inner,
            worst_pair,
            passed: min_inner >= -MONOTONE_TOL,
        })
    }

    /// Largest sampled ratio `‖F(z₁) − F(z₂)‖ / ‖z₁ − z₂‖`. Fails when it
    /// exceeds the declared `κ` by more than a relative 1e-8.
    pub fn estimate_kappa(&self, samples: usize, seed: u64) -> Result<f64> {
        if samples < 2 {
            return Err(Error::InvalidArgument("samples must be >= 2".into()));
        }
        let declared = self.kappa();
        let mut rng = SeededRng::new(seed);
        let mut best: f64 = 0.0;
        for pair in 0..samples {
            let z1 = self.lambda.sample(&mut rng);
            let z2 = self.lambda.sample(&mut rng);
            let dz = (&z1 - &z2).norm();
            if dz == 0.0 {
                continue;
            }
            let ratio = (self.operator_unchecked(&z1) - self.operator_unchecked(&z2)).norm() / dz;
            if ratio > declared * (1.0 + KAPPA_REL_TOL) {
                return Err(Error::LipschitzExceeded {
                    declared,
                    ratio,
                    pair,
                    z1: z1.as_slice().to_vec(),
                    z2: z2.as_slice().to_vec(),
                });
            }
            best = best.max(ratio);
        }
        Ok(best)
    }

    /// Central finite-difference check of both gradient oracles at `samples`
    /// random points of `Λ`.
    pub fn check_gradients(&self, samples: usize, seed: u64, tol: f64) -> GradientReport {
        let mut rng = SeededRng::new(seed);
        let points: Vec<Vector> = (0..samples).map(|_| self.lambda.sample(&mut rng)).collect();
        let mut grad_x = FiniteDiffReport::empty(tol);
        let mut grad_y = FiniteDiffReport::empty(tol);
        for z in &points {
            let (x, y) = self.split(z);
            let rx = finite_diff_check(
                |p: &Vector| self.func.value(p, &y),
                |p: &Vector| self.func.grad_x(p, &y),
                std::slice::from_ref(&x),
                tol,
            );
            let ry = finite_diff_check(
                |p: &Vector| self.func.value(&x, p),
                |p: &Vector| self.func.grad_y(&x, p),
                std::slice::from_ref(&y),
                tol,
            );
            grad_x.merge(rx);
            grad_y.merge(ry);
        }
        GradientReport { grad_x, grad_y }
    }

    /// Sampled midpoint inequalities: convex in `x` for fixed `y`, concave in
    /// `y` for fixed `x`. Returns the largest violation (<= 0 means none seen,
    /// up to a relative round-off slack of 1e-10).
    pub fn check_convex_concave(&self, samples: usize, seed: u64) -> ConvexityReport {
        let mut rng = SeededRng::new(seed);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let a = self.lambda.sample(&mut rng);
            let b = self.lambda.sample(&mut rng);
            let (xa, ya) = self.split(&a);
            let (xb, yb) = self.split(&b);
            let xm = (&xa + &xb) * 0.5;
            let ym = (&ya + &yb) * 0.5;
            let f = |x: &Vector, y: &Vector| self.func.value(x, y);
            let (fa, fb, fm) = (f(&xa, &ya), f(&xb, &ya), f(&xm, &ya));
            let slack = 1e-10 * (1.0 + fa.abs().max(fb.abs()));
            worst = worst.max(fm - 0.5 * (fa + fb) - slack);
            let (ga, gb, gm) = (f(&xa, &ya), f(&xa, &yb), f(&xa, &ym));
            let slack = 1e-10 * (1.0 + ga.abs().max(gb.abs()));
            worst = worst.max(0.5 * (ga + gb) - gm - slack);
        }
        ConvexityReport {
            samples,
            worst_violation: worst,
            passed: worst <= 0.0,
        }
    }
}

/// Absolute tolerance of the sampled monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-10;
/// Relative slack allowed above the declared Lipschitz constant.
pub const KAPPA_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneReport {
    pub samples: usize,
    pub min_inner: f64,
    pub worst_pair: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub grad_x: FiniteDiffReport,
    pub grad_y: FiniteDiffReport,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.grad_x.passed && self.grad_y.passed
    }
    pub fn max_rel_error(&self) -> f64 {
        self.grad_x.max_rel_error.max(self.grad_y.max_rel_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub samples: usize,
    pub worst_violation: f64,
    pub passed: bool,
}

/// Saddle function assembled from closures.
pub struct FnSaddle {
    pub dim_x: usize,
    pub dim_y: usize,
    pub value: Box<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>,
    pub grad_x: Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>,
    pub grad_y: Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>,
}

impl fmt::Debug for FnSaddle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSaddle")
            .field("dim_x", &self.dim_x)
            .field("dim_y", &self.dim_y)
            .finish_non_exhaustive()
    }
}

impl SaddleFunction for FnSaddle {
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_y(&self) -> usize {
        self.dim_y
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        (self.value)(x, y)
    }
    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        (self.grad_x)(x, y)
    }
    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        (self.grad_y)(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{bilinear_problem, quadratic_saddle, scalar_bilinear};
    use crate::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn scalar_fn(
        value: fn(f64, f64) -> f64,
        gx: fn(f64, f64) -> f64,
        gy: fn(f64, f64) -> f64,
    ) -> SaddleProblem {
        let func = FnSaddle {
            dim_x: 1,
            dim_y: 1,
            value: Box::new(move |x, y| value(x[0], y[0])),
            grad_x: Box::new(move |x, y| v(&[gx(x[0], y[0])])),
            grad_y: Box::new(move |x, y| v(&[gy(x[0], y[0])])),
        };
        SaddleProblem::new(
            "fn",
            Arc::new(func),
            ConvexSet::whole_space(1),
            ConvexSet::whole_space(1),
            LipschitzBound::Blockwise(Lipschitz {
                l_xx: 2.0,
                l_xy: 0.0,
                l_yx: 0.0,
                l_yy: 2.0,
            }),
        )
        .unwrap()
    }

    #[test]
    fn operator_of_scalar_bilinear() {
        let p = scalar_bilinear();
        // ∇ₓ(xy) = y = 3, −∇ᵧ(xy) = −x = −2
        assert_eq!(p.operator(&v(&[2.0, 3.0])).unwrap(), v(&[3.0, -2.0]));
        assert_eq!(p.operator(&v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn operator_of_difference_of_squares() {
        let p = scalar_fn(|x, y| x * x - y * y, |x, _| 2.0 * x, |_, y| -2.0 * y);
        assert_eq!(p.operator(&v(&[1.0, 1.0])).unwrap(), v(&[2.0, 2.0]));
    }

    #[test]
    fn operator_dimension_checked() {
        let p = scalar_bilinear();
        assert!(p.operator(&v(&[1.0])).is_err());
    }

    #[test]
    fn bilinear_inner_products_vanish() {
        let b = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.5]);
        let p = bilinear_problem("b", b, 4.0, 4.0).unwrap();
        let r = p.check_monotone(200, 3).unwrap();
        assert!(r.passed);
        assert!(r.min_inner.abs() < 1e-12, "{}", r.min_inner);
    }

    #[test]
    fn quadratic_pair_inner_product() {
        let p = quadratic_saddle(1, None);
        let z1 = v(&[1.0, 1.0]);
        let z2 = v(&[0.0, 0.0]);
        let d = p.operator(&z1).unwrap() - p.operator(&z2).unwrap();
        assert_eq!(d.dot(&(&z1 - &z2)), 2.0);
        assert!(p.check_monotone(1000, 1).unwrap().passed);
    }

    #[test]
    fn nonconvex_negative_control_fails() {
        // f = −x², F(x) = −2x: (F(1) − F(0))(1 − 0) = −2
        let p = scalar_fn(|x, _| -x * x, |x, _| -2.0 * x, |_, _| 0.0);
        let d = p.operator(&v(&[1.0, 0.0])).unwrap() - p.operator(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(d[0], -2.0);
        assert!(!p.check_monotone(100, 0).unwrap().passed);
        assert!(!p.check_convex_concave(100, 0).passed);
    }

    #[test]
    fn kappa_estimates() {
        let p = quadratic_saddle(1, None);
        let est = p.estimate_kappa(100, 0).unwrap();
        assert!((est - 1.0).abs() < 1e-12);
        assert_eq!(p.kappa(), 2.0);

        let zero = scalar_fn(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        assert_eq!(zero.estimate_kappa(10, 0).unwrap(), 0.0);

        let b = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let norm = b.clone().svd(false, false).singular_values.max();
        let p = bilinear_problem("b", b, 5.0, 5.0).unwrap();
        let est = p.estimate_kappa(500, 2).unwrap();
        assert!(est <= norm * (1.0 + 1e-12));
        assert!(est <= p.kappa());
    }

    #[test]
    fn understated_kappa_is_reported() {
        let func = FnSaddle {
            dim_x: 1,
            dim_y: 1,
            value: Box::new(|x, y| 0.5 * x[0] * x[0] - 0.5 * y[0] * y[0]),
            grad_x: Box::new(|x, _| x.clone()),
            grad_y: Box::new(|_, y| -y.clone()),
        };
        let p = SaddleProblem::new(
            "q",
            Arc::new(func),
            ConvexSet::whole_space(1),
            ConvexSet::whole_space(1),
            LipschitzBound::Operator { kappa: 0.5 },
        )
        .unwrap();
        assert!(matches!(
            p.estimate_kappa(10, 0),
            Err(Error::LipschitzExceeded { .. })
        ));
    }

    #[test]
    fn vi_residual_cases() {
        let p = crate::catalog::bilinear_box(0).unwrap().problem;
        let zero = Vector::zeros(20);
        assert_eq!(p.vi_residual(&zero).unwrap(), 0.0);
        let ones = Vector::from_element(20, 1.0);
        assert!(p.vi_residual(&ones).unwrap() > 0.0);
        let q = quadratic_saddle(3, None);
        assert_eq!(q.vi_residual(&Vector::zeros(6)).unwrap(), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = crate::catalog::bilinear_box(5).unwrap().problem;
        let r = p.check_gradients(20, 1, 1e-5);
        assert!(r.passed(), "{r:?}");
    }
}
