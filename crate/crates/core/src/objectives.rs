//! Local agent objectives `f_i` / `h_i` with analytic gradients and declared
//! gradient-Lipschitz constants.

use std::fmt;
use std::sync::Arc;

use crate::Vector;

/// A differentiable convex function on `R^dim`.
pub trait LocalObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, p: &Vector) -> f64;
    fn gradient(&self, p: &Vector) -> Vector;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

pub type SharedObjective = Arc<dyn LocalObjective>;

/// `weight · ‖p − center‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub weight: f64,
    pub center: Vector,
}

impl Quadratic {
    pub fn new(weight: f64, center: Vector) -> Self {
        Self { weight, center }
    }

    pub fn scalar(weight: f64, center: f64) -> Self {
        Self::new(weight, Vector::from_element(1, center))
    }
}

impl LocalObjective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, p: &Vector) -> f64 {
        self.weight * (p - &self.center).norm_squared()
    }
    fn gradient(&self, p: &Vector) -> Vector {
        (p - &self.center) * (2.0 * self.weight)
    }
    fn lipschitz(&self) -> f64 {
        2.0 * self.weight.abs()
    }
}

/// Scalar `a·y + b·log(1 + e^{c·y})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.a + self.b * self.c * sigmoid(self.c * y)
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        let s = sigmoid(self.c * y);
        self.b * self.c * self.c * s * (1.0 - s)
    }
}

impl LocalObjective for Logistic {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, p: &Vector) -> f64 {
        let y = p[0];
        self.a * y + self.b * softplus(self.c * y)
    }
    fn gradient(&self, p: &Vector) -> Vector {
        Vector::from_element(1, self.derivative(p[0]))
    }
    /// `max h'' = b c² / 4`, attained at `c·y = 0`.
    fn lipschitz(&self) -> f64 {
        self.b.abs() * self.c * self.c / 4.0
    }
}

/// `coefᵀ p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub coef: Vector,
}

impl LocalObjective for Linear {
    fn dim(&self) -> usize {
        self.coef.len()
    }
    fn value(&self, p: &Vector) -> f64 {
        self.coef.dot(p)
    }
    fn gradient(&self, _p: &Vector) -> Vector {
        self.coef.clone()
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// Objective assembled from closures; used for custom instances and negative
/// controls in tests.
pub struct FnObjective {
    pub dim: usize,
    pub lipschitz: f64,
    pub value: Box<dyn Fn(&Vector) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn(&Vector) -> Vector + Send + Sync>,
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl LocalObjective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, p: &Vector) -> f64 {
        (self.value)(p)
    }
    fn gradient(&self, p: &Vector) -> Vector {
        (self.gradient)(p)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_gradient_at_zero() {
        // d/dy b log(1 + e^{cy}) = b c e^{cy} / (1 + e^{cy}) = bc/2 at y = 0
        let h = Logistic::new(1.0, 2.0, 1.0);
        assert_eq!(h.derivative(0.0), 2.0);
    }

    #[test]
    fn logistic_is_stable_for_large_arguments() {
        let h = Logistic::new(0.0, 1.0, 1.0);
        let big = Vector::from_element(1, 800.0);
        assert!((h.value(&big) - 800.0).abs() < 1e-9);
        assert!(h.value(&(-big)).abs() < 1e-300 + 1e-12);
    }

    #[test]
    fn logistic_curvature_bound() {
        let h = Logistic::new(-2.0, 1.5, 0.8);
        let peak = (-200..=200)
            .map(|i| h.second_derivative(i as f64 * 0.05))
            .fold(0.0, f64::max);
        assert!(peak <= h.lipschitz() + 1e-15);
        assert!((peak - h.lipschitz()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradient() {
        let f = Quadratic::scalar(1.0, 3.0);
        assert_eq!(f.gradient(&Vector::from_element(1, 5.0))[0], 4.0);
        assert_eq!(f.lipschitz(), 2.0);
    }
}
