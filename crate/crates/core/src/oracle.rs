//! Reference solvers and brute-force verifiers.
//!
//! Nothing here calls into [`crate::solvers`]; the references are computed by
//! one-dimensional bisection, golden-section search, plain projected gradient
//! and grid search, so they can be used to judge the iterative methods.

use serde::{Deserialize, Serialize};

use crate::allocation::AllocationProblem;
use crate::consensus::ConsensusProblem;
use crate::sets::ConvexSet;
use crate::{Error, Result, Vector};

/// Relative step of the central differences: `h = 1e-6·(1 + ‖p‖)`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    pub points: usize,
    /// `max ‖fd − g‖_∞ / max(1, ‖g‖_∞)` over the points.
    pub max_rel_error: f64,
    pub worst_point: Option<Vec<f64>>,
    pub tol: f64,
    pub passed: bool,
}

impl FiniteDiffReport {
    pub fn empty(tol: f64) -> Self {
        Self {
            points: 0,
            max_rel_error: 0.0,
            worst_point: None,
            tol,
            passed: true,
        }
    }

    pub fn merge(&mut self, other: FiniteDiffReport) {
        self.points += other.points;
        if other.max_rel_error > self.max_rel_error || other.max_rel_error.is_nan() {
            self.max_rel_error = other.max_rel_error;
            self.worst_point = other.worst_point;
        }
        self.passed = self.passed && other.passed && self.max_rel_error <= self.tol;
    }
}

/// Compares `grad` against central differences of `f` at each point.
pub fn finite_diff_check<F, G>(f: F, grad: G, points: &[Vector], tol: f64) -> FiniteDiffReport
where
    F: Fn(&Vector) -> f64,
    G: Fn(&Vector) -> Vector,
{
    let mut rep = FiniteDiffReport::empty(tol);
    for p in points {
        let h = FD_STEP * (1.0 + p.norm());
        let g = grad(p);
        let mut fd = Vector::zeros(p.len());
        let mut q = p.clone();
        for k in 0..p.len() {
            q[k] = p[k] + h;
            let up = f(&q);
            q[k] = p[k] - h;
            let down = f(&q);
            q[k] = p[k];
            fd[k] = (up - down) / (2.0 * h);
        }
        let err = if g.len() == fd.len() {
            (&fd - &g).amax() / g.amax().max(1.0)
        } else {
            f64::INFINITY
        };
        rep.points += 1;
        if !(err <= rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst_point = Some(p.as_slice().to_vec());
        }
    }
    rep.passed = rep.max_rel_error <= tol;
    rep
}

/// Certified optimum of an allocation problem with scalar coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KKTReference {
    pub y_star: Vec<f64>,
    /// Multiplier `μ` of the coupling constraint.
    pub mu: Vec<f64>,
    pub objective: f64,
    pub residuals: KKTResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KKTResiduals {
    /// `|Σ W_i y_i − Σ d_i|`.
    pub feasibility: f64,
    /// Largest `φ_i(y_i*) − min_grid φ_i` with `φ_i(y) = h_i(y) + μW_i y`.
    pub stationarity_gap: f64,
    /// Largest projected-derivative residual `|y − P(y − φ_i'(y))|`.
    pub projected_gradient: f64,
    pub bisection_steps: usize,
    pub bracket: [f64; 2],
    /// Agents whose response jumps at `μ` and were interpolated.
    pub interpolated_agents: usize,
}

/// Tolerance on the coupling residual targeted by the outer bisection.
pub const KKT_FEAS_TOL: f64 = 1e-10;
/// Tolerance at which a reference is accepted.
pub const KKT_CERT_TOL: f64 = 1e-8;
const MAX_WIDENINGS: usize = 5;

struct ScalarAgent<'a> {
    h: &'a dyn crate::objectives::LocalObjective,
    lo: f64,
    hi: f64,
    w: f64,
    d: f64,
}

impl ScalarAgent<'_> {
    fn dh(&self, y: f64) -> f64 {
        self.h.gradient(&Vector::from_element(1, y))[0]
    }

    fn h(&self, y: f64) -> f64 {
        self.h.value(&Vector::from_element(1, y))
    }

    /// `argmin_{y∈[lo,hi]} h(y) + μ w y` by bisection on the derivative.
    fn response(&self, mu: f64) -> f64 {
        let phi = |y: f64| self.dh(y) + mu * self.w;
        if phi(self.lo) >= 0.0 {
            return self.lo;
        }
        if phi(self.hi) <= 0.0 {
            return self.hi;
        }
        let (mut a, mut b) = (self.lo, self.hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if phi(mid) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    }
}

fn box_1d(set: &ConvexSet) -> Result<(f64, f64)> {
    match set {
        ConvexSet::Box { lower, upper } if lower.len() == 1 => {
            if lower[0].is_finite() && upper[0].is_finite() {
                Ok((lower[0], upper[0]))
            } else {
                Err(Error::Unsupported("KKT oracle needs bounded boxes".into()))
            }
        }
        _ => Err(Error::Unsupported("KKT oracle needs one-dimensional boxes".into())),
    }
}

fn scalar_agents(problem: &AllocationProblem) -> Result<Vec<ScalarAgent<'_>>> {
    if problem.m() != 1 {
        return Err(Error::Unsupported(format!(
            "KKT oracle handles scalar coupling only, got m = {}",
            problem.m()
        )));
    }
    problem
        .agents()
        .iter()
        .map(|s| {
            if s.q() != 1 {
                return Err(Error::Unsupported("KKT oracle needs q_i = 1".into()));
            }
            let (lo, hi) = box_1d(&s.set)?;
            Ok(ScalarAgent {
                h: s.objective.as_ref(),
                lo,
                hi,
                w: s.w[(0, 0)],
                d: s.d[0],
            })
        })
        .collect()
}

fn coupling_gap(agents: &[ScalarAgent<'_>], ys: &[f64]) -> f64 {
    agents.iter().zip(ys).map(|(a, &y)| a.w * y - a.d).sum()
}

/// Exact optimum of a scalar-coupled allocation problem (`m = 1`, `q_i = 1`,
/// bounded boxes) by bisection on the multiplier.
///
/// The coupling residual `g(μ) = Σ W_i y_i(μ) − Σ d_i` is non-increasing in
/// `μ`. Where it jumps over zero (objectives with flat derivative), agents
/// whose response differs across the final bracket are interpolated so that
/// the residual vanishes.
pub fn solve_allocation_kkt(problem: &AllocationProblem) -> Result<KKTReference> {
    let agents = scalar_agents(problem)?;
    let g_bound = agents
        .iter()
        .map(|a| a.dh(a.lo).abs().max(a.dh(a.hi).abs()))
        .fold(0.0, f64::max);
    let w_min = agents
        .iter()
        .map(|a| a.w.abs())
        .filter(|w| *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !w_min.is_finite() {
        return Err(Error::Infeasible("every W_i is zero".into()));
    }
    let responses = |mu: f64| -> Vec<f64> { agents.iter().map(|a| a.response(mu)).collect() };
    let gap = |mu: f64| coupling_gap(&agents, &responses(mu));

    let mut m_half = 10.0 * (1.0 + g_bound / w_min);
    let mut widenings = 0;
    while !(gap(-m_half) >= 0.0 && gap(m_half) <= 0.0) {
        if widenings == MAX_WIDENINGS {
            return Err(Error::Infeasible(format!(
                "coupling residual does not change sign on [-{m_half:e}, {m_half:e}]"
            )));
        }
        m_half *= 10.0;
        widenings += 1;
    }
    let (mut lo, mut hi) = (-m_half, m_half);
    let mut steps = 0;
    let mut mu = 0.5 * (lo + hi);
    let mut ys = responses(mu);
    let mut g = coupling_gap(&agents, &ys);
    let mut best = (g.abs(), mu, ys.clone());
    // bisect to machine precision
    while g != 0.0 && steps < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        mu = mid;
        ys = responses(mu);
        g = coupling_gap(&agents, &ys);
        if g.abs() < best.0 {
            best = (g.abs(), mu, ys.clone());
        }
        if g > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        steps += 1;
    }
    let (_, best_mu, best_ys) = best;
    mu = best_mu;
    ys = best_ys;
    g = coupling_gap(&agents, &ys);
    let mut interpolated = 0;
    if g.abs() > KKT_FEAS_TOL {
        let y_lo = responses(lo);
        let y_hi = responses(hi);
        let g_lo = coupling_gap(&agents, &y_lo);
        let g_hi = coupling_gap(&agents, &y_hi);
        let theta = if g_lo != g_hi { g_lo / (g_lo - g_hi) } else { 0.0 };
        ys = y_lo
            .iter()
            .zip(&y_hi)
            .map(|(&a, &b)| {
                if a != b {
                    interpolated += 1;
                }
                a + theta * (b - a)
            })
            .collect();
        mu = 0.5 * (lo + hi);
        g = coupling_gap(&agents, &ys);
    }
    let feasibility = g.abs();
    let stationarity_gap = agents
        .iter()
        .zip(&ys)
        .map(|(a, &y)| stationarity_gap(a, mu, y))
        .fold(0.0, f64::max);
    let projected_gradient = agents
        .iter()
        .zip(&ys)
        .map(|(a, &y)| (y - (y - a.dh(y) - mu * a.w).clamp(a.lo, a.hi)).abs())
        .fold(0.0, f64::max);
    if !(feasibility <= KKT_CERT_TOL) || !(stationarity_gap <= KKT_CERT_TOL) {
        return Err(Error::Certification(format!(
            "KKT point not certified: feasibility {feasibility:e}, stationarity gap {stationarity_gap:e}"
        )));
    }
    let objective = agents.iter().zip(&ys).map(|(a, &y)| a.h(y)).sum();
    Ok(KKTReference {
        y_star: ys,
        mu: vec![mu],
        objective,
        residuals: KKTResiduals {
            feasibility,
            stationarity_gap,
            projected_gradient,
            bisection_steps: steps,
            bracket: [lo, hi],
            interpolated_agents: interpolated,
        },
    })
}

/// `φ(y) − min φ` over a refined grid, `φ(t) = h(t) + μ w t`.
///
/// A 1001-point grid over the box locates the best cell; the grid is then
/// refined around it by a factor of 100 per level until the spacing drops
/// below 1e-10.
fn stationarity_gap(a: &ScalarAgent<'_>, mu: f64, y: f64) -> f64 {
    let phi = |t: f64| a.h(t) + mu * a.w * t;
    let (mut lo, mut hi) = (a.lo, a.hi);
    let mut best = phi(y);
    let mut best_t = y;
    while hi - lo > 1e-10 {
        let n = 1000;
        let step = (hi - lo) / n as f64;
        for k in 0..=n {
            let t = (lo + k as f64 * step).min(a.hi);
            let v = phi(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        lo = (best_t - 10.0 * step).max(a.lo);
        hi = (best_t + 10.0 * step).min(a.hi);
    }
    (phi(y) - best).max(0.0)
}

/// Brute-force optimum for tiny instances (`N <= 3`, `m = q_i = 1`).
///
/// Grids `y_1, …, y_{N−1}` over their boxes with spacing 1e-2, solves the
/// last coordinate from the coupling constraint, then repeats with spacing
/// 1e-4 in a ±2e-2 window around the best point. Returns `(y, objective)`.
pub fn grid_search_allocation(problem: &AllocationProblem) -> Result<(Vec<f64>, f64)> {
    let agents = scalar_agents(problem)?;
    let n = agents.len();
    if !(2..=3).contains(&n) {
        return Err(Error::Unsupported(format!("grid search needs 2 <= N <= 3, got {n}")));
    }
    let last = &agents[n - 1];
    if last.w == 0.0 {
        return Err(Error::Unsupported("grid search needs W_N != 0".into()));
    }
    let total_d: f64 = agents.iter().map(|a| a.d).sum();
    let eval = |free: &[f64]| -> Option<f64> {
        let partial: f64 = agents.iter().zip(free).map(|(a, &y)| a.w * y).sum();
        let y_last = (total_d - partial) / last.w;
        if y_last < last.lo - 1e-12 || y_last > last.hi + 1e-12 {
            return None;
        }
        let y_last = y_last.clamp(last.lo, last.hi);
        Some(agents.iter().zip(free).map(|(a, &y)| a.h(y)).sum::<f64>() + last.h(y_last))
    };
    let axis = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
        let count = ((hi - lo) / step).round() as usize;
        (0..=count).map(|k| (lo + k as f64 * step).min(hi)).collect()
    };
    let search = |ranges: &[(f64, f64)], step: f64| -> Option<(Vec<f64>, f64)> {
        let axes: Vec<Vec<f64>> = ranges.iter().map(|&(l, h)| axis(l, h, step)).collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut consider = |free: Vec<f64>| {
            if let Some(v) = eval(&free) {
                if best.as_ref().is_none_or(|(_, b)| v < *b) {
                    best = Some((free, v));
                }
            }
        };
        match axes.len() {
            1 => axes[0].iter().for_each(|&a| consider(vec![a])),
            _ => {
                for &a in &axes[0] {
                    for &b in &axes[1] {
                        consider(vec![a, b]);
                    }
                }
            }
        }
        best
    };
    let coarse: Vec<(f64, f64)> = agents[..n - 1].iter().map(|a| (a.lo, a.hi)).collect();
    let (free, _) = search(&coarse, 1e-2).ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
    let fine: Vec<(f64, f64)> = agents[..n - 1]
        .iter()
        .zip(&free)
        .map(|(a, &y)| ((y - 2e-2).max(a.lo), (y + 2e-2).min(a.hi)))
        .collect();
    let (free, value) = search(&fine, 1e-4).ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
    let partial: f64 = agents.iter().zip(&free).map(|(a, &y)| a.w * y).sum();
    let mut y = free;
    y.push(((total_d - partial) / last.w).clamp(last.lo, last.hi));
    Ok((y, value))
}

/// Intersection of the local sets as a box. Balls are not supported.
fn intersection_box(problem: &ConsensusProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = problem.m();
    let mut lo = vec![f64::NEG_INFINITY; m];
    let mut hi = vec![f64::INFINITY; m];
    for a in problem.agents() {
        match &a.set {
            ConvexSet::WholeSpace { .. } => {}
            ConvexSet::Box { lower, upper } => {
                for k in 0..m {
                    lo[k] = lo[k].max(lower[k]);
                    hi[k] = hi[k].min(upper[k]);
                }
            }
            _ => return Err(Error::Unsupported("consensus reference needs box sets".into())),
        }
    }
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(Error::Infeasible("local boxes do not intersect".into()));
    }
    Ok((lo, hi))
}

/// Projected-gradient iteration cap for `m > 1`.
pub const CONSENSUS_PG_MAX_ITERS: usize = 10_000_000;
/// Certification level of the consensus reference.
pub const CONSENSUS_CERT_TOL: f64 = 1e-8;

/// Minimiser of `Σ f_i(s)` over `∩ Ω_i` (a box).
///
/// `m = 1`: golden-section search on a bracket of the minimiser, polished by
/// bisection on the derivative. `m > 1`: projected gradient with step
/// `1/Σ l_i`. The result is certified by the normal-cone residual.
pub fn solve_consensus_reference(problem: &ConsensusProblem) -> Result<Vector> {
    let (lo, hi) = intersection_box(problem)?;
    let set = ConvexSet::boxed(lo.clone(), hi.clone())?;
    let m = problem.m();
    let total_grad = |s: &Vector| -> Vector {
        problem
            .agents()
            .iter()
            .fold(Vector::zeros(m), |acc, a| acc + a.objective.gradient(s))
    };
    let start = set.project(&Vector::zeros(m))?;
    if total_grad(&start).iter().all(|&g| g == 0.0) {
        return Ok(start);
    }
    let s = if m == 1 {
        let value = |t: f64| -> f64 {
            let p = Vector::from_element(1, t);
            problem.agents().iter().map(|a| a.objective.value(&p)).sum()
        };
        let deriv = |t: f64| total_grad(&Vector::from_element(1, t))[0];
        Vector::from_element(1, minimise_scalar(value, deriv, lo[0], hi[0])?)
    } else {
        projected_gradient(problem, &set, start, &total_grad)?
    };
    let g = total_grad(&s);
    let scale = g.amax().max(1.0);
    let ncr = set.normal_cone_residual(&s, &g, 256, 0)?;
    if !(ncr >= -CONSENSUS_CERT_TOL * scale) {
        return Err(Error::Certification(format!("consensus reference normal-cone residual {ncr:e}")));
    }
    Ok(s)
}

fn projected_gradient(
    problem: &ConsensusProblem,
    set: &ConvexSet,
    mut s: Vector,
    total_grad: &dyn Fn(&Vector) -> Vector,
) -> Result<Vector> {
    let l_sum: f64 = problem.agents().iter().map(|a| a.objective.lipschitz()).sum();
    let step = if l_sum > 0.0 { 1.0 / l_sum } else { 1e-3 };
    for _ in 0..CONSENSUS_PG_MAX_ITERS {
        let mut next = &s - total_grad(&s) * step;
        set.project_in_place(next.as_mut_slice());
        let moved = (&next - &s).amax();
        s = next;
        if moved <= 1e-15 * (1.0 + s.amax()) {
            return Ok(s);
        }
    }
    Err(Error::NoConvergence {
        iters: CONSENSUS_PG_MAX_ITERS,
    })
}

/// Minimiser of a convex scalar function on `[lo, hi]` (possibly infinite).
fn minimise_scalar(value: impl Fn(f64) -> f64, deriv: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    // finite bracket of the minimiser
    let (mut a, mut b) = (lo, hi);
    if !a.is_finite() || !b.is_finite() {
        let mut w = 1.0;
        let mut found = false;
        for _ in 0..200 {
            let (ta, tb) = (if lo.is_finite() { lo } else { -w }, if hi.is_finite() { hi } else { w });
            if (lo.is_finite() || deriv(ta) < 0.0) && (hi.is_finite() || deriv(tb) > 0.0) {
                a = ta;
                b = tb;
                found = true;
                break;
            }
            w *= 2.0;
        }
        if !found {
            return Err(Error::NoConvergence { iters: 200 });
        }
    }
    // golden section
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (value(c), value(d));
    for _ in 0..200 {
        if b - a <= 1e-9 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = value(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = value(d);
        }
    }
    // widen slightly and polish by derivative bisection
    let pad = 10.0 * (b - a) + 1e-9;
    let (mut a, mut b) = ((a - pad).max(lo), (b + pad).min(hi));
    if deriv(a) >= 0.0 {
        return Ok(a);
    }
    if deriv(b) <= 0.0 {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if deriv(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}
