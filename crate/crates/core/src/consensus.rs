//! Constrained optimal consensus: `min Σ f_i(x_i)` over `x_i ∈ Ω_i` subject to
//! `(L ⊗ I_m) x = 0`.
//!
//! Saddle form on `Θ₁ = Ω × ℝ^{Nm}` via the augmented Lagrangian
//! `L₁(x, v) = Σ f_i(x_i) + vᵀ(L⊗I)x + ½ xᵀ(L⊗I)x`, with operator
//! `Φ(x, v) = [∇f(x) + (L⊗I)(x + v); −(L⊗I)x]`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::graph::NetworkGraph;
use crate::network::{Agent, DistributedRun, Inbox, NetworkMethod, PrimalDualAgent, Schedule, Simulator};
use crate::objectives::SharedObjective;
use crate::problem::{LipschitzBound, SaddleFunction, SaddleProblem};
use crate::sets::ConvexSet;
use crate::solvers::{fmt_f64, gradient_point, ogda_point, run, MethodRegistry, NullSink, SolverConfig};
use crate::{Error, Result, Vector};

/// Rounds of cyclic projection used to probe `∩ Ω_i ≠ ∅`.
const INTERSECTION_ROUNDS: usize = 1000;
const INTERSECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ConsensusAgentSpec {
    pub objective: SharedObjective,
    pub set: ConvexSet,
}

#[derive(Debug)]
struct Inner {
    graph: NetworkGraph,
    m: usize,
    agents: Vec<ConsensusAgentSpec>,
    lambda_max: f64,
    kappa: f64,
}

/// Cheap to clone; the data is shared.
#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    inner: Arc<Inner>,
}

/// `Σ_j (x_i − x_j + v_i − v_j)` and `Σ_j (x_i − x_j)` over the given
/// neighbour values, accumulated in the order supplied.
pub(crate) fn coupling<'a>(xi: &Vector, vi: &Vector, nbrs: impl Iterator<Item = (&'a Vector, &'a Vector)>) -> (Vector, Vector) {
    let mut c = Vector::zeros(xi.len());
    let mut sx = Vector::zeros(xi.len());
    for (xj, vj) in nbrs {
        for k in 0..xi.len() {
            let dx = xi[k] - xj[k];
            c[k] += dx + (vi[k] - vj[k]);
            sx[k] += dx;
        }
    }
    (c, sx)
}

impl ConsensusProblem {
    /// Builds the problem and computes `κ_c = max_i l_i + 2λ_max(L)`.
    pub fn new(graph: NetworkGraph, agents: Vec<ConsensusAgentSpec>) -> Result<Self> {
        if agents.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: agents.len(),
            });
        }
        let m = agents[0].objective.dim();
        for a in &agents {
            if a.objective.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: a.objective.dim(),
                });
            }
            if a.set.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: a.set.dim(),
                });
            }
        }
        check_intersection(&agents)?;
        let lambda_max = graph.lambda_max()?;
        let l_f = agents.iter().map(|a| a.objective.lipschitz()).fold(0.0, f64::max);
        Ok(Self {
            inner: Arc::new(Inner {
                graph,
                m,
                agents,
                lambda_max,
                kappa: l_f + 2.0 * lambda_max,
            }),
        })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.inner.graph
    }
    pub fn n(&self) -> usize {
        self.inner.agents.len()
    }
    pub fn m(&self) -> usize {
        self.inner.m
    }
    pub fn agents(&self) -> &[ConsensusAgentSpec] {
        &self.inner.agents
    }
    pub fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }
    /// Declared Lipschitz bound `κ_c` of `Φ`.
    pub fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn check_blocks(&self, u: &[Vector]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: u.len(),
            });
        }
        for b in u {
            if b.len() != self.m() {
                return Err(Error::DimensionMismatch {
                    expected: self.m(),
                    got: b.len(),
                });
            }
        }
        Ok(())
    }

    pub fn objective_sum(&self, x: &[Vector]) -> f64 {
        self.agents().iter().zip(x).map(|(a, xi)| a.objective.value(xi)).sum()
    }

    /// `L₁(x, v)`.
    pub fn lagrangian(&self, x: &[Vector], v: &[Vector]) -> Result<f64> {
        self.check_blocks(x)?;
        self.check_blocks(v)?;
        let lx = self.graph().laplacian_apply(x);
        let coupling: f64 = (0..self.n()).map(|i| v[i].dot(&lx[i]) + 0.5 * x[i].dot(&lx[i])).sum();
        Ok(self.objective_sum(x) + coupling)
    }

    fn agent_operator(&self, i: usize, x: &[Vector], v: &[Vector]) -> (Vector, Vector) {
        let nbrs = self.graph().neighbors(i).iter().map(|&j| (&x[j], &v[j]));
        let (c, sx) = coupling(&x[i], &v[i], nbrs);
        (self.agents()[i].objective.gradient(&x[i]) + c, -sx)
    }

    /// `Φ(x, v)` as per-agent `(x-block, v-block)` lists.
    pub fn operator_phi(&self, x: &[Vector], v: &[Vector]) -> Result<(Vec<Vector>, Vec<Vector>)> {
        self.check_blocks(x)?;
        self.check_blocks(v)?;
        Ok((0..self.n()).map(|i| self.agent_operator(i, x, v)).unzip())
    }

    /// `‖(L⊗I)x‖`.
    pub fn consensus_residual(&self, x: &[Vector]) -> f64 {
        self.graph()
            .laplacian_apply(x)
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn stack(&self, x: &[Vector], v: &[Vector]) -> Vector {
        crate::linalg::stack(x.iter().chain(v))
    }

    pub fn unstack(&self, z: &Vector) -> Result<(Vec<Vector>, Vec<Vector>)> {
        let n = self.n();
        let blocks = crate::linalg::split(z, &vec![self.m(); 2 * n])?;
        let mut it = blocks.into_iter();
        let x: Vec<Vector> = it.by_ref().take(n).collect();
        Ok((x, it.collect()))
    }

    /// The centralised saddle problem over `Θ₁` with operator `Φ`.
    pub fn stacked_problem(&self) -> SaddleProblem {
        let set_x = ConvexSet::product(self.agents().iter().map(|a| a.set.clone()).collect());
        let set_y = ConvexSet::whole_space(self.n() * self.m());
        SaddleProblem::new(
            "consensus",
            Arc::new(ConsensusLagrangian(self.clone())),
            set_x,
            set_y,
            LipschitzBound::Operator { kappa: self.kappa() },
        )
        .expect("stacked consensus dimensions are consistent")
    }

    /// Default start: `x_i = P_{Ω_i}(0)`, `v_i = 0`.
    pub fn default_start(&self) -> (Vec<Vector>, Vec<Vector>) {
        let x = self
            .agents()
            .iter()
            .map(|a| a.set.project(&Vector::zeros(self.m())).expect("dimension checked"))
            .collect();
        (x, vec![Vector::zeros(self.m()); self.n()])
    }

    /// Per-agent simulator. `α` is validated against `κ_c` (or defaulted).
    pub fn simulator(
        &self,
        method: NetworkMethod,
        alpha: Option<f64>,
        start: Option<(Vec<Vector>, Vec<Vector>)>,
        schedule: Schedule,
    ) -> Result<(Simulator<ConsensusAgent>, f64)> {
        let alpha = method.resolve_step(self.kappa(), alpha, false)?;
        let (x, v) = start.unwrap_or_else(|| self.default_start());
        self.check_blocks(&x)?;
        self.check_blocks(&v)?;
        let agents = self
            .agents()
            .iter()
            .enumerate()
            .map(|(i, spec)| ConsensusAgent {
                id: i,
                spec: spec.clone(),
                method,
                alpha,
                x: x[i].clone(),
                v: v[i].clone(),
                x_prev: x[i].clone(),
                v_prev: v[i].clone(),
                f_prev: None,
                half: None,
                grad_calls: 0,
            })
            .collect();
        Ok((Simulator::new(self.graph().clone(), agents, schedule)?, alpha))
    }

    pub fn distributed_run(
        &self,
        method: NetworkMethod,
        alpha: Option<f64>,
        start: Option<(Vec<Vector>, Vec<Vector>)>,
        schedule: Schedule,
    ) -> Result<(DistributedRun<ConsensusAgent>, f64)> {
        let (sim, alpha) = self.simulator(method, alpha, start, schedule)?;
        Ok((DistributedRun::new(sim, method), alpha))
    }

    pub fn state(&self, sim: &Simulator<ConsensusAgent>) -> ConsensusState {
        let a = sim.agents();
        ConsensusState {
            x: a.iter().map(|a| a.x.clone()).collect(),
            v: a.iter().map(|a| a.v.clone()).collect(),
            x_prev: a.iter().map(|a| a.x_prev.clone()).collect(),
            v_prev: a.iter().map(|a| a.v_prev.clone()).collect(),
        }
    }

    /// Dual reference for a known primal optimum `x_star` (common value).
    ///
    /// Runs the stacked extra-gradient method from `(x*, …, x*; 0)` at tight
    /// tolerance for up to `max_iters` iterations and certifies the limit by
    /// `vi_residual <= 1e-8`.
    pub fn certified_reference(&self, x_star: &Vector, max_iters: usize) -> Result<ConsensusReference> {
        if x_star.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: x_star.len(),
            });
        }
        let problem = self.stacked_problem();
        let x0 = vec![x_star.clone(); self.n()];
        let v0 = vec![Vector::zeros(self.m()); self.n()];
        let z0 = self.stack(&x0, &v0);
        let cfg = SolverConfig::new("eg", max_iters)
            .with_stop_tol(REFERENCE_STOP_TOL)
            .resolve(&MethodRegistry::builtin(), &problem)?;
        let summary = run(&problem, &cfg, &z0, None, &mut NullSink)?;
        let z = Vector::from_vec(summary.final_z);
        let residual = problem.vi_residual(&z)?;
        if !(residual <= REFERENCE_CERT_TOL) {
            return Err(Error::Certification(format!(
                "consensus reference residual {residual:e} after {} iterations",
                summary.iterations
            )));
        }
        let (x, v) = self.unstack(&z)?;
        let value = self.lagrangian(&x, &v)?;
        Ok(ConsensusReference {
            z_star: z,
            x_common: x_star.clone(),
            value,
            vi_residual: residual,
            iterations: summary.iterations,
        })
    }
}

impl ConsensusProblem {
    /// Saddle point `(x*, v*)` completed from the common optimum `x_star`.
    ///
    /// Per coordinate, the total gradient `Σ∇f_i(x*)` is absorbed into the
    /// normal cone of one agent whose box bound is active at `x*`, and `v*`
    /// solves `(L v)_i = −(∇f_i(x*) + n_i)`. The result is certified by
    /// `vi_residual <= 1e-8`. Boxes and the whole space are supported.
    pub fn saddle_from_primal(&self, x_star: &Vector) -> Result<ConsensusReference> {
        let (n, m) = (self.n(), self.m());
        if x_star.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: x_star.len() });
        }
        let grads: Vec<Vector> = self.agents().iter().map(|a| a.objective.gradient(x_star)).collect();
        let mut v = vec![Vector::zeros(m); n];
        for k in 0..m {
            let mut target: Vec<f64> = grads.iter().map(|g| -g[k]).collect();
            let total: f64 = grads.iter().map(|g| g[k]).sum();
            let scale: f64 = grads.iter().map(|g| g[k].abs()).sum();
            // round-off of an interior optimum; the Laplacian solve drops the mean
            if total.abs() > 1e-12 * (1.0 + scale) {
                let holder = self
                    .agents()
                    .iter()
                    .position(|a| match &a.set {
                        ConvexSet::Box { lower, upper } => {
                            (total > 0.0 && lower[k] == x_star[k]) || (total < 0.0 && upper[k] == x_star[k])
                        }
                        _ => false,
                    })
                    .ok_or_else(|| {
                        Error::Certification(format!("coordinate {k}: gradient sum {total:e} with no active bound"))
                    })?;
                target[holder] += total;
            }
            for (vi, u) in v.iter_mut().zip(self.graph().solve_laplacian(&target)?) {
                vi[k] = u;
            }
        }
        let x = vec![x_star.clone(); n];
        let z = self.stack(&x, &v);
        let residual = self.stacked_problem().vi_residual(&z)?;
        if !(residual <= REFERENCE_CERT_TOL) {
            return Err(Error::Certification(format!("consensus saddle residual {residual:e}")));
        }
        Ok(ConsensusReference {
            value: self.lagrangian(&x, &v)?,
            z_star: z,
            x_common: x_star.clone(),
            vi_residual: residual,
            iterations: 0,
        })
    }
}

/// Stop tolerance of the long reference runs.
pub const REFERENCE_STOP_TOL: f64 = 1e-13;
/// Residual a reference run must reach to be accepted.
pub const REFERENCE_CERT_TOL: f64 = 1e-8;

fn check_intersection(agents: &[ConsensusAgentSpec]) -> Result<()> {
    let m = agents[0].set.dim();
    let mut p = Vector::zeros(m);
    for _ in 0..INTERSECTION_ROUNDS {
        for a in agents {
            a.set.project_in_place(p.as_mut_slice());
        }
        if agents.iter().all(|a| a.set.violation(p.as_slice()) <= INTERSECTION_TOL) {
            return Ok(());
        }
    }
    Err(Error::Infeasible("local constraint sets have empty intersection".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReference {
    /// Stacked `(x*, v*)`.
    pub z_star: Vector,
    pub x_common: Vector,
    /// `L₁(x*, v*)`.
    pub value: f64,
    pub vi_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub x: Vec<Vector>,
    pub v: Vec<Vector>,
    pub x_prev: Vec<Vector>,
    pub v_prev: Vec<Vector>,
}

struct ConsensusLagrangian(ConsensusProblem);

impl fmt::Debug for ConsensusLagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConsensusLagrangian(n = {}, m = {})", self.0.n(), self.0.m())
    }
}

impl ConsensusLagrangian {
    fn blocks(&self, x: &Vector, v: &Vector) -> (Vec<Vector>, Vec<Vector>) {
        let m = self.0.m();
        let n = self.0.n();
        let cut = |u: &Vector| -> Vec<Vector> {
            (0..n)
                .map(|i| Vector::from_column_slice(&u.as_slice()[i * m..(i + 1) * m]))
                .collect()
        };
        (cut(x), cut(v))
    }
}

impl SaddleFunction for ConsensusLagrangian {
    fn dim_x(&self) -> usize {
        self.0.n() * self.0.m()
    }
    fn dim_y(&self) -> usize {
        self.0.n() * self.0.m()
    }
    fn value(&self, x: &Vector, v: &Vector) -> f64 {
        let (xb, vb) = self.blocks(x, v);
        self.0.lagrangian(&xb, &vb).expect("blocks have the problem's shape")
    }
    fn grad_x(&self, x: &Vector, v: &Vector) -> Vector {
        let (xb, vb) = self.blocks(x, v);
        let blocks: Vec<Vector> = (0..self.0.n()).map(|i| self.0.agent_operator(i, &xb, &vb).0).collect();
        crate::linalg::stack(&blocks)
    }
    fn grad_y(&self, x: &Vector, v: &Vector) -> Vector {
        let (xb, vb) = self.blocks(x, v);
        let blocks: Vec<Vector> = (0..self.0.n()).map(|i| -self.0.agent_operator(i, &xb, &vb).1).collect();
        crate::linalg::stack(&blocks)
    }
    fn operator(&self, z: &Vector) -> Vector {
        let d = self.dim_x();
        let x = Vector::from_column_slice(&z.as_slice()[..d]);
        let v = Vector::from_column_slice(&z.as_slice()[d..]);
        let (xb, vb) = self.blocks(&x, &v);
        let (fx, fv): (Vec<Vector>, Vec<Vector>) = (0..self.0.n()).map(|i| self.0.agent_operator(i, &xb, &vb)).unzip();
        crate::linalg::stack(fx.iter().chain(&fv))
    }
}

/// Published values: current `(x_i, v_i)` or, in the second extra-gradient
/// phase, the mid-point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMessage {
    pub x: Vector,
    pub v: Vector,
}

#[derive(Debug, Clone)]
pub struct ConsensusAgent {
    id: usize,
    spec: ConsensusAgentSpec,
    method: NetworkMethod,
    alpha: f64,
    pub x: Vector,
    pub v: Vector,
    pub x_prev: Vector,
    pub v_prev: Vector,
    /// Local operator blocks from the previous round (OGDA cache).
    f_prev: Option<(Vector, Vector)>,
    half: Option<(Vector, Vector)>,
    grad_calls: u64,
}

impl ConsensusAgent {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Local blocks of `Φ` from the agent's own message and its neighbours'.
    fn local_operator(&mut self, inbox: &Inbox<'_, ConsensusMessage>) -> (Vector, Vector) {
        let own = inbox.own();
        let (c, sx) = coupling(&own.x, &own.v, inbox.neighbors().map(|(_, m)| (&m.x, &m.v)));
        self.grad_calls += 1;
        (self.spec.objective.gradient(&own.x) + c, -sx)
    }

    fn project(&self, p: Vec<f64>) -> Vector {
        let mut p = Vector::from_vec(p);
        self.spec.set.project_in_place(p.as_mut_slice());
        p
    }

    fn commit(&mut self, x: Vector, v: Vector) {
        self.x_prev = std::mem::replace(&mut self.x, x);
        self.v_prev = std::mem::replace(&mut self.v, v);
    }
}

impl Agent for ConsensusAgent {
    type Message = ConsensusMessage;

    fn phases(&self) -> usize {
        self.method.phases()
    }

    fn publish(&self, phase: usize) -> ConsensusMessage {
        match (phase, &self.half) {
            (1, Some((x, v))) => ConsensusMessage {
                x: x.clone(),
                v: v.clone(),
            },
            _ => ConsensusMessage {
                x: self.x.clone(),
                v: self.v.clone(),
            },
        }
    }

    fn update(&mut self, phase: usize, inbox: &Inbox<'_, ConsensusMessage>) {
        let (fx, fv) = self.local_operator(inbox);
        let a = self.alpha;
        match (self.method, phase) {
            (NetworkMethod::Ogda, _) => {
                let (px, pv) = self.f_prev.take().unwrap_or_else(|| (fx.clone(), fv.clone()));
                let x = self.project(ogda_point(self.x.as_slice(), fx.as_slice(), px.as_slice(), a));
                let v = Vector::from_vec(ogda_point(self.v.as_slice(), fv.as_slice(), pv.as_slice(), a));
                self.f_prev = Some((fx, fv));
                self.commit(x, v);
            }
            (NetworkMethod::Eg, 0) => {
                let x = self.project(gradient_point(self.x.as_slice(), fx.as_slice(), a));
                let v = Vector::from_vec(gradient_point(self.v.as_slice(), fv.as_slice(), a));
                self.half = Some((x, v));
            }
            (NetworkMethod::Eg, _) => {
                let x = self.project(gradient_point(self.x.as_slice(), fx.as_slice(), a));
                let v = Vector::from_vec(gradient_point(self.v.as_slice(), fv.as_slice(), a));
                self.commit(x, v);
            }
        }
    }
}

impl PrimalDualAgent for ConsensusAgent {
    fn blocks(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x.as_slice().to_vec(), self.v.as_slice().to_vec())
    }

    fn ergodic_blocks(&self) -> (Vec<f64>, Vec<f64>) {
        match (self.method, &self.half) {
            (NetworkMethod::Eg, Some((x, v))) => (x.as_slice().to_vec(), v.as_slice().to_vec()),
            _ => self.blocks(),
        }
    }

    fn local_gradient_calls(&self) -> u64 {
        self.grad_calls
    }
}

/// Per-agent CSV: `iter, agent_id, x_0.., v_0.., consensus_residual,
/// objective_sum`. The last two columns are network-wide values repeated on
/// each agent's row.
pub struct ConsensusCsv<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> ConsensusCsv<W> {
    pub fn new(writer: W, m: usize) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["iter".to_string(), "agent_id".to_string()];
        header.extend((0..m).map(|k| format!("x_{k}")));
        header.extend((0..m).map(|k| format!("v_{k}")));
        header.push("consensus_residual".into());
        header.push("objective_sum".into());
        out.write_record(&header)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, problem: &ConsensusProblem, iter: usize, state: &ConsensusState) -> Result<()> {
        let res = fmt_f64(problem.consensus_residual(&state.x));
        let obj = fmt_f64(problem.objective_sum(&state.x));
        for i in 0..state.x.len() {
            let mut row = vec![iter.to_string(), i.to_string()];
            row.extend(state.x[i].iter().map(|&c| fmt_f64(c)));
            row.extend(state.v[i].iter().map(|&c| fmt_f64(c)));
            row.push(res.clone());
            row.push(obj.clone());
            self.out.write_record(&row)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.error().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{FnObjective, Quadratic};
    use crate::solvers::{step_eg, step_ogda};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn zero_obj() -> SharedObjective {
        Arc::new(FnObjective {
            dim: 1,
            lipschitz: 0.0,
            value: Box::new(|_| 0.0),
            gradient: Box::new(|_| Vector::zeros(1)),
        })
    }

    fn path2_zero() -> ConsensusProblem {
        let spec = ConsensusAgentSpec {
            objective: zero_obj(),
            set: ConvexSet::whole_space(1),
        };
        ConsensusProblem::new(NetworkGraph::path(2).unwrap(), vec![spec.clone(), spec]).unwrap()
    }

    fn scalars(xs: &[f64]) -> Vec<Vector> {
        xs.iter().map(|&s| v(&[s])).collect()
    }

    #[test]
    fn lagrangian_hand_values() {
        let p = path2_zero();
        assert_eq!(p.lagrangian(&scalars(&[1.0, 0.0]), &scalars(&[0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(p.lagrangian(&scalars(&[2.0, 2.0]), &scalars(&[3.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn phi_hand_values() {
        let p = path2_zero();
        let (fx, fv) = p.operator_phi(&scalars(&[1.0, 0.0]), &scalars(&[0.0, 0.0])).unwrap();
        assert_eq!(fx, scalars(&[1.0, -1.0]));
        assert_eq!(fv, scalars(&[-1.0, 1.0]));
        assert!((p.consensus_residual(&scalars(&[1.0, 0.0])) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.consensus_residual(&scalars(&[4.0, 4.0])), 0.0);
    }

    #[test]
    fn phi_at_consensus_is_local_gradient() {
        let agents = (1..=3)
            .map(|i| ConsensusAgentSpec {
                objective: Arc::new(Quadratic::scalar(1.0, i as f64)),
                set: ConvexSet::uniform_box(1, -10.0, 10.0).unwrap(),
            })
            .collect();
        let p = ConsensusProblem::new(NetworkGraph::ring(3).unwrap(), agents).unwrap();
        let (fx, fv) = p.operator_phi(&scalars(&[2.0; 3]), &scalars(&[0.0; 3])).unwrap();
        assert_eq!(fx, scalars(&[2.0, 0.0, -2.0]));
        assert!(fv.iter().all(|b| b[0] == 0.0));
    }

    #[test]
    fn empty_intersection_rejected() {
        let mk = |l: f64, u: f64| ConsensusAgentSpec {
            objective: zero_obj(),
            set: ConvexSet::uniform_box(1, l, u).unwrap(),
        };
        let r = ConsensusProblem::new(NetworkGraph::path(2).unwrap(), vec![mk(0.0, 1.0), mk(2.0, 3.0)]);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn distributed_matches_stacked_per_step() {
        let agents = (1..=4)
            .map(|i| ConsensusAgentSpec {
                objective: Arc::new(Quadratic::new(0.5 * i as f64, v(&[i as f64, -(i as f64)]))),
                set: ConvexSet::uniform_box(2, -1.5, 2.5).unwrap(),
            })
            .collect();
        let p = ConsensusProblem::new(NetworkGraph::ring(4).unwrap(), agents).unwrap();
        let sp = p.stacked_problem();
        for method in [NetworkMethod::Ogda, NetworkMethod::Eg] {
            let (mut sim, alpha) = p.simulator(method, None, None, Schedule::InOrder).unwrap();
            let mut z = sim.stacked();
            let mut z_prev = z.clone();
            for _ in 0..200 {
                sim.round();
                let next = match method {
                    NetworkMethod::Ogda => step_ogda(&sp, &z, &z_prev, alpha).unwrap(),
                    NetworkMethod::Eg => step_eg(&sp, &z, alpha).unwrap().1,
                };
                z_prev = std::mem::replace(&mut z, next);
                assert!((sim.stacked() - &z).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn csv_header() {
        let p = path2_zero();
        let (sim, _) = p.simulator(NetworkMethod::Ogda, Some(0.01), None, Schedule::InOrder).unwrap();
        let mut w = ConsensusCsv::new(Vec::new(), 1).unwrap();
        w.write(&p, 0, &p.state(&sim)).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,agent_id,x_0,v_0,consensus_residual,objective_sum");
        assert_eq!(lines.next().unwrap(), "0,0,0e0,0e0,0e0,0e0");
    }
}
