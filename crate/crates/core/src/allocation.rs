//! Distributed resource allocation: `min Σ h_i(y_i)` over `y_i ∈ Ω_i` subject to
//! `Σ W_i y_i = Σ d_i`.
//!
//! Saddle form on `Θ₂ = Ω × ℝ^{Nm} × ℝ^{Nm}` via the modified Lagrangian
//! `L₂(y, a, λ) = Σ h_i(y_i) + λᵀ(Wy − d − (L⊗I)a) − ½ λᵀ(L⊗I)λ`, minimised in
//! `(y, a)` and maximised in `λ`. The auxiliary variable `a` lets every agent
//! work with its own `d_i` only.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::consensus::{coupling, REFERENCE_CERT_TOL, REFERENCE_STOP_TOL};
use crate::graph::NetworkGraph;
use crate::network::{Agent, DistributedRun, Inbox, NetworkMethod, PrimalDualAgent, Schedule, Simulator};
use crate::objectives::SharedObjective;
use crate::problem::{LipschitzBound, SaddleFunction, SaddleProblem};
use crate::sets::ConvexSet;
use crate::solvers::{fmt_f64, gradient_point, ogda_point, run, MethodRegistry, NullSink, SolverConfig};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone)]
pub struct AllocationAgentSpec {
    pub objective: SharedObjective,
    pub set: ConvexSet,
    /// `m × q_i`.
    pub w: Matrix,
    pub d: Vector,
}

impl AllocationAgentSpec {
    pub fn q(&self) -> usize {
        self.objective.dim()
    }
}

#[derive(Debug)]
struct Inner {
    graph: NetworkGraph,
    m: usize,
    agents: Vec<AllocationAgentSpec>,
    lambda_max: f64,
    sigma_max: f64,
    kappa: f64,
}

/// Cheap to clone; the data is shared.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    inner: Arc<Inner>,
}

/// Primal `(y, a)` and dual `λ` blocks, one entry per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPoint {
    pub y: Vec<Vector>,
    pub a: Vec<Vector>,
    pub lambda: Vec<Vector>,
}

impl AllocationProblem {
    /// Builds the problem and computes
    /// `κ_s = max_i l_i + max_i σ_max(W_i) + 2λ_max(L) + 1`.
    pub fn new(graph: NetworkGraph, agents: Vec<AllocationAgentSpec>) -> Result<Self> {
        if agents.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: agents.len(),
            });
        }
        let m = agents[0].d.len();
        for a in &agents {
            let q = a.q();
            if a.set.dim() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: a.set.dim(),
                });
            }
            if a.w.nrows() != m || a.w.ncols() != q {
                return Err(Error::InvalidArgument(format!(
                    "W_i is {}x{}, expected {m}x{q}",
                    a.w.nrows(),
                    a.w.ncols()
                )));
            }
            if a.d.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: a.d.len(),
                });
            }
        }
        let lambda_max = graph.lambda_max()?;
        let sigma_max = agents
            .iter()
            .map(|a| a.w.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max);
        let l_h = agents.iter().map(|a| a.objective.lipschitz()).fold(0.0, f64::max);
        Ok(Self {
            inner: Arc::new(Inner {
                graph,
                m,
                agents,
                lambda_max,
                sigma_max,
                kappa: l_h + sigma_max + 2.0 * lambda_max + 1.0,
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
    pub fn agents(&self) -> &[AllocationAgentSpec] {
        &self.inner.agents
    }
    pub fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }
    pub fn sigma_max(&self) -> f64 {
        self.inner.sigma_max
    }
    /// Declared Lipschitz bound `κ_s` of `Ψ`.
    pub fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn check_point(&self, p: &AllocationPoint) -> Result<()> {
        let n = self.n();
        for (len, what) in [(p.y.len(), "y"), (p.a.len(), "a"), (p.lambda.len(), "lambda")] {
            if len != n {
                return Err(Error::InvalidArgument(format!("{what} has {len} blocks, expected {n}")));
            }
        }
        for i in 0..n {
            let q = self.agents()[i].q();
            if p.y[i].len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: p.y[i].len(),
                });
            }
            for b in [&p.a[i], &p.lambda[i]] {
                if b.len() != self.m() {
                    return Err(Error::DimensionMismatch {
                        expected: self.m(),
                        got: b.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn objective_sum(&self, y: &[Vector]) -> f64 {
        self.agents().iter().zip(y).map(|(s, yi)| s.objective.value(yi)).sum()
    }

    /// `‖Σ_i (W_i y_i − d_i)‖`. Needs global information; diagnostic only.
    pub fn feasibility_gap(&self, y: &[Vector]) -> f64 {
        let mut r = Vector::zeros(self.m());
        for (s, yi) in self.agents().iter().zip(y) {
            r += &s.w * yi - &s.d;
        }
        r.norm()
    }

    /// `max_{i,j} ‖λ_i − λ_j‖`.
    pub fn dual_spread(&self, lambda: &[Vector]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..lambda.len() {
            for j in i + 1..lambda.len() {
                worst = worst.max((&lambda[i] - &lambda[j]).norm());
            }
        }
        worst
    }

    /// `L₂(y, a, λ)`.
    pub fn lagrangian(&self, p: &AllocationPoint) -> Result<f64> {
        self.check_point(p)?;
        let la = self.graph().laplacian_apply(&p.a);
        let ll = self.graph().laplacian_apply(&p.lambda);
        let mut total = self.objective_sum(&p.y);
        for (i, s) in self.agents().iter().enumerate() {
            let r = &s.w * &p.y[i] - &s.d - &la[i];
            total += p.lambda[i].dot(&r) - 0.5 * p.lambda[i].dot(&ll[i]);
        }
        Ok(total)
    }

    /// Local `Ψ` blocks of agent `i` from its `y_i` and the `(a, λ)` values of
    /// itself and its neighbours.
    fn agent_operator<'a>(
        &self,
        i: usize,
        y: &Vector,
        a: &Vector,
        lambda: &Vector,
        nbrs: impl Iterator<Item = (&'a Vector, &'a Vector)>,
    ) -> (Vector, Vector, Vector) {
        let s = &self.agents()[i];
        // c = Σ_j (λ_i − λ_j + a_i − a_j), s_λ = Σ_j (λ_i − λ_j)
        let (c, s_lambda) = coupling(lambda, a, nbrs);
        let fy = s.objective.gradient(y) + s.w.tr_mul(lambda);
        let r = (&s.w * y - &s.d) - c;
        (fy, -s_lambda, -r)
    }

    fn operator_at(&self, i: usize, p: &AllocationPoint) -> (Vector, Vector, Vector) {
        let nbrs = self.graph().neighbors(i).iter().map(|&j| (&p.lambda[j], &p.a[j]));
        self.agent_operator(i, &p.y[i], &p.a[i], &p.lambda[i], nbrs)
    }

    /// `Ψ(y, a, λ)` as per-agent blocks.
    pub fn operator_psi(&self, p: &AllocationPoint) -> Result<AllocationPoint> {
        self.check_point(p)?;
        let mut out = AllocationPoint {
            y: Vec::new(),
            a: Vec::new(),
            lambda: Vec::new(),
        };
        for i in 0..self.n() {
            let (fy, fa, fl) = self.operator_at(i, p);
            out.y.push(fy);
            out.a.push(fa);
            out.lambda.push(fl);
        }
        Ok(out)
    }

    fn primal_dims(&self) -> Vec<usize> {
        self.agents().iter().flat_map(|s| [s.q(), self.m()]).collect()
    }

    /// Stacked layout: `col(y_1, a_1, …, y_N, a_N, λ_1, …, λ_N)`.
    pub fn stack(&self, p: &AllocationPoint) -> Vector {
        let mut blocks: Vec<&Vector> = Vec::new();
        for i in 0..self.n() {
            blocks.push(&p.y[i]);
            blocks.push(&p.a[i]);
        }
        blocks.extend(&p.lambda);
        crate::linalg::stack(blocks)
    }

    pub fn unstack(&self, z: &Vector) -> Result<AllocationPoint> {
        let mut dims = self.primal_dims();
        dims.extend(std::iter::repeat_n(self.m(), self.n()));
        let blocks = crate::linalg::split(z, &dims)?;
        let n = self.n();
        let mut it = blocks.into_iter();
        let mut p = AllocationPoint {
            y: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            lambda: Vec::with_capacity(n),
        };
        for _ in 0..n {
            p.y.push(it.next().expect("split yields every block"));
            p.a.push(it.next().expect("split yields every block"));
        }
        p.lambda.extend(it);
        Ok(p)
    }

    /// The centralised saddle problem over `Θ₂` with operator `Ψ`.
    pub fn stacked_problem(&self) -> SaddleProblem {
        let set_x = ConvexSet::product(
            self.agents()
                .iter()
                .flat_map(|s| [s.set.clone(), ConvexSet::whole_space(self.m())])
                .collect(),
        );
        let set_y = ConvexSet::whole_space(self.n() * self.m());
        SaddleProblem::new(
            "allocation",
            Arc::new(AllocationLagrangian(self.clone())),
            set_x,
            set_y,
            LipschitzBound::Operator { kappa: self.kappa() },
        )
        .expect("stacked allocation dimensions are consistent")
    }

    /// Default start: `y_i = P_{Ω_i}(0)`, `a_i = λ_i = 0`.
    pub fn default_start(&self) -> AllocationPoint {
        let zeros = vec![Vector::zeros(self.m()); self.n()];
        AllocationPoint {
            y: self
                .agents()
                .iter()
                .map(|s| s.set.project(&Vector::zeros(s.q())).expect("dimension checked"))
                .collect(),
            a: zeros.clone(),
            lambda: zeros,
        }
    }

    /// Per-agent simulator. `α` is validated against `κ_s` (or defaulted).
    pub fn simulator(
        &self,
        method: NetworkMethod,
        alpha: Option<f64>,
        start: Option<AllocationPoint>,
        schedule: Schedule,
    ) -> Result<(Simulator<AllocationAgent>, f64)> {
        let alpha = method.resolve_step(self.kappa(), alpha, false)?;
        let p = start.unwrap_or_else(|| self.default_start());
        self.check_point(&p)?;
        let agents = (0..self.n())
            .map(|i| AllocationAgent {
                id: i,
                problem: self.clone(),
                method,
                alpha,
                y: p.y[i].clone(),
                a: p.a[i].clone(),
                lambda: p.lambda[i].clone(),
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
        start: Option<AllocationPoint>,
        schedule: Schedule,
    ) -> Result<(DistributedRun<AllocationAgent>, f64)> {
        let (sim, alpha) = self.simulator(method, alpha, start, schedule)?;
        Ok((DistributedRun::new(sim, method), alpha))
    }

    pub fn state(&self, sim: &Simulator<AllocationAgent>) -> AllocationPoint {
        let a = sim.agents();
        AllocationPoint {
            y: a.iter().map(|a| a.y.clone()).collect(),
            a: a.iter().map(|a| a.a.clone()).collect(),
            lambda: a.iter().map(|a| a.lambda.clone()).collect(),
        }
    }

    /// Auxiliary and dual reference for a known primal optimum `y_star`.
    ///
    /// Runs the stacked extra-gradient method from `(y*, 0; 0)` at tight
    /// tolerance for up to `max_iters` iterations and certifies the limit by
    /// `vi_residual <= 1e-8`.
    pub fn certified_reference(&self, y_star: &[Vector], max_iters: usize) -> Result<AllocationReference> {
        let zeros = vec![Vector::zeros(self.m()); self.n()];
        let start = AllocationPoint {
            y: y_star.to_vec(),
            a: zeros.clone(),
            lambda: zeros,
        };
        self.check_point(&start)?;
        let problem = self.stacked_problem();
        let cfg = SolverConfig::new("eg", max_iters)
            .with_stop_tol(REFERENCE_STOP_TOL)
            .resolve(&MethodRegistry::builtin(), &problem)?;
        let summary = run(&problem, &cfg, &self.stack(&start), None, &mut NullSink)?;
        let z = Vector::from_vec(summary.final_z);
        let residual = problem.vi_residual(&z)?;
        if !(residual <= REFERENCE_CERT_TOL) {
            return Err(Error::Certification(format!(
                "allocation reference residual {residual:e} after {} iterations",
                summary.iterations
            )));
        }
        let point = self.unstack(&z)?;
        let value = self.lagrangian(&point)?;
        Ok(AllocationReference {
            z_star: z,
            point,
            value,
            vi_residual: residual,
            iterations: summary.iterations,
        })
    }
}

impl AllocationProblem {
    /// Saddle point `(y*, a*, λ*)` completed from a primal optimum and the
    /// coupling multiplier `mu`.
    ///
    /// `λ_i* = μ` for every agent and `a*` solves `(L a)_i = W_i y_i* − d_i`
    /// per coordinate. Certified by `vi_residual <= 1e-8`.
    pub fn saddle_from_primal(&self, y_star: &[Vector], mu: &Vector) -> Result<AllocationReference> {
        let (n, m) = (self.n(), self.m());
        if mu.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: mu.len() });
        }
        if y_star.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y_star.len() });
        }
        let r: Vec<Vector> = self
            .agents()
            .iter()
            .zip(y_star)
            .map(|(s, y)| &s.w * y - &s.d)
            .collect();
        let mut a = vec![Vector::zeros(m); n];
        for k in 0..m {
            let rk: Vec<f64> = r.iter().map(|ri| ri[k]).collect();
            for (ai, u) in a.iter_mut().zip(self.graph().solve_laplacian(&rk)?) {
                ai[k] = u;
            }
        }
        let point = AllocationPoint {
            y: y_star.to_vec(),
            a,
            lambda: vec![mu.clone(); n],
        };
        self.check_point(&point)?;
        let z = self.stack(&point);
        let residual = self.stacked_problem().vi_residual(&z)?;
        if !(residual <= REFERENCE_CERT_TOL) {
            return Err(Error::Certification(format!("allocation saddle residual {residual:e}")));
        }
        Ok(AllocationReference {
            value: self.lagrangian(&point)?,
            z_star: z,
            point,
            vi_residual: residual,
            iterations: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationReference {
    pub z_star: Vector,
    pub point: AllocationPoint,
    /// `L₂(y*, a*, λ*)`.
    pub value: f64,
    pub vi_residual: f64,
    pub iterations: usize,
}

struct AllocationLagrangian(AllocationProblem);

impl fmt::Debug for AllocationLagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AllocationLagrangian(n = {}, m = {})", self.0.n(), self.0.m())
    }
}

impl AllocationLagrangian {
    fn point(&self, x: &Vector, lambda: &Vector) -> AllocationPoint {
        let p = &self.0;
        let mut z = x.as_slice().to_vec();
        z.extend_from_slice(lambda.as_slice());
        p.unstack(&Vector::from_vec(z)).expect("stacked dimensions match")
    }

    fn blocks(&self, x: &Vector, lambda: &Vector) -> AllocationPoint {
        let pt = self.point(x, lambda);
        self.0.operator_psi(&pt).expect("stacked dimensions match")
    }

    fn primal_stack(&self, f: &AllocationPoint) -> Vector {
        let mut blocks = Vec::new();
        for i in 0..self.0.n() {
            blocks.push(&f.y[i]);
            blocks.push(&f.a[i]);
        }
        crate::linalg::stack(blocks)
    }
}

impl SaddleFunction for AllocationLagrangian {
    fn dim_x(&self) -> usize {
        self.0.primal_dims().iter().sum()
    }
    fn dim_y(&self) -> usize {
        self.0.n() * self.0.m()
    }
    fn value(&self, x: &Vector, lambda: &Vector) -> f64 {
        self.0.lagrangian(&self.point(x, lambda)).expect("stacked dimensions match")
    }
    fn grad_x(&self, x: &Vector, lambda: &Vector) -> Vector {
        self.primal_stack(&self.blocks(x, lambda))
    }
    fn grad_y(&self, x: &Vector, lambda: &Vector) -> Vector {
        let f = self.blocks(x, lambda);
        -crate::linalg::stack(&f.lambda)
    }
    fn operator(&self, z: &Vector) -> Vector {
        let f = self.0.operator_psi(&self.0.unstack(z).expect("stacked dimensions match")).expect("stacked dimensions match");
        self.0.stack(&f)
    }
}

/// Published values `(a_i, λ_i)`; `y_i` never leaves the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMessage {
    pub a: Vector,
    pub lambda: Vector,
}

#[derive(Debug, Clone)]
pub struct AllocationAgent {
    id: usize,
    problem: AllocationProblem,
    method: NetworkMethod,
    alpha: f64,
    pub y: Vector,
    pub a: Vector,
    pub lambda: Vector,
    f_prev: Option<(Vector, Vector, Vector)>,
    half: Option<(Vector, Vector, Vector)>,
    grad_calls: u64,
}

impl AllocationAgent {
    pub fn id(&self) -> usize {
        self.id
    }

    fn spec(&self) -> &AllocationAgentSpec {
        &self.problem.agents()[self.id]
    }

    fn project(&self, p: Vec<f64>) -> Vector {
        let mut p = Vector::from_vec(p);
        self.spec().set.project_in_place(p.as_mut_slice());
        p
    }

    fn local_operator(&mut self, y: &Vector, inbox: &Inbox<'_, AllocationMessage>) -> (Vector, Vector, Vector) {
        let own = inbox.own();
        self.grad_calls += 1;
        let nbrs = inbox.neighbors().map(|(_, m)| (&m.lambda, &m.a));
        self.problem.agent_operator(self.id, y, &own.a, &own.lambda, nbrs)
    }
}

impl Agent for AllocationAgent {
    type Message = AllocationMessage;

    fn phases(&self) -> usize {
        self.method.phases()
    }

    fn publish(&self, phase: usize) -> AllocationMessage {
        match (phase, &self.half) {
            (1, Some((_, a, l))) => AllocationMessage {
                a: a.clone(),
                lambda: l.clone(),
            },
            _ => AllocationMessage {
                a: self.a.clone(),
                lambda: self.lambda.clone(),
            },
        }
    }

    fn update(&mut self, phase: usize, inbox: &Inbox<'_, AllocationMessage>) {
        let alpha = self.alpha;
        let y_eval = match (phase, &self.half) {
            (1, Some((y, _, _))) => y.clone(),
            _ => self.y.clone(),
        };
        let (fy, fa, fl) = self.local_operator(&y_eval, inbox);
        match (self.method, phase) {
            (NetworkMethod::Ogda, _) => {
                let (py, pa, pl) = self
                    .f_prev
                    .take()
                    .unwrap_or_else(|| (fy.clone(), fa.clone(), fl.clone()));
                let y = self.project(ogda_point(self.y.as_slice(), fy.as_slice(), py.as_slice(), alpha));
                let a = Vector::from_vec(ogda_point(self.a.as_slice(), fa.as_slice(), pa.as_slice(), alpha));
                let l = Vector::from_vec(ogda_point(self.lambda.as_slice(), fl.as_slice(), pl.as_slice(), alpha));
                self.f_prev = Some((fy, fa, fl));
                self.y = y;
                self.a = a;
                self.lambda = l;
            }
            (NetworkMethod::Eg, 0) => {
                let y = self.project(gradient_point(self.y.as_slice(), fy.as_slice(), alpha));
                let a = Vector::from_vec(gradient_point(self.a.as_slice(), fa.as_slice(), alpha));
                let l = Vector::from_vec(gradient_point(self.lambda.as_slice(), fl.as_slice(), alpha));
                self.half = Some((y, a, l));
            }
            (NetworkMethod::Eg, _) => {
                // the corrected step starts from y^k, not from the mid-point
                self.y = self.project(gradient_point(self.y.as_slice(), fy.as_slice(), alpha));
                self.a = Vector::from_vec(gradient_point(self.a.as_slice(), fa.as_slice(), alpha));
                self.lambda = Vector::from_vec(gradient_point(self.lambda.as_slice(), fl.as_slice(), alpha));
            }
        }
    }
}

impl PrimalDualAgent for AllocationAgent {
    fn blocks(&self) -> (Vec<f64>, Vec<f64>) {
        let mut p = self.y.as_slice().to_vec();
        p.extend_from_slice(self.a.as_slice());
        (p, self.lambda.as_slice().to_vec())
    }

    fn ergodic_blocks(&self) -> (Vec<f64>, Vec<f64>) {
        match (self.method, &self.half) {
            (NetworkMethod::Eg, Some((y, a, l))) => {
                let mut p = y.as_slice().to_vec();
                p.extend_from_slice(a.as_slice());
                (p, l.as_slice().to_vec())
            }
            _ => self.blocks(),
        }
    }

    fn local_gradient_calls(&self) -> u64 {
        self.grad_calls
    }
}

/// Per-agent CSV: `iter, agent_id, y_*, a_*, lambda_*, feasibility_gap,
/// objective_sum`. The last two columns are network-wide values repeated on
/// each row. Agents with fewer than `max q_i` decision entries leave the
/// remaining `y_*` fields empty.
pub struct AllocationCsv<W: Write> {
    out: csv::Writer<W>,
    q_max: usize,
}

impl<W: Write> AllocationCsv<W> {
    pub fn new(writer: W, problem: &AllocationProblem) -> Result<Self> {
        let q_max = problem.agents().iter().map(AllocationAgentSpec::q).max().unwrap_or(0);
        let m = problem.m();
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["iter".to_string(), "agent_id".to_string()];
        header.extend((0..q_max).map(|k| format!("y_{k}")));
        header.extend((0..m).map(|k| format!("a_{k}")));
        header.extend((0..m).map(|k| format!("lambda_{k}")));
        header.push("feasibility_gap".into());
        header.push("objective_sum".into());
        out.write_record(&header)?;
        Ok(Self { out, q_max })
    }

    pub fn write(&mut self, problem: &AllocationProblem, iter: usize, p: &AllocationPoint) -> Result<()> {
        let gap = fmt_f64(problem.feasibility_gap(&p.y));
        let obj = fmt_f64(problem.objective_sum(&p.y));
        for i in 0..p.y.len() {
            let mut row = vec![iter.to_string(), i.to_string()];
            row.extend(p.y[i].iter().map(|&c| fmt_f64(c)));
            row.extend(std::iter::repeat_n(String::new(), self.q_max - p.y[i].len()));
            row.extend(p.a[i].iter().map(|&c| fmt_f64(c)));
            row.extend(p.lambda[i].iter().map(|&c| fmt_f64(c)));
            row.push(gap.clone());
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
