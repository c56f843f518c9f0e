//! Projected primal-dual iterations over `Λ = X × Y`.
//!
//! Three methods ship in [`MethodRegistry::builtin`]:
//!
//! | name   | update                                                        | `F` calls / step |
//! |--------|---------------------------------------------------------------|------------------|
//! | `gda`  | `z⁺ = P(z − αF(z))`                                           | 1                |
//! | `ogda` | `z⁺ = P(z − 2αF(z) + αF(z₋))`, `z₋₁ = z₀`                     | 1 (cached `F(z₋)`) |
//! | `eg`   | `h = P(z − αF(z))`, `z⁺ = P(z − αF(h))`                        | 2                |
//!
//! Further methods can be added by implementing [`SaddleMethod`] and calling
//! [`MethodRegistry::register`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::check_dim;
use crate::problem::SaddleProblem;
use crate::{Error, Result, Vector};

pub const DEFAULT_STOP_TOL: f64 = 1e-10;
/// Fraction of the theoretical step bound used when `α` is not given.
pub const DEFAULT_STEP_FRACTION: f64 = 0.9;
/// `‖z‖` above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Absolute slack for the proof inequalities checked along traces.
pub const INEQUALITY_SLACK: f64 = 1e-10;

/// Columns of the per-iteration trace CSV, in order.
pub const TRACE_COLUMNS: [&str; 7] = [
    "iter",
    "f_value",
    "vi_residual",
    "step_norm",
    "dist_to_ref",
    "ergodic_gap",
    "delta_k",
];

fn gda_point(problem: &SaddleProblem, z: &Vector, fz: &Vector, alpha: f64) -> Vector {
    let mut p = Vector::from_iterator(z.len(), z.iter().zip(fz).map(|(&zi, &fi)| zi - alpha * fi));
    problem.project_in_place(&mut p);
    p
}

/// Unprojected OGDA point `z − 2αF(z) + αF(z₋)`, coordinate by coordinate.
///
/// The distributed agents call this on their own blocks, so stacked and
/// per-agent runs round identically.
pub fn ogda_point(z: &[f64], fz: &[f64], f_prev: &[f64], alpha: f64) -> Vec<f64> {
    z.iter()
        .zip(fz)
        .zip(f_prev)
        .map(|((&zi, &fi), &pi)| zi - 2.0 * alpha * fi + alpha * pi)
        .collect()
}

/// Unprojected gradient point `z − αg`.
pub fn gradient_point(z: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    z.iter().zip(g).map(|(&zi, &gi)| zi - alpha * gi).collect()
}

/// One projected gradient step `P_Λ(z − αF(z))`.
pub fn step_gda(problem: &SaddleProblem, z: &Vector, alpha: f64) -> Result<Vector> {
    let fz = problem.operator(z)?;
    Ok(gda_point(problem, z, &fz, alpha))
}

/// One OGDA step `P_Λ(z − 2αF(z) + αF(z_prev))`.
pub fn step_ogda(problem: &SaddleProblem, z: &Vector, z_prev: &Vector, alpha: f64) -> Result<Vector> {
    let fz = problem.operator(z)?;
    let fp = problem.operator(z_prev)?;
    Ok(ogda_from(problem, z, &fz, &fp, alpha))
}

fn ogda_from(problem: &SaddleProblem, z: &Vector, fz: &Vector, fp: &Vector, alpha: f64) -> Vector {
    let mut p = Vector::from_vec(ogda_point(z.as_slice(), fz.as_slice(), fp.as_slice(), alpha));
    problem.project_in_place(&mut p);
    p
}

/// One extra-gradient step; returns `(z_half, z_next)`.
pub fn step_eg(problem: &SaddleProblem, z: &Vector, alpha: f64) -> Result<(Vector, Vector)> {
    let fz = problem.operator(z)?;
    let half = gda_point(problem, z, &fz, alpha);
    let fh = problem.operator_unchecked(&half);
    let next = gda_point(problem, z, &fh, alpha);
    Ok((half, next))
}

/// Mutable solver state. Only the current and previous iterates are kept.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iter: usize,
    pub z: Vector,
    pub z_prev: Vector,
    /// Mid-point of the last step (extra-gradient only).
    pub z_half: Option<Vector>,
    /// Cached `F(z_prev)` for methods that reuse it.
    pub f_prev: Option<Vector>,
    /// Number of `F` evaluations made by the method itself.
    pub grad_calls: u64,
}

impl SolverState {
    pub fn new(z0: Vector) -> Self {
        Self {
            iter: 0,
            z_prev: z0.clone(),
            z: z0,
            z_half: None,
            f_prev: None,
            grad_calls: 0,
        }
    }

    fn eval(&mut self, problem: &SaddleProblem, z: &Vector) -> Vector {
        self.grad_calls += 1;
        problem.operator_unchecked(z)
    }

    fn advance(&mut self, next: Vector) {
        self.z_prev = std::mem::replace(&mut self.z, next);
        self.iter += 1;
    }
}

/// A projected primal-dual iteration.
pub trait SaddleMethod: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Strict upper bound on `α` required by the method's convergence
    /// theorem, or `None` when there is none.
    fn step_bound(&self, kappa: f64) -> Option<f64>;

    fn gradient_calls_per_step(&self) -> u64;

    /// Advances `state` by one iteration.
    fn step(&self, problem: &SaddleProblem, state: &mut SolverState, alpha: f64);

    /// The point entering the ergodic average after a step.
    fn ergodic_sample<'a>(&self, state: &'a SolverState) -> &'a Vector {
        &state.z
    }

    /// Whether the descent quantity `Δ_k` applies to this method's traces.
    fn tracks_delta(&self) -> bool {
        false
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Gda;

impl SaddleMethod for Gda {
    fn name(&self) -> &'static str {
        "gda"
    }
    fn description(&self) -> &'static str {
        "projected gradient descent-ascent (baseline, no convergence guarantee)"
    }
    fn step_bound(&self, _kappa: f64) -> Option<f64> {
        None
    }
    fn gradient_calls_per_step(&self) -> u64 {
        1
    }
    fn step(&self, problem: &SaddleProblem, state: &mut SolverState, alpha: f64) {
        let z = state.z.clone();
        let fz = state.eval(problem, &z);
        state.advance(gda_point(problem, &z, &fz, alpha));
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Ogda;

impl SaddleMethod for Ogda {
    fn name(&self) -> &'static str {
        "ogda"
    }
    fn description(&self) -> &'static str {
        "optimistic gradient descent-ascent, alpha < 1/(2 kappa)"
    }
    fn step_bound(&self, kappa: f64) -> Option<f64> {
        Some(1.0 / (2.0 * kappa))
    }
    fn gradient_calls_per_step(&self) -> u64 {
        1
    }
    fn step(&self, problem: &SaddleProblem, state: &mut SolverState, alpha: f64) {
        let z = state.z.clone();
        let fz = state.eval(problem, &z);
        // z₋₁ = z₀, so the first correction term uses F(z₀) itself
        let fp = state.f_prev.take().unwrap_or_else(|| fz.clone());
        let next = ogda_from(problem, &z, &fz, &fp, alpha);
        state.f_prev = Some(fz);
        state.advance(next);
    }
    fn tracks_delta(&self) -> bool {
        true
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ExtraGradient;

impl SaddleMethod for ExtraGradient {
    fn name(&self) -> &'static str {
        "eg"
    }
    fn description(&self) -> &'static str {
        "extra-gradient with projected mid-point, alpha < 1/kappa"
    }
    fn step_bound(&self, kappa: f64) -> Option<f64> {
        Some(1.0 / kappa)
    }
    fn gradient_calls_per_step(&self) -> u64 {
        2
    }
    fn step(&self, problem: &SaddleProblem, state: &mut SolverState, alpha: f64) {
        let z = state.z.clone();
        let fz = state.eval(problem, &z);
        let half = gda_point(problem, &z, &fz, alpha);
        let fh = state.eval(problem, &half);
        let next = gda_point(problem, &z, &fh, alpha);
        state.z_half = Some(half);
        state.advance(next);
    }
    fn ergodic_sample<'a>(&self, state: &'a SolverState) -> &'a Vector {
        state.z_half.as_ref().unwrap_or(&state.z)
    }
}

/// Name → method lookup.
#[derive(Debug, Clone, Default)]
pub struct MethodRegistry {
    methods: BTreeMap<String, Arc<dyn SaddleMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Gda));
        r.register(Arc::new(Ogda));
        r.register(Arc::new(ExtraGradient));
        r
    }

    /// Adds or replaces a method under its own name.
    pub fn register(&mut self, method: Arc<dyn SaddleMethod>) {
        self.methods.insert(method.name().to_ascii_lowercase(), method);
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Result<Arc<dyn SaddleMethod>> {
        self.methods
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn SaddleMethod>> {
        self.methods.values()
    }
}

fn default_stop_tol() -> f64 {
    DEFAULT_STOP_TOL
}

fn default_record_every() -> usize {
    1
}

/// User-facing solver settings, validated against a problem by
/// [`SolverConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: String,
    /// Step size; defaults to `0.9 ×` the method's bound.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Accept a step size outside the theorem's range.
    #[serde(default)]
    pub allow_unsafe_step: bool,
}

impl SolverConfig {
    pub fn new(method: impl Into<String>, max_iters: usize) -> Self {
        Self {
            method: method.into(),
            alpha: None,
            max_iters,
            stop_tol: DEFAULT_STOP_TOL,
            record_every: 1,
            allow_unsafe_step: false,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn resolve(&self, registry: &MethodRegistry, problem: &SaddleProblem) -> Result<ResolvedConfig> {
        let method = registry.get(&self.method)?;
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("stop_tol {} < 0", self.stop_tol)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        let alpha = resolve_step(method.as_ref(), problem.kappa(), self.alpha, self.allow_unsafe_step)?;
        Ok(ResolvedConfig {
            method,
            alpha,
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            record_every: self.record_every,
        })
    }
}

/// Validates (or defaults) `α` for `method` given the operator's `κ`.
///
/// Methods without a bound of their own default to the OGDA range.
pub fn resolve_step(method: &dyn SaddleMethod, kappa: f64, alpha: Option<f64>, allow_unsafe: bool) -> Result<f64> {
    let bound = method.step_bound(kappa);
    let alpha = match alpha {
        Some(a) => a,
        None => {
            let b = bound.unwrap_or(1.0 / (2.0 * kappa));
            if b.is_finite() {
                DEFAULT_STEP_FRACTION * b
            } else {
                1.0
            }
        }
    };
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::StepSize {
            method: method.name().into(),
            alpha,
            bound: bound.unwrap_or(f64::INFINITY),
        });
    }
    if let Some(b) = bound {
        if !(alpha < b) && !allow_unsafe {
            return Err(Error::StepSize {
                method: method.name().into(),
                alpha,
                bound: b,
            });
        }
    }
    Ok(alpha)
}

#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub method: Arc<dyn SaddleMethod>,
    pub alpha: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub record_every: usize,
}

/// Known saddle point used for distances and rate certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub z_star: Vector,
    pub f_star: f64,
}

/// Running mean of the points prescribed by the ergodic rate theorems.
#[derive(Debug, Clone)]
pub struct ErgodicAverage {
    sum: Vector,
    count: usize,
}

impl ErgodicAverage {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: Vector::zeros(dim),
            count: 0,
        }
    }

    pub fn push(&mut self, p: &Vector) {
        self.sum += p;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<Vector> {
        (self.count > 0).then(|| &self.sum / self.count as f64)
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub z: Vector,
    /// Mid-point that produced `z` (extra-gradient only).
    pub z_half: Option<Vector>,
    pub ergodic: Option<Vector>,
    pub f_value: f64,
    pub vi_residual: f64,
    pub step_norm: Option<f64>,
    pub dist_to_ref: Option<f64>,
    /// `|f(ẑ_T) − f*|` for the ergodic average `ẑ_T`.
    pub ergodic_gap: Option<f64>,
    /// `‖z₀ − z*‖² / (2αT)`.
    pub certificate: Option<f64>,
    pub delta_k: Option<f64>,
    pub grad_calls: u64,
}

/// Receives trace records as the run progresses.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) -> Result<()> {
        Ok(())
    }
}

/// Keeps every record in memory.
#[derive(Debug, Default, Clone)]
pub struct MemoryRecorder {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for MemoryRecorder {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Float formatting used in every CSV: shortest round-trip exponent form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Streams records to CSV with the [`TRACE_COLUMNS`] header.
pub struct CsvRecorder<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> CsvRecorder<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(TRACE_COLUMNS)?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> Result<W> {
        self.out
            .into_inner()
            .map_err(|e| Error::Io(e.error().to_string()))
    }
}

impl<W: Write> TraceSink for CsvRecorder<W> {
    fn record(&mut self, r: &TraceRecord) -> Result<()> {
        self.out.write_record([
            r.iter.to_string(),
            fmt_f64(r.f_value),
            fmt_f64(r.vi_residual),
            opt(r.step_norm),
            opt(r.dist_to_ref),
            opt(r.ergodic_gap),
            opt(r.delta_k),
        ])?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Forwards every record to two sinks.
pub struct Tee<'a> {
    pub first: &'a mut dyn TraceSink,
    pub second: &'a mut dyn TraceSink,
}

impl TraceSink for Tee<'_> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.first.record(rec)?;
        self.second.record(rec)
    }
    fn finish(&mut self) -> Result<()> {
        self.first.finish()?;
        self.second.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub alpha: f64,
    pub iterations: usize,
    pub grad_calls: u64,
    pub converged: bool,
    pub final_f: f64,
    pub final_residual: f64,
    pub final_z: Vec<f64>,
    pub ergodic_z: Option<Vec<f64>>,
    pub ergodic_f: Option<f64>,
}

/// `Δ_k` from consecutive iterates and operator values.
///
/// `(1/2α)‖z_k − z*‖² + (κ/2)‖z_k − z_{k−1}‖² − (z_k − z*)ᵀ(F(z_k) − F(z_{k−1}))`
fn delta_value(z: &Vector, z_prev: &Vector, fz: &Vector, f_prev: &Vector, z_star: &Vector, alpha: f64, kappa: f64) -> f64 {
    let e = z - z_star;
    e.norm_squared() / (2.0 * alpha) + 0.5 * kappa * (z - z_prev).norm_squared() - e.dot(&(fz - f_prev))
}

/// Runs `cfg.method` from `z0` for up to `cfg.max_iters` iterations, stopping
/// early once the natural-map residual is at most `cfg.stop_tol` (when
/// positive). Records iteration 0 and every `record_every`-th iteration, and
/// always the last one.
pub fn run(
    problem: &SaddleProblem,
    cfg: &ResolvedConfig,
    z0: &Vector,
    reference: Option<&Reference>,
    sink: &mut dyn TraceSink,
) -> Result<RunSummary> {
    check_dim(problem.dim(), z0.len())?;
    if let Some(r) = reference {
        check_dim(problem.dim(), r.z_star.len())?;
    }
    let method = cfg.method.as_ref();
    let alpha = cfg.alpha;
    let kappa = problem.kappa();
    let mut state = SolverState::new(z0.clone());
    let mut avg = ErgodicAverage::new(problem.dim());
    let r0 = reference.map(|r| (z0 - &r.z_star).norm_squared());
    let track_delta = method.tracks_delta() && reference.is_some();

    // diagnostic operator values, not counted as gradient calls
    let mut f_diag = problem.operator_unchecked(z0);
    let mut residual = problem.natural_map_residual(z0, &f_diag);
    let first = TraceRecord {
        iter: 0,
        z: z0.clone(),
        z_half: None,
        ergodic: None,
        f_value: problem.value(z0),
        vi_residual: residual,
        step_norm: None,
        dist_to_ref: reference.map(|r| (z0 - &r.z_star).norm()),
        ergodic_gap: None,
        certificate: None,
        delta_k: track_delta.then(|| r0.unwrap() / (2.0 * alpha)),
        grad_calls: 0,
    };
    sink.record(&first)?;

    let mut converged = cfg.stop_tol > 0.0 && residual <= cfg.stop_tol;
    let mut last_recorded = 0;
    while !converged && state.iter < cfg.max_iters {
        method.step(problem, &mut state, alpha);
        let k = state.iter;
        let norm = state.z.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            sink.finish()?;
            return Err(Error::Diverged { iter: k, norm });
        }
        avg.push(method.ergodic_sample(&state));
        let f_new = problem.operator_unchecked(&state.z);
        residual = problem.natural_map_residual(&state.z, &f_new);
        converged = cfg.stop_tol > 0.0 && residual <= cfg.stop_tol;
        let record_now = k.is_multiple_of(cfg.record_every) || converged || k == cfg.max_iters;
        if record_now {
            let ergodic = avg.mean().expect("at least one sample");
            let (ergodic_gap, certificate) = match reference {
                Some(r) => (
                    Some((problem.value(&ergodic) - r.f_star).abs()),
                    Some(r0.unwrap() / (2.0 * alpha * k as f64)),
                ),
                None => (None, None),
            };
            let delta_k = if track_delta {
                let r = reference.unwrap();
                Some(delta_value(&state.z, &state.z_prev, &f_new, &f_diag, &r.z_star, alpha, kappa))
            } else {
                None
            };
            let rec = TraceRecord {
                iter: k,
                z: state.z.clone(),
                z_half: state.z_half.clone(),
                ergodic: Some(ergodic),
                f_value: problem.value(&state.z),
                vi_residual: residual,
                step_norm: Some((&state.z - &state.z_prev).norm()),
                dist_to_ref: reference.map(|r| (&state.z - &r.z_star).norm()),
                ergodic_gap,
                certificate,
                delta_k,
                grad_calls: state.grad_calls,
            };
            sink.record(&rec)?;
            last_recorded = k;
        }
        f_diag = f_new;
    }
    debug_assert!(state.iter == 0 || last_recorded == state.iter);
    sink.finish()?;
    let ergodic = avg.mean();
    Ok(RunSummary {
        method: method.name().to_string(),
        alpha,
        iterations: state.iter,
        grad_calls: state.grad_calls,
        converged,
        final_f: problem.value(&state.z),
        final_residual: residual,
        final_z: state.z.as_slice().to_vec(),
        ergodic_f: ergodic.as_ref().map(|e| problem.value(e)),
        ergodic_z: ergodic.map(|e| e.as_slice().to_vec()),
    })
}

/// Outcome of checking an inequality `lhs <= rhs + slack` at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub checked: usize,
    /// Smallest `rhs − lhs` seen (negative means the inequality was violated
    /// by that much before slack).
    pub worst_margin: f64,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

impl InequalityReport {
    fn new() -> Self {
        Self {
            checked: 0,
            worst_margin: f64::INFINITY,
            first_violation: None,
            passed: true,
        }
    }

    fn observe(&mut self, index: usize, lhs: f64, rhs: f64) {
        self.checked += 1;
        let margin = rhs - lhs;
        self.worst_margin = self.worst_margin.min(margin);
        if !(lhs <= rhs + INEQUALITY_SLACK) {
            self.passed = false;
            self.first_violation.get_or_insert(index);
        }
    }
}

/// Iterates `z_0, …, z_T` and mid-points from a trace recorded at every
/// iteration. Fails if any iteration is missing.
pub fn consecutive_iterates(records: &[TraceRecord]) -> Result<(Vec<Vector>, Vec<Option<Vector>>)> {
    if records.is_empty() {
        return Err(Error::MissingIterates("empty trace".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if r.iter != i {
            return Err(Error::MissingIterates(format!(
                "record {i} holds iteration {}; record every iteration",
                r.iter
            )));
        }
    }
    Ok((
        records.iter().map(|r| r.z.clone()).collect(),
        records.iter().map(|r| r.z_half.clone()).collect(),
    ))
}

/// `Δ_k` along consecutive OGDA iterates `z_0, …, z_T`, with `z_{−1} = z_0`.
pub fn delta_sequence(problem: &SaddleProblem, iterates: &[Vector], z_star: &Vector, alpha: f64) -> Result<Vec<f64>> {
    if iterates.is_empty() {
        return Err(Error::MissingIterates("no iterates".into()));
    }
    let kappa = problem.kappa();
    let fs: Vec<Vector> = iterates.iter().map(|z| problem.operator(z)).collect::<Result<_>>()?;
    Ok((0..iterates.len())
        .map(|k| {
            let p = k.saturating_sub(1);
            delta_value(&iterates[k], &iterates[p], &fs[k], &fs[p], z_star, alpha, kappa)
        })
        .collect())
}

/// Checks `Δ_{k+1} <= Δ_k − η‖z_{k+1} − z_k‖²` with `η = 1/(2α) − κ`.
pub fn delta_descent_check(problem: &SaddleProblem, iterates: &[Vector], z_star: &Vector, alpha: f64) -> Result<InequalityReport> {
    let deltas = delta_sequence(problem, iterates, z_star, alpha)?;
    let eta = 1.0 / (2.0 * alpha) - problem.kappa();
    let mut rep = InequalityReport::new();
    for k in 0..deltas.len().saturating_sub(1) {
        let step = (&iterates[k + 1] - &iterates[k]).norm_squared();
        rep.observe(k, deltas[k + 1], deltas[k] - eta * step);
    }
    Ok(rep)
}

/// `ρ = (1 − α²κ²)/(2α)`.
pub fn eg_rho(alpha: f64, kappa: f64) -> f64 {
    (1.0 - alpha * alpha * kappa * kappa) / (2.0 * alpha)
}

/// Checks `‖z_{k+1} − z*‖² <= ‖z_k − z*‖² − 2αρ‖z_{k+1} − z_{k+½}‖²` along an
/// extra-gradient run. `halves[k]` is the mid-point of the step `k → k+1`.
pub fn eg_contraction_check(iterates: &[Vector], halves: &[Vector], z_star: &Vector, alpha: f64, kappa: f64) -> Result<InequalityReport> {
    if halves.len() + 1 != iterates.len() {
        return Err(Error::MissingIterates(format!(
            "{} iterates need {} mid-points, got {}",
            iterates.len(),
            iterates.len().saturating_sub(1),
            halves.len()
        )));
    }
    let rho = eg_rho(alpha, kappa);
    let mut rep = InequalityReport::new();
    for k in 0..halves.len() {
        let lhs = (&iterates[k + 1] - z_star).norm_squared();
        let rhs = (&iterates[k] - z_star).norm_squared()
            - 2.0 * alpha * rho * (&iterates[k + 1] - &halves[k]).norm_squared();
        rep.observe(k, lhs, rhs);
    }
    Ok(rep)
}

/// Convenience wrapper: contraction check straight from a full EG trace.
pub fn eg_contraction_from_trace(records: &[TraceRecord], z_star: &Vector, alpha: f64, kappa: f64) -> Result<InequalityReport> {
    let (zs, hs) = consecutive_iterates(records)?;
    let halves: Vec<Vector> = hs
        .into_iter()
        .skip(1)
        .map(|h| h.ok_or_else(|| Error::MissingIterates("trace has no mid-points".into())))
        .collect::<Result<_>>()?;
    eg_contraction_check(&zs, &halves, z_star, alpha, kappa)
}

/// Checks `|f(ẑ_T) − f*| <= ‖z₀ − z*‖²/(2αT)` on every record that carries both
/// sides.
pub fn certificate_check(records: &[TraceRecord]) -> InequalityReport {
    let mut rep = InequalityReport::new();
    for r in records {
        if let (Some(gap), Some(bound)) = (r.ergodic_gap, r.certificate) {
            rep.observe(r.iter, gap, bound);
        }
    }
    rep
}

/// Checks the rate certificate, the `Δ_k` descent and the extra-gradient
/// contraction as records stream past, without keeping the trace. Every
/// iteration must be recorded.
#[derive(Debug, Clone)]
pub struct InequalitySink {
    z_star: Vector,
    alpha: f64,
    eta: f64,
    rho: f64,
    prev: Option<(usize, Vector, Option<f64>)>,
    pub certificate: InequalityReport,
    pub delta: InequalityReport,
    pub contraction: InequalityReport,
}

impl InequalitySink {
    pub fn new(z_star: Vector, alpha: f64, kappa: f64) -> Self {
        Self {
            z_star,
            alpha,
            eta: 1.0 / (2.0 * alpha) - kappa,
            rho: eg_rho(alpha, kappa),
            prev: None,
            certificate: InequalityReport::new(),
            delta: InequalityReport::new(),
            contraction: InequalityReport::new(),
        }
    }
}

impl TraceSink for InequalitySink {
    fn record(&mut self, r: &TraceRecord) -> Result<()> {
        if let (Some(gap), Some(bound)) = (r.ergodic_gap, r.certificate) {
            self.certificate.observe(r.iter, gap, bound);
        }
        if let Some((k, z_prev, delta_prev)) = &self.prev {
            if r.iter != k + 1 {
                return Err(Error::MissingIterates(format!(
                    "iteration {} follows {k}; record every iteration",
                    r.iter
                )));
            }
            if let (Some(d_prev), Some(d)) = (delta_prev, r.delta_k) {
                let step = (&r.z - z_prev).norm_squared();
                self.delta.observe(*k, d, d_prev - self.eta * step);
            }
            if let Some(h) = &r.z_half {
                let lhs = (&r.z - &self.z_star).norm_squared();
                let rhs = (z_prev - &self.z_star).norm_squared()
                    - 2.0 * self.alpha * self.rho * (&r.z - h).norm_squared();
                self.contraction.observe(*k, lhs, rhs);
            }
        }
        self.prev = Some((r.iter, r.z.clone(), r.delta_k));
        Ok(())
    }
}
