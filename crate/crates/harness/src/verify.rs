//! The invariant suite behind `saddle verify`.

use saddle_core::network::{DistributedRun, NetworkMethod, PrimalDualAgent, Schedule};
use saddle_core::objectives::SharedObjective;
use saddle_core::oracle::finite_diff_check;
use saddle_core::problem::{SaddleProblem, KAPPA_REL_TOL, MONOTONE_TOL};
use saddle_core::rng::SeededRng;
use saddle_core::sets::ConvexSet;
use saddle_core::solvers::{self, InequalitySink, MethodRegistry, Reference, SolverConfig, SolverState, INEQUALITY_SLACK};
use saddle_core::{Error, Vector};
use serde::Serialize;

use crate::config::Plan;
use crate::error::Result;
use crate::experiment::{solve, Prepared};

pub const PROPERTY_SAMPLES: usize = 1000;
pub const FD_POINTS: usize = 100;
pub const FD_TOL: f64 = 1e-5;
/// Longest run used for the inequality checks.
pub const VERIFY_HORIZON: usize = 20_000;
pub const EQUIVALENCE_ITERS: usize = 1000;
pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const FIXED_POINT_STEPS: usize = 100;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const DETERMINISM_ITERS: usize = 1000;
pub const SCHEDULE_ROUNDS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn error(name: impl Into<String>, err: &Error) -> Self {
        Self::new(name, false, f64::NAN, f64::NAN, err.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub preset: String,
    pub seed: u64,
    pub negative_control: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs every check that applies to the planned preset.
pub fn verify(plan: &Plan) -> Result<VerifyReport> {
    let prepared = Prepared::build(plan)?;
    let seed = plan.seed;
    let mut checks = operator_checks(prepared.problem(), seed);
    match &prepared {
        Prepared::Saddle(_) => {}
        Prepared::Consensus { inst, .. } => {
            let agents = inst.problem.agents().iter().map(|a| (a.objective.clone(), a.set.clone()));
            checks.push(objective_check(agents, seed));
        }
        Prepared::Allocation { inst, .. } => {
            let agents = inst.problem.agents().iter().map(|a| (a.objective.clone(), a.set.clone()));
            checks.push(objective_check(agents, seed));
        }
    }
    if let Some(reference) = prepared.reference() {
        let horizon = plan.iters.min(VERIFY_HORIZON);
        for m in plan.methods.iter().filter(|m| *m != "gda") {
            let alpha = prepared.alpha(plan, m);
            checks.extend(inequality_checks(prepared.problem(), m, alpha, &prepared.z0(), &reference, horizon));
        }
        checks.extend(fixed_point_checks(&prepared, plan, &reference.z_star));
    }
    if prepared.kind() != saddle_core::catalog::PresetKind::Saddle {
        checks.extend(equivalence_checks(&prepared, plan, EQUIVALENCE_ITERS));
        checks.push(schedule_check(&prepared, plan));
    }
    checks.push(determinism_check(plan)?);
    Ok(VerifyReport {
        preset: plan.preset.name().to_string(),
        seed,
        negative_control: plan.preset.negative_control(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Monotonicity, sampled Lipschitz ratio, convex-concavity and gradient
/// finite differences.
pub fn operator_checks(problem: &SaddleProblem, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    match problem.check_monotone(PROPERTY_SAMPLES, seed) {
        Ok(r) => out.push(Check::new(
            "monotone",
            r.passed,
            r.min_inner,
            -MONOTONE_TOL,
            format!("min (F(z1)-F(z2))'(z1-z2) over {} pairs, worst pair #{}", r.samples, r.worst_pair),
        )),
        Err(e) => out.push(Check::error("monotone", &e)),
    }
    let kappa = problem.kappa();
    match problem.estimate_kappa(PROPERTY_SAMPLES, seed) {
        Ok(ratio) => out.push(Check::new(
            "lipschitz",
            true,
            ratio,
            kappa * (1.0 + KAPPA_REL_TOL),
            format!("max sampled |F(z1)-F(z2)|/|z1-z2| against declared kappa {kappa:e}"),
        )),
        Err(Error::LipschitzExceeded { ratio, pair, .. }) => out.push(Check::new(
            "lipschitz",
            false,
            ratio,
            kappa * (1.0 + KAPPA_REL_TOL),
            format!("declared kappa exceeded at pair #{pair}"),
        )),
        Err(e) => out.push(Check::error("lipschitz", &e)),
    }
    let c = problem.check_convex_concave(PROPERTY_SAMPLES, seed);
    out.push(Check::new(
        "convex_concave",
        c.passed,
        c.worst_violation,
        0.0,
        format!("largest midpoint violation over {} samples", c.samples),
    ));
    let g = problem.check_gradients(FD_POINTS, seed, FD_TOL);
    out.push(Check::new(
        "gradient_fd",
        g.passed(),
        g.max_rel_error(),
        FD_TOL,
        format!(
            "central differences at {} points (x: {:e}, y: {:e})",
            FD_POINTS, g.grad_x.max_rel_error, g.grad_y.max_rel_error
        ),
    ));
    out
}

/// Finite differences of every local objective at points of its set.
pub fn objective_check(agents: impl Iterator<Item = (SharedObjective, ConvexSet)>, seed: u64) -> Check {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    let mut worst_agent = 0;
    let mut passed = true;
    for (i, (f, set)) in agents.enumerate() {
        let points: Vec<Vector> = (0..FD_POINTS).map(|_| set.sample(&mut rng)).collect();
        let r = finite_diff_check(|p: &Vector| f.value(p), |p: &Vector| f.gradient(p), &points, FD_TOL);
        passed &= r.passed;
        if r.max_rel_error > worst {
            worst = r.max_rel_error;
            worst_agent = i;
        }
    }
    Check::new(
        "objective_fd",
        passed,
        worst,
        FD_TOL,
        format!("local gradients at {FD_POINTS} points per agent, worst agent {worst_agent}"),
    )
}

/// Rate certificate for OGDA and EG, `Δ_k` descent for OGDA and the
/// per-step contraction for EG, at every iteration of a `horizon`-step run.
pub fn inequality_checks(
    problem: &SaddleProblem,
    method: &str,
    alpha: Option<f64>,
    z0: &Vector,
    reference: &Reference,
    horizon: usize,
) -> Vec<Check> {
    let mut cfg = SolverConfig::new(method, horizon).with_stop_tol(0.0).with_record_every(1);
    cfg.alpha = alpha;
    let resolved = match cfg.resolve(&MethodRegistry::builtin(), problem) {
        Ok(r) => r,
        Err(e) => return vec![Check::error(format!("certificate.{method}"), &e)],
    };
    let mut sink = InequalitySink::new(reference.z_star.clone(), resolved.alpha, problem.kappa());
    if let Err(e) = solvers::run(problem, &resolved, z0, Some(reference), &mut sink) {
        return vec![Check::error(format!("certificate.{method}"), &e)];
    }
    let mut out = vec![report_check(
        format!("certificate.{method}"),
        &sink.certificate,
        "|f(avg_T) - f*| <= |z0 - z*|^2/(2 alpha T)",
    )];
    if method == "ogda" {
        out.push(report_check("delta.ogda", &sink.delta, "Delta_{k+1} <= Delta_k - eta |z_{k+1} - z_k|^2"));
    }
    if method == "eg" {
        out.push(report_check(
            "contraction.eg",
            &sink.contraction,
            "|z_{k+1} - z*|^2 <= |z_k - z*|^2 - 2 alpha rho |z_{k+1} - z_{k+1/2}|^2",
        ));
    }
    out
}

fn report_check(name: impl Into<String>, r: &solvers::InequalityReport, what: &str) -> Check {
    let detail = match r.first_violation {
        Some(k) => format!("{what}; {} steps, first violation at {k}", r.checked),
        None => format!("{what}; {} steps", r.checked),
    };
    Check::new(name, r.passed && r.checked > 0, r.worst_margin, -INEQUALITY_SLACK, detail)
}

fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest drift of `steps` iterations started at `z_star`.
fn centralised_drift(problem: &SaddleProblem, method: &str, alpha: Option<f64>, z_star: &Vector, steps: usize) -> saddle_core::Result<f64> {
    let registry = MethodRegistry::builtin();
    let m = registry.get(method)?;
    let alpha = solvers::resolve_step(m.as_ref(), problem.kappa(), alpha, true)?;
    let mut state = SolverState::new(z_star.clone());
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        m.step(problem, &mut state, alpha);
        drift = drift.max(max_abs_diff(&state.z, z_star));
    }
    Ok(drift)
}

fn distributed_drift<A: PrimalDualAgent>(mut run: DistributedRun<A>, z_star: &Vector, steps: usize) -> f64 {
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        run.step();
        drift = drift.max(max_abs_diff(&run.stacked(), z_star));
    }
    drift
}

/// Every planned method started at the certified saddle point.
pub fn fixed_point_checks(prepared: &Prepared, plan: &Plan, z_star: &Vector) -> Vec<Check> {
    plan.methods
        .iter()
        .map(|m| {
            let name = format!("fixed_point.{m}");
            let alpha = prepared.alpha(plan, m);
            let drift = match prepared {
                Prepared::Saddle(i) => centralised_drift(&i.problem, m, alpha, z_star, FIXED_POINT_STEPS),
                Prepared::Consensus { inst, .. } => inst.problem.unstack(z_star).and_then(|start| {
                    let method = NetworkMethod::parse(m)?;
                    let (run, _) = inst.problem.distributed_run(method, alpha, Some(start), Schedule::InOrder)?;
                    Ok(distributed_drift(run, z_star, FIXED_POINT_STEPS))
                }),
                Prepared::Allocation { inst, reference, .. } => {
                    NetworkMethod::parse(m).and_then(|method| {
                        let (run, _) = inst.problem.distributed_run(
                            method,
                            alpha,
                            Some(reference.point.clone()),
                            Schedule::InOrder,
                        )?;
                        Ok(distributed_drift(run, z_star, FIXED_POINT_STEPS))
                    })
                }
            };
            match drift {
                Ok(d) => Check::new(
                    name,
                    d <= FIXED_POINT_TOL,
                    d,
                    FIXED_POINT_TOL,
                    format!("max |z_k - z*| over {FIXED_POINT_STEPS} steps from z*"),
                ),
                Err(e) => Check::error(name, &e),
            }
        })
        .collect()
}

/// Deviation between a per-agent run and the centralised method on the
/// stacked problem.
pub fn stacked_deviation<A: PrimalDualAgent>(
    mut run: DistributedRun<A>,
    alpha: f64,
    problem: &SaddleProblem,
    iters: usize,
) -> saddle_core::Result<f64> {
    let m = MethodRegistry::builtin().get(run.method().name())?;
    let mut state = SolverState::new(run.stacked());
    let mut dev: f64 = 0.0;
    for _ in 0..iters {
        run.step();
        m.step(problem, &mut state, alpha);
        dev = dev.max(max_abs_diff(&run.stacked(), &state.z));
    }
    Ok(dev)
}

pub fn equivalence_checks(prepared: &Prepared, plan: &Plan, iters: usize) -> Vec<Check> {
    plan.methods
        .iter()
        .map(|m| {
            let name = format!("equivalence.{m}");
            let alpha = prepared.alpha(plan, m);
            let dev = NetworkMethod::parse(m).and_then(|method| match prepared {
                Prepared::Consensus { inst, stacked, .. } => {
                    let (run, a) = inst.problem.distributed_run(method, alpha, None, Schedule::InOrder)?;
                    stacked_deviation(run, a, stacked, iters)
                }
                Prepared::Allocation { inst, stacked, .. } => {
                    let (run, a) = inst.problem.distributed_run(method, alpha, None, Schedule::InOrder)?;
                    stacked_deviation(run, a, stacked, iters)
                }
                Prepared::Saddle(_) => Err(Error::Unsupported("not a network preset".into())),
            });
            match dev {
                Ok(d) => Check::new(
                    name,
                    d <= EQUIVALENCE_TOL,
                    d,
                    EQUIVALENCE_TOL,
                    format!("max per-agent vs stacked deviation over {iters} iterations"),
                ),
                Err(e) => Check::error(name, &e),
            }
        })
        .collect()
}

fn schedule_trajectories<A: PrimalDualAgent>(
    mk: impl Fn(Schedule) -> saddle_core::Result<(DistributedRun<A>, f64)>,
    seed: u64,
) -> saddle_core::Result<bool> {
    let mut finals = Vec::new();
    for s in [Schedule::InOrder, Schedule::Shuffled { seed }, Schedule::Parallel] {
        let (mut run, _) = mk(s)?;
        let mut traj = Vec::with_capacity(SCHEDULE_ROUNDS);
        for _ in 0..SCHEDULE_ROUNDS {
            run.step();
            traj.push(run.stacked());
        }
        finals.push(traj);
    }
    Ok(finals.windows(2).all(|w| w[0] == w[1]))
}

/// Bitwise agreement of in-order, shuffled and parallel agent updates.
pub fn schedule_check(prepared: &Prepared, plan: &Plan) -> Check {
    let mut same = Ok(true);
    for m in &plan.methods {
        let alpha = prepared.alpha(plan, m);
        let r = NetworkMethod::parse(m).and_then(|method| match prepared {
            Prepared::Consensus { inst, .. } => {
                schedule_trajectories(|s| inst.problem.distributed_run(method, alpha, None, s), plan.seed)
            }
            Prepared::Allocation { inst, .. } => {
                schedule_trajectories(|s| inst.problem.distributed_run(method, alpha, None, s), plan.seed)
            }
            Prepared::Saddle(_) => Ok(true),
        });
        same = match (same, r) {
            (Ok(a), Ok(b)) => Ok(a && b),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
    }
    match same {
        Ok(s) => Check::new(
            "schedule_invariance",
            s,
            if s { 0.0 } else { 1.0 },
            0.0,
            format!("in-order, shuffled and parallel rounds identical for {SCHEDULE_ROUNDS} rounds"),
        ),
        Err(e) => Check::error("schedule_invariance", &e),
    }
}

/// Two solves of the same plan produce byte-identical CSV files.
pub fn determinism_check(plan: &Plan) -> Result<Check> {
    let mut short = plan.clone();
    short.iters = plan.iters.min(DETERMINISM_ITERS);
    short.out_dir = None;
    let a = solve(&short)?;
    let b = solve(&short)?;
    let same = !a.files.is_empty() && a.files == b.files;
    let bytes: usize = a.files.values().map(Vec::len).sum();
    Ok(Check::new(
        "determinism",
        same,
        if same { 0.0 } else { 1.0 },
        0.0,
        format!("{} CSV files, {bytes} bytes, {} iterations, two runs", a.files.len(), short.iters),
    ))
}
