//! Running a validated [`Plan`]: instance construction, certified references,
//! per-method runs and the files they produce.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use saddle_core::allocation::{AllocationAgent, AllocationCsv, AllocationReference};
use saddle_core::catalog::{
    AllocationInstance, Built, ConsensusInstance, DrawnParameters, Instance, InstanceSpec, PresetKind,
};
use saddle_core::consensus::{ConsensusAgent, ConsensusCsv, ConsensusReference};
use saddle_core::network::{DistributedRun, NetworkMethod, PrimalDualAgent, Schedule, Simulator};
use saddle_core::oracle::KKTReference;
use saddle_core::problem::SaddleProblem;
use saddle_core::solvers::{self, fmt_f64, CsvRecorder, MethodRegistry, Reference, SolverConfig, DIVERGENCE_NORM};
use saddle_core::Vector;
use serde::Serialize;

use crate::config::Plan;
use crate::error::{HarnessError, Result};

/// Columns of `progress_<method>.csv`.
pub const PROGRESS_COLUMNS: [&str; 10] = [
    "iter",
    "grad_calls",
    "local_grad_calls",
    "objective_sum",
    "objective_error",
    "constraint_residual",
    "dual_spread",
    "vi_residual",
    "ergodic_gap",
    "certificate",
];

/// A built instance with its certified reference.
#[derive(Debug, Clone)]
pub enum Prepared {
    Saddle(Instance),
    Consensus {
        inst: ConsensusInstance,
        stacked: SaddleProblem,
        reference: ConsensusReference,
    },
    Allocation {
        inst: AllocationInstance,
        stacked: SaddleProblem,
        reference: AllocationReference,
    },
}

impl Prepared {
    pub fn build(plan: &Plan) -> Result<Self> {
        Ok(match plan.preset.build(plan.seed)? {
            Built::Saddle(i) => Prepared::Saddle(i),
            Built::Consensus(inst) => {
                let reference = inst.problem.saddle_from_primal(&inst.x_star)?;
                let stacked = inst.problem.stacked_problem();
                Prepared::Consensus { inst, stacked, reference }
            }
            Built::Allocation(inst) => {
                let mu = Vector::from_column_slice(&inst.kkt.mu);
                let reference = inst.problem.saddle_from_primal(&inst.y_star(), &mu)?;
                let stacked = inst.problem.stacked_problem();
                Prepared::Allocation { inst, stacked, reference }
            }
        })
    }

    pub fn kind(&self) -> PresetKind {
        match self {
            Prepared::Saddle(_) => PresetKind::Saddle,
            Prepared::Consensus { .. } => PresetKind::Consensus,
            Prepared::Allocation { .. } => PresetKind::Allocation,
        }
    }

    /// The centralised problem: the instance itself or the stacked Lagrangian.
    pub fn problem(&self) -> &SaddleProblem {
        match self {
            Prepared::Saddle(i) => &i.problem,
            Prepared::Consensus { stacked, .. } | Prepared::Allocation { stacked, .. } => stacked,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            Prepared::Saddle(i) => i.problem.kappa(),
            Prepared::Consensus { inst, .. } => inst.problem.kappa(),
            Prepared::Allocation { inst, .. } => inst.problem.kappa(),
        }
    }

    /// Saddle point and value of the centralised problem, when known.
    pub fn reference(&self) -> Option<Reference> {
        match self {
            Prepared::Saddle(i) => i.reference.clone(),
            Prepared::Consensus { reference, .. } => Some(Reference {
                z_star: reference.z_star.clone(),
                f_star: reference.value,
            }),
            Prepared::Allocation { reference, .. } => Some(Reference {
                z_star: reference.z_star.clone(),
                f_star: reference.value,
            }),
        }
    }

    /// Start point of the centralised problem.
    pub fn z0(&self) -> Vector {
        match self {
            Prepared::Saddle(i) => i.z0.clone(),
            Prepared::Consensus { inst, .. } => {
                let (x, v) = inst.problem.default_start();
                inst.problem.stack(&x, &v)
            }
            Prepared::Allocation { inst, .. } => inst.problem.stack(&inst.problem.default_start()),
        }
    }

    /// Step for `method`: the explicit one, else the shared comparison step,
    /// else `None` for the method's own default.
    pub fn alpha(&self, plan: &Plan, method: &str) -> Option<f64> {
        if plan.alpha.is_some() {
            return plan.alpha;
        }
        if !plan.compare {
            return None;
        }
        match self {
            Prepared::Saddle(i) => Some(i.alpha),
            _ => {
                let shared = NetworkMethod::Ogda.resolve_step(self.kappa(), None, false).ok();
                log::debug!("{method}: shared step {shared:?}");
                shared
            }
        }
    }

    fn spec(&self) -> &InstanceSpec {
        match self {
            Prepared::Saddle(i) => &i.spec,
            Prepared::Consensus { inst, .. } => &inst.spec,
            Prepared::Allocation { inst, .. } => &inst.spec,
        }
    }

    fn drawn(&self) -> &DrawnParameters {
        match self {
            Prepared::Saddle(i) => &i.drawn,
            Prepared::Consensus { inst, .. } => &inst.drawn,
            Prepared::Allocation { inst, .. } => &inst.drawn,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub alpha: f64,
    pub iterations: usize,
    /// Operator evaluations (network-wide for distributed runs).
    pub grad_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_grad_calls: Option<u64>,
    pub converged: bool,
    /// `f(z_k)` for centralised problems, `Σ f_i` / `Σ h_i` for networks.
    pub final_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_error: Option<f64>,
    pub final_vi_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ergodic_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_spread: Option<f64>,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodSummary {
    fn failed(method: &str, err: &saddle_core::Error) -> Self {
        Self {
            method: method.to_string(),
            alpha: f64::NAN,
            iterations: 0,
            grad_calls: 0,
            local_grad_calls: None,
            converged: false,
            final_objective: f64::NAN,
            objective_error: None,
            final_vi_residual: f64::NAN,
            ergodic_gap: None,
            certificate: None,
            constraint_residual: None,
            dual_spread: None,
            wall_time_s: 0.0,
            files: Vec::new(),
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub preset: String,
    pub seed: u64,
    pub kind: PresetKind,
    pub kappa: f64,
    pub wall_time_s: f64,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceFile {
    pub kind: PresetKind,
    /// How the reference was obtained.
    pub source: String,
    /// `f(z*)`, or the Lagrangian value for networks.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub vi_residual: f64,
    pub z_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KKTReference>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceFile {
    pub preset: String,
    pub seed: u64,
    pub kind: PresetKind,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_halvings: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redraws: Option<usize>,
    pub spec: InstanceSpec,
    pub drawn: DrawnParameters,
}

/// Everything a solve produces.
#[derive(Debug)]
pub struct Output {
    pub summary: Summary,
    pub reference: Option<ReferenceFile>,
    pub instance: InstanceFile,
    /// CSV file name to contents.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Methods that stopped with an error.
    pub failures: Vec<(String, saddle_core::Error)>,
}

impl Output {
    /// The first failure as a harness error, divergence taking precedence.
    pub fn error(&self) -> Option<HarnessError> {
        let pick = self
            .failures
            .iter()
            .find(|(_, e)| matches!(e, saddle_core::Error::Diverged { .. }))
            .or_else(|| self.failures.first())?;
        Some(match &pick.1 {
            e @ saddle_core::Error::Diverged { .. } => HarnessError::Divergence {
                method: pick.0.clone(),
                source: e.clone(),
            },
            e => HarnessError::Core(e.clone()),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let put = |name: &str, bytes: &[u8]| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| HarnessError::io(path, e))
        };
        for (name, bytes) in &self.files {
            put(name, bytes)?;
        }
        put("summary.toml", to_toml(&self.summary)?.as_bytes())?;
        put("instance.toml", to_toml(&self.instance)?.as_bytes())?;
        if let Some(r) = &self.reference {
            put("reference.toml", to_toml(r)?.as_bytes())?;
        }
        Ok(())
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| HarnessError::Serialize(e.to_string()))
}

/// Builds the instance and runs every planned method, in parallel.
pub fn solve(plan: &Plan) -> Result<Output> {
    let start = Instant::now();
    let prepared = Prepared::build(plan)?;
    let results: Vec<(MethodSummary, Vec<(String, Vec<u8>)>, Option<saddle_core::Error>)> = plan
        .methods
        .par_iter()
        .map(|m| {
            let alpha = prepared.alpha(plan, m);
            let out = match &prepared {
                Prepared::Saddle(inst) => run_saddle(plan, inst, m, alpha),
                Prepared::Consensus { inst, stacked, reference } => {
                    let case = ConsensusCase { inst, stacked, reference };
                    run_network(&case, plan, m, alpha)
                }
                Prepared::Allocation { inst, stacked, reference } => {
                    let case = AllocationCase { inst, stacked, reference };
                    run_network(&case, plan, m, alpha)
                }
            };
            match out {
                Ok(r) => r,
                Err(e) => (MethodSummary::failed(m, &e), Vec::new(), Some(e)),
            }
        })
        .collect();

    let mut files = BTreeMap::new();
    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for (summary, fs, err) in results {
        if let Some(e) = err {
            log::error!("{}: {e}", summary.method);
            failures.push((summary.method.clone(), e));
        }
        files.extend(fs);
        methods.push(summary);
    }
    Ok(Output {
        summary: Summary {
            preset: plan.preset.name().to_string(),
            seed: plan.seed,
            kind: prepared.kind(),
            kappa: prepared.kappa(),
            wall_time_s: start.elapsed().as_secs_f64(),
            methods,
        },
        reference: reference_file(&prepared),
        instance: instance_file(plan, &prepared),
        files,
        failures,
    })
}

fn reference_file(p: &Prepared) -> Option<ReferenceFile> {
    Some(match p {
        Prepared::Saddle(i) => {
            let r = i.reference.as_ref()?;
            ReferenceFile {
                kind: PresetKind::Saddle,
                source: "closed form".into(),
                value: r.f_star,
                objective: None,
                vi_residual: i.problem.vi_residual(&r.z_star).ok()?,
                z_star: r.z_star.as_slice().to_vec(),
                x_star: None,
                kkt: None,
            }
        }
        Prepared::Consensus { inst, reference, .. } => ReferenceFile {
            kind: PresetKind::Consensus,
            source: "primal oracle, dual by Laplacian completion".into(),
            value: reference.value,
            objective: Some(inst.problem.objective_sum(&vec![inst.x_star.clone(); inst.problem.n()])),
            vi_residual: reference.vi_residual,
            z_star: reference.z_star.as_slice().to_vec(),
            x_star: Some(inst.x_star.as_slice().to_vec()),
            kkt: None,
        },
        Prepared::Allocation { inst, reference, .. } => ReferenceFile {
            kind: PresetKind::Allocation,
            source: "KKT bisection oracle, auxiliary by Laplacian completion".into(),
            value: reference.value,
            objective: Some(inst.kkt.objective),
            vi_residual: reference.vi_residual,
            z_star: reference.z_star.as_slice().to_vec(),
            x_star: None,
            kkt: Some(inst.kkt.clone()),
        },
    })
}

fn instance_file(plan: &Plan, p: &Prepared) -> InstanceFile {
    let (alpha, alpha_halvings, redraws) = match p {
        Prepared::Saddle(i) => (Some(i.alpha), Some(i.alpha_halvings), None),
        Prepared::Consensus { .. } => (None, None, None),
        Prepared::Allocation { inst, .. } => (None, None, Some(inst.redraws)),
    };
    InstanceFile {
        preset: plan.preset.name().to_string(),
        seed: plan.seed,
        kind: p.kind(),
        kappa: p.kappa(),
        alpha,
        alpha_halvings,
        redraws,
        spec: p.spec().clone(),
        drawn: p.drawn().clone(),
    }
}

type MethodResult = saddle_core::Result<(MethodSummary, Vec<(String, Vec<u8>)>, Option<saddle_core::Error>)>;

fn run_saddle(plan: &Plan, inst: &Instance, method: &str, alpha: Option<f64>) -> MethodResult {
    let t = Instant::now();
    let mut cfg = SolverConfig::new(method, plan.iters)
        .with_stop_tol(plan.stop_tol)
        .with_record_every(plan.record_every());
    cfg.alpha = alpha;
    cfg.allow_unsafe_step = plan.allow_unsafe_step;
    let resolved = cfg.resolve(&MethodRegistry::builtin(), &inst.problem)?;
    let mut rec = CsvRecorder::new(Vec::new())?;
    let outcome = solvers::run(&inst.problem, &resolved, &inst.z0, inst.reference.as_ref(), &mut rec);
    let name = format!("trace_{method}.csv");
    let bytes = rec.into_inner()?;
    let s = match outcome {
        Ok(s) => s,
        Err(e) => {
            let mut summary = MethodSummary::failed(method, &e);
            summary.alpha = resolved.alpha;
            summary.files.push(name.clone());
            return Ok((summary, vec![(name, bytes)], Some(e)));
        }
    };
    let f_star = inst.reference.as_ref().map(|r| r.f_star);
    let r0 = inst.reference.as_ref().map(|r| (&inst.z0 - &r.z_star).norm_squared());
    let summary = MethodSummary {
        method: method.to_string(),
        alpha: s.alpha,
        iterations: s.iterations,
        grad_calls: s.grad_calls,
        local_grad_calls: None,
        converged: s.converged,
        final_objective: s.final_f,
        objective_error: f_star.map(|f| (s.final_f - f).abs()),
        final_vi_residual: s.final_residual,
        ergodic_gap: f_star.zip(s.ergodic_f).map(|(f, e)| (e - f).abs()),
        certificate: r0
            .filter(|_| s.iterations > 0)
            .map(|r| r / (2.0 * s.alpha * s.iterations as f64)),
        constraint_residual: None,
        dual_spread: None,
        wall_time_s: t.elapsed().as_secs_f64(),
        files: vec![name.clone()],
        error: None,
    };
    Ok((summary, vec![(name, bytes)], None))
}

/// The parts of a networked problem the run loop needs.
trait NetworkCase: Sync {
    type Agent: PrimalDualAgent;
    type Csv;

    fn start(&self, method: NetworkMethod, alpha: Option<f64>, schedule: Schedule)
        -> saddle_core::Result<(DistributedRun<Self::Agent>, f64)>;
    fn stacked(&self) -> &SaddleProblem;
    fn z_star(&self) -> &Vector;
    fn value_star(&self) -> f64;
    fn objective(&self, sim: &Simulator<Self::Agent>) -> f64;
    fn objective_star(&self) -> f64;
    fn constraint(&self, sim: &Simulator<Self::Agent>) -> f64;
    fn dual_spread(&self, sim: &Simulator<Self::Agent>) -> Option<f64>;
    fn csv(&self) -> saddle_core::Result<Self::Csv>;
    fn write_agents(&self, csv: &mut Self::Csv, iter: usize, sim: &Simulator<Self::Agent>) -> saddle_core::Result<()>;
    fn finish(&self, csv: Self::Csv) -> saddle_core::Result<Vec<u8>>;
}

struct ConsensusCase<'a> {
    inst: &'a ConsensusInstance,
    stacked: &'a SaddleProblem,
    reference: &'a ConsensusReference,
}

impl NetworkCase for ConsensusCase<'_> {
    type Agent = ConsensusAgent;
    type Csv = ConsensusCsv<Vec<u8>>;

    fn start(
        &self,
        method: NetworkMethod,
        alpha: Option<f64>,
        schedule: Schedule,
    ) -> saddle_core::Result<(DistributedRun<ConsensusAgent>, f64)> {
        self.inst.problem.distributed_run(method, alpha, None, schedule)
    }
    fn stacked(&self) -> &SaddleProblem {
        self.stacked
    }
    fn z_star(&self) -> &Vector {
        &self.reference.z_star
    }
    fn value_star(&self) -> f64 {
        self.reference.value
    }
    fn objective(&self, sim: &Simulator<ConsensusAgent>) -> f64 {
        let x: Vec<Vector> = sim.agents().iter().map(|a| a.x.clone()).collect();
        self.inst.problem.objective_sum(&x)
    }
    fn objective_star(&self) -> f64 {
        self.inst
            .problem
            .objective_sum(&vec![self.inst.x_star.clone(); self.inst.problem.n()])
    }
    fn constraint(&self, sim: &Simulator<ConsensusAgent>) -> f64 {
        let x: Vec<Vector> = sim.agents().iter().map(|a| a.x.clone()).collect();
        self.inst.problem.consensus_residual(&x)
    }
    fn dual_spread(&self, _: &Simulator<ConsensusAgent>) -> Option<f64> {
        None
    }
    fn csv(&self) -> saddle_core::Result<Self::Csv> {
        ConsensusCsv::new(Vec::new(), self.inst.problem.m())
    }
    fn write_agents(&self, csv: &mut Self::Csv, iter: usize, sim: &Simulator<ConsensusAgent>) -> saddle_core::Result<()> {
        csv.write(&self.inst.problem, iter, &self.inst.problem.state(sim))
    }
    fn finish(&self, csv: Self::Csv) -> saddle_core::Result<Vec<u8>> {
        csv.finish()
    }
}

struct AllocationCase<'a> {
    inst: &'a AllocationInstance,
    stacked: &'a SaddleProblem,
    reference: &'a AllocationReference,
}

impl NetworkCase for AllocationCase<'_> {
    type Agent = AllocationAgent;
    type Csv = AllocationCsv<Vec<u8>>;

    fn start(
        &self,
        method: NetworkMethod,
        alpha: Option<f64>,
        schedule: Schedule,
    ) -> saddle_core::Result<(DistributedRun<AllocationAgent>, f64)> {
        self.inst.problem.distributed_run(method, alpha, None, schedule)
    }
    fn stacked(&self) -> &SaddleProblem {
        self.stacked
    }
    fn z_star(&self) -> &Vector {
        &self.reference.z_star
    }
    fn value_star(&self) -> f64 {
        self.reference.value
    }
    fn objective(&self, sim: &Simulator<AllocationAgent>) -> f64 {
        let y: Vec<Vector> = sim.agents().iter().map(|a| a.y.clone()).collect();
        self.inst.problem.objective_sum(&y)
    }
    fn objective_star(&self) -> f64 {
        self.inst.kkt.objective
    }
    fn constraint(&self, sim: &Simulator<AllocationAgent>) -> f64 {
        let y: Vec<Vector> = sim.agents().iter().map(|a| a.y.clone()).collect();
        self.inst.problem.feasibility_gap(&y)
    }
    fn dual_spread(&self, sim: &Simulator<AllocationAgent>) -> Option<f64> {
        let l: Vec<Vector> = sim.agents().iter().map(|a| a.lambda.clone()).collect();
        Some(self.inst.problem.dual_spread(&l))
    }
    fn csv(&self) -> saddle_core::Result<Self::Csv> {
        AllocationCsv::new(Vec::new(), &self.inst.problem)
    }
    fn write_agents(&self, csv: &mut Self::Csv, iter: usize, sim: &Simulator<AllocationAgent>) -> saddle_core::Result<()> {
        csv.write(&self.inst.problem, iter, &self.inst.problem.state(sim))
    }
    fn finish(&self, csv: Self::Csv) -> saddle_core::Result<Vec<u8>> {
        csv.finish()
    }
}

struct Progress {
    objective: f64,
    objective_error: f64,
    constraint: f64,
    dual_spread: Option<f64>,
    vi_residual: f64,
    ergodic_gap: Option<f64>,
    certificate: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn run_network<C: NetworkCase>(case: &C, plan: &Plan, method: &str, alpha: Option<f64>) -> MethodResult {
    let t = Instant::now();
    let nm = NetworkMethod::parse(method)?;
    let (mut run, alpha) = case.start(nm, alpha, plan.schedule)?;
    let r0 = (run.stacked() - case.z_star()).norm_squared();
    let every = plan.record_every();
    let mut progress = csv::Writer::from_writer(Vec::new());
    progress.write_record(PROGRESS_COLUMNS)?;
    let mut agents = case.csv()?;
    let mut converged = false;
    let mut failure = None;
    let mut last: Option<Progress> = None;
    loop {
        let k = run.iterations();
        if k % every == 0 || k == plan.iters {
            let sim = run.simulator();
            let z = run.stacked();
            let objective = case.objective(sim);
            let ergodic_gap = run
                .ergodic_mean()
                .map(|e| (case.stacked().value(&e) - case.value_star()).abs());
            let p = Progress {
                objective,
                objective_error: (objective - case.objective_star()).abs(),
                constraint: case.constraint(sim),
                dual_spread: case.dual_spread(sim),
                vi_residual: case.stacked().vi_residual(&z)?,
                ergodic_gap,
                certificate: (k > 0).then(|| r0 / (2.0 * alpha * k as f64)),
            };
            progress.write_record([
                k.to_string(),
                run.gradient_calls().to_string(),
                sim.local_gradient_calls().to_string(),
                fmt_f64(p.objective),
                fmt_f64(p.objective_error),
                fmt_f64(p.constraint),
                opt(p.dual_spread),
                fmt_f64(p.vi_residual),
                opt(p.ergodic_gap),
                opt(p.certificate),
            ])?;
            case.write_agents(&mut agents, k, sim)?;
            converged = plan.stop_tol > 0.0 && p.vi_residual <= plan.stop_tol;
            last = Some(p);
            if converged {
                break;
            }
        }
        if k >= plan.iters {
            break;
        }
        run.step();
        let norm = run.stacked().norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            failure = Some(saddle_core::Error::Diverged { iter: k + 1, norm });
            break;
        }
    }
    let p = last.expect("iteration 0 is always recorded");
    progress.flush()?;
    let progress = progress
        .into_inner()
        .map_err(|e| saddle_core::Error::Io(e.error().to_string()))?;
    let names = [format!("progress_{method}.csv"), format!("agents_{method}.csv")];
    let files = vec![(names[0].clone(), progress), (names[1].clone(), case.finish(agents)?)];
    let summary = MethodSummary {
        method: method.to_string(),
        alpha,
        iterations: run.iterations(),
        grad_calls: run.gradient_calls(),
        local_grad_calls: Some(run.simulator().local_gradient_calls()),
        converged,
        final_objective: p.objective,
        objective_error: Some(p.objective_error),
        final_vi_residual: p.vi_residual,
        ergodic_gap: p.ergodic_gap,
        certificate: p.certificate,
        constraint_residual: Some(p.constraint),
        dual_spread: p.dual_spread,
        wall_time_s: t.elapsed().as_secs_f64(),
        files: names.to_vec(),
        error: failure.as_ref().map(|e| e.to_string()),
    };
    Ok((summary, files, failure))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(preset: &str, iters: usize) -> Plan {
        let mut p = Plan::preset(preset, 0).unwrap();
        p.iters = iters;
        p
    }

    #[test]
    fn saddle_files_and_summary() {
        let out = solve(&plan("quadratic", 50)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(
            out.files.keys().collect::<Vec<_>>(),
            ["trace_eg.csv", "trace_gda.csv", "trace_ogda.csv"]
        );
        let eg = out.summary.method("eg").unwrap();
        assert_eq!(eg.grad_calls, 2 * eg.iterations as u64);
        let header = String::from_utf8(out.files["trace_ogda.csv"].clone()).unwrap();
        assert!(header.starts_with("iter,f_value,vi_residual,step_norm,dist_to_ref,ergodic_gap,delta_k\n"));
        assert!(to_toml(&out.summary).unwrap().contains("[[methods]]"));
        assert!(to_toml(&out.instance).is_ok());
        assert!(to_toml(out.reference.as_ref().unwrap()).is_ok());
    }

    #[test]
    fn network_progress_rows() {
        let mut p = plan("allocation3", 100);
        p.record_every = Some(10);
        let out = solve(&p).unwrap();
        let text = String::from_utf8(out.files["progress_eg.csv"].clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), PROGRESS_COLUMNS.join(","));
        assert_eq!(lines.count(), 11);
        let eg = out.summary.method("eg").unwrap();
        assert_eq!(eg.grad_calls, 200);
        assert_eq!(eg.local_grad_calls, Some(600));
        let kkt = to_toml(out.reference.as_ref().unwrap()).unwrap();
        assert!(kkt.contains("[kkt]"), "{kkt}");
    }

    #[test]
    fn shared_step() {
        let p = plan("consensus5", 10);
        let prepared = Prepared::build(&p).unwrap();
        let a = prepared.alpha(&p, "eg").unwrap();
        assert_eq!(Some(a), prepared.alpha(&p, "ogda"));
        assert!(a < 1.0 / (2.0 * prepared.kappa()));
        let mut q = p.clone();
        q.compare = false;
        assert_eq!(prepared.alpha(&q, "eg"), None);
    }

    #[test]
    fn divergence_is_reported() {
        use saddle_core::catalog::{scalar_bilinear, FnPreset, InstanceSpec};
        use std::sync::Arc;
        let preset = FnPreset {
            name: "spiral",
            description: "xy without constraints",
            kind: PresetKind::Saddle,
            methods: &["gda"],
            iters: 1000,
            negative: false,
            build: |_| {
                Ok(Built::Saddle(Instance {
                    spec: InstanceSpec {
                        family: saddle_core::catalog::Family::Custom,
                        seed: 0,
                        dims: BTreeMap::new(),
                        ranges: BTreeMap::new(),
                    },
                    problem: scalar_bilinear(),
                    z0: Vector::from_element(2, 1.0),
                    alpha: 1.0,
                    alpha_halvings: 0,
                    reference: None,
                    drawn: DrawnParameters::default(),
                }))
            },
        };
        let mut p = plan("quadratic", 1000);
        p.preset = Arc::new(preset);
        p.methods = vec!["gda".into()];
        p.allow_unsafe_step = true;
        let out = solve(&p).unwrap();
        assert!(matches!(out.error(), Some(HarnessError::Divergence { .. })));
        assert_eq!(out.error().unwrap().exit_code(), crate::error::EXIT_DIVERGENCE);
        assert!(out.files.contains_key("trace_gda.csv"));
    }
}
