//! Acceptance criteria 1 to 9. Each criterion prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use saddle_core::catalog::{consensus5, PresetKind, PresetRegistry};
use saddle_core::network::{NetworkMethod, Schedule};
use saddle_core::Vector;
use saddle_harness::experiment::{solve, Prepared};
use saddle_harness::verify::{
    equivalence_checks, fixed_point_checks, inequality_checks, objective_check, operator_checks, Check,
    EQUIVALENCE_ITERS, VERIFY_HORIZON,
};
use saddle_harness::Plan;

const BILINEAR_BOX_ITERS: usize = 5000;
const BILINEAR_BOX_TARGET: f64 = 1e-6;
const GDA_FLOOR: f64 = 1e-3;
const BILINEAR_BOX_BUDGET_S: f64 = 5.0;
const SLACK: f64 = 1e-10;
const CONSENSUS_ROUNDS: usize = 100_000;
const CONSENSUS_X_TOL: f64 = 1e-4;
const CONSENSUS_RES_TOL: f64 = 1e-6;
const CONSENSUS_BUDGET_S: f64 = 5.0;
const ALLOCATION_CALLS: u64 = 1_000_000;
const ALLOCATION_TOL: f64 = 1e-4;
const DUAL_TOL: f64 = 1e-5;
const ALLOCATION_BUDGET_S: f64 = 60.0;
const DETERMINISM_CAP: usize = 20_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(n: usize, title: &str, o: &Outcome) {
    let mut out = std::io::stdout().lock();
    let tag = if o.passed { "PASS" } else { "FAIL" };
    writeln!(out, "{tag} criterion {n}: {title}: {}", o.detail).unwrap();
}

fn shipped() -> Vec<String> {
    PresetRegistry::builtin()
        .iter()
        .filter(|p| !p.negative_control())
        .map(|p| p.name().to_string())
        .collect()
}

fn plan(name: &str) -> Plan {
    Plan::preset(name, 0).unwrap()
}

fn f_column(csv_bytes: &[u8]) -> Vec<(usize, f64)> {
    let mut r = csv::Reader::from_reader(csv_bytes);
    r.records()
        .map(|row| {
            let row = row.unwrap();
            (row[0].parse().unwrap(), row[1].parse().unwrap())
        })
        .collect()
}

fn summarize(checks: &[Check]) -> (bool, String) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({:e} vs {:e}: {})", c.name, c.measured, c.threshold, c.detail))
        .collect();
    if failed.is_empty() {
        (true, format!("{} checks", checks.len()))
    } else {
        (false, failed.join("; "))
    }
}

fn criterion1() -> Outcome {
    let p = plan("bilinear");
    assert_eq!(p.iters, BILINEAR_BOX_ITERS);
    let t = Instant::now();
    let out = solve(&p).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut passed = out.failures.is_empty() && secs <= BILINEAR_BOX_BUDGET_S;
    let mut parts = Vec::new();
    for m in ["ogda", "eg"] {
        let f = f_column(&out.files[&format!("trace_{m}.csv")]);
        let (k, last) = *f.last().unwrap();
        let ok = k == BILINEAR_BOX_ITERS && last.abs() <= BILINEAR_BOX_TARGET;
        passed &= ok;
        let first = f.iter().find(|(_, v)| v.abs() <= BILINEAR_BOX_TARGET).map(|(k, _)| *k);
        parts.push(format!("{m} |f(z_{k})| = {:.3e} (first <= 1e-6 at {first:?})", last.abs()));
    }
    let gda = f_column(&out.files["trace_gda.csv"]);
    let tail: Vec<f64> = gda
        .iter()
        .filter(|(k, _)| *k > BILINEAR_BOX_ITERS - BILINEAR_BOX_ITERS / 2)
        .map(|(_, v)| v.abs())
        .collect();
    let gda_min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    passed &= tail.len() == BILINEAR_BOX_ITERS / 2 && gda_min > GDA_FLOOR;
    parts.push(format!("gda min |f| over last {} = {gda_min:.3e}", tail.len()));
    let inst = match Prepared::build(&p).unwrap() {
        Prepared::Saddle(i) => i,
        _ => unreachable!(),
    };
    parts.push(format!(
        "kappa = {:.4}, alpha = {} ({} halving), {secs:.2} s",
        inst.problem.kappa(),
        inst.alpha,
        inst.alpha_halvings
    ));
    Outcome {
        passed,
        detail: parts.join(", "),
    }
}

/// Certificate, descent and contraction checks on every shipped preset.
fn inequality_suite() -> BTreeMap<String, Vec<Check>> {
    let mut all = BTreeMap::new();
    for name in shipped() {
        let p = plan(&name);
        let prepared = Prepared::build(&p).unwrap();
        let reference = prepared.reference().expect("shipped presets carry a reference");
        let horizon = if prepared.kind() == PresetKind::Saddle {
            BILINEAR_BOX_ITERS
        } else {
            VERIFY_HORIZON
        };
        let mut checks = Vec::new();
        for m in ["ogda", "eg"] {
            let alpha = prepared.alpha(&p, m);
            checks.extend(inequality_checks(prepared.problem(), m, alpha, &prepared.z0(), &reference, horizon));
        }
        all.insert(name, checks);
    }
    all
}

fn pick(suite: &BTreeMap<String, Vec<Check>>, presets: &[&str], prefix: &str) -> Outcome {
    let mut chosen = Vec::new();
    for (name, checks) in suite {
        if presets.is_empty() || presets.contains(&name.as_str()) {
            for c in checks.iter().filter(|c| c.name.starts_with(prefix)) {
                let mut c = c.clone();
                c.name = format!("{name}/{}", c.name);
                chosen.push(c);
            }
        }
    }
    let (passed, detail) = summarize(&chosen);
    let worst = chosen.iter().map(|c| c.measured).fold(f64::INFINITY, f64::min);
    Outcome {
        passed: passed && !chosen.is_empty(),
        detail: format!("{detail}, smallest margin {worst:e}"),
    }
}

fn criterion5() -> Outcome {
    let inst = consensus5().unwrap();
    let problem = &inst.problem;
    let stacked = problem.stacked_problem();
    let reference = problem.saddle_from_primal(&inst.x_star).unwrap();
    let t = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for method in [NetworkMethod::Ogda, NetworkMethod::Eg] {
        let (mut run, alpha) = problem.distributed_run(method, None, None, Schedule::InOrder).unwrap();
        let r0 = (run.stacked() - &reference.z_star).norm_squared();
        let mut worst_margin = f64::INFINITY;
        let mut reached = None;
        for t in 1..=CONSENSUS_ROUNDS {
            run.step();
            let avg = run.ergodic_mean().unwrap();
            let gap = (stacked.value(&avg) - reference.value).abs();
            worst_margin = worst_margin.min(r0 / (2.0 * alpha * t as f64) - gap);
            if reached.is_none() {
                let x: Vec<Vector> = run.simulator().agents().iter().map(|a| a.x.clone()).collect();
                let dev = x.iter().map(|xi| (xi[0] - 3.0).abs()).fold(0.0, f64::max);
                if dev <= CONSENSUS_X_TOL && problem.consensus_residual(&x) <= CONSENSUS_RES_TOL {
                    reached = Some(t);
                }
            }
        }
        let x: Vec<Vector> = run.simulator().agents().iter().map(|a| a.x.clone()).collect();
        let dev = x.iter().map(|xi| (xi[0] - 3.0).abs()).fold(0.0, f64::max);
        let res = problem.consensus_residual(&x);
        let ok = dev <= CONSENSUS_X_TOL && res <= CONSENSUS_RES_TOL && worst_margin >= -SLACK;
        passed &= ok;
        parts.push(format!(
            "{} max|x_i - 3| = {dev:.2e}, residual = {res:.2e}, tolerances met at round {reached:?}, certificate margin {worst_margin:.2e}",
            method.name()
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    passed &= secs <= CONSENSUS_BUDGET_S;
    parts.push(format!("{secs:.2} s"));
    Outcome {
        passed,
        detail: parts.join(", "),
    }
}

fn criterion6() -> Outcome {
    let t = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for m in ["ogda", "eg"] {
        let mut p = plan("logistic");
        p.methods = vec![m.to_string()];
        p.iters = (ALLOCATION_CALLS / NetworkMethod::parse(m).unwrap().gradient_calls_per_round()) as usize;
        let out = solve(&p).unwrap();
        let s = out.summary.method(m).unwrap();
        let gap = s.constraint_residual.unwrap();
        let err = s.objective_error.unwrap();
        let spread = s.dual_spread.unwrap();
        let ok = out.failures.is_empty()
            && s.grad_calls <= ALLOCATION_CALLS
            && gap <= ALLOCATION_TOL
            && err <= ALLOCATION_TOL
            && spread <= DUAL_TOL;
        passed &= ok;
        parts.push(format!(
            "{m} after {} calls: feasibility {gap:.2e}, objective error {err:.2e}, dual spread {spread:.2e}",
            s.grad_calls
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    passed &= secs <= ALLOCATION_BUDGET_S;
    parts.push(format!("{secs:.2} s"));
    Outcome {
        passed,
        detail: parts.join(", "),
    }
}

fn network_presets() -> Vec<String> {
    PresetRegistry::builtin()
        .iter()
        .filter(|p| !p.negative_control() && p.kind() != PresetKind::Saddle)
        .map(|p| p.name().to_string())
        .collect()
}

fn criterion7() -> Outcome {
    let mut checks = Vec::new();
    for name in network_presets() {
        let p = plan(&name);
        let prepared = Prepared::build(&p).unwrap();
        for mut c in equivalence_checks(&prepared, &p, EQUIVALENCE_ITERS) {
            c.name = format!("{name}/{}", c.name);
            checks.push(c);
        }
    }
    let worst = checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    let (passed, detail) = summarize(&checks);
    Outcome {
        passed,
        detail: format!("{detail} over {EQUIVALENCE_ITERS} iterations, max deviation {worst:e}"),
    }
}

fn criterion8() -> Outcome {
    let mut checks = Vec::new();
    for name in shipped() {
        let prepared = Prepared::build(&plan(&name)).unwrap();
        let mut local = operator_checks(prepared.problem(), 0);
        match &prepared {
            Prepared::Consensus { inst, .. } => local.push(objective_check(
                inst.problem.agents().iter().map(|a| (a.objective.clone(), a.set.clone())),
                0,
            )),
            Prepared::Allocation { inst, .. } => local.push(objective_check(
                inst.problem.agents().iter().map(|a| (a.objective.clone(), a.set.clone())),
                0,
            )),
            Prepared::Saddle(_) => {}
        }
        for mut c in local {
            c.name = format!("{name}/{}", c.name);
            checks.push(c);
        }
    }
    let (passed, detail) = summarize(&checks);
    Outcome { passed, detail }
}

fn criterion9() -> Outcome {
    let mut checks = Vec::new();
    let mut files = 0;
    let mut same = true;
    for name in shipped() {
        let mut p = plan(&name);
        let prepared = Prepared::build(&p).unwrap();
        let z_star = prepared.reference().unwrap().z_star;
        for mut c in fixed_point_checks(&prepared, &p, &z_star) {
            c.name = format!("{name}/{}", c.name);
            checks.push(c);
        }
        p.iters = p.iters.min(DETERMINISM_CAP);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            solve(&p).unwrap().write(d.path()).unwrap();
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for n in names {
            let a = std::fs::read(dirs[0].path().join(&n)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&n)).unwrap();
            same &= a == b;
            files += 1;
        }
    }
    let worst = checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    let (passed, detail) = summarize(&checks);
    Outcome {
        passed: passed && same && files > 0,
        detail: format!(
            "{detail}, max drift from z* {worst:e}; {files} CSV files {} across two runs",
            if same { "identical" } else { "DIFFER" }
        ),
    }
}

#[test]
fn acceptance() {
    writeln!(std::io::stdout()).unwrap();
    let mut results = Vec::new();
    let mut record = |n: usize, title: &str, o: Outcome| {
        report(n, title, &o);
        results.push((n, o.passed));
    };
    record(1, "bilinear box experiment, 5000 iterations", criterion1());
    let suite = inequality_suite();
    record(2, "ergodic rate certificate", pick(&suite, &["bilinear", "quadratic"], "certificate."));
    record(3, "OGDA descent quantity", pick(&suite, &[], "delta."));
    record(4, "EG contraction", pick(&suite, &[], "contraction."));
    record(5, "consensus on a ring of 5", criterion5());
    record(6, "logistic allocation on a ring of 20", criterion6());
    record(7, "per-agent vs stacked trajectories", criterion7());
    record(8, "operator properties", criterion8());
    record(9, "fixed points and determinism", criterion9());
    let failed: Vec<usize> = results.iter().filter(|(_, p)| !p).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
