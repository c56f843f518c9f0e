//! Experiment configuration.
//!
//! ```toml
//! [instance]
//! preset = "bilinear"
//! seed = 0
//!
//! [solver]
//! methods = ["gda", "ogda", "eg"]
//! iters = 5000
//! alpha = 0.005          # optional
//! stop_tol = 1e-10       # optional
//! record_every = 1       # optional
//! allow_unsafe_step = false
//! compare = true
//!
//! [network]
//! schedule = { kind = "shuffled", seed = 7 }
//!
//! [output]
//! dir = "out/bilinear"
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use saddle_core::catalog::{Preset, PresetKind, PresetRegistry};
use saddle_core::network::Schedule;
use saddle_core::solvers::{MethodRegistry, DEFAULT_STOP_TOL};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{HarnessError, Result};

/// Agent-level records kept for network runs when `record_every` is unset.
pub const NETWORK_RECORDS: usize = 2000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    instance: RawInstance,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    preset: Spanned<String>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    methods: Option<Spanned<Vec<String>>>,
    iters: Option<Spanned<usize>>,
    alpha: Option<Spanned<f64>>,
    stop_tol: Option<Spanned<f64>>,
    record_every: Option<Spanned<usize>>,
    #[serde(default)]
    allow_unsafe_step: Option<Spanned<bool>>,
    #[serde(default = "yes")]
    compare: bool,
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            methods: None,
            iters: None,
            alpha: None,
            stop_tol: None,
            record_every: None,
            allow_unsafe_step: None,
            compare: true,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(default)]
    schedule: Schedule,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// A value with the byte range it came from, if it came from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub value: T,
    pub span: Option<Range<usize>>,
}

impl<T> Field<T> {
    pub fn cli(value: T) -> Self {
        Self { value, span: None }
    }

    fn spanned(s: Spanned<T>) -> Self {
        Self {
            span: Some(s.span()),
            value: s.into_inner(),
        }
    }
}

/// Configuration as written, before validation.
#[derive(Debug, Clone)]
pub struct Settings {
    source: Option<(PathBuf, String)>,
    pub preset: Field<String>,
    pub seed: u64,
    pub methods: Option<Field<Vec<String>>>,
    pub iters: Option<Field<usize>>,
    pub alpha: Option<Field<f64>>,
    pub stop_tol: Option<Field<f64>>,
    pub record_every: Option<Field<usize>>,
    pub allow_unsafe_step: Field<bool>,
    pub compare: bool,
    pub schedule: Schedule,
    pub out_dir: Option<PathBuf>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub methods: Vec<String>,
}

/// 1-based line and column of byte `offset` in `text`.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            HarnessError::Config {
                path: path.to_path_buf(),
                line,
                col,
                message: e.message().trim().to_string(),
            }
        })?;
        Ok(Self {
            source: Some((path.to_path_buf(), text.to_string())),
            preset: Field::spanned(raw.instance.preset),
            seed: raw.instance.seed,
            methods: raw.solver.methods.map(Field::spanned),
            iters: raw.solver.iters.map(Field::spanned),
            alpha: raw.solver.alpha.map(Field::spanned),
            stop_tol: raw.solver.stop_tol.map(Field::spanned),
            record_every: raw.solver.record_every.map(Field::spanned),
            allow_unsafe_step: raw.solver.allow_unsafe_step.map_or(Field::cli(false), Field::spanned),
            compare: raw.solver.compare,
            schedule: raw.network.schedule,
            out_dir: raw.output.dir,
        })
    }

    /// Settings for a bare `--preset` invocation.
    pub fn for_preset(name: &str) -> Self {
        Self {
            source: None,
            preset: Field::cli(name.to_string()),
            seed: 0,
            methods: None,
            iters: None,
            alpha: None,
            stop_tol: None,
            record_every: None,
            allow_unsafe_step: Field::cli(false),
            compare: true,
            schedule: Schedule::InOrder,
            out_dir: None,
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.preset {
            self.preset = Field::cli(p.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(a) = o.alpha {
            self.alpha = Some(Field::cli(a));
        }
        if let Some(i) = o.iters {
            self.iters = Some(Field::cli(i));
        }
        if let Some(d) = &o.out {
            self.out_dir = Some(d.clone());
        }
        if !o.methods.is_empty() {
            self.methods = Some(Field::cli(o.methods.clone()));
        }
    }

    fn error<T>(&self, span: &Option<Range<usize>>, what: &str, message: String) -> Result<T> {
        match (span, &self.source) {
            (Some(s), Some((path, text))) => {
                let (line, col) = line_col(text, s.start);
                Err(HarnessError::Config {
                    path: path.clone(),
                    line,
                    col,
                    message,
                })
            }
            _ => Err(HarnessError::Validation(format!("{what}: {message}"))),
        }
    }

    /// Checks every entry against the registries and fills in defaults.
    pub fn validate(&self, presets: &PresetRegistry) -> Result<Plan> {
        let preset = match presets.get(&self.preset.value) {
            Ok(p) => p,
            Err(_) => {
                let known: Vec<&str> = presets.names().collect();
                return self.error(
                    &self.preset.span,
                    "preset",
                    format!("unknown preset `{}` (known: {})", self.preset.value, known.join(", ")),
                );
            }
        };
        let network = preset.kind() != PresetKind::Saddle;

        let methods: Vec<String> = match &self.methods {
            Some(f) => {
                if f.value.is_empty() {
                    return self.error(&f.span, "methods", "method list is empty".into());
                }
                let registry = MethodRegistry::builtin();
                let mut seen: Vec<String> = Vec::new();
                for m in &f.value {
                    let name = m.to_ascii_lowercase();
                    if registry.get(&name).is_err() {
                        let known: Vec<&str> = registry.names().collect();
                        return self.error(
                            &f.span,
                            "methods",
                            format!("unknown method `{m}` (known: {})", known.join(", ")),
                        );
                    }
                    if network && name == "gda" {
                        return self.error(
                            &f.span,
                            "methods",
                            format!("gda has no distributed variant; preset `{}` is a network problem", preset.name()),
                        );
                    }
                    if seen.contains(&name) {
                        return self.error(&f.span, "methods", format!("method `{m}` listed twice"));
                    }
                    seen.push(name);
                }
                seen
            }
            None => preset.default_methods().iter().map(|s| s.to_string()).collect(),
        };

        if let Some(a) = &self.alpha {
            if !(a.value.is_finite() && a.value > 0.0) {
                return self.error(&a.span, "alpha", format!("step size must be finite and positive, got {}", a.value));
            }
        }
        let stop_tol = match &self.stop_tol {
            Some(t) if !(t.value.is_finite() && t.value >= 0.0) => {
                return self.error(&t.span, "stop_tol", format!("must be finite and non-negative, got {}", t.value));
            }
            Some(t) => t.value,
            None => DEFAULT_STOP_TOL,
        };
        if let Some(r) = &self.record_every {
            if r.value == 0 {
                return self.error(&r.span, "record_every", "must be at least 1".into());
            }
        }
        if network && self.allow_unsafe_step.value {
            return self.error(
                &self.allow_unsafe_step.span,
                "allow_unsafe_step",
                "step-size override is only available for centralised presets".into(),
            );
        }
        let iters = self.iters.as_ref().map_or(preset.default_iters(), |f| f.value);
        Ok(Plan {
            preset,
            seed: self.seed,
            methods,
            iters,
            alpha: self.alpha.as_ref().map(|f| f.value),
            stop_tol,
            record_every: self.record_every.as_ref().map(|f| f.value),
            allow_unsafe_step: self.allow_unsafe_step.value,
            compare: self.compare,
            schedule: self.schedule,
            out_dir: self.out_dir.clone(),
        })
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Plan {
    pub preset: Arc<dyn Preset>,
    pub seed: u64,
    /// Lower-case registry names, in the order given.
    pub methods: Vec<String>,
    pub iters: usize,
    pub alpha: Option<f64>,
    pub stop_tol: f64,
    pub record_every: Option<usize>,
    pub allow_unsafe_step: bool,
    /// Run every method at one shared step size.
    pub compare: bool,
    pub schedule: Schedule,
    pub out_dir: Option<PathBuf>,
}

impl Plan {
    /// Plan for `preset` with every default.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let mut s = Settings::for_preset(name);
        s.seed = seed;
        s.validate(&PresetRegistry::builtin())
    }

    pub fn record_every(&self) -> usize {
        match self.record_every {
            Some(r) => r,
            None if self.preset.kind() == PresetKind::Saddle => 1,
            None => (self.iters / NETWORK_RECORDS).max(1),
        }
    }
}
