//! Experiment instances and small closed-form test families.
//!
//! Random instances draw from [`SeededRng`] in a fixed order, so a seed fully
//! determines an instance. Presets are looked up by name in a
//! [`PresetRegistry`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationAgentSpec, AllocationProblem};
use crate::consensus::{ConsensusAgentSpec, ConsensusProblem};
use crate::graph::NetworkGraph;
use crate::linalg::spectral_norm_default;
use crate::objectives::{Logistic, Quadratic, SharedObjective};
use crate::oracle::{solve_allocation_kkt, solve_consensus_reference, KKTReference};
use crate::problem::{Lipschitz, LipschitzBound, SaddleFunction, SaddleProblem};
use crate::rng::{SeededRng, GENERATOR_NAME};
use crate::sets::ConvexSet;
use crate::solvers::Reference;
use crate::{Error, Matrix, Result, Vector};

/// `f(x, y) = xᵀBy`.
#[derive(Debug, Clone)]
pub struct Bilinear {
    pub b: Matrix,
}

impl SaddleFunction for Bilinear {
    fn dim_x(&self) -> usize {
        self.b.nrows()
    }
    fn dim_y(&self) -> usize {
        self.b.ncols()
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&(&self.b * y))
    }
    fn grad_x(&self, _x: &Vector, y: &Vector) -> Vector {
        &self.b * y
    }
    fn grad_y(&self, x: &Vector, _y: &Vector) -> Vector {
        self.b.tr_mul(x)
    }
}

/// `f(x, y) = ½‖x‖² − ½‖y‖²`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticSaddle {
    pub dim: usize,
}

impl SaddleFunction for QuadraticSaddle {
    fn dim_x(&self) -> usize {
        self.dim
    }
    fn dim_y(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * x.norm_squared() - 0.5 * y.norm_squared()
    }
    fn grad_x(&self, x: &Vector, _y: &Vector) -> Vector {
        x.clone()
    }
    fn grad_y(&self, _x: &Vector, y: &Vector) -> Vector {
        -y.clone()
    }
}

/// Bilinear function whose `x`-gradient is scaled by `1 + eps`. Negative
/// control for the gradient checks.
#[derive(Debug, Clone)]
pub struct CorruptedBilinear {
    pub inner: Bilinear,
    pub eps: f64,
}

impl SaddleFunction for CorruptedBilinear {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.inner.value(x, y)
    }
    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        self.inner.grad_x(x, y) * (1.0 + self.eps)
    }
    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.inner.grad_y(x, y)
    }
}

fn half_width_set(dim: usize, hw: f64) -> Result<ConvexSet> {
    if hw.is_infinite() {
        Ok(ConvexSet::whole_space(dim))
    } else {
        ConvexSet::uniform_box(dim, -hw, hw)
    }
}

/// `xᵀBy` over `[−xhw, xhw]^n × [−yhw, yhw]^m` (infinite half-widths give the
/// whole space). `l_xy = l_yx = ‖B‖₂` by power iteration.
pub fn bilinear_problem(name: &str, b: Matrix, xhw: f64, yhw: f64) -> Result<SaddleProblem> {
    let norm = spectral_norm_default(&b);
    let (n, m) = b.shape();
    SaddleProblem::new(
        name,
        Arc::new(Bilinear { b }),
        half_width_set(n, xhw)?,
        half_width_set(m, yhw)?,
        LipschitzBound::Blockwise(Lipschitz::bilinear(norm)),
    )
}

/// `f = xy` on `R × R`.
pub fn scalar_bilinear() -> SaddleProblem {
    bilinear_problem("scalar-bilinear", Matrix::from_element(1, 1, 1.0), f64::INFINITY, f64::INFINITY)
        .expect("valid scalar problem")
}

/// `f = ½‖x‖² − ½‖y‖²` on `R^dim × R^dim`, or on a box of the given half-width.
/// `l_xx = l_yy = 1`, so `κ = 2`.
pub fn quadratic_saddle(dim: usize, half_width: Option<f64>) -> SaddleProblem {
    let hw = half_width.unwrap_or(f64::INFINITY);
    SaddleProblem::new(
        "quadratic",
        Arc::new(QuadraticSaddle { dim }),
        half_width_set(dim, hw).expect("valid half-width"),
        half_width_set(dim, hw).expect("valid half-width"),
        LipschitzBound::Blockwise(Lipschitz {
            l_xx: 1.0,
            l_xy: 0.0,
            l_yx: 0.0,
            l_yy: 1.0,
        }),
    )
    .expect("valid quadratic problem")
}

/// Family and drawing ranges of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub family: Family,
    pub seed: u64,
    pub dims: BTreeMap<String, usize>,
    /// `[lo, hi)` ranges of uniformly drawn parameters.
    #[serde(default)]
    pub ranges: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BilinearBox,
    ConsensusQuadratic,
    AllocationLogistic,
    Custom,
}

/// Values actually drawn for an instance, persisted for audit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DrawnParameters {
    pub generator: String,
    pub seed: u64,
    pub values: BTreeMap<String, Vec<f64>>,
}

impl DrawnParameters {
    fn new(seed: u64) -> Self {
        Self {
            generator: GENERATOR_NAME.to_string(),
            seed,
            values: BTreeMap::new(),
        }
    }
}

/// A centralised problem with its start point, step size and known reference.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub problem: SaddleProblem,
    pub z0: Vector,
    pub alpha: f64,
    /// Number of times the nominal step was halved to satisfy the bound.
    pub alpha_halvings: u32,
    pub reference: Option<Reference>,
    pub drawn: DrawnParameters,
}

/// Nominal step of the bilinear experiment.
pub const BILINEAR_BOX_ALPHA: f64 = 0.01;
/// Dimension of `x` and `y` in the bilinear experiment.
pub const BILINEAR_BOX_DIM: usize = 10;

/// Halves `alpha` until it is strictly below `bound`.
pub fn halve_until_below(mut alpha: f64, bound: f64) -> (f64, u32) {
    let mut halvings = 0;
    while !(alpha < bound) && halvings < 1000 {
        alpha *= 0.5;
        halvings += 1;
    }
    (alpha, halvings)
}

/// Bilinear experiment: `B ~ U[0,5]^{10×10}` drawn row by row,
/// `X = [−5,5]^10`, `Y = [−2,2]^10`, `z₀ = 10·𝟙`. The step starts at 0.01 and
/// is halved until it lies below the OGDA bound `1/(2κ)`; the same step is
/// used for every method.
pub fn bilinear_box(seed: u64) -> Result<Instance> {
    let n = BILINEAR_BOX_DIM;
    let mut rng = SeededRng::new(seed);
    let entries: Vec<f64> = (0..n * n).map(|_| rng.uniform(0.0, 5.0)).collect();
    let b = Matrix::from_row_slice(n, n, &entries);
    let problem = bilinear_problem("bilinear", b, 5.0, 2.0)?;
    let bound = 1.0 / (2.0 * problem.kappa());
    let (alpha, alpha_halvings) = halve_until_below(BILINEAR_BOX_ALPHA, bound);
    if alpha_halvings > 0 {
        log::info!(
            "bilinear seed {seed}: step {BILINEAR_BOX_ALPHA} >= 1/(2 kappa) = {bound:e}; using {alpha} after {alpha_halvings} halvings"
        );
    }
    let mut drawn = DrawnParameters::new(seed);
    drawn.values.insert("B_row_major".into(), entries);
    drawn.values.insert("spectral_norm".into(), vec![problem.kappa() / 2.0]);
    drawn.values.insert("alpha".into(), vec![alpha]);
    Ok(Instance {
        spec: InstanceSpec {
            family: Family::BilinearBox,
            seed,
            dims: [("x".to_string(), n), ("y".to_string(), n)].into(),
            ranges: [
                ("B".to_string(), [0.0, 5.0]),
                ("x_box".to_string(), [-5.0, 5.0]),
                ("y_box".to_string(), [-2.0, 2.0]),
            ]
            .into(),
        },
        problem,
        z0: Vector::from_element(2 * n, 10.0),
        alpha,
        alpha_halvings,
        reference: Some(Reference {
            z_star: Vector::zeros(2 * n),
            f_star: 0.0,
        }),
        drawn,
    })
}

/// Quadratic saddle on `[−5,5]^dim` squared from `z₀ = 3·𝟙`, with `z* = 0`.
pub fn quadratic_instance(dim: usize) -> Instance {
    let problem = quadratic_saddle(dim, Some(5.0));
    Instance {
        spec: InstanceSpec {
            family: Family::Custom,
            seed: 0,
            dims: [("x".to_string(), dim), ("y".to_string(), dim)].into(),
            ranges: BTreeMap::new(),
        },
        alpha: 0.9 / (2.0 * problem.kappa()),
        alpha_halvings: 0,
        z0: Vector::from_element(2 * dim, 3.0),
        reference: Some(Reference {
            z_star: Vector::zeros(2 * dim),
            f_star: 0.0,
        }),
        problem,
        drawn: DrawnParameters::new(0),
    }
}

/// The bilinear box matrix with a corrupted `x`-gradient.
pub fn corrupted_instance(seed: u64) -> Result<Instance> {
    let mut inst = bilinear_box(seed)?;
    let func = Bilinear {
        b: Matrix::from_row_slice(BILINEAR_BOX_DIM, BILINEAR_BOX_DIM, &inst.drawn.values["B_row_major"]),
    };
    inst.problem = SaddleProblem::new(
        "corrupted",
        Arc::new(CorruptedBilinear { inner: func, eps: 0.05 }),
        inst.problem.set_x().clone(),
        inst.problem.set_y().clone(),
        inst.problem.bound(),
    )?;
    inst.spec.family = Family::Custom;
    Ok(inst)
}

#[derive(Debug, Clone)]
pub struct ConsensusInstance {
    pub spec: InstanceSpec,
    pub problem: ConsensusProblem,
    /// Common optimum from the oracle.
    pub x_star: Vector,
    pub drawn: DrawnParameters,
}

/// `f_i(s) = (s − i)²`, `i = 1..5`, `Ω_i = [−10, 10]`, ring of 5. Optimum 3.
pub fn consensus5() -> Result<ConsensusInstance> {
    let agents = (1..=5)
        .map(|i| ConsensusAgentSpec {
            objective: Arc::new(Quadratic::scalar(1.0, i as f64)),
            set: ConvexSet::uniform_box(1, -10.0, 10.0).expect("valid box"),
        })
        .collect();
    let problem = ConsensusProblem::new(NetworkGraph::ring(5)?, agents)?;
    let x_star = solve_consensus_reference(&problem)?;
    Ok(ConsensusInstance {
        spec: InstanceSpec {
            family: Family::ConsensusQuadratic,
            seed: 0,
            dims: [("agents".to_string(), 5), ("m".to_string(), 1)].into(),
            ranges: BTreeMap::new(),
        },
        problem,
        x_star,
        drawn: DrawnParameters::new(0),
    })
}

/// Random connected graph of 8 agents, `m = 2`, weighted quadratics with
/// non-identical boxes that all contain `[−1, 1]²`.
pub fn consensus_random(seed: u64) -> Result<ConsensusInstance> {
    let (n, m) = (8, 2);
    let mut rng = SeededRng::new(seed);
    let graph = NetworkGraph::random_connected(n, 0.3, rng.next_u64())?;
    let mut drawn = DrawnParameters::new(seed);
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let weight = rng.uniform(0.5, 2.0);
        let center = rng.uniform_in(&[-4.0; 2], &[4.0; 2]);
        let lower = rng.uniform_in(&[-5.0; 2], &[-1.0; 2]);
        let upper = rng.uniform_in(&[1.0; 2], &[5.0; 2]);
        drawn.values.insert(format!("agent{i}.weight"), vec![weight]);
        drawn.values.insert(format!("agent{i}.center"), center.as_slice().to_vec());
        drawn.values.insert(format!("agent{i}.lower"), lower.as_slice().to_vec());
        drawn.values.insert(format!("agent{i}.upper"), upper.as_slice().to_vec());
        agents.push(ConsensusAgentSpec {
            objective: Arc::new(Quadratic::new(weight, center)),
            set: ConvexSet::boxed(lower.as_slice().to_vec(), upper.as_slice().to_vec())?,
        });
    }
    let problem = ConsensusProblem::new(graph, agents)?;
    let x_star = solve_consensus_reference(&problem)?;
    Ok(ConsensusInstance {
        spec: InstanceSpec {
            family: Family::ConsensusQuadratic,
            seed,
            dims: [("agents".to_string(), n), ("m".to_string(), m)].into(),
            ranges: [
                ("weight".to_string(), [0.5, 2.0]),
                ("center".to_string(), [-4.0, 4.0]),
                ("lower".to_string(), [-5.0, -1.0]),
                ("upper".to_string(), [1.0, 5.0]),
            ]
            .into(),
        },
        problem,
        x_star,
        drawn,
    })
}

#[derive(Debug, Clone)]
pub struct AllocationInstance {
    pub spec: InstanceSpec,
    pub problem: AllocationProblem,
    pub kkt: KKTReference,
    /// Re-draws of `d` needed before the instance was feasible.
    pub redraws: usize,
    pub drawn: DrawnParameters,
}

impl AllocationInstance {
    pub fn y_star(&self) -> Vec<Vector> {
        self.kkt.y_star.iter().map(|&y| Vector::from_element(1, y)).collect()
    }
}

/// `h_i(y) = ½(y − c_i)²`, `c = (1, 2, 3)`, `W_i = 1`, `d_i = 0`,
/// `Ω_i = [−10, 10]`, ring of 3. Optimum `(−1, 0, 1)`.
pub fn allocation3() -> Result<AllocationInstance> {
    let agents = (1..=3)
        .map(|c| AllocationAgentSpec {
            objective: Arc::new(Quadratic::scalar(0.5, c as f64)),
            set: ConvexSet::uniform_box(1, -10.0, 10.0).expect("valid box"),
            w: Matrix::from_element(1, 1, 1.0),
            d: Vector::zeros(1),
        })
        .collect();
    let problem = AllocationProblem::new(NetworkGraph::ring(3)?, agents)?;
    let kkt = solve_allocation_kkt(&problem)?;
    Ok(AllocationInstance {
        spec: InstanceSpec {
            family: Family::Custom,
            seed: 0,
            dims: [("agents".to_string(), 3), ("m".to_string(), 1)].into(),
            ranges: BTreeMap::new(),
        },
        problem,
        kkt,
        redraws: 0,
        drawn: DrawnParameters::new(0),
    })
}

/// Agents in the allocation experiment.
pub const LOGISTIC_AGENTS: usize = 20;
/// Maximum re-draws of `d` before giving up.
pub const LOGISTIC_MAX_REDRAWS: usize = 100;

/// Allocation experiment: ring of 20, `h_i(y) = a_i y + b_i log(1 + e^{c_i y})`,
/// `Ω_i = [−1, 1]`, scalar `W_i` and `d_i`. Per agent the draws are
/// `a ∈ [−5,5]`, `b ∈ [0,2]`, `c ∈ [0,1]`, `W ∈ [−1,1]`, `d ∈ [−2,2]` in that
/// order. If the KKT oracle finds no multiplier, all `d_i` are drawn again
/// from the same stream.
pub fn logistic_allocation(seed: u64) -> Result<AllocationInstance> {
    let n = LOGISTIC_AGENTS;
    let mut rng = SeededRng::new(seed);
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.uniform(-5.0, 5.0);
        let b = rng.uniform(0.0, 2.0);
        let c = rng.uniform(0.0, 1.0);
        let w = rng.uniform(-1.0, 1.0);
        let d = rng.uniform(-2.0, 2.0);
        params.push([a, b, c, w, d]);
    }
    let graph = NetworkGraph::ring(n)?;
    let build = |params: &[[f64; 5]]| -> Result<AllocationProblem> {
        let agents = params
            .iter()
            .map(|&[a, b, c, w, d]| AllocationAgentSpec {
                objective: Arc::new(Logistic::new(a, b, c)) as SharedObjective,
                set: ConvexSet::uniform_box(1, -1.0, 1.0).expect("valid box"),
                w: Matrix::from_element(1, 1, w),
                d: Vector::from_element(1, d),
            })
            .collect();
        AllocationProblem::new(graph.clone(), agents)
    };
    let mut redraws = 0;
    let (problem, kkt) = loop {
        let problem = build(&params)?;
        match solve_allocation_kkt(&problem) {
            Ok(kkt) => break (problem, kkt),
            Err(Error::Infeasible(why)) if redraws < LOGISTIC_MAX_REDRAWS => {
                log::info!("logistic seed {seed}: redrawing d ({why})");
                for p in params.iter_mut() {
                    p[4] = rng.uniform(-2.0, 2.0);
                }
                redraws += 1;
            }
            Err(Error::Infeasible(why)) => {
                return Err(Error::Infeasible(format!(
                    "logistic seed {seed} infeasible after {LOGISTIC_MAX_REDRAWS} redraws: {why}"
                )))
            }
            Err(e) => return Err(e),
        }
    };
    let mut drawn = DrawnParameters::new(seed);
    for (name, k) in [("a", 0), ("b", 1), ("c", 2), ("W", 3), ("d", 4)] {
        drawn.values.insert(name.into(), params.iter().map(|p| p[k]).collect());
    }
    Ok(AllocationInstance {
        spec: InstanceSpec {
            family: Family::AllocationLogistic,
            seed,
            dims: [("agents".to_string(), n), ("m".to_string(), 1)].into(),
            ranges: [
                ("a".to_string(), [-5.0, 5.0]),
                ("b".to_string(), [0.0, 2.0]),
                ("c".to_string(), [0.0, 1.0]),
                ("W".to_string(), [-1.0, 1.0]),
                ("d".to_string(), [-2.0, 2.0]),
            ]
            .into(),
        },
        problem,
        kkt,
        redraws,
        drawn,
    })
}

/// What a preset builds.
#[derive(Debug, Clone)]
pub enum Built {
    Saddle(Instance),
    Consensus(ConsensusInstance),
    Allocation(AllocationInstance),
}

impl Built {
    pub fn spec(&self) -> &InstanceSpec {
        match self {
            Built::Saddle(i) => &i.spec,
            Built::Consensus(i) => &i.spec,
            Built::Allocation(i) => &i.spec,
        }
    }

    pub fn drawn(&self) -> &DrawnParameters {
        match self {
            Built::Saddle(i) => &i.drawn,
            Built::Consensus(i) => &i.drawn,
            Built::Allocation(i) => &i.drawn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    Saddle,
    Consensus,
    Allocation,
}

/// A named instance constructor.
pub trait Preset: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> &str;
    fn kind(&self) -> PresetKind;
    /// Default method list when a config names none.
    fn default_methods(&self) -> &[&'static str];
    fn default_iters(&self) -> usize;
    /// Whether the verify suite is expected to fail on this preset.
    fn negative_control(&self) -> bool {
        false
    }
    fn build(&self, seed: u64) -> Result<Built>;
}

impl fmt::Debug for dyn Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Preset({})", self.name())
    }
}

/// Preset backed by a plain function.
pub struct FnPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
    pub methods: &'static [&'static str],
    pub iters: usize,
    pub negative: bool,
    pub build: fn(u64) -> Result<Built>,
}

impl Preset for FnPreset {
    fn name(&self) -> &str {
        self.name
    }
    fn description(&self) -> &str {
        self.description
    }
    fn kind(&self) -> PresetKind {
        self.kind
    }
    fn default_methods(&self) -> &[&'static str] {
        self.methods
    }
    fn default_iters(&self) -> usize {
        self.iters
    }
    fn negative_control(&self) -> bool {
        self.negative
    }
    fn build(&self, seed: u64) -> Result<Built> {
        (self.build)(seed)
    }
}

#[derive(Default)]
pub struct PresetRegistry {
    presets: BTreeMap<String, Arc<dyn Preset>>,
}

impl fmt::Debug for PresetRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.presets.keys()).finish()
    }
}

const SADDLE_METHODS: &[&str] = &["gda", "ogda", "eg"];
const NETWORK_METHODS: &[&str] = &["ogda", "eg"];

impl PresetRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        let presets = [
            FnPreset {
                name: "bilinear",
                description: "bilinear xᵀBy, B ~ U[0,5]^{10x10}, X = [-5,5]^10, Y = [-2,2]^10",
                kind: PresetKind::Saddle,
                methods: SADDLE_METHODS,
                iters: 5000,
                negative: false,
                build: |s| bilinear_box(s).map(Built::Saddle),
            },
            FnPreset {
                name: "quadratic",
                description: "½|x|² − ½|y|² on [-5,5]^4 x [-5,5]^4",
                kind: PresetKind::Saddle,
                methods: SADDLE_METHODS,
                iters: 5000,
                negative: false,
                build: |_| Ok(Built::Saddle(quadratic_instance(4))),
            },
            FnPreset {
                name: "consensus5",
                description: "ring of 5, f_i(s) = (s - i)², Ω_i = [-10,10]",
                kind: PresetKind::Consensus,
                methods: NETWORK_METHODS,
                iters: 100_000,
                negative: false,
                build: |_| consensus5().map(Built::Consensus),
            },
            FnPreset {
                name: "consensus-random",
                description: "random graph of 8, m = 2, weighted quadratics, non-identical boxes",
                kind: PresetKind::Consensus,
                methods: NETWORK_METHODS,
                iters: 100_000,
                negative: false,
                build: |s| consensus_random(s).map(Built::Consensus),
            },
            FnPreset {
                name: "allocation3",
                description: "ring of 3, h_i = ½(y - c_i)², c = (1,2,3), Σy_i = 0",
                kind: PresetKind::Allocation,
                methods: NETWORK_METHODS,
                iters: 100_000,
                negative: false,
                build: |_| allocation3().map(Built::Allocation),
            },
            FnPreset {
                name: "logistic",
                description: "ring of 20, logistic costs, Ω_i = [-1,1], scalar coupling",
                kind: PresetKind::Allocation,
                methods: NETWORK_METHODS,
                iters: 500_000,
                negative: false,
                build: |s| logistic_allocation(s).map(Built::Allocation),
            },
            FnPreset {
                name: "corrupted",
                description: "bilinear with a 5% error in the x-gradient (verify must fail)",
                kind: PresetKind::Saddle,
                methods: SADDLE_METHODS,
                iters: 1000,
                negative: true,
                build: |s| corrupted_instance(s).map(Built::Saddle),
            },
        ];
        for p in presets {
            r.register(Arc::new(p));
        }
        r
    }

    pub fn register(&mut self, preset: Arc<dyn Preset>) {
        self.presets.insert(preset.name().to_ascii_lowercase(), preset);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Preset>> {
        self.presets
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.presets.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Preset>> {
        self.presets.values()
    }
}
