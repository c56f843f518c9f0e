use std::sync::Arc;

use proptest::prelude::*;
use saddle_core::allocation::{AllocationAgentSpec, AllocationPoint, AllocationProblem};
use saddle_core::consensus::{ConsensusAgentSpec, ConsensusProblem};
use saddle_core::graph::NetworkGraph;
use saddle_core::network::{NetworkMethod, Schedule};
use saddle_core::objectives::{Logistic, Quadratic, SharedObjective};
use saddle_core::oracle::{grid_search_allocation, solve_allocation_kkt};
use saddle_core::rng::SeededRng;
use saddle_core::sets::{ConvexSet, MEMBERSHIP_TOL};
use saddle_core::solvers::{MethodRegistry, SolverState};
use saddle_core::{Matrix, Vector};

const METHODS: [NetworkMethod; 2] = [NetworkMethod::Ogda, NetworkMethod::Eg];

#[derive(Debug, Clone)]
struct ConsensusDraw {
    n: usize,
    m: usize,
    p: f64,
    graph_seed: u64,
    agents: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

fn consensus_draw() -> impl Strategy<Value = ConsensusDraw> {
    (2usize..6, 1usize..3, 0.2f64..0.9, any::<u64>()).prop_flat_map(|(n, m, p, graph_seed)| {
        let agent = (
            0.1f64..2.0,
            prop::collection::vec(-5.0f64..5.0, m),
            prop::collection::vec(-3.0f64..-0.5, m),
            prop::collection::vec(0.5f64..3.0, m),
        );
        prop::collection::vec(agent, n).prop_map(move |agents| ConsensusDraw {
            n,
            m,
            p,
            graph_seed,
            agents,
        })
    })
}

fn consensus(draw: &ConsensusDraw) -> ConsensusProblem {
    let graph = NetworkGraph::random_connected(draw.n, draw.p, draw.graph_seed).unwrap();
    let agents = draw
        .agents
        .iter()
        .map(|(w, c, lo, hi)| ConsensusAgentSpec {
            objective: Arc::new(Quadratic::new(*w, Vector::from_vec(c.clone()))) as SharedObjective,
            set: ConvexSet::boxed(lo.clone(), hi.clone()).unwrap(),
        })
        .collect();
    let p = ConsensusProblem::new(graph, agents).unwrap();
    assert_eq!(p.m(), draw.m);
    p
}

#[derive(Debug, Clone)]
struct AllocationDraw {
    graph_seed: u64,
    agents: Vec<(bool, [f64; 3], f64, f64, f64, f64)>,
}

fn allocation_draw(sizes: std::ops::Range<usize>) -> impl Strategy<Value = AllocationDraw> {
    let agent = (
        any::<bool>(),
        [-5.0f64..5.0, 0.0f64..2.0, 0.0f64..1.0],
        -2.0f64..-0.2,
        0.2f64..2.0,
        prop_oneof![-1.5f64..-0.2, 0.2f64..1.5],
        0.0f64..1.0,
    );
    (any::<u64>(), prop::collection::vec(agent, sizes)).prop_map(|(graph_seed, agents)| AllocationDraw { graph_seed, agents })
}

/// Scalar instance whose coupling constraint is met at an interior point.
fn allocation(draw: &AllocationDraw) -> AllocationProblem {
    let n = draw.agents.len();
    let graph = NetworkGraph::random_connected(n, 0.6, draw.graph_seed).unwrap();
    let agents = draw
        .agents
        .iter()
        .map(|&(logistic, [a, b, c], lo, hi, w, t)| {
            let objective: SharedObjective = if logistic {
                Arc::new(Logistic::new(a, b, c))
            } else {
                Arc::new(Quadratic::scalar(b + 0.1, a / 5.0))
            };
            let u = lo + t * (hi - lo);
            AllocationAgentSpec {
                objective,
                set: ConvexSet::boxed(vec![lo], vec![hi]).unwrap(),
                w: Matrix::from_element(1, 1, w),
                d: Vector::from_element(1, w * u),
            }
        })
        .collect();
    AllocationProblem::new(graph, agents).unwrap()
}

fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn consensus_agents_match_the_stacked_method(draw in consensus_draw(), seed in any::<u64>()) {
        let problem = consensus(&draw);
        let stacked = problem.stacked_problem();
        let mut rng = SeededRng::new(seed);
        let x: Vec<Vector> = problem.agents().iter().map(|a| a.set.sample(&mut rng)).collect();
        let v: Vec<Vector> = (0..problem.n()).map(|_| Vector::from_fn(problem.m(), |_, _| rng.uniform(-1.0, 1.0))).collect();
        for method in METHODS {
            let (mut run, alpha) = problem
                .distributed_run(method, None, Some((x.clone(), v.clone())), Schedule::Shuffled { seed })
                .unwrap();
            let m = MethodRegistry::builtin().get(method.name()).unwrap();
            let mut state = SolverState::new(run.stacked());
            for _ in 0..200 {
                run.step();
                m.step(&stacked, &mut state, alpha);
                prop_assert!(max_abs_diff(&run.stacked(), &state.z) <= 1e-12);
                let s = problem.state(run.simulator());
                for (xi, a) in s.x.iter().zip(problem.agents()) {
                    prop_assert!(a.set.contains(xi, MEMBERSHIP_TOL).unwrap());
                }
            }
        }
    }

    #[test]
    fn allocation_agents_match_the_stacked_method(draw in allocation_draw(2..6), seed in any::<u64>()) {
        let problem = allocation(&draw);
        let stacked = problem.stacked_problem();
        let mut rng = SeededRng::new(seed);
        let start = AllocationPoint {
            y: problem.agents().iter().map(|a| a.set.sample(&mut rng)).collect(),
            a: (0..problem.n()).map(|_| Vector::from_element(1, rng.uniform(-1.0, 1.0))).collect(),
            lambda: (0..problem.n()).map(|_| Vector::from_element(1, rng.uniform(-1.0, 1.0))).collect(),
        };
        for method in METHODS {
            let (mut run, alpha) = problem
                .distributed_run(method, None, Some(start.clone()), Schedule::Parallel)
                .unwrap();
            let m = MethodRegistry::builtin().get(method.name()).unwrap();
            let mut state = SolverState::new(run.stacked());
            for _ in 0..200 {
                run.step();
                m.step(&stacked, &mut state, alpha);
                prop_assert!(max_abs_diff(&run.stacked(), &state.z) <= 1e-12);
                let p = problem.state(run.simulator());
                for (yi, a) in p.y.iter().zip(problem.agents()) {
                    prop_assert!(a.set.contains(yi, MEMBERSHIP_TOL).unwrap());
                }
            }
        }
    }

    #[test]
    fn blockwise_operators_match_the_stacked_operator(
        c in consensus_draw(),
        a in allocation_draw(2..6),
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let problem = consensus(&c);
        let stacked = problem.stacked_problem();
        for _ in 0..100 {
            let z = stacked.feasible_set().sample(&mut rng);
            let (x, v) = problem.unstack(&z).unwrap();
            let (gx, gv) = problem.operator_phi(&x, &v).unwrap();
            prop_assert!(max_abs_diff(&problem.stack(&gx, &gv), &stacked.operator(&z).unwrap()) <= 1e-12);
        }
        let problem = allocation(&a);
        let stacked = problem.stacked_problem();
        for _ in 0..100 {
            let z = stacked.feasible_set().sample(&mut rng);
            let p = problem.unstack(&z).unwrap();
            let g = problem.operator_psi(&p).unwrap();
            prop_assert!(max_abs_diff(&problem.stack(&g), &stacked.operator(&z).unwrap()) <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn kkt_oracle_agrees_with_grid_search(draw in allocation_draw(2..4)) {
        let problem = allocation(&draw);
        let kkt = solve_allocation_kkt(&problem).unwrap();
        let (y, grid) = grid_search_allocation(&problem).unwrap();
        prop_assert!((kkt.objective - grid).abs() <= 1e-3, "kkt {} grid {} at {:?}", kkt.objective, grid, y);
        prop_assert!(kkt.objective <= grid + 1e-9);
        prop_assert!(kkt.residuals.feasibility <= 1e-9);
    }
}
