//! Bulk-synchronous message passing over a [`NetworkGraph`].
//!
//! A round consists of one or more phases. In each phase every agent first
//! publishes a message, then (after the barrier) updates from an [`Inbox`]
//! that exposes only its neighbours' messages from that phase. Because updates
//! never see messages from the same phase's updates, the outcome does not
//! depend on the order agents are visited in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::NetworkGraph;
use crate::rng::SeededRng;
use crate::solvers::{resolve_step, ExtraGradient, Ogda};
use crate::solvers::ErgodicAverage;
use crate::{Error, Result, Vector};

/// Order in which agents are updated after the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    InOrder,
    /// A fresh permutation every phase, drawn from `seed`.
    Shuffled { seed: u64 },
    /// Agents updated concurrently on the rayon pool.
    Parallel,
}

/// Messages visible to one agent during one phase.
#[derive(Debug)]
pub struct Inbox<'a, M> {
    me: usize,
    neighbors: &'a [usize],
    board: &'a [M],
}

impl<'a, M> Inbox<'a, M> {
    pub fn agent(&self) -> usize {
        self.me
    }

    /// The agent's own published message.
    pub fn own(&self) -> &'a M {
        &self.board[self.me]
    }

    /// `(j, message_j)` for each neighbour `j`, in ascending `j`.
    pub fn neighbors(&self) -> impl Iterator<Item = (usize, &'a M)> + '_ {
        self.neighbors.iter().map(move |&j| (j, &self.board[j]))
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// A participant in the simulation.
pub trait Agent: Send {
    type Message: Clone + Send + Sync;

    /// Number of publish/update phases per round.
    fn phases(&self) -> usize;

    fn publish(&self, phase: usize) -> Self::Message;

    fn update(&mut self, phase: usize, inbox: &Inbox<'_, Self::Message>);
}

/// An agent holding one block of a stacked primal-dual iterate.
///
/// The stacked layout is every agent's primal block in agent order, followed
/// by every agent's dual block in agent order.
pub trait PrimalDualAgent: Agent {
    /// Current `(primal, dual)` blocks.
    fn blocks(&self) -> (Vec<f64>, Vec<f64>);

    /// Blocks entering the ergodic average after the latest round (the
    /// mid-point for extra-gradient).
    fn ergodic_blocks(&self) -> (Vec<f64>, Vec<f64>);

    /// Local gradient-oracle evaluations made so far.
    fn local_gradient_calls(&self) -> u64;
}

/// Distributed method run by every agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMethod {
    /// One publish phase per round.
    Ogda,
    /// Two publish phases per round: current values, then mid-points.
    Eg,
}

impl NetworkMethod {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ogda" => Ok(NetworkMethod::Ogda),
            "eg" => Ok(NetworkMethod::Eg),
            "gda" => Err(Error::Unsupported(
                "gda has no distributed variant; use ogda or eg".into(),
            )),
            _ => Err(Error::UnknownMethod(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NetworkMethod::Ogda => "ogda",
            NetworkMethod::Eg => "eg",
        }
    }

    pub fn phases(&self) -> usize {
        match self {
            NetworkMethod::Ogda => 1,
            NetworkMethod::Eg => 2,
        }
    }

    /// Network-wide operator evaluations per round.
    pub fn gradient_calls_per_round(&self) -> u64 {
        self.phases() as u64
    }

    /// Validates or defaults `α` against the operator bound `κ`, with the same
    /// ranges as the centralised methods.
    pub fn resolve_step(&self, kappa: f64, alpha: Option<f64>, allow_unsafe: bool) -> Result<f64> {
        match self {
            NetworkMethod::Ogda => resolve_step(&Ogda, kappa, alpha, allow_unsafe),
            NetworkMethod::Eg => resolve_step(&ExtraGradient, kappa, alpha, allow_unsafe),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulator<A: Agent> {
    graph: NetworkGraph,
    agents: Vec<A>,
    schedule: Schedule,
    phases: usize,
    rounds: usize,
    messages: u64,
    rng: Option<SeededRng>,
}

impl<A: Agent> Simulator<A> {
    /// All agents must agree on the number of phases.
    pub fn new(graph: NetworkGraph, agents: Vec<A>, schedule: Schedule) -> Result<Self> {
        if agents.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: agents.len(),
            });
        }
        let phases = agents.first().map_or(1, Agent::phases);
        if agents.iter().any(|a| a.phases() != phases) {
            return Err(Error::InvalidArgument("agents disagree on phases per round".into()));
        }
        let rng = match schedule {
            Schedule::Shuffled { seed } => Some(SeededRng::new(seed)),
            _ => None,
        };
        Ok(Self {
            graph,
            agents,
            schedule,
            phases,
            rounds: 0,
            messages: 0,
            rng,
        })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn agents(&self) -> &[A] {
        &self.agents
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Point-to-point messages delivered so far (one per directed edge per
    /// phase).
    pub fn messages_delivered(&self) -> u64 {
        self.messages
    }

    pub fn into_agents(self) -> Vec<A> {
        self.agents
    }

    /// Runs one full round.
    pub fn round(&mut self) {
        for phase in 0..self.phases {
            self.phase(phase);
        }
        self.rounds += 1;
    }

    fn phase(&mut self, phase: usize) {
        let board: Vec<A::Message> = self.agents.iter().map(|a| a.publish(phase)).collect();
        let graph = &self.graph;
        let inbox = |i: usize| Inbox {
            me: i,
            neighbors: graph.neighbors(i),
            board: &board,
        };
        match self.schedule {
            Schedule::InOrder => {
                for (i, a) in self.agents.iter_mut().enumerate() {
                    a.update(phase, &inbox(i));
                }
            }
            Schedule::Shuffled { .. } => {
                let mut order: Vec<usize> = (0..self.agents.len()).collect();
                self.rng.as_mut().expect("shuffled schedule has an rng").shuffle(&mut order);
                for i in order {
                    self.agents[i].update(phase, &inbox(i));
                }
            }
            Schedule::Parallel => {
                self.agents
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(i, a)| a.update(phase, &inbox(i)));
            }
        }
        self.messages += 2 * self.graph.edges().len() as u64;
    }
}

fn stack_blocks<A: PrimalDualAgent>(agents: &[A], pick: impl Fn(&A) -> (Vec<f64>, Vec<f64>)) -> Vector {
    let (mut primal, mut dual) = (Vec::new(), Vec::new());
    for a in agents {
        let (p, d) = pick(a);
        primal.extend(p);
        dual.extend(d);
    }
    primal.extend(dual);
    Vector::from_vec(primal)
}

impl<A: PrimalDualAgent> Simulator<A> {
    /// Stacked iterate in the layout of the centralised problem.
    pub fn stacked(&self) -> Vector {
        stack_blocks(&self.agents, A::blocks)
    }

    pub fn stacked_ergodic_sample(&self) -> Vector {
        stack_blocks(&self.agents, A::ergodic_blocks)
    }

    /// Sum of every agent's local gradient evaluations.
    pub fn local_gradient_calls(&self) -> u64 {
        self.agents.iter().map(A::local_gradient_calls).sum()
    }
}

/// A simulator plus the running ergodic average of its stacked iterates.
#[derive(Debug, Clone)]
pub struct DistributedRun<A: PrimalDualAgent> {
    sim: Simulator<A>,
    avg: ErgodicAverage,
    method: NetworkMethod,
}

impl<A: PrimalDualAgent> DistributedRun<A> {
    pub fn new(sim: Simulator<A>, method: NetworkMethod) -> Self {
        let dim = sim.stacked().len();
        Self {
            sim,
            avg: ErgodicAverage::new(dim),
            method,
        }
    }

    pub fn step(&mut self) {
        self.sim.round();
        self.avg.push(&self.sim.stacked_ergodic_sample());
    }

    pub fn simulator(&self) -> &Simulator<A> {
        &self.sim
    }

    pub fn method(&self) -> NetworkMethod {
        self.method
    }

    pub fn iterations(&self) -> usize {
        self.sim.rounds()
    }

    /// Network-wide operator evaluations: one per phase per round.
    pub fn gradient_calls(&self) -> u64 {
        self.sim.rounds() as u64 * self.method.gradient_calls_per_round()
    }

    pub fn stacked(&self) -> Vector {
        self.sim.stacked()
    }

    pub fn ergodic_mean(&self) -> Option<Vector> {
        self.avg.mean()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Averages with neighbours; a one-phase toy protocol.
    #[derive(Debug, Clone)]
    struct Averager {
        value: f64,
        seen: Vec<usize>,
    }

    impl Agent for Averager {
        type Message = f64;
        fn phases(&self) -> usize {
            1
        }
        fn publish(&self, _phase: usize) -> f64 {
            self.value
        }
        fn update(&mut self, _phase: usize, inbox: &Inbox<'_, f64>) {
            let mut s = *inbox.own();
            for (j, &m) in inbox.neighbors() {
                self.seen.push(j);
                s += m;
            }
            self.value = s / (inbox.len() + 1) as f64;
        }
    }

    fn agents(n: usize) -> Vec<Averager> {
        (0..n)
            .map(|i| Averager {
                value: i as f64,
                seen: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn schedules_agree_bitwise() {
        let g = NetworkGraph::random_connected(9, 0.3, 5).unwrap();
        let mut runs = Vec::new();
        for s in [Schedule::InOrder, Schedule::Shuffled { seed: 3 }, Schedule::Parallel] {
            let mut sim = Simulator::new(g.clone(), agents(9), s).unwrap();
            for _ in 0..50 {
                sim.round();
            }
            runs.push(sim.agents().iter().map(|a| a.value.to_bits()).collect::<Vec<_>>());
        }
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }

    #[test]
    fn only_neighbours_are_visible() {
        let g = NetworkGraph::ring(6).unwrap();
        let mut sim = Simulator::new(g.clone(), agents(6), Schedule::InOrder).unwrap();
        sim.round();
        for (i, a) in sim.agents().iter().enumerate() {
            assert_eq!(a.seen, g.neighbors(i));
        }
        assert_eq!(sim.messages_delivered(), 12);
    }

    #[test]
    fn method_names() {
        assert_eq!(NetworkMethod::parse("EG").unwrap(), NetworkMethod::Eg);
        assert!(matches!(NetworkMethod::parse("gda"), Err(Error::Unsupported(_))));
        assert!(matches!(NetworkMethod::parse("x"), Err(Error::UnknownMethod(_))));
        assert!(NetworkMethod::Ogda.resolve_step(2.0, Some(0.3), false).is_err());
        assert!(NetworkMethod::Eg.resolve_step(2.0, Some(0.3), false).is_ok());
    }

    #[test]
    fn agent_count_checked() {
        let g = NetworkGraph::ring(4).unwrap();
        assert!(Simulator::new(g, agents(3), Schedule::InOrder).is_err());
    }
}
