//! Undirected connected communication graphs and their Laplacians.
//!
//! `L ⊗ I_m` is never formed; per-agent neighbour sums
//! `Σ_{j∈N_i}(u_i − u_j)` are computed from adjacency lists instead.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::linalg::{power_iteration, power_start};
use crate::rng::SeededRng;
use crate::{Error, Matrix, Result, Vector};

/// Threshold on the second-smallest Laplacian eigenvalue for connectivity.
pub const CONNECTIVITY_TOL: f64 = 1e-10;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EdgeList", into = "EdgeList")]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Serialized form: agent count plus an edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl TryFrom<EdgeList> for NetworkGraph {
    type Error = Error;
    fn try_from(e: EdgeList) -> Result<Self> {
        NetworkGraph::from_edges(e.n, &e.edges)
    }
}

impl From<NetworkGraph> for EdgeList {
    fn from(g: NetworkGraph) -> Self {
        EdgeList {
            n: g.n,
            edges: g.edges,
        }
    }
}

impl NetworkGraph {
    /// Builds a graph and checks that it is simple, undirected and connected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop at {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let g = Self {
            n,
            edges,
            neighbors,
        };
        if n > 1 {
            let fiedler = g.algebraic_connectivity();
            if !(fiedler > CONNECTIVITY_TOL) {
                return Err(Error::Graph(format!(
                    "graph is not connected (second-smallest Laplacian eigenvalue {fiedler:e})"
                )));
            }
        }
        Ok(g)
    }

    /// Cycle on `n >= 3` vertices.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Graph(format!("ring needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::from_edges(n, &edges)
    }

    /// Erdős–Rényi draw with edge probability `edge_prob`, united with a
    /// random spanning tree so the result is always connected.
    pub fn random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Graph(format!("random graph needs n >= 2, got {n}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(Error::Graph(format!("edge probability {edge_prob} not in (0, 1]")));
        }
        let mut rng = SeededRng::new(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.unit() < edge_prob {
                    edges.push((i, j));
                }
            }
        }
        // random spanning tree: attach each vertex of a random order to an
        // earlier one
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for k in 1..n {
            let parent = order[rng.below(k)];
            edges.push((order[k], parent));
        }
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Dense `L = D − A` (`n × n`).
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// `Σ_{j∈N_i}(u_i − u_j)` for one agent.
    pub fn neighbor_sum(&self, i: usize, u: &[Vector]) -> Vector {
        let mut acc = Vector::zeros(u[i].len());
        for &j in &self.neighbors[i] {
            acc += &u[i] - &u[j];
        }
        acc
    }

    /// `(L ⊗ I_m) u` as per-agent blocks.
    pub fn laplacian_apply(&self, u: &[Vector]) -> Vec<Vector> {
        (0..self.n).map(|i| self.neighbor_sum(i, u)).collect()
    }

    /// Scalar-per-vertex `L u` on a plain vector.
    fn apply_scalar(&self, u: &Vector) -> Vector {
        Vector::from_iterator(
            self.n,
            (0..self.n).map(|i| {
                self.neighbors[i]
                    .iter()
                    .map(|&j| u[i] - u[j])
                    .sum::<f64>()
            }),
        )
    }

    /// The solution of `L u = b − mean(b)·𝟙` orthogonal to `𝟙`, via the
    /// positive definite system `(L + 𝟙𝟙ᵀ/n) u = b − mean(b)·𝟙`.
    pub fn solve_laplacian(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mean = b.iter().sum::<f64>() / self.n as f64;
        let rhs = Vector::from_iterator(self.n, b.iter().map(|x| x - mean));
        let a = self.laplacian().add_scalar(1.0 / self.n as f64);
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Graph("Laplacian system is not positive definite".into()))?;
        Ok(chol.solve(&rhs).as_slice().to_vec())
    }

    /// Largest Laplacian eigenvalue by power iteration from [`power_start`].
    pub fn lambda_max(&self) -> Result<f64> {
        if self.edges.is_empty() {
            return Ok(0.0);
        }
        let est = power_iteration(|v| self.apply_scalar(v), power_start(self.n), POWER_MAX_ITERS, POWER_TOL);
        if !est.converged {
            return Err(Error::NoConvergence {
                iters: est.iterations,
            });
        }
        Ok(est.value)
    }

    /// Second-smallest Laplacian eigenvalue (dense symmetric eigensolve).
    pub fn algebraic_connectivity(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut ev: Vec<f64> = self.laplacian().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    }
}
