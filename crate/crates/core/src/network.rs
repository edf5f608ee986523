//! Communication graph, consensus weights, FIM consensus and link delays.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Undirected ring lattice; each agent links to `degree / 2` agents on each side.
    Circulant { degree: usize },
    Complete,
    /// Directed edges `(from, to)`: agent `to` receives from agent `from`.
    Custom { edges: Vec<(usize, usize)> },
    /// No links at all.
    Isolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    pub n: usize,
    /// In-neighbors of each agent, self excluded, ascending.
    pub in_neighbors: Vec<Vec<usize>>,
    /// `weights[(j, i)] = w_ji`; row `j` sums to one.
    pub weights: DMatrix<f64>,
    pub topology: Topology,
}

impl CommGraph {
    pub fn build(n: usize, topology: &Topology) -> Result<Self> {
        match topology {
            Topology::Circulant { degree } => Self::circulant(n, *degree),
            Topology::Complete => Self::complete(n),
            Topology::Custom { edges } => Self::custom(n, edges),
            Topology::Isolated => Self::isolated(n),
        }
    }

    pub fn circulant(n: usize, degree: usize) -> Result<Self> {
        if degree == 0 || !degree.is_multiple_of(2) {
            return Err(Error::Config(format!("circulant degree must be even and positive, got {degree}")));
        }
        if n < degree + 1 {
            return Err(Error::Config(format!("circulant graph of degree {degree} needs n >= {}, got {n}", degree + 1)));
        }
        let half = degree / 2;
        let mut edges = Vec::with_capacity(n * degree);
        for j in 0..n {
            for s in 1..=half {
                edges.push(((j + s) % n, j));
                edges.push(((j + n - s) % n, j));
            }
        }
        let mut g = Self::from_edges(n, &edges)?;
        g.topology = Topology::Circulant { degree };
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("graph needs at least one agent".into()));
        }
        let edges: Vec<_> = (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j))).collect();
        let mut g = Self::from_edges(n, &edges)?;
        g.topology = Topology::Complete;
        Ok(g)
    }

    pub fn isolated(n: usize) -> Result<Self> {
        let mut g = Self::from_edges(n, &[])?;
        g.topology = Topology::Isolated;
        Ok(g)
    }

    pub fn custom(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::from_edges(n, edges)?;
        g.topology = Topology::Custom { edges: edges.to_vec() };
        Ok(g)
    }

    /// Metropolis weights when the edge set is symmetric, uniform
    /// `1 / |N_j|` row weights otherwise.
    fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("graph needs at least one agent".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::Config(format!("edge ({from}, {to}) out of range for {n} agents")));
            }
            if from != to {
                adj[to][from] = true;
            }
        }
        let in_neighbors: Vec<Vec<usize>> =
            (0..n).map(|j| (0..n).filter(|&i| adj[j][i]).collect()).collect();
        let symmetric = (0..n).all(|j| (0..n).all(|i| adj[j][i] == adj[i][j]));
        let mut weights = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut off = 0.0;
            for &i in &in_neighbors[j] {
                let w = if symmetric {
                    1.0 / (1.0 + in_neighbors[i].len().max(in_neighbors[j].len()) as f64)
                } else {
                    1.0 / (1.0 + in_neighbors[j].len() as f64)
                };
                weights[(j, i)] = w;
                off += w;
            }
            weights[(j, j)] = 1.0 - off;
        }
        Ok(Self {
            n,
            in_neighbors,
            weights,
            topology: Topology::Custom { edges: edges.to_vec() },
        })
    }

    /// `N_j` with `j` first, then its in-neighbors.
    pub fn neighborhood(&self, j: usize) -> Vec<usize> {
        std::iter::once(j).chain(self.in_neighbors[j].iter().copied()).collect()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        self.in_neighbors[j].len()
    }

    pub fn weight(&self, j: usize, i: usize) -> f64 {
        self.weights[(j, i)]
    }

    pub fn check_row_stochastic(&self) -> Result<()> {
        for j in 0..self.n {
            let row = self.weights.row(j);
            if row.iter().any(|&w| w < 0.0) {
                return Err(Error::Weight(format!("row {j} has a negative weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Weight(format!("row {j} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn check_doubly_stochastic(&self) -> Result<()> {
        self.check_row_stochastic()?;
        for i in 0..self.n {
            let sum: f64 = self.weights.column(i).iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Weight(format!("column {i} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Per-agent inputs of one FIM consensus round.
#[derive(Debug, Clone, PartialEq)]
pub struct FimConsensusState {
    /// Running global-FIM estimate.
    pub estimate: DMatrix<f64>,
    /// Partial FIM at this round.
    pub current: DMatrix<f64>,
    /// Partial FIM at the previous round.
    pub previous: DMatrix<f64>,
}

/// Synchronous round `F_hat_j <- sum_i w_ji F_hat_i + F_j - F_j^-`.
pub fn fim_consensus_step(agents: &[FimConsensusState], graph: &CommGraph) -> Result<Vec<DMatrix<f64>>> {
    if agents.len() != graph.n {
        return Err(Error::Config(format!("{} agents on a graph of {}", agents.len(), graph.n)));
    }
    graph.check_doubly_stochastic()?;
    Ok((0..graph.n)
        .map(|j| {
            let mut next = &agents[j].current - &agents[j].previous;
            for i in graph.neighborhood(j) {
                next += &agents[i].estimate * graph.weight(j, i);
            }
            next
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayRole {
    /// A central node receiving from `m` sensors.
    Centralized(usize),
    /// An agent with `k` incoming links.
    Distributed(usize),
}

/// Half a tick of delay per incoming connection, rounded down.
pub fn delay_for(role: DelayRole) -> usize {
    match role {
        DelayRole::Centralized(m) => m / 2,
        DelayRole::Distributed(k) => k / 2,
    }
}

/// FIFO link that releases a payload exactly `delay` ticks after it was sent.
#[derive(Debug, Clone)]
pub struct DelayChannel<T> {
    delay: usize,
    queue: VecDeque<(usize, T)>,
    latest: Option<(usize, T)>,
}

impl<T> DelayChannel<T> {
    pub fn new(delay: usize) -> Self {
        Self { delay, queue: VecDeque::new(), latest: None }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Sends must come in non-decreasing tick order.
    pub fn send(&mut self, tick: usize, payload: T) {
        debug_assert!(self.queue.back().is_none_or(|(t, _)| *t <= tick));
        self.queue.push_back((tick, payload));
    }

    fn release(&mut self, tick: usize) {
        while self.queue.front().is_some_and(|(t, _)| t + self.delay <= tick) {
            self.latest = self.queue.pop_front();
        }
    }

    /// Most recent payload visible at `tick`, with its send tick.
    pub fn latest(&mut self, tick: usize) -> Option<(usize, &T)> {
        self.release(tick);
        self.latest.as_ref().map(|(t, p)| (*t, p))
    }
}
