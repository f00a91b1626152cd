//! Directed contact graphs and the strong-connectivity check that grounds
//! the irreducibility assumption on infection matrices.
//!
//! Arcs point in the direction of contagion: an arc (j, i) with weight β
//! means group `i` can be infected by group `j` at rate β. The dense
//! adjacency matrix therefore carries that weight at entry (i, j).

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// One weighted arc; contagion flows `source → target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphArc {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl GraphArc {
    pub fn new(source: usize, target: usize, weight: f64) -> Self {
        Self {
            source,
            target,
            weight,
        }
    }
}

/// Directed graph with nonnegative arc weights (infection rates along the
/// direction of contagion), self-arcs allowed. Immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGraph {
    n: usize,
    arcs: Vec<GraphArc>,
    adjacency: DMatrix<f64>,
    irreducible: bool,
}

impl ContactGraph {
    /// Builds a graph on `n` nodes and caches the irreducibility
    /// certificate of its strictly-positive-weight subgraph.
    pub fn new(n: usize, arcs: Vec<GraphArc>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition(
                "contact graph needs at least one node".into(),
            ));
        }
        let mut seen = HashSet::new();
        for arc in &arcs {
            if arc.source >= n || arc.target >= n {
                return Err(Error::Precondition(format!(
                    "arc ({}, {}) references a node outside [0, {n})",
                    arc.source, arc.target
                )));
            }
            if !(arc.weight >= 0.0) || !arc.weight.is_finite() {
                return Err(Error::Precondition(format!(
                    "arc ({}, {}) has weight {}, expected a finite nonnegative rate",
                    arc.source, arc.target, arc.weight
                )));
            }
            if !seen.insert((arc.source, arc.target)) {
                return Err(Error::Precondition(format!(
                    "duplicate arc ({}, {})",
                    arc.source, arc.target
                )));
            }
        }
        let mut adjacency = DMatrix::zeros(n, n);
        for arc in &arcs {
            adjacency[(arc.target, arc.source)] = arc.weight;
        }
        let irreducible = check_irreducible(&adjacency)?;
        Ok(Self {
            n,
            arcs,
            adjacency,
            irreducible,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[GraphArc] {
        &self.arcs
    }

    /// Dense infection matrix B with entry (i, j) equal to the weight of
    /// the arc j → i, zero where no arc exists.
    pub fn adjacency_matrix(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// True iff the subgraph of strictly-positive-weight arcs is strongly
    /// connected.
    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }
}

/// True iff the directed graph with an arc j → i whenever `b[(i, j)] > 0`
/// is strongly connected, i.e. `b` cannot be permuted to block upper
/// triangular form. Uses a strongly-connected-components decomposition;
/// the arc-existence threshold is an exact `> 0` comparison.
pub fn check_irreducible(b: &DMatrix<f64>) -> Result<bool> {
    let n = b.nrows();
    if n != b.ncols() {
        return Err(Error::Shape(format!(
            "irreducibility is defined for square matrices, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if !(b[(i, j)] >= 0.0) {
                return Err(Error::Precondition(format!(
                    "entry ({i}, {j}) = {} is negative or NaN",
                    b[(i, j)]
                )));
            }
        }
    }
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if b[(i, j)] > 0.0 {
                graph.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    Ok(tarjan_scc(&graph).len() == 1)
}
