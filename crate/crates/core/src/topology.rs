//! Interaction graphs: undirected chains, directed chains and directed trees.
//!
//! Nodes are numbered from 1. An edge `(i, j)` means node `j` hears node `i`'s
//! pulses, and the weight of that edge is the receiver's coupling strength.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    UndirectedChain,
    DirectedChain,
    DirectedTree,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::UndirectedChain => "undirected-chain",
            TopologyKind::DirectedChain => "directed-chain",
            TopologyKind::DirectedTree => "directed-tree",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("network needs at least one oscillator")]
    Empty,
    #[error("expected {expected} coupling strengths, got {got}")]
    CouplingCount { expected: usize, got: usize },
    #[error("coupling strength of node {node} is {value}, must lie in (0, 1)")]
    CouplingOutOfRange { node: usize, value: f64 },
    #[error("a directed tree needs a parent list")]
    MissingParents,
    #[error("expected {expected} parent entries, got {got}")]
    ParentCount { expected: usize, got: usize },
    #[error("tree has no root")]
    NoRoot,
    #[error("tree has more than one root: nodes {0} and {1}")]
    MultipleRoots(usize, usize),
    #[error("parent {parent} of node {node} is not a node id")]
    ParentOutOfRange { node: usize, parent: usize },
    #[error("node {0} lists itself as parent")]
    SelfLoop(usize),
    #[error("node {0} is not reachable from the root (cycle in parent list)")]
    Unreachable(usize),
    #[error("node id {id} is outside 1..={n}")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("operation requires a directed chain or tree, got {0}")]
    NotATree(TopologyKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    kind: TopologyKind,
    edges: BTreeSet<(usize, usize)>,
    coupling: Vec<f64>,
    parent: Vec<Option<usize>>,
    // out[i - 1] = sorted out-neighbors of node i
    out: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds and validates a topology. `parents` is only read for trees and
    /// holds `None` for the root and `Some(parent_id)` for every other node.
    pub fn build(
        kind: TopologyKind,
        n: usize,
        coupling: &[f64],
        parents: Option<&[Option<usize>]>,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if coupling.len() != n {
            return Err(TopologyError::CouplingCount {
                expected: n,
                got: coupling.len(),
            });
        }
        for (k, &l) in coupling.iter().enumerate() {
            if !(l > 0.0 && l < 1.0) {
                return Err(TopologyError::CouplingOutOfRange {
                    node: k + 1,
                    value: l,
                });
            }
        }

        let mut edges = BTreeSet::new();
        let mut parent = vec![None; n];
        match kind {
            TopologyKind::UndirectedChain => {
                for i in 1..n {
                    edges.insert((i, i + 1));
                    edges.insert((i + 1, i));
                }
            }
            TopologyKind::DirectedChain => {
                for i in 1..n {
                    edges.insert((i, i + 1));
                    parent[i] = Some(i);
                }
            }
            TopologyKind::DirectedTree => {
                let parents = parents.ok_or(TopologyError::MissingParents)?;
                parent = validate_parents(n, parents)?;
                for (k, p) in parent.iter().enumerate() {
                    if let Some(p) = p {
                        edges.insert((*p, k + 1));
                    }
                }
            }
        }

        let mut out = vec![Vec::new(); n];
        for &(i, j) in &edges {
            out[i - 1].push(j);
        }
        Ok(NetworkTopology {
            n,
            kind,
            edges,
            coupling: coupling.to_vec(),
            parent,
            out,
        })
    }

    pub fn undirected_chain(coupling: &[f64]) -> Result<Self, TopologyError> {
        Self::build(TopologyKind::UndirectedChain, coupling.len(), coupling, None)
    }

    pub fn directed_chain(coupling: &[f64]) -> Result<Self, TopologyError> {
        Self::build(TopologyKind::DirectedChain, coupling.len(), coupling, None)
    }

    pub fn directed_tree(
        parents: &[Option<usize>],
        coupling: &[f64],
    ) -> Result<Self, TopologyError> {
        Self::build(
            TopologyKind::DirectedTree,
            coupling.len(),
            coupling,
            Some(parents),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn coupling(&self, node: usize) -> f64 {
        self.coupling[node - 1]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.coupling
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node - 1]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn out_neighbors(&self, i: usize) -> Result<&[usize], TopologyError> {
        self.check_id(i)?;
        Ok(&self.out[i - 1])
    }

    pub fn check_id(&self, i: usize) -> Result<(), TopologyError> {
        if i == 0 || i > self.n {
            Err(TopologyError::NodeOutOfRange { id: i, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn root(&self) -> Option<usize> {
        match self.kind {
            TopologyKind::UndirectedChain => None,
            _ => self.parent.iter().position(Option::is_none).map(|k| k + 1),
        }
    }

    /// Splits a directed tree into its root-to-leaf chains, ordered by leaf id.
    pub fn decompose_tree(&self) -> Result<Vec<Vec<usize>>, TopologyError> {
        if self.kind == TopologyKind::UndirectedChain {
            return Err(TopologyError::NotATree(self.kind));
        }
        let mut chains = Vec::new();
        for leaf in 1..=self.n {
            if !self.out[leaf - 1].is_empty() {
                continue;
            }
            let mut chain = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = self.parent[cur - 1] {
                chain.push(p);
                cur = p;
            }
            chain.reverse();
            chains.push(chain);
        }
        Ok(chains)
    }
}

fn validate_parents(
    n: usize,
    parents: &[Option<usize>],
) -> Result<Vec<Option<usize>>, TopologyError> {
    if parents.len() != n {
        return Err(TopologyError::ParentCount {
            expected: n,
            got: parents.len(),
        });
    }
    let mut root = None;
    for (k, p) in parents.iter().enumerate() {
        let node = k + 1;
        match *p {
            None => {
                if let Some(r) = root {
                    return Err(TopologyError::MultipleRoots(r, node));
                }
                root = Some(node);
            }
            Some(p) if p == node => return Err(TopologyError::SelfLoop(node)),
            Some(p) if p == 0 || p > n => {
                return Err(TopologyError::ParentOutOfRange { node, parent: p })
            }
            Some(_) => {}
        }
    }
    if root.is_none() {
        return Err(TopologyError::NoRoot);
    }
    // every node must reach the root within n - 1 parent hops
    for start in 1..=n {
        let mut cur = start;
        let mut hops = 0;
        while let Some(p) = parents[cur - 1] {
            cur = p;
            hops += 1;
            if hops >= n {
                return Err(TopologyError::Unreachable(start));
            }
        }
    }
    Ok(parents.to_vec())
}
