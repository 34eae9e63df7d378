//! Uncertain directed graphs: nodes carry a self-risk probability, edges a
//! diffusion probability.
//!
//! Node ids are dense indices assigned in insertion (file) order. Edge ids are
//! likewise dense and keep their value under [`reverse`], so a coin keyed by
//! edge id names the same physical edge in both orientations.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, GraphError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// Diffusion probability p(dst | src).
    pub p: f64,
}

/// Compressed adjacency: for each node, a run of `(neighbor, edge id)` pairs.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<u32>,
    entries: Vec<(u32, u32)>,
}

impl Csr {
    fn build(n: usize, pairs: impl Iterator<Item = (u32, u32, u32)> + Clone) -> Self {
        let mut offsets = vec![0u32; n + 1];
        for (from, _, _) in pairs.clone() {
            offsets[from as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![(0, 0); offsets[n] as usize];
        for (from, to, e) in pairs {
            let slot = &mut fill[from as usize];
            entries[*slot as usize] = (to, e);
            *slot += 1;
        }
        Csr { offsets, entries }
    }

    #[inline]
    fn row(&self, v: usize) -> &[(u32, u32)] {
        &self.entries[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }
}

/// A directed graph with per-node self-risk and per-edge diffusion
/// probabilities. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainGraph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    self_risk: Vec<f64>,
    edges: Vec<Edge>,
    out_adj: Csr,
    in_adj: Csr,
}

fn check_probability(p: f64) -> Result<f64, GraphError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(GraphError::ProbabilityOutOfRange(p))
    }
}

fn check_label(label: &str) -> Result<(), GraphError> {
    if label.is_empty() || label.starts_with('#') || label.contains(['\t', '\n', '\r']) {
        Err(GraphError::InvalidLabel(label.to_string()))
    } else {
        Ok(())
    }
}

/// Incremental, validating graph construction.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    self_risk: Vec<f64>,
    edges: Vec<Edge>,
    seen: HashSet<(u32, u32)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, label: &str, self_risk: f64) -> Result<NodeId, GraphError> {
        check_label(label)?;
        check_probability(self_risk)?;
        if self.index.contains_key(label) {
            return Err(GraphError::DuplicateNode(label.to_string()));
        }
        let id = NodeId::from(self.labels.len());
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        self.self_risk.push(self_risk);
        Ok(id)
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, p: f64) -> Result<(), GraphError> {
        let n = self.labels.len();
        for v in [src, dst] {
            if v.index() >= n {
                return Err(GraphError::UnknownLabel(format!("#{v}")));
            }
        }
        check_probability(p)?;
        if src == dst {
            return Err(GraphError::SelfEdge(self.labels[src.index()].clone()));
        }
        if !self.seen.insert((src.0, dst.0)) {
            return Err(GraphError::DuplicateEdge {
                src: self.labels[src.index()].clone(),
                dst: self.labels[dst.index()].clone(),
            });
        }
        self.edges.push(Edge { src, dst, p });
        Ok(())
    }

    pub fn add_edge_by_label(&mut self, src: &str, dst: &str, p: f64) -> Result<(), GraphError> {
        let s = self
            .node_id(src)
            .ok_or_else(|| GraphError::UnknownLabel(src.to_string()))?;
        let d = self
            .node_id(dst)
            .ok_or_else(|| GraphError::UnknownLabel(dst.to_string()))?;
        self.add_edge(s, d, p)
    }

    pub fn build(self) -> UncertainGraph {
        UncertainGraph::assemble(self.labels, self.index, self.self_risk, self.edges)
    }
}

impl UncertainGraph {
    fn assemble(labels: Vec<String>, index: HashMap<String, NodeId>, self_risk: Vec<f64>, edges: Vec<Edge>) -> Self {
        let n = labels.len();
        assert!(u32::try_from(edges.len()).is_ok(), "edge count exceeds u32");
        assert!(self_risk
            .iter()
            .chain(edges.iter().map(|e| &e.p))
            .all(|p| (0.0..=1.0).contains(p)));
        let numbered = edges.iter().enumerate().map(|(i, e)| (e.src.0, e.dst.0, i as u32));
        let out_adj = Csr::build(n, numbered.clone());
        let in_adj = Csr::build(n, numbered.map(|(s, d, i)| (d, s, i)));
        UncertainGraph {
            labels,
            index,
            self_risk,
            edges,
            out_adj,
            in_adj,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.node_count() as u32).map(NodeId)
    }

    #[inline]
    pub fn self_risk(&self, v: NodeId) -> f64 {
        self.self_risk[v.index()]
    }

    pub fn self_risks(&self) -> &[f64] {
        &self.self_risk
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.index()]
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    /// Outgoing `(dst, edge id)` pairs of `v`.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> &[(u32, u32)] {
        self.out_adj.row(v.index())
    }

    /// Incoming `(src, edge id)` pairs of `v`; the sources are exactly N(v).
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> &[(u32, u32)] {
        self.in_adj.row(v.index())
    }

    pub fn in_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(v).iter().map(|&(u, _)| NodeId(u))
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges(v).len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges(v).len()
    }

    /// Same topology and labels, new probabilities. Panics on length mismatch
    /// or out-of-range values.
    pub fn with_probabilities(&self, self_risk: Vec<f64>, edge_p: Vec<f64>) -> UncertainGraph {
        assert_eq!(self_risk.len(), self.node_count());
        assert_eq!(edge_p.len(), self.edge_count());
        let edges = self.edges.iter().zip(edge_p).map(|(e, p)| Edge { p, ..*e }).collect();
        UncertainGraph::assemble(self.labels.clone(), self.index.clone(), self_risk, edges)
    }
}

/// A graph whose every edge points the other way. Edge ids and self-risks are
/// those of the original graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedGraph(UncertainGraph);

impl ReversedGraph {
    pub fn as_graph(&self) -> &UncertainGraph {
        &self.0
    }

    /// Flip the edges back, recovering the original orientation.
    pub fn reverse(&self) -> UncertainGraph {
        flip(&self.0)
    }
}

impl std::ops::Deref for ReversedGraph {
    type Target = UncertainGraph;

    fn deref(&self) -> &UncertainGraph {
        &self.0
    }
}

fn flip(g: &UncertainGraph) -> UncertainGraph {
    let edges = g
        .edges
        .iter()
        .map(|e| Edge {
            src: e.dst,
            dst: e.src,
            p: e.p,
        })
        .collect();
    UncertainGraph::assemble(g.labels.clone(), g.index.clone(), g.self_risk.clone(), edges)
}

pub fn reverse(g: &UncertainGraph) -> ReversedGraph {
    ReversedGraph(flip(g))
}

/// Redraws every self-risk and diffusion probability uniformly from [0, 1].
/// Nodes are drawn first in id order, then edges in id order.
pub fn assign_random_probabilities(g: &UncertainGraph, seed: u64) -> UncertainGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let self_risk = (0..g.node_count()).map(|_| rng.gen::<f64>()).collect();
    let edge_p = (0..g.edge_count()).map(|_| rng.gen::<f64>()).collect();
    g.with_probabilities(self_risk, edge_p)
}

fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    r.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| match l {
        Ok(s) => !(s.is_empty() || s.starts_with('#')),
        Err(_) => true,
    })
}

fn parse_probability(field: &str) -> Result<f64, GraphError> {
    let p: f64 = field
        .trim()
        .parse()
        .map_err(|_| GraphError::MalformedLine(format!("`{field}` is not a number")))?;
    check_probability(p)
}

/// Reads a graph from a node file (`label<TAB>p_self`) and an edge file
/// (`src<TAB>dst<TAB>p_diff`). Blank lines and `#` lines are skipped.
pub fn parse_graph<N: BufRead, E: BufRead>(nodes: N, edges: E) -> Result<UncertainGraph> {
    let mut b = GraphBuilder::new();
    let at = |file, line| move |source| Error::Parse { file, line, source };

    for (line, text) in data_lines(nodes) {
        let text = text?;
        let fields: Vec<&str> = text.split('\t').collect();
        let [label, p] = fields[..] else {
            return Err(at("nodes", line)(GraphError::MalformedLine(format!(
                "expected 2 tab-separated fields, found {}",
                fields.len()
            ))));
        };
        let p = parse_probability(p).map_err(at("nodes", line))?;
        b.add_node(label, p).map_err(at("nodes", line))?;
    }

    for (line, text) in data_lines(edges) {
        let text = text?;
        let fields: Vec<&str> = text.split('\t').collect();
        let [src, dst, p] = fields[..] else {
            return Err(at("edges", line)(GraphError::MalformedLine(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            ))));
        };
        let p = parse_probability(p).map_err(at("edges", line))?;
        b.add_edge_by_label(src, dst, p).map_err(at("edges", line))?;
    }

    Ok(b.build())
}

/// Writes the graph in the format read by [`parse_graph`]. Probabilities use
/// the shortest decimal form that reads back to the same `f64`.
pub fn write_graph<N: Write, E: Write>(g: &UncertainGraph, mut nodes: N, mut edges: E) -> Result<()> {
    for v in g.nodes() {
        writeln!(nodes, "{}\t{}", g.label(v), g.self_risk(v))?;
    }
    for e in g.edges() {
        writeln!(edges, "{}\t{}\t{}", g.label(e.src), g.label(e.dst), e.p)?;
    }
    nodes.flush()?;
    edges.flush()?;
    Ok(())
}

/// Small fixed graphs used throughout the tests and docs.
pub mod fixtures {
    use super::*;

    /// A -> B with every probability 0.2.
    pub fn example_chain() -> UncertainGraph {
        let mut b = GraphBuilder::new();
        let a = b.add_node("A", 0.2).unwrap();
        let bb = b.add_node("B", 0.2).unwrap();
        b.add_edge(a, bb, 0.2).unwrap();
        b.build()
    }

    /// r -> x1 -> v, r -> x2 -> v. Only r can self-default (0.5); the r -> x
    /// edges always fire and the x -> v edges fire with probability 0.5.
    /// The two paths into v share r, so their contributions are correlated.
    pub fn diamond_witness() -> UncertainGraph {
        let mut b = GraphBuilder::new();
        let r = b.add_node("r", 0.5).unwrap();
        let x1 = b.add_node("x1", 0.0).unwrap();
        let x2 = b.add_node("x2", 0.0).unwrap();
        let v = b.add_node("v", 0.0).unwrap();
        b.add_edge(r, x1, 1.0).unwrap();
        b.add_edge(r, x2, 1.0).unwrap();
        b.add_edge(x1, v, 0.5).unwrap();
        b.add_edge(x2, v, 0.5).unwrap();
        b.build()
    }

    /// A five-node, six-edge toy network in the spirit of a small guarantee
    /// network; every probability 0.2.
    pub fn toy_network() -> UncertainGraph {
        let mut b = GraphBuilder::new();
        for l in ["A", "B", "C", "D", "E"] {
            b.add_node(l, 0.2).unwrap();
        }
        for (s, d) in [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("D", "E"), ("C", "E")] {
            b.add_edge_by_label(s, d, 0.2).unwrap();
        }
        b.build()
    }
}
