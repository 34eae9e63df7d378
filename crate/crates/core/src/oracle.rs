//! Exact default probabilities by enumerating every possible world.
//!
//! A world fixes each node's self-default coin and each edge's survival coin;
//! a node defaults in it iff it self-defaults or is reachable from a
//! self-defaulted node through surviving edges. There are 2^(n+m) worlds, so
//! this is only usable on tiny graphs; it is the ground truth for the tests.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, UncertainGraph};
use crate::result::{rank_desc, Estimator, Method, RankedNode, RunParams, TopKResult};

/// Largest n + m the oracle will enumerate.
pub const ORACLE_BUDGET: usize = 24;

fn check_budget(g: &UncertainGraph) -> Result<()> {
    let size = g.node_count() + g.edge_count();
    if size > ORACLE_BUDGET {
        Err(Error::BudgetExceeded {
            size,
            budget: ORACLE_BUDGET,
        })
    } else {
        Ok(())
    }
}

/// One possible world as two bit masks: bit `v` of `self_defaults` is node v's
/// self-default outcome, bit `e` of `surviving_edges` is edge e's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PossibleWorld {
    pub self_defaults: u32,
    pub surviving_edges: u32,
}

impl PossibleWorld {
    pub fn probability(&self, g: &UncertainGraph) -> f64 {
        let nodes =
            g.self_risks()
                .iter()
                .enumerate()
                .map(|(v, &p)| if self.self_defaults >> v & 1 == 1 { p } else { 1.0 - p });
        let edges = g.edges().iter().enumerate().map(|(e, edge)| {
            if self.surviving_edges >> e & 1 == 1 {
                edge.p
            } else {
                1.0 - edge.p
            }
        });
        nodes.chain(edges).product()
    }

    /// Mask of defaulted nodes, by BFS from the self-defaulted ones.
    pub fn defaulted(&self, g: &UncertainGraph) -> u32 {
        let mut reached = self.self_defaults;
        let mut frontier = reached;
        while frontier != 0 {
            let u = frontier.trailing_zeros();
            frontier &= frontier - 1;
            for &(dst, e) in g.out_edges(NodeId(u)) {
                if self.surviving_edges >> e & 1 == 1 && reached >> dst & 1 == 0 {
                    reached |= 1 << dst;
                    frontier |= 1 << dst;
                }
            }
        }
        reached
    }
}

/// Every world of `g`, in mixed-radix order (node bits fastest).
pub fn worlds(g: &UncertainGraph) -> Result<impl Iterator<Item = PossibleWorld>> {
    check_budget(g)?;
    let n = g.node_count();
    let node_mask = (1u64 << n) - 1;
    Ok((0..1u64 << (n + g.edge_count())).map(move |w| PossibleWorld {
        self_defaults: (w & node_mask) as u32,
        surviving_edges: (w >> n) as u32,
    }))
}

/// Products of per-bit probabilities for any mask of up to 24 bits, from two
/// 12-bit lookup tables.
struct MaskWeights {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl MaskWeights {
    const SPLIT: usize = 12;

    fn new(probs: &[f64]) -> Self {
        let table = |ps: &[f64]| -> Vec<f64> {
            (0..1usize << ps.len())
                .map(|mask| {
                    ps.iter()
                        .enumerate()
                        .map(|(i, &p)| if mask >> i & 1 == 1 { p } else { 1.0 - p })
                        .product()
                })
                .collect()
        };
        let cut = probs.len().min(Self::SPLIT);
        MaskWeights {
            lo: table(&probs[..cut]),
            hi: table(&probs[cut..]),
        }
    }

    #[inline]
    fn weight(&self, mask: u32) -> f64 {
        self.lo[(mask as usize) & ((1 << Self::SPLIT) - 1)] * self.hi[(mask as usize) >> Self::SPLIT]
    }
}

/// For each node u, the mask of nodes reachable from u (including u) using
/// only the edges in `surviving`.
fn reach_masks(g: &UncertainGraph, surviving: u32, out: &mut [u32]) {
    for (u, slot) in out.iter_mut().enumerate() {
        let world = PossibleWorld {
            self_defaults: 1 << u,
            surviving_edges: surviving,
        };
        *slot = world.defaulted(g);
    }
}

/// Exact p(v) for every node: the total probability of the worlds in which v
/// defaults.
pub fn exact_default_probabilities(g: &UncertainGraph) -> Result<Vec<f64>> {
    check_budget(g)?;
    let n = g.node_count();
    let m = g.edge_count();
    let node_w = MaskWeights::new(g.self_risks());
    let edge_probs: Vec<f64> = g.edges().iter().map(|e| e.p).collect();
    let edge_w = MaskWeights::new(&edge_probs);

    // Fixed chunking keeps the summation order independent of thread count.
    let edge_masks = 1u32 << m;
    let chunk = (edge_masks / 64).max(1);
    let partials: Vec<Vec<f64>> = (0..edge_masks.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n];
            let mut reach = vec![0u32; n];
            for em in c * chunk..((c + 1) * chunk).min(edge_masks) {
                let we = edge_w.weight(em);
                if we == 0.0 {
                    continue;
                }
                reach_masks(g, em, &mut reach);
                for s in 0..1u32 << n {
                    let p = we * node_w.weight(s);
                    if p == 0.0 {
                        continue;
                    }
                    let mut defaulted = 0u32;
                    let mut bits = s;
                    while bits != 0 {
                        defaulted |= reach[bits.trailing_zeros() as usize];
                        bits &= bits - 1;
                    }
                    while defaulted != 0 {
                        acc[defaulted.trailing_zeros() as usize] += p;
                        defaulted &= defaulted - 1;
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

/// The k nodes with the largest exact default probability.
pub fn exact_topk(g: &UncertainGraph, k: usize) -> Result<TopKResult> {
    let start = Instant::now();
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let probs = exact_default_probabilities(g)?;
    let mut ranked: Vec<(NodeId, f64)> = g.nodes().zip(probs).collect();
    rank_desc(&mut ranked);
    let entries = ranked[..k]
        .iter()
        .map(|&(node, estimate)| RankedNode {
            node,
            estimate,
            verified: false,
            estimator: Estimator::Exact,
        })
        .collect();
    Ok(TopKResult {
        method: Method::Oracle,
        entries,
        params: RunParams {
            k,
            ..Default::default()
        },
        wall_time: start.elapsed(),
    })
}
