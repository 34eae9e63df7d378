//! Forward Monte-Carlo estimation: materialize a world, BFS from the
//! self-defaulted nodes, count who defaults.

use std::time::Instant;

use rayon::prelude::*;

use crate::coins::WorldCoins;
use crate::error::{Error, Result};
use crate::graph::{NodeId, UncertainGraph};
use crate::result::{rank_desc, Estimator, Method, RankedNode, RunParams, TopKResult};

/// Accuracy `eps` and failure probability `delta` of an approximate top-k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    eps: f64,
    delta: f64,
}

impl ApproxParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if inside(eps) && inside(delta) {
            Ok(ApproxParams { eps, delta })
        } else {
            Err(Error::InvalidParams { eps, delta })
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// ceil((2 / eps^2) * ln(pairs / delta)), the sample count that keeps the
    /// union bound over `pairs` ordered node pairs below delta.
    pub(crate) fn samples_for_pairs(&self, pairs: f64) -> u64 {
        let t = 2.0 / (self.eps * self.eps) * (pairs / self.delta).ln();
        t.ceil().max(0.0) as u64
    }
}

impl Default for ApproxParams {
    fn default() -> Self {
        ApproxParams { eps: 0.3, delta: 0.1 }
    }
}

/// Sample count for forward sampling to be an (eps, delta)-approximation.
pub fn basic_sample_size(n: usize, k: usize, params: &ApproxParams) -> Result<u64> {
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(params.samples_for_pairs(k as f64 * (n - k) as f64))
}

/// Reusable buffers for [`sample_world_forward_into`].
#[derive(Debug, Clone)]
pub struct ForwardScratch {
    active: Vec<bool>,
    order: Vec<u32>,
}

impl ForwardScratch {
    pub fn new(n: usize) -> Self {
        ForwardScratch {
            active: vec![false; n],
            order: Vec::with_capacity(n),
        }
    }
}

/// Materializes one world and returns the defaulted nodes in activation
/// order. Edge coins are only drawn for edges whose target is still inactive.
pub fn sample_world_forward_into<'a>(
    g: &UncertainGraph,
    coins: &WorldCoins,
    scratch: &'a mut ForwardScratch,
) -> &'a [u32] {
    let ForwardScratch { active, order } = scratch;
    for &v in order.iter() {
        active[v as usize] = false;
    }
    order.clear();

    for v in g.nodes() {
        if coins.node(v) <= g.self_risk(v) {
            active[v.index()] = true;
            order.push(v.0);
        }
    }
    // `order` doubles as the BFS queue
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &(dst, e) in g.out_edges(NodeId(u)) {
            if active[dst as usize] {
                continue;
            }
            if coins.edge(e as usize) <= g.edge(e as usize).p {
                active[dst as usize] = true;
                order.push(dst);
            }
        }
    }
    order
}

/// The set of nodes that default in the world given by `coins`, ascending.
pub fn sample_world_forward(g: &UncertainGraph, coins: &WorldCoins) -> Vec<NodeId> {
    let mut scratch = ForwardScratch::new(g.node_count());
    let mut out: Vec<NodeId> = sample_world_forward_into(g, coins, &mut scratch)
        .iter()
        .map(|&v| NodeId(v))
        .collect();
    out.sort_unstable();
    out
}

/// Per-node default counts over `samples` forward samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimateTable {
    counts: Vec<u64>,
    samples: u64,
}

impl EstimateTable {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn estimate(&self, v: NodeId) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.counts[v.index()] as f64 / self.samples as f64
        }
    }

    pub fn estimates(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|v| self.estimate(NodeId(v as u32)))
            .collect()
    }

    /// Nodes by count descending, ties by id.
    pub fn ranking(&self) -> Vec<(NodeId, u64)> {
        let mut r: Vec<(NodeId, u64)> = self
            .counts
            .iter()
            .enumerate()
            .map(|(v, &c)| (NodeId(v as u32), c))
            .collect();
        rank_desc(&mut r);
        r
    }
}

pub(crate) fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Runs samples 1..=t. Integer counts make the result independent of how the
/// work is split across threads.
pub fn forward_estimates(g: &UncertainGraph, t: u64, seed: u64) -> EstimateTable {
    let n = g.node_count();
    let counts = (1..=t)
        .into_par_iter()
        .fold(
            || (ForwardScratch::new(n), vec![0u64; n]),
            |(mut scratch, mut counts), i| {
                for &v in sample_world_forward_into(g, &WorldCoins::new(seed, i), &mut scratch) {
                    counts[v as usize] += 1;
                }
                (scratch, counts)
            },
        )
        .map(|(_, c)| c)
        .reduce(|| vec![0u64; n], add_counts);
    EstimateTable { counts, samples: t }
}

fn forward_topk(
    g: &UncertainGraph,
    k: usize,
    t: u64,
    seed: u64,
    method: Method,
    params: Option<&ApproxParams>,
) -> Result<TopKResult> {
    let start = Instant::now();
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if t == 0 {
        return Err(Error::InvalidArguments("sample count must be at least 1".into()));
    }
    let table = forward_estimates(g, t, seed);
    let entries = table.ranking()[..k]
        .iter()
        .map(|&(node, _)| RankedNode {
            node,
            estimate: table.estimate(node),
            verified: false,
            estimator: Estimator::Forward,
        })
        .collect();
    Ok(TopKResult {
        method,
        entries,
        params: RunParams {
            k,
            eps: params.map(|p| p.eps()),
            delta: params.map(|p| p.delta()),
            seed: Some(seed),
            samples_planned: t,
            samples_used: t,
            ..Default::default()
        },
        wall_time: start.elapsed(),
    })
}

/// Method N: forward sampling with a caller-chosen sample count.
pub fn estimate_topk_basic(g: &UncertainGraph, k: usize, t: u64, seed: u64) -> Result<TopKResult> {
    forward_topk(g, k, t, seed, Method::N, None)
}

/// Method SN: forward sampling with the sample count from
/// [`basic_sample_size`].
pub fn sn_topk(g: &UncertainGraph, k: usize, params: &ApproxParams, seed: u64) -> Result<TopKResult> {
    let t = basic_sample_size(g.node_count(), k, params)?;
    forward_topk(g, k, t, seed, Method::SN, Some(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{assign_random_probabilities, GraphBuilder};

    fn uniform_graph(p_self: f64) -> UncertainGraph {
        let g = toy_network();
        g.with_probabilities(vec![p_self; 5], vec![0.9; 6])
    }

    #[test]
    fn certain_and_impossible_self_defaults() {
        for i in 1..50 {
            let coins = WorldCoins::new(1, i);
            assert_eq!(sample_world_forward(&uniform_graph(1.0), &coins).len(), 5);
            assert!(sample_world_forward(&uniform_graph(0.0), &coins).is_empty());
        }
    }

    #[test]
    fn chain_frequency_matches_exact_value() {
        let g = example_chain();
        let t = 100_000;
        let table = forward_estimates(&g, t, 77);
        // 0.232 +- 4 sigma, sigma = sqrt(0.232 * 0.768 / 1e5)
        assert!(
            (table.estimate(NodeId(1)) - 0.232).abs() <= 0.006,
            "{}",
            table.estimate(NodeId(1))
        );
        assert!(table.counts().iter().all(|&c| c <= t));
    }

    #[test]
    fn sample_size_closed_form() {
        let p = ApproxParams::new(0.3, 0.1).unwrap();
        assert_eq!(basic_sample_size(100, 10, &p).unwrap(), 203);
        assert_eq!(basic_sample_size(2, 1, &p).unwrap(), 52);
        assert!(matches!(basic_sample_size(5, 5, &p), Err(Error::InvalidK { .. })));
        assert!(matches!(basic_sample_size(5, 0, &p), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn params_must_be_inside_unit_interval() {
        assert!(ApproxParams::new(0.0, 0.1).is_err());
        assert!(ApproxParams::new(0.3, 1.0).is_err());
        assert!(ApproxParams::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn zero_risk_graph_returns_smallest_ids() {
        let g = uniform_graph(0.0);
        let r = estimate_topk_basic(&g, 3, 100, 5).unwrap();
        assert_eq!(r.nodes(), vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert!(r.entries.iter().all(|e| e.estimate == 0.0));
    }

    #[test]
    fn chain_top1_is_b() {
        let r = estimate_topk_basic(&example_chain(), 1, 50_000, 9).unwrap();
        assert_eq!(r.nodes(), vec![NodeId(1)]);
    }

    #[test]
    fn n_and_sn_agree_at_equal_sample_counts() {
        let g = assign_random_probabilities(&toy_network(), 4);
        let p = ApproxParams::default();
        let sn = sn_topk(&g, 2, &p, 21).unwrap();
        let n = estimate_topk_basic(&g, 2, sn.params.samples_used, 21).unwrap();
        assert_eq!(sn.entries, n.entries);
        assert_eq!(sn.method, Method::SN);
    }

    #[test]
    fn thread_count_does_not_change_counts() {
        let g = assign_random_probabilities(&toy_network(), 8);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| forward_estimates(&g, 5_000, 3))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_invalid_k() {
        let mut b = GraphBuilder::new();
        b.add_node("a", 0.5).unwrap();
        let g = b.build();
        assert!(matches!(estimate_topk_basic(&g, 2, 10, 1), Err(Error::InvalidK { .. })));
    }
}
