//! Reverse sampling: decide, per candidate, whether it defaults in a sampled
//! world by walking backwards from it, drawing coins only for what the walk
//! touches.
//!
//! Coins come from the same [`WorldCoins`] as forward sampling, so for a given
//! sample index both samplers see the same world and agree exactly.

use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{prune_candidates, reduce_candidates, BoundTable, CandidateReport};
use crate::coins::WorldCoins;
use crate::error::{Error, Result};
use crate::forward::{add_counts, ApproxParams};
use crate::graph::{reverse, NodeId, ReversedGraph, UncertainGraph};
use crate::result::{rank_desc, Estimator, Method, RankedNode, RunParams, TopKResult};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfCoin {
    Unchecked,
    Defaulted,
    Survived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeStatus {
    Unchecked,
    Survived,
    Blocked,
}

/// What is known about whether a node defaults in the current world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Unknown,
    Defaulting,
    /// No self-defaulted ancestor through surviving edges.
    Clean,
}

/// Coins drawn so far in one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReverseStats {
    pub node_coins: u64,
    pub edge_coins: u64,
    pub expansions: u64,
}

/// Per-sample memo for reverse sampling, reusable across samples. Entries are
/// stamped with the sample epoch, so starting a new sample is O(1).
#[derive(Debug, Clone)]
pub struct ReverseSampleState {
    epoch: u32,
    node_epoch: Vec<u32>,
    self_coin: Vec<SelfCoin>,
    resolution: Vec<Resolution>,
    edge_epoch: Vec<u32>,
    edge_status: Vec<EdgeStatus>,
    visit_epoch: u32,
    visited: Vec<u32>,
    parent: Vec<u32>,
    queue: Vec<u32>,
    stats: ReverseStats,
}

impl ReverseSampleState {
    pub fn new(n: usize, m: usize) -> Self {
        ReverseSampleState {
            epoch: 0,
            node_epoch: vec![0; n],
            self_coin: vec![SelfCoin::Unchecked; n],
            resolution: vec![Resolution::Unknown; n],
            edge_epoch: vec![0; m],
            edge_status: vec![EdgeStatus::Unchecked; m],
            visit_epoch: 0,
            visited: vec![0; n],
            parent: vec![NONE; n],
            queue: Vec::new(),
            stats: ReverseStats::default(),
        }
    }

    pub fn for_graph(g: &UncertainGraph) -> Self {
        Self::new(g.node_count(), g.edge_count())
    }

    pub fn stats(&self) -> ReverseStats {
        self.stats
    }

    pub fn self_coin(&self, v: NodeId) -> SelfCoin {
        if self.node_epoch[v.index()] == self.epoch {
            self.self_coin[v.index()]
        } else {
            SelfCoin::Unchecked
        }
    }

    pub fn resolution(&self, v: NodeId) -> Resolution {
        if self.node_epoch[v.index()] == self.epoch {
            self.resolution[v.index()]
        } else {
            Resolution::Unknown
        }
    }

    pub fn edge_status(&self, e: usize) -> EdgeStatus {
        if self.edge_epoch[e] == self.epoch {
            self.edge_status[e]
        } else {
            EdgeStatus::Unchecked
        }
    }

    fn begin_sample(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.node_epoch.fill(0);
            self.edge_epoch.fill(0);
            self.epoch = 1;
        }
        self.stats = ReverseStats::default();
    }

    fn begin_visit(&mut self) {
        self.visit_epoch = self.visit_epoch.wrapping_add(1);
        if self.visit_epoch == 0 {
            self.visited.fill(0);
            self.visit_epoch = 1;
        }
    }

    fn touch_node(&mut self, v: usize) {
        if self.node_epoch[v] != self.epoch {
            self.node_epoch[v] = self.epoch;
            self.self_coin[v] = SelfCoin::Unchecked;
            self.resolution[v] = Resolution::Unknown;
        }
    }

    fn set_resolution(&mut self, v: usize, r: Resolution) {
        self.touch_node(v);
        self.resolution[v] = r;
    }

    fn edge_survives(&mut self, gt: &UncertainGraph, e: usize, coins: &WorldCoins) -> bool {
        if self.edge_epoch[e] != self.epoch {
            self.edge_epoch[e] = self.epoch;
            self.stats.edge_coins += 1;
            self.edge_status[e] = if coins.edge(e) <= gt.edge(e).p {
                EdgeStatus::Survived
            } else {
                EdgeStatus::Blocked
            };
        }
        self.edge_status[e] == EdgeStatus::Survived
    }

    /// Does `v` default in the world of `coins`? Must be called within one
    /// sample (see [`ReverseSampleState::run`]).
    fn resolve(&mut self, gt: &UncertainGraph, v: NodeId, coins: &WorldCoins) -> bool {
        match self.resolution(v) {
            Resolution::Defaulting => return true,
            Resolution::Clean => return false,
            Resolution::Unknown => {}
        }
        self.begin_visit();
        self.queue.clear();
        self.queue.push(v.0);
        self.visited[v.index()] = self.visit_epoch;
        self.parent[v.index()] = NONE;

        let mut found = None;
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            let ui = u as usize;
            match self.resolution(NodeId(u)) {
                Resolution::Defaulting => {
                    found = Some(u);
                    break;
                }
                Resolution::Clean => continue,
                Resolution::Unknown => {}
            }
            if self.self_coin(NodeId(u)) == SelfCoin::Unchecked {
                self.touch_node(ui);
                self.stats.node_coins += 1;
                if coins.node(NodeId(u)) <= gt.self_risk(NodeId(u)) {
                    self.self_coin[ui] = SelfCoin::Defaulted;
                    self.resolution[ui] = Resolution::Defaulting;
                    found = Some(u);
                    break;
                }
                self.self_coin[ui] = SelfCoin::Survived;
            }
            self.stats.expansions += 1;
            // out-edges of the reversed graph are in-edges of the original
            for &(src, e) in gt.out_edges(NodeId(u)) {
                let si = src as usize;
                if self.visited[si] == self.visit_epoch || self.resolution(NodeId(src)) == Resolution::Clean {
                    continue;
                }
                if self.edge_survives(gt, e as usize, coins) {
                    self.visited[si] = self.visit_epoch;
                    self.parent[si] = u;
                    self.queue.push(src);
                }
            }
        }

        match found {
            Some(d) => {
                // everything on the surviving path from d down to v defaults
                let mut x = d;
                while x != NONE {
                    self.set_resolution(x as usize, Resolution::Defaulting);
                    x = self.parent[x as usize];
                }
                true
            }
            None => {
                // the walk saw every surviving ancestor; none self-defaulted
                for i in 0..self.queue.len() {
                    let u = self.queue[i] as usize;
                    self.set_resolution(u, Resolution::Clean);
                }
                false
            }
        }
    }

    /// Processes one sample: `hits[i]` is set to whether `candidates[i]`
    /// defaults. Candidates are resolved in the order given and share memo.
    pub fn run(&mut self, gt: &ReversedGraph, candidates: &[NodeId], coins: &WorldCoins, hits: &mut Vec<bool>) {
        self.begin_sample();
        hits.clear();
        for &v in candidates {
            let h = self.resolve(gt.as_graph(), v, coins);
            hits.push(h);
        }
    }
}

/// One reverse sample for `candidates`, with fresh state.
pub fn reverse_sample(gt: &ReversedGraph, candidates: &[NodeId], coins: &WorldCoins) -> Vec<bool> {
    let mut state = ReverseSampleState::for_graph(gt);
    let mut hits = Vec::with_capacity(candidates.len());
    state.run(gt, candidates, coins, &mut hits);
    hits
}

/// Default counts per candidate over samples 1..=t.
pub fn reverse_estimates(gt: &ReversedGraph, candidates: &[NodeId], t: u64, seed: u64) -> Vec<u64> {
    let c = candidates.len();
    (1..=t)
        .into_par_iter()
        .fold(
            || (ReverseSampleState::for_graph(gt), Vec::new(), vec![0u64; c]),
            |(mut state, mut hits, mut counts), i| {
                state.run(gt, candidates, &WorldCoins::new(seed, i), &mut hits);
                for (n, &h) in counts.iter_mut().zip(&hits) {
                    *n += u64::from(h);
                }
                (state, hits, counts)
            },
        )
        .map(|(_, _, counts)| counts)
        .reduce(|| vec![0u64; c], add_counts)
}

/// Sample count for ranking `candidate_count` nodes when `k_prime` of the k
/// answers are already known. Zero when nothing is left to rank.
pub fn reduced_sample_size(candidate_count: usize, k: usize, k_prime: usize, params: &ApproxParams) -> Result<u64> {
    if k_prime > k {
        return Err(Error::InvalidArguments(format!("k' = {k_prime} exceeds k = {k}")));
    }
    let need = k - k_prime;
    if candidate_count < need {
        return Err(Error::InvalidArguments(format!(
            "{candidate_count} candidates cannot fill {need} slots"
        )));
    }
    if need == 0 || candidate_count == need {
        return Ok(0);
    }
    Ok(params.samples_for_pairs(need as f64 * (candidate_count - need) as f64))
}

pub(crate) struct Reduction {
    pub bounds: BoundTable,
    pub report: CandidateReport,
    pub need: usize,
    pub t: u64,
}

pub(crate) fn reduce_for(
    g: &UncertainGraph,
    k: usize,
    params: &ApproxParams,
    z: usize,
    use_verification: bool,
) -> Result<Reduction> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if z == 0 {
        return Err(Error::InvalidArguments("bound order z must be at least 1".into()));
    }
    let bounds = BoundTable::compute(g, z);
    let report = if use_verification {
        reduce_candidates(&bounds, k)?
    } else {
        prune_candidates(&bounds, k)?
    };
    let need = k - report.k_prime();
    let t = reduced_sample_size(report.candidates.len(), k, report.k_prime(), params)?;
    Ok(Reduction {
        bounds,
        report,
        need,
        t,
    })
}

impl Reduction {
    pub fn verified_entries(&self) -> Vec<RankedNode> {
        self.report
            .verified
            .iter()
            .map(|&v| RankedNode {
                node: v,
                estimate: self.bounds.lower[v.index()],
                verified: true,
                estimator: Estimator::Bound,
            })
            .collect()
    }

    /// When |B| equals the open slots every candidate is in; order by bounds.
    pub fn accept_all_candidates(&self) -> Vec<RankedNode> {
        let mut c: Vec<(NodeId, f64)> = self
            .report
            .candidates
            .iter()
            .map(|&v| (v, self.bounds.lower[v.index()]))
            .collect();
        rank_desc(&mut c);
        c.into_iter()
            .map(|(node, estimate)| RankedNode {
                node,
                estimate,
                verified: false,
                estimator: Estimator::Bound,
            })
            .collect()
    }

    pub fn run_params(&self, k: usize, params: &ApproxParams, z: usize, seed: u64) -> RunParams {
        RunParams {
            k,
            eps: Some(params.eps()),
            delta: Some(params.delta()),
            z: Some(z),
            seed: Some(seed),
            samples_planned: self.t,
            samples_used: self.t,
            candidates: Some(self.report.candidates.len()),
            k_prime: Some(self.report.k_prime()),
            ..Default::default()
        }
    }
}

/// Methods SR (`use_verification = false`) and BSR (`true`): bound-based
/// candidate reduction followed by reverse sampling of the candidates.
pub fn bsr_topk(
    g: &UncertainGraph,
    k: usize,
    params: &ApproxParams,
    z: usize,
    seed: u64,
    use_verification: bool,
) -> Result<TopKResult> {
    let start = Instant::now();
    let red = reduce_for(g, k, params, z, use_verification)?;
    let mut entries = red.verified_entries();
    if red.need > 0 {
        if red.t == 0 {
            entries.extend(red.accept_all_candidates());
        } else {
            let gt = reverse(g);
            let counts = reverse_estimates(&gt, &red.report.candidates, red.t, seed);
            let mut ranked: Vec<(NodeId, u64)> = red.report.candidates.iter().copied().zip(counts).collect();
            rank_desc(&mut ranked);
            entries.extend(ranked[..red.need].iter().map(|&(node, c)| RankedNode {
                node,
                estimate: c as f64 / red.t as f64,
                verified: false,
                estimator: Estimator::Reverse,
            }));
        }
    }
    Ok(TopKResult {
        method: if use_verification { Method::BSR } else { Method::SR },
        entries,
        params: red.run_params(k, params, z, seed),
        wall_time: start.elapsed(),
    })
}

pub fn sr_topk(g: &UncertainGraph, k: usize, params: &ApproxParams, z: usize, seed: u64) -> Result<TopKResult> {
    bsr_topk(g, k, params, z, seed, false)
}
