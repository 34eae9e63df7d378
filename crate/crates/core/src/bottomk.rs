//! Bottom-k early termination over the reverse-sampling stream.
//!
//! Every planned sample gets a hash in (0, 1) and samples are materialized in
//! hash order. A candidate whose counter reaches `bk` at a sample with hash h
//! has its default probability estimated as `(bk - 1) / (h * t)`; since the
//! stream is hash-ascending, earlier finishers carry larger estimates, so the
//! first `k - k'` finishers are the answer and the rest of the stream is
//! skipped.

use std::time::Instant;

use rayon::prelude::*;

use crate::coins::{stream_hash, WorldCoins};
use crate::error::{Error, Result};
use crate::forward::ApproxParams;
use crate::graph::{reverse, NodeId, ReversedGraph, UncertainGraph};
use crate::result::{rank_desc, Estimator, Method, RankedNode, TopKResult};
use crate::reverse::{reduce_for, ReverseSampleState};

pub const DEFAULT_BK: usize = 16;

/// `(bk - 1) / (kth_hash * t)`, clamped to [0, 1].
pub fn bottomk_estimate(bk: usize, kth_hash: f64, t: u64) -> Result<f64> {
    if bk < 2 {
        return Err(Error::InvalidBk(bk));
    }
    if t == 0 || !(kth_hash > 0.0 && kth_hash <= 1.0) {
        return Err(Error::InvalidArguments(format!(
            "bottom-k estimate needs t >= 1 and a hash in (0, 1], got t = {t}, hash = {kth_hash}"
        )));
    }
    Ok(((bk - 1) as f64 / (kth_hash * t as f64)).clamp(0.0, 1.0))
}

/// Expected relative error of the bottom-k estimator, sqrt(2 / (pi (bk - 2))).
pub fn expected_relative_error(bk: usize) -> f64 {
    assert!(bk > 2, "relative error is defined for bk > 2");
    (2.0 / (std::f64::consts::PI * (bk - 2) as f64)).sqrt()
}

/// Sample indices 1..=t with their hashes, ordered by hash ascending (ties,
/// which need a 53-bit collision, by index).
#[derive(Debug, Clone)]
pub struct SampleHashStream {
    seed: u64,
    order: Vec<(f64, u64)>,
}

impl SampleHashStream {
    pub fn new(seed: u64, t: u64) -> Self {
        let mut order: Vec<(f64, u64)> = (1..=t).map(|i| (stream_hash(seed, i), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        SampleHashStream { seed, order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn hash(&self, index: u64) -> f64 {
        stream_hash(self.seed, index)
    }

    /// `(hash, sample index)` in processing order.
    pub fn entries(&self) -> &[(f64, u64)] {
        &self.order
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinishRecord {
    pub node: NodeId,
    /// Hash of the sample at which the node's counter reached bk.
    pub kth_hash: f64,
    pub sample_index: u64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    /// Finishers in finishing order, at most the number requested.
    pub finished: Vec<FinishRecord>,
    /// Counter per candidate over the processed prefix of the stream.
    pub counts: Vec<u64>,
    pub samples_processed: u64,
}

/// Walks `stream` until `need` candidates reach `bk` hits or the stream ends.
/// Samples are materialized a small batch ahead in parallel; counters and
/// finish detection commit strictly in stream order.
pub fn run_stream(
    gt: &ReversedGraph,
    candidates: &[NodeId],
    need: usize,
    bk: usize,
    stream: &SampleHashStream,
    seed: u64,
) -> Result<StreamOutcome> {
    if bk < 2 {
        return Err(Error::InvalidBk(bk));
    }
    let t = stream.len() as u64;
    let mut counts = vec![0u64; candidates.len()];
    let mut finished = Vec::new();
    let mut processed = 0u64;
    let batch = rayon::current_num_threads() * 4;

    'stream: for chunk in stream.entries().chunks(batch) {
        let hit_lists: Vec<Vec<u32>> = chunk
            .par_iter()
            .map_init(
                || (ReverseSampleState::for_graph(gt), Vec::new()),
                |(state, hits), &(_, index)| {
                    state.run(gt, candidates, &WorldCoins::new(seed, index), hits);
                    hits.iter()
                        .enumerate()
                        .filter(|(_, &h)| h)
                        .map(|(c, _)| c as u32)
                        .collect()
                },
            )
            .collect();

        for (&(hash, index), hits) in chunk.iter().zip(hit_lists) {
            processed += 1;
            for c in hits {
                let c = c as usize;
                counts[c] += 1;
                if counts[c] == bk as u64 && finished.len() < need {
                    finished.push(FinishRecord {
                        node: candidates[c],
                        kth_hash: hash,
                        sample_index: index,
                        estimate: bottomk_estimate(bk, hash, t)?,
                    });
                }
            }
            if finished.len() >= need {
                break 'stream;
            }
        }
    }

    Ok(StreamOutcome {
        finished,
        counts,
        samples_processed: processed,
    })
}

/// Method BSRBK.
pub fn bsrbk_topk(
    g: &UncertainGraph,
    k: usize,
    params: &ApproxParams,
    z: usize,
    bk: usize,
    seed: u64,
) -> Result<TopKResult> {
    let start = Instant::now();
    if bk < 2 {
        return Err(Error::InvalidBk(bk));
    }
    let red = reduce_for(g, k, params, z, true)?;
    let mut entries = red.verified_entries();
    let mut run = red.run_params(k, params, z, seed);
    run.bk = Some(bk);

    if red.need > 0 && red.t == 0 {
        entries.extend(red.accept_all_candidates());
    } else if red.need > 0 {
        let gt = reverse(g);
        let stream = SampleHashStream::new(seed, red.t);
        let cands = &red.report.candidates;
        let out = run_stream(&gt, cands, red.need, bk, &stream, seed)?;
        run.samples_used = out.samples_processed;

        entries.extend(out.finished.iter().map(|f| RankedNode {
            node: f.node,
            estimate: f.estimate,
            verified: false,
            estimator: Estimator::BottomK,
        }));
        let missing = red.need - out.finished.len();
        if missing > 0 {
            // stream exhausted: fall back to plain reverse-sampling estimates
            let done: Vec<NodeId> = out.finished.iter().map(|f| f.node).collect();
            let mut rest: Vec<(NodeId, u64)> = cands
                .iter()
                .copied()
                .zip(out.counts.iter().copied())
                .filter(|(v, _)| !done.contains(v))
                .collect();
            rank_desc(&mut rest);
            entries.extend(rest[..missing].iter().map(|&(node, c)| RankedNode {
                node,
                estimate: c as f64 / red.t as f64,
                verified: false,
                estimator: Estimator::Reverse,
            }));
        }
    } else {
        run.samples_used = 0;
    }

    Ok(TopKResult {
        method: Method::BSRBK,
        entries,
        params: run,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::assign_random_probabilities;
    use crate::graph::fixtures::*;

    #[test]
    fn estimator_arithmetic() {
        assert!((bottomk_estimate(4, 0.5, 100).unwrap() - 0.06).abs() < 1e-15);
        assert!((bottomk_estimate(2, 1.0, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(bottomk_estimate(16, 1e-6, 10).unwrap(), 1.0);
        assert!(matches!(bottomk_estimate(1, 0.5, 10), Err(Error::InvalidBk(1))));
    }

    #[test]
    fn relative_error_at_default_bk() {
        // sqrt(2 / (pi * 14))
        assert!((expected_relative_error(16) - 0.213_243_618_622_923_07).abs() < 1e-12);
    }

    #[test]
    fn stream_is_sorted_and_a_permutation() {
        let s = SampleHashStream::new(3, 500);
        let e = s.entries();
        assert!(e.windows(2).all(|w| w[0].0 < w[1].0));
        let mut idx: Vec<u64> = e.iter().map(|p| p.1).collect();
        idx.sort_unstable();
        assert_eq!(idx, (1..=500).collect::<Vec<_>>());
        assert_eq!(s.hash(e[0].1), e[0].0);
    }

    #[test]
    fn nothing_to_rank_means_no_samples() {
        let r = bsrbk_topk(&example_chain(), 1, &ApproxParams::default(), 2, 16, 1).unwrap();
        assert_eq!(r.params.samples_used, 0);
        assert_eq!(r.nodes(), vec![NodeId(1)]);
    }

    #[test]
    fn finishing_order_matches_hash_order() {
        let g = assign_random_probabilities(&toy_network(), 10);
        let gt = reverse(&g);
        let cands: Vec<NodeId> = g.nodes().collect();
        let stream = SampleHashStream::new(8, 400);
        let out = run_stream(&gt, &cands, 5, 4, &stream, 8).unwrap();
        for w in out.finished.windows(2) {
            assert!(w[0].kth_hash <= w[1].kth_hash);
            assert!(w[0].estimate >= w[1].estimate);
            if w[0].sample_index != w[1].sample_index {
                assert!(w[0].kth_hash < w[1].kth_hash);
            }
        }
        // early stop: the last processed sample is the one that closed the set
        if out.finished.len() == 5 {
            let last = out.finished.last().unwrap().sample_index;
            let pos = stream.entries().iter().position(|e| e.1 == last).unwrap();
            assert_eq!(out.samples_processed, pos as u64 + 1);
        }
    }

    #[test]
    fn rejects_small_bk() {
        let g = assign_random_probabilities(&toy_network(), 1);
        assert!(matches!(
            bsrbk_topk(&g, 2, &ApproxParams::default(), 2, 1, 1),
            Err(Error::InvalidBk(1))
        ));
    }

    #[test]
    fn fills_from_counts_when_stream_runs_dry() {
        let g = assign_random_probabilities(&toy_network(), 10);
        let gt = reverse(&g);
        let cands: Vec<NodeId> = g.nodes().collect();
        let stream = SampleHashStream::new(8, 10);
        let out = run_stream(&gt, &cands, 3, 50, &stream, 8).unwrap();
        assert!(out.finished.is_empty());
        assert_eq!(out.samples_processed, 10);
    }
}
