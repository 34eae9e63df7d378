//! Counter-based coins. Every random number used by the samplers is a pure
//! function of `(master seed, sample index, entity kind, entity id)`, so a
//! possible world can be materialized lazily, in any order, on any thread.

use crate::graph::NodeId;

const KIND_NODE: u64 = 0x6e6f_6465;
const KIND_EDGE: u64 = 0x6564_6765;
const KIND_STREAM: u64 = 0x626b_6873;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn keyed(base: u64, kind: u64, id: u64) -> u64 {
    mix64(base ^ mix64(id.wrapping_mul(GOLDEN) ^ kind))
}

/// Maps to (0, 1]: the top 53 bits plus one ulp. With `coin <= p` this makes
/// p = 0 impossible and p = 1 certain.
#[inline]
fn unit_closed(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 * UNIT
}

/// Maps to the open interval (0, 1).
#[inline]
fn unit_open(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * UNIT
}

/// The coin source for one sampled possible world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldCoins {
    master_seed: u64,
    sample_index: u64,
    base: u64,
}

impl WorldCoins {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        let base = mix64(mix64(master_seed ^ GOLDEN) ^ sample_index.wrapping_mul(0xd1b5_4a32_d192_ed03));
        WorldCoins {
            master_seed,
            sample_index,
            base,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    /// Self-default coin of `v`; the node self-defaults iff `node(v) <= p_s(v)`.
    #[inline]
    pub fn node(&self, v: NodeId) -> f64 {
        unit_closed(keyed(self.base, KIND_NODE, v.0 as u64))
    }

    /// Survival coin of edge `e`; the edge fires iff `edge(e) <= p`.
    #[inline]
    pub fn edge(&self, e: usize) -> f64 {
        unit_closed(keyed(self.base, KIND_EDGE, e as u64))
    }
}

/// Hash of sample `index` in the bottom-k processing stream, in (0, 1).
pub fn stream_hash(seed: u64, index: u64) -> f64 {
    let base = mix64(seed ^ KIND_STREAM.wrapping_mul(GOLDEN));
    unit_open(keyed(base, KIND_STREAM, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coins_are_reproducible_and_distinct() {
        let a = WorldCoins::new(42, 7);
        let b = WorldCoins::new(42, 7);
        assert_eq!(a.node(NodeId(3)), b.node(NodeId(3)));
        assert_eq!(a.edge(3), b.edge(3));
        assert_ne!(a.node(NodeId(3)), a.edge(3));
        assert_ne!(a.node(NodeId(3)), WorldCoins::new(42, 8).node(NodeId(3)));
        assert_ne!(a.node(NodeId(3)), WorldCoins::new(43, 7).node(NodeId(3)));
    }

    #[test]
    fn coins_look_uniform() {
        let n = 200_000;
        let mut buckets = [0u32; 10];
        let mut sum = 0.0;
        for i in 0..n {
            let c = WorldCoins::new(1, i / 100 + 1).node(NodeId((i % 100) as u32));
            assert!(c > 0.0 && c <= 1.0);
            sum += c;
            buckets[((c * 10.0) as usize).min(9)] += 1;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        // chi-square with 9 dof; 27.9 is the 0.999 quantile
        let expected = n as f64 / 10.0;
        let chi2: f64 = buckets.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 27.9, "chi2 {chi2}");
    }

    #[test]
    fn node_and_edge_coins_are_uncorrelated() {
        let n = 100_000;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let c = WorldCoins::new(9, i + 1);
            let (x, y) = (c.node(NodeId(0)), c.edge(0));
            sx += x;
            sy += y;
            sxy += x * y;
        }
        let n = n as f64;
        let cov = sxy / n - (sx / n) * (sy / n);
        assert!(cov.abs() < 0.002, "cov {cov}");
    }

    #[test]
    fn stream_hash_is_open_unit() {
        for i in 0..10_000 {
            let h = stream_hash(5, i);
            assert!(h > 0.0 && h < 1.0);
        }
        assert_ne!(stream_hash(5, 1), stream_hash(6, 1));
    }
}
