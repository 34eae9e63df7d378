//! Lower and upper bounds on default probabilities by repeated independent
//! combination over in-neighbors, and the candidate reduction they enable.
//!
//! One sweep recomputes every node whose in-neighbors changed in the previous
//! sweep with
//!
//! ```text
//! p(v) = 1 - (1 - p_s(v)) * prod_{x in N(v)} (1 - p(v|x) * p(x))
//! ```
//!
//! Lower bounds start from p_s, upper bounds from in-neighbors pinned to 1.
//! Upper bounds stay sound at every order. Lower bounds are sound up to order
//! 2; from order 3 on, converging paths are combined as if independent and
//! the value can exceed the true probability (see
//! [`crate::graph::fixtures::diamond_witness`]).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, UncertainGraph};

/// Bound order used when none is given.
pub const DEFAULT_ORDER: usize = 2;

#[inline]
fn combine(g: &UncertainGraph, v: NodeId, p: &[f64]) -> f64 {
    let miss: f64 = g
        .in_edges(v)
        .iter()
        .map(|&(x, e)| 1.0 - g.edge(e as usize).p * p[x as usize])
        .product();
    // equals 1 - (1 - p_s) * miss, but stays exactly p_s when miss == 1
    let p_s = g.self_risk(v);
    p_s + (1.0 - p_s) * (1.0 - miss)
}

/// Runs `sweeps` two-table sweeps starting from `current`, where every value
/// of `current` counts as freshly updated.
fn propagate(g: &UncertainGraph, mut current: Vec<f64>, sweeps: usize) -> Vec<f64> {
    let mut changed = vec![true; g.node_count()];
    for _ in 0..sweeps {
        let next: Vec<f64> = (0..g.node_count())
            .into_par_iter()
            .map(|v| {
                let v = NodeId(v as u32);
                if g.in_neighbors(v).any(|x| changed[x.index()]) {
                    combine(g, v, &current)
                } else {
                    current[v.index()]
                }
            })
            .collect();
        for ((c, a), b) in changed.iter_mut().zip(&next).zip(&current) {
            *c = a != b;
        }
        current = next;
    }
    current
}

/// Order-`z` lower bounds p_l(v). Panics if `z == 0`.
pub fn lower_bounds(g: &UncertainGraph, z: usize) -> Vec<f64> {
    assert!(z >= 1, "bound order must be at least 1");
    propagate(g, g.self_risks().to_vec(), z - 1)
}

/// Order-`z` upper bounds p_u(v). Panics if `z == 0`.
pub fn upper_bounds(g: &UncertainGraph, z: usize) -> Vec<f64> {
    assert!(z >= 1, "bound order must be at least 1");
    let ones = vec![1.0; g.node_count()];
    let first = (0..g.node_count())
        .map(|v| combine(g, NodeId(v as u32), &ones))
        .collect();
    propagate(g, first, z - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub z: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundTable {
    pub fn compute(g: &UncertainGraph, z: usize) -> Self {
        BoundTable {
            z,
            lower: lower_bounds(g, z),
            upper: upper_bounds(g, z),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Outcome of bound-based candidate reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateReport {
    /// Nodes proven to be in the top-k, by lower bound descending.
    pub verified: Vec<NodeId>,
    /// Nodes still in contention (set B), ascending id.
    pub candidates: Vec<NodeId>,
    /// Nodes proven outside the top-k, ascending id.
    pub pruned: Vec<NodeId>,
    /// k-th largest lower bound.
    pub t_lower: f64,
    /// k-th largest upper bound.
    pub t_upper: f64,
}

impl CandidateReport {
    pub fn k_prime(&self) -> usize {
        self.verified.len()
    }
}

fn kth_largest(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

fn reduce(bounds: &BoundTable, k: usize, verify: bool) -> Result<CandidateReport> {
    let n = bounds.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let t_lower = kth_largest(&bounds.lower, k);
    let t_upper = kth_largest(&bounds.upper, k);

    let mut verified = Vec::new();
    if verify {
        let mut sure: Vec<(NodeId, f64)> = (0..n)
            .filter(|&v| bounds.lower[v] >= t_upper)
            .map(|v| (NodeId(v as u32), bounds.lower[v]))
            .collect();
        crate::result::rank_desc(&mut sure);
        // ties at the threshold can certify more than k nodes
        sure.truncate(k);
        verified = sure.into_iter().map(|(v, _)| v).collect();
    }
    let mut is_verified = vec![false; n];
    for v in &verified {
        is_verified[v.index()] = true;
    }

    let (candidates, pruned): (Vec<NodeId>, Vec<NodeId>) = (0..n)
        .filter(|&v| !is_verified[v])
        .map(|v| NodeId(v as u32))
        .partition(|v| bounds.upper[v.index()] >= t_lower);

    Ok(CandidateReport {
        verified,
        candidates,
        pruned,
        t_lower,
        t_upper,
    })
}

/// Verifies nodes whose lower bound reaches the k-th largest upper bound and
/// prunes nodes whose upper bound falls below the k-th largest lower bound.
pub fn reduce_candidates(bounds: &BoundTable, k: usize) -> Result<CandidateReport> {
    reduce(bounds, k, true)
}

/// Pruning only; nothing is verified.
pub fn prune_candidates(bounds: &BoundTable, k: usize) -> Result<CandidateReport> {
    reduce(bounds, k, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::GraphBuilder;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn order_one_lower_is_self_risk() {
        let g = crate::graph::assign_random_probabilities(&toy_network(), 1);
        assert_eq!(lower_bounds(&g, 1), g.self_risks());
    }

    #[test]
    fn chain_bounds() {
        let g = example_chain();
        assert!(close(lower_bounds(&g, 2)[1], 0.232));
        // 1 - 0.8 * (1 - 0.2)
        assert!(close(upper_bounds(&g, 1)[1], 0.36));
        assert!(close(upper_bounds(&g, 2)[1], 0.232));
        assert!(close(upper_bounds(&g, 1)[0], 0.2));
    }

    #[test]
    fn diamond_lower_bound_overshoots_at_order_three() {
        let g = diamond_witness();
        let lo = lower_bounds(&g, 3);
        // x1 = x2 = 0.5 after sweep 2; v = 1 - 0.75^2 after sweep 3
        assert!(close(lo[3], 0.4375));
        assert!(close(lower_bounds(&g, 2)[3], 0.0));
    }

    #[test]
    fn isolated_node_upper_is_self_risk() {
        let mut b = GraphBuilder::new();
        b.add_node("a", 0.35).unwrap();
        let g = b.build();
        for z in 1..5 {
            assert_eq!(upper_bounds(&g, z), vec![0.35]);
        }
    }

    #[test]
    fn tight_distinct_bounds_verify_everything() {
        let exact = crate::oracle::exact_default_probabilities(&toy_network()).unwrap();
        let table = BoundTable {
            z: 2,
            lower: exact.clone(),
            upper: exact.clone(),
        };
        for k in 1..=5 {
            let r = reduce_candidates(&table, k).unwrap();
            // candidates survive only by tying the k-th value exactly
            for v in &r.candidates {
                assert_eq!(exact[v.index()], r.t_lower);
            }
            if r.k_prime() < k {
                let t = r.t_upper;
                assert!(exact.iter().filter(|&&p| p == t).count() > 1);
            }
        }
    }

    #[test]
    fn tight_bounds_on_diamond() {
        // exact values 0.5, 0.5, 0.5, 0.375; perturb to make them distinct
        let exact = vec![0.5, 0.49, 0.48, 0.375];
        let table = BoundTable {
            z: 2,
            lower: exact.clone(),
            upper: exact,
        };
        for k in 1..=4 {
            let r = reduce_candidates(&table, k).unwrap();
            assert_eq!(r.k_prime(), k);
            assert!(r.candidates.is_empty());
        }
    }

    #[test]
    fn identical_bounds_cap_verification_at_k() {
        let table = BoundTable {
            z: 1,
            lower: vec![0.4; 6],
            upper: vec![0.4; 6],
        };
        let r = reduce_candidates(&table, 2).unwrap();
        assert_eq!(r.verified, vec![NodeId(0), NodeId(1)]);
        assert_eq!(r.candidates.len(), 4);
        assert!(r.pruned.is_empty());
    }

    #[test]
    fn chain_reduction_at_order_two() {
        let table = BoundTable::compute(&example_chain(), 2);
        let r = reduce_candidates(&table, 1).unwrap();
        assert!(close(r.t_lower, 0.232) && close(r.t_upper, 0.232));
        assert_eq!(r.verified, vec![NodeId(1)]);
        // p_u(A) = 0.2 < 0.232
        assert_eq!(r.pruned, vec![NodeId(0)]);

        let r = prune_candidates(&table, 1).unwrap();
        assert!(r.verified.is_empty());
        assert_eq!(r.candidates, vec![NodeId(1)]);
    }

    #[test]
    fn invalid_k() {
        let table = BoundTable::compute(&example_chain(), 2);
        assert!(matches!(reduce_candidates(&table, 0), Err(Error::InvalidK { .. })));
        assert!(matches!(reduce_candidates(&table, 3), Err(Error::InvalidK { .. })));
    }
}
