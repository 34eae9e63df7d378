//! Ground truth, precision@k, synthetic benchmark graphs and the method
//! comparison runner.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bottomk::{bsrbk_topk, DEFAULT_BK};
use crate::bounds::DEFAULT_ORDER;
use crate::error::{Error, Result};
use crate::forward::{estimate_topk_basic, forward_estimates, sn_topk, ApproxParams};
use crate::graph::{assign_random_probabilities, GraphBuilder, NodeId, UncertainGraph};
use crate::oracle::exact_topk;
use crate::result::{Method, TopKResult, TSV_HEADER};
use crate::reverse::bsr_topk;

/// Forward samples behind a ground-truth ranking, and the fixed sample count
/// of method N.
pub const TRUTH_SAMPLES: u64 = 20_000;

/// A ranking of every node from a large fixed-size forward-sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    pub samples: u64,
    pub seed: u64,
    /// All nodes, probability descending, ties by id.
    pub ranking: Vec<(NodeId, f64)>,
}

impl GroundTruth {
    /// Probability of the rank-k node.
    pub fn p_k(&self) -> f64 {
        self.ranking[self.k - 1].1
    }

    pub fn top(&self) -> &[(NodeId, f64)] {
        &self.ranking[..self.k]
    }

    pub fn with_k(&self, k: usize) -> Result<GroundTruth> {
        if k == 0 || k > self.ranking.len() {
            return Err(Error::InvalidK {
                k,
                n: self.ranking.len(),
            });
        }
        Ok(GroundTruth { k, ..self.clone() })
    }

    /// Top-k rows in the result TSV layout, so a truth file can be read back
    /// with [`crate::result::read_result_tsv`].
    pub fn write_tsv<W: Write>(&self, g: &UncertainGraph, mut w: W) -> Result<()> {
        writeln!(w, "# truth k={} samples={} seed={}", self.k, self.samples, self.seed)?;
        writeln!(w, "{TSV_HEADER}")?;
        for (i, (v, p)) in self.top().iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t0\tforward", i + 1, g.label(*v), p)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ground_truth(g: &UncertainGraph, k: usize, samples: u64, seed: u64) -> Result<GroundTruth> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if samples == 0 {
        return Err(Error::InvalidArguments("ground truth needs at least one sample".into()));
    }
    let table = forward_estimates(g, samples, seed);
    let ranking = table
        .ranking()
        .into_iter()
        .map(|(v, _)| (v, table.estimate(v)))
        .collect();
    Ok(GroundTruth {
        k,
        samples,
        seed,
        ranking,
    })
}

/// |pred ∩ truth| / k for two equally sized node sets.
pub fn set_precision<T: Eq + Hash>(pred: &[T], truth: &[T]) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::MismatchedK {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let truth: HashSet<&T> = truth.iter().collect();
    let hit = pred.iter().filter(|v| truth.contains(v)).count();
    Ok(hit as f64 / pred.len() as f64)
}

pub fn precision_at_k(pred: &TopKResult, truth: &GroundTruth) -> Result<f64> {
    if pred.params.k != truth.k {
        return Err(Error::MismatchedK {
            pred: pred.params.k,
            truth: truth.k,
        });
    }
    let t: Vec<NodeId> = truth.top().iter().map(|p| p.0).collect();
    set_precision(&pred.nodes(), &t)
}

/// `k` as an absolute count or a percentage of the node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSpec {
    Absolute(usize),
    Percent(f64),
}

impl KSpec {
    /// Percentages round to the nearest integer, at least 1.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let k = match *self {
            KSpec::Absolute(k) => k,
            KSpec::Percent(p) => ((p / 100.0 * n as f64).round() as usize).max(1),
        };
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        Ok(k)
    }
}

impl FromStr for KSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArguments(format!("invalid k `{s}`"));
        match s.strip_suffix('%') {
            Some(p) => {
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                if p > 0.0 && p <= 100.0 {
                    Ok(KSpec::Percent(p))
                } else {
                    Err(bad())
                }
            }
            None => s.trim().parse().map(KSpec::Absolute).map_err(|_| bad()),
        }
    }
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSpec::Absolute(k) => write!(f, "{k}"),
            KSpec::Percent(p) => write!(f, "{p}%"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Chung-Lu style directed graph with power-law in- and out-weights.
    PowerLaw,
    /// Uniformly random edges i -> j with i < j.
    RandomDag,
    /// v0 -> v1 -> ... -> v(n-1).
    Chain,
    /// r -> x1 -> v, r -> x2 -> v.
    Diamond,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power-law" => Ok(SynthKind::PowerLaw),
            "random-dag" => Ok(SynthKind::RandomDag),
            "chain" => Ok(SynthKind::Chain),
            "diamond" => Ok(SynthKind::Diamond),
            _ => Err(Error::InvalidArguments(format!("unknown graph kind `{s}`"))),
        }
    }
}

/// Power-law exponent of the synthetic degree weights.
const POWER_LAW_GAMMA: f64 = 2.5;

fn topology(n: usize, edges: &[(usize, usize)], label: impl Fn(usize) -> String) -> UncertainGraph {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&label(i), 0.0).expect("synthetic labels are unique");
    }
    for &(s, d) in edges {
        b.add_edge(NodeId::from(s), NodeId::from(d), 0.0)
            .expect("synthetic edges are unique");
    }
    b.build()
}

fn power_law_edges(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let alpha = 1.0 / (POWER_LAW_GAMMA - 1.0);
    let weights: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).powf(-alpha)).collect();
    let mut out_rank: Vec<usize> = (0..n).collect();
    let mut in_rank: Vec<usize> = (0..n).collect();
    out_rank.shuffle(rng);
    in_rank.shuffle(rng);
    let out_w = WeightedIndex::new(&weights).expect("positive weights");
    let in_w = WeightedIndex::new(&weights).expect("positive weights");

    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    let mut attempts = 0usize;
    while edges.len() < m && attempts < 20 * m {
        attempts += 1;
        let s = out_rank[out_w.sample(rng)];
        let d = in_rank[in_w.sample(rng)];
        if s != d && seen.insert((s, d)) {
            edges.push((s, d));
        }
    }
    // dense requests saturate the hubs; top up uniformly
    while edges.len() < m {
        let s = rng.gen_range(0..n);
        let d = rng.gen_range(0..n);
        if s != d && seen.insert((s, d)) {
            edges.push((s, d));
        }
    }
    edges
}

/// Decodes the p-th pair (i, j), i < j, in the order (0,1), (0,2), (1,2), (0,3), ...
fn pair_at(p: usize) -> (usize, usize) {
    let mut j = ((1.0 + (1.0 + 8.0 * p as f64).sqrt()) / 2.0) as usize;
    while j * (j - 1) / 2 > p {
        j -= 1;
    }
    while (j + 1) * j / 2 <= p {
        j += 1;
    }
    (p - j * (j - 1) / 2, j)
}

/// Deterministic synthetic graph; probabilities come from
/// [`assign_random_probabilities`] with the same seed.
pub fn synth_graph(kind: SynthKind, n: usize, m: usize, seed: u64) -> Result<UncertainGraph> {
    let infeasible = |why: String| Err(Error::InfeasibleShape(why));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7359_6e74_6865_7369);
    let pairs = n * n.saturating_sub(1) / 2;
    let g = match kind {
        SynthKind::Chain => {
            if n == 0 || m != n - 1 {
                return infeasible(format!(
                    "a chain on {n} nodes has {} edges, not {m}",
                    n.saturating_sub(1)
                ));
            }
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            topology(n, &edges, |i| format!("v{i}"))
        }
        SynthKind::Diamond => {
            if n != 4 || m != 4 {
                return infeasible("a diamond has exactly 4 nodes and 4 edges".into());
            }
            let names = ["r", "x1", "x2", "v"];
            topology(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], |i| names[i].to_string())
        }
        SynthKind::RandomDag => {
            if m > pairs {
                return infeasible(format!("a DAG on {n} nodes has at most {pairs} edges"));
            }
            let mut picked = rand::seq::index::sample(&mut rng, pairs, m).into_vec();
            picked.sort_unstable();
            let edges: Vec<_> = picked.into_iter().map(pair_at).collect();
            topology(n, &edges, |i| format!("v{i}"))
        }
        SynthKind::PowerLaw => {
            if n < 2 && m > 0 || m > pairs {
                return infeasible(format!("power-law graphs on {n} nodes take at most {pairs} edges"));
            }
            let edges = power_law_edges(n, m, &mut rng);
            topology(n, &edges, |i| format!("v{i}"))
        }
    };
    Ok(assign_random_probabilities(&g, seed))
}

/// Shared parameters for running any method of the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub params: ApproxParams,
    pub z: usize,
    pub bk: usize,
    /// Sample count of method N.
    pub fixed_samples: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            params: ApproxParams::default(),
            z: DEFAULT_ORDER,
            bk: DEFAULT_BK,
            fixed_samples: TRUTH_SAMPLES,
        }
    }
}

pub fn run_method(g: &UncertainGraph, method: Method, k: usize, cfg: &MethodConfig, seed: u64) -> Result<TopKResult> {
    match method {
        Method::N => estimate_topk_basic(g, k, cfg.fixed_samples, seed),
        Method::SN => sn_topk(g, k, &cfg.params, seed),
        Method::SR => bsr_topk(g, k, &cfg.params, cfg.z, seed, false),
        Method::BSR => bsr_topk(g, k, &cfg.params, cfg.z, seed, true),
        Method::BSRBK => bsrbk_topk(g, k, &cfg.params, cfg.z, cfg.bk, seed),
        Method::Oracle => exact_topk(g, k),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    pub method: MethodConfig,
    pub seed: u64,
    pub truth_samples: u64,
    /// Seed of the ground-truth run; must differ from `seed`, or method N
    /// would reproduce the truth sample for sample.
    pub truth_seed: u64,
    /// Run each method once untimed before the timed run.
    pub warmup: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub k: usize,
    pub samples_planned: u64,
    pub samples_used: u64,
    pub candidates: Option<usize>,
    pub k_prime: Option<usize>,
    pub wall_ms: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n: usize,
    pub m: usize,
    pub truth_ms: f64,
    pub rows: Vec<BenchRow>,
}

pub fn bench(g: &UncertainGraph, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.methods.is_empty() || cfg.ks.is_empty() {
        return Err(Error::InvalidArguments(
            "bench needs at least one method and one k".into(),
        ));
    }
    let kmax = *cfg.ks.iter().max().expect("non-empty");
    let start = Instant::now();
    let truth = ground_truth(g, kmax, cfg.truth_samples, cfg.truth_seed)?;
    let truth_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut rows = Vec::new();
    for &k in &cfg.ks {
        let truth_k = truth.with_k(k)?;
        for &method in &cfg.methods {
            if cfg.warmup {
                run_method(g, method, k, &cfg.method, cfg.seed)?;
            }
            let start = Instant::now();
            let res = run_method(g, method, k, &cfg.method, cfg.seed)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            rows.push(BenchRow {
                method,
                k,
                samples_planned: res.params.samples_planned,
                samples_used: res.params.samples_used,
                candidates: res.params.candidates,
                k_prime: res.params.k_prime,
                wall_ms,
                precision: precision_at_k(&res, &truth_k)?,
            });
        }
    }
    Ok(BenchReport {
        n: g.node_count(),
        m: g.edge_count(),
        truth_ms,
        rows,
    })
}

impl BenchReport {
    fn write_rows<W: Write>(&self, mut w: W, sep: char) -> Result<()> {
        let cols = [
            "method",
            "k",
            "samples_planned",
            "samples_used",
            "candidates",
            "k_prime",
            "wall_ms",
            "precision",
        ];
        writeln!(w, "{}", cols.join(&sep.to_string()))?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{m}{s}{k}{s}{sp}{s}{su}{s}{c}{s}{kp}{s}{ms:.3}{s}{p}",
                m = r.method,
                k = r.k,
                sp = r.samples_planned,
                su = r.samples_used,
                c = opt(r.candidates),
                kp = opt(r.k_prime),
                ms = r.wall_ms,
                p = r.precision,
                s = sep,
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, '\t')
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, ',')
    }

    pub fn row(&self, method: Method, k: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.k == k)
    }
}
