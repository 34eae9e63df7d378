use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, GraphError, Result};
use crate::graph::{NodeId, UncertainGraph};

/// The method ladder, from the plain fixed-size sampler to the bottom-k
/// early-stopping sampler, plus exact enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Forward sampling with a fixed sample count.
    N,
    /// Forward sampling with the Hoeffding-derived sample count.
    SN,
    /// Reverse sampling over bound-pruned candidates, no verification.
    SR,
    /// Reverse sampling with bound verification and pruning.
    BSR,
    /// BSR with bottom-k early termination.
    BSRBK,
    Oracle,
}

impl Method {
    pub const LADDER: [Method; 5] = [Method::N, Method::SN, Method::SR, Method::BSR, Method::BSRBK];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::N => "N",
            Method::SN => "SN",
            Method::SR => "SR",
            Method::BSR => "BSR",
            Method::BSRBK => "BSRBK",
            Method::Oracle => "ORACLE",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "n" => Method::N,
            "sn" => Method::SN,
            "sr" => Method::SR,
            "bsr" => Method::BSR,
            "bsrbk" => Method::BSRBK,
            "oracle" => Method::Oracle,
            _ => return Err(Error::InvalidArguments(format!("unknown method `{s}`"))),
        })
    }
}

/// Which estimator produced a reported value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Exact,
    Forward,
    Reverse,
    BottomK,
    /// Node accepted from its probability bounds alone; the value is its
    /// lower bound.
    Bound,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Exact => "exact",
            Estimator::Forward => "forward",
            Estimator::Reverse => "reverse",
            Estimator::BottomK => "bottomk",
            Estimator::Bound => "bound",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => Estimator::Exact,
            "forward" => Estimator::Forward,
            "reverse" => Estimator::Reverse,
            "bottomk" => Estimator::BottomK,
            "bound" => Estimator::Bound,
            _ => return Err(Error::InvalidArguments(format!("unknown estimator `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedNode {
    pub node: NodeId,
    pub estimate: f64,
    pub verified: bool,
    pub estimator: Estimator,
}

/// Parameters a run was invoked with and the sampling work it did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunParams {
    pub k: usize,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub z: Option<usize>,
    pub bk: Option<usize>,
    pub seed: Option<u64>,
    /// Samples the method planned to draw (fixed, or from a size formula).
    pub samples_planned: u64,
    /// Samples actually materialized; below `samples_planned` only when the
    /// bottom-k stop fires.
    pub samples_used: u64,
    /// |B| for bound-based methods.
    pub candidates: Option<usize>,
    /// Nodes verified by bounds alone.
    pub k_prime: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    pub method: Method,
    pub entries: Vec<RankedNode>,
    pub params: RunParams,
    pub wall_time: Duration,
}

pub const TSV_HEADER: &str = "rank\tnode\testimate\tverified\testimator";

impl TopKResult {
    pub fn nodes(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }

    pub fn node_set(&self) -> HashSet<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }

    /// Writes `#` provenance lines, the column header and one row per entry.
    /// Wall time is left out so identical runs give identical bytes.
    pub fn write_tsv<W: Write>(&self, g: &UncertainGraph, mut w: W) -> Result<()> {
        let p = &self.params;
        write!(w, "# method={} k={}", self.method, p.k)?;
        let opt = |name: &str, v: Option<String>| v.map(|v| format!(" {name}={v}")).unwrap_or_default();
        write!(
            w,
            "{}{}{}{}{}",
            opt("eps", p.eps.map(|v| v.to_string())),
            opt("delta", p.delta.map(|v| v.to_string())),
            opt("z", p.z.map(|v| v.to_string())),
            opt("bk", p.bk.map(|v| v.to_string())),
            opt("seed", p.seed.map(|v| v.to_string())),
        )?;
        write!(
            w,
            " samples_planned={} samples_used={}",
            p.samples_planned, p.samples_used
        )?;
        write!(
            w,
            "{}{}",
            opt("candidates", p.candidates.map(|v| v.to_string())),
            opt("k_prime", p.k_prime.map(|v| v.to_string())),
        )?;
        writeln!(w)?;
        writeln!(w, "{TSV_HEADER}")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                i + 1,
                g.label(e.node),
                e.estimate,
                u8::from(e.verified),
                e.estimator
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a result TSV, keyed by label so it can be read without the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub rank: usize,
    pub node: String,
    pub estimate: f64,
    pub verified: bool,
    pub estimator: Estimator,
}

pub fn read_result_tsv<R: BufRead>(r: R) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') || line == TSV_HEADER {
            continue;
        }
        let bad = |what: String| Error::Parse {
            file: "result",
            line: i + 1,
            source: GraphError::MalformedLine(what),
        };
        let f: Vec<&str> = line.split('\t').collect();
        let [rank, node, estimate, verified, estimator] = f[..] else {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        };
        rows.push(ResultRow {
            rank: rank.parse().map_err(|_| bad(format!("bad rank `{rank}`")))?,
            node: node.to_string(),
            estimate: estimate
                .parse()
                .map_err(|_| bad(format!("bad estimate `{estimate}`")))?,
            verified: match verified {
                "1" => true,
                "0" => false,
                _ => return Err(bad(format!("bad verified flag `{verified}`"))),
            },
            estimator: estimator
                .parse()
                .map_err(|_| bad(format!("bad estimator `{estimator}`")))?,
        });
    }
    Ok(rows)
}

/// Orders `(node, score)` pairs by score descending, then node id ascending.
pub(crate) fn rank_desc<T: PartialOrd + Copy>(items: &mut [(NodeId, T)]) {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("unordered score").then(a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::example_chain;

    #[test]
    fn tsv_round_trips_through_reader() {
        let g = example_chain();
        let res = TopKResult {
            method: Method::BSR,
            entries: vec![
                RankedNode {
                    node: NodeId(1),
                    estimate: 0.232,
                    verified: true,
                    estimator: Estimator::Bound,
                },
                RankedNode {
                    node: NodeId(0),
                    estimate: 0.1875,
                    verified: false,
                    estimator: Estimator::Reverse,
                },
            ],
            params: RunParams {
                k: 2,
                seed: Some(3),
                ..Default::default()
            },
            wall_time: Duration::from_millis(5),
        };
        let mut buf = Vec::new();
        res.write_tsv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# method=BSR k=2 seed=3 samples_planned=0 samples_used=0\n"));
        assert!(text.contains("\n1\tB\t0.232\t1\tbound\n2\tA\t0.1875\t0\treverse\n"));
        let rows = read_result_tsv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].node, "B");
        assert_eq!(rows[1].estimator, Estimator::Reverse);
    }

    #[test]
    fn method_tags_parse() {
        for m in Method::LADDER {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("xyz".parse::<Method>().is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_node_id() {
        let mut v = vec![(NodeId(2), 0.5), (NodeId(0), 0.5), (NodeId(1), 0.9)];
        rank_desc(&mut v);
        assert_eq!(v.iter().map(|p| p.0 .0).collect::<Vec<_>>(), vec![1, 0, 2]);
    }
}
