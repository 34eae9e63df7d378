//! `vulnk`: top-k vulnerable node detection from the command line.
//!
//! Graphs are read from a pair of TSV files (`label<TAB>p_s` and
//! `src<TAB>dst<TAB>p`). Results go to `--out` or stdout. Exit status is 0 on
//! success, 2 when the input or arguments are invalid and 1 otherwise.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vulnk_core::bottomk::DEFAULT_BK;
use vulnk_core::bounds::{BoundTable, DEFAULT_ORDER};
use vulnk_core::graph::{parse_graph, write_graph};
use vulnk_core::harness::{
    bench, ground_truth, run_method, set_precision, synth_graph, BenchConfig, KSpec, MethodConfig, SynthKind,
    TRUTH_SAMPLES,
};
use vulnk_core::result::read_result_tsv;
use vulnk_core::{ApproxParams, Method, UncertainGraph};

/// Bad user input that is not a library error: unreadable input files.
#[derive(Debug)]
struct BadInput(String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

#[derive(Parser)]
#[command(
    name = "vulnk",
    version,
    about = "Top-k vulnerable node detection in uncertain graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the k most vulnerable nodes with a sampling method.
    Topk(TopkArgs),
    /// Exact top-k by possible-world enumeration (tiny graphs only).
    Oracle(OracleArgs),
    /// Ground-truth ranking from a large fixed-size forward sampling run.
    Truth(TruthArgs),
    /// Per-node lower and upper bounds on the default probability.
    Bounds(BoundsArgs),
    /// Precision@k of a prediction file against a truth file.
    Eval(EvalArgs),
    /// Write a synthetic graph.
    Synth(SynthArgs),
    /// Run several methods and compare time, sample counts and precision.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Node file: `label<TAB>self_risk` per line.
    #[arg(long)]
    nodes: PathBuf,
    /// Edge file: `src<TAB>dst<TAB>p` per line.
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Bound order.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    z: usize,
    /// Bottom-k threshold.
    #[arg(long, default_value_t = DEFAULT_BK)]
    bk: usize,
    /// Fixed sample count of method n.
    #[arg(long, default_value_t = TRUTH_SAMPLES)]
    samples: u64,
}

impl SamplingArgs {
    fn config(&self) -> Result<MethodConfig> {
        if self.z == 0 {
            return Err(vulnk_core::Error::InvalidArguments("bound order z must be at least 1".into()).into());
        }
        if self.samples == 0 {
            return Err(vulnk_core::Error::InvalidArguments("--samples must be at least 1".into()).into());
        }
        Ok(MethodConfig {
            params: ApproxParams::new(self.eps, self.delta)?,
            z: self.z,
            bk: self.bk,
            fixed_samples: self.samples,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    N,
    Sn,
    Sr,
    Bsr,
    Bsrbk,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::N => Method::N,
            MethodArg::Sn => Method::SN,
            MethodArg::Sr => Method::SR,
            MethodArg::Bsr => Method::BSR,
            MethodArg::Bsrbk => Method::BSRBK,
        }
    }
}

#[derive(Args)]
struct TopkArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Absolute count or percentage of the node count, e.g. `50` or `5%`.
    #[arg(long)]
    k: String,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    k: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    k: String,
    #[arg(long, default_value_t = TRUTH_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    z: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Result file from `topk` or `oracle`.
    #[arg(long)]
    pred: PathBuf,
    /// Result file from `truth`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// power-law, random-dag, chain or diamond.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to write the node file.
    #[arg(long)]
    nodes: PathBuf,
    /// Where to write the edge file.
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::N, MethodArg::Sn, MethodArg::Sr, MethodArg::Bsr, MethodArg::Bsrbk])]
    methods: Vec<MethodArg>,
    /// Comma-separated k values, absolute or percentages.
    #[arg(long, value_delimiter = ',', default_value = "1%")]
    k: Vec<String>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the ground-truth run; must differ from --seed.
    #[arg(long, default_value_t = 2)]
    truth_seed: u64,
    #[arg(long, default_value_t = TRUTH_SAMPLES)]
    truth_samples: u64,
    /// Skip the untimed warm-up run of each method.
    #[arg(long)]
    no_warmup: bool,
    /// TSV report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-ready CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| BadInput(format!("cannot read {}: {e}", path.display())).into())
}

fn load_graph(args: &GraphArgs) -> Result<UncertainGraph> {
    let g = parse_graph(open_input(&args.nodes)?, open_input(&args.edges)?)
        .with_context(|| format!("loading {} and {}", args.nodes.display(), args.edges.display()))?;
    Ok(g)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn resolve_k(k: &str, g: &UncertainGraph) -> Result<usize> {
    Ok(k.parse::<KSpec>()?.resolve(g.node_count())?)
}

fn topk(a: TopkArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let k = resolve_k(&a.k, &g)?;
    let cfg = a.sampling.config()?;
    let res = run_method(&g, a.method.into(), k, &cfg, a.seed)?;
    res.write_tsv(&g, output(a.out.as_deref())?)?;
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let k = resolve_k(&a.k, &g)?;
    let res = run_method(&g, Method::Oracle, k, &MethodConfig::default(), 0)?;
    res.write_tsv(&g, output(a.out.as_deref())?)?;
    Ok(())
}

fn truth(a: TruthArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let k = resolve_k(&a.k, &g)?;
    let t = ground_truth(&g, k, a.samples, a.seed)?;
    t.write_tsv(&g, output(a.out.as_deref())?)?;
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    if a.z == 0 {
        return Err(vulnk_core::Error::InvalidArguments("bound order z must be at least 1".into()).into());
    }
    let table = BoundTable::compute(&g, a.z);
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "# z={}", a.z)?;
    writeln!(w, "node\tp_l\tp_u")?;
    for v in g.nodes() {
        writeln!(
            w,
            "{}\t{}\t{}",
            g.label(v),
            table.lower[v.index()],
            table.upper[v.index()]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_result_tsv(open_input(&a.pred)?).with_context(|| format!("reading {}", a.pred.display()))?;
    let truth = read_result_tsv(open_input(&a.truth)?).with_context(|| format!("reading {}", a.truth.display()))?;
    let pred: Vec<String> = pred.into_iter().map(|r| r.node).collect();
    let truth: Vec<String> = truth.into_iter().map(|r| r.node).collect();
    let p = set_precision(&pred, &truth)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "k\tprecision")?;
    writeln!(w, "{}\t{}", pred.len(), p)?;
    w.flush()?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind: SynthKind = a.kind.parse()?;
    let g = synth_graph(kind, a.n, a.m, a.seed)?;
    write_graph(&g, create(&a.nodes)?, create(&a.edges)?)?;
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let ks = a.k.iter().map(|k| resolve_k(k, &g)).collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        ks,
        method: a.sampling.config()?,
        seed: a.seed,
        truth_samples: a.truth_samples,
        truth_seed: a.truth_seed,
        warmup: !a.no_warmup,
    };
    if cfg.seed == cfg.truth_seed {
        return Err(vulnk_core::Error::InvalidArguments("--truth-seed must differ from --seed".into()).into());
    }
    let report = bench(&g, &cfg)?;
    report.write_tsv(output(a.out.as_deref())?)?;
    if let Some(p) = &a.csv {
        report.write_csv(create(p)?)?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BadInput>().is_some() {
        return 2;
    }
    match err.downcast_ref::<vulnk_core::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Topk(a) => topk(a),
        Command::Oracle(a) => oracle(a),
        Command::Truth(a) => truth(a),
        Command::Bounds(a) => bounds(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vulnk: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
