//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage, input or precondition errors, 2
//! when a guarantee is missed or a certificate does not verify.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, GuaranteeReport};
use crate::decompose::{agree_general, caterpillar_agree, ramsey_split};
use crate::error::{Error, Result};
use crate::exact::{mast_floor, mast_rooted, mast_unrooted};
use crate::generators::{
    balanced_with_labels, caterpillar_with_labels, enumerate_rooted, enumerate_unrooted,
    gen_balanced, gen_caterpillar, gen_caterpillar_rooted, gen_extremal_fhk, gen_random,
    gen_random_rooted, gen_swap_pair, gen_swap_pair_unrooted, random_rooted_with,
    random_unrooted_with, seeded_rng, Guard, Model, RandomModel,
};
use crate::matchers::{
    match1, match1_unrooted, match2, match2_multi, match2_unrooted, match_almost_balanced,
    AlmostMode,
};
use crate::newick::{parse_newick, to_newick, to_newick_rooted, to_newick_unrooted};
use crate::ops::verify_agreement;
use crate::tree::{Label, LeafSet, RootedTree, Tree};

#[derive(Debug, Parser)]
#[command(name = "agreetree", version, about = "Agreement subtrees of binary phylogenetic trees")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Emit algorithm traces as JSON lines on stderr.
    #[arg(long, global = true)]
    pub trace: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Uniform,
    Yule,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Uniform => Model::UniformTopology,
            ModelArg::Yule => Model::Yule,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate trees as Newick.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Exact maximum agreement subtree.
    #[command(name = "mast-exact", alias = "mast")]
    MastExact(PairArgs),
    /// Match1: balanced first tree against an arbitrary second tree.
    Match1(PairArgs),
    /// Match2: two balanced trees.
    Match2(PairArgs),
    /// Match2 iterated over several balanced rooted trees.
    #[command(name = "match-multi")]
    MatchMulti {
        files: Vec<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Matchers for almost balanced unrooted trees.
    #[command(name = "match-ab")]
    MatchAb {
        #[command(flatten)]
        pair: PairArgs,
        /// Radius factor: radius at most k log n (minus one when one-sided).
        #[arg(long)]
        k: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::OneSided)]
        mode: ModeArg,
    },
    /// General agreement pipeline for two unrooted trees.
    Agree(PairArgs),
    /// Path-or-balanced split of one tree.
    Decompose {
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
    },
    /// Check that two trees agree on a leaf set.
    Verify {
        first: PathBuf,
        second: PathBuf,
        /// Leaf labels separated by spaces or commas.
        #[arg(long)]
        leaves: String,
    },
    /// Optimal constants, thresholds and f(h,k) tables.
    Bounds {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        h: Option<u32>,
    },
    /// Randomized trials written as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    OneSided,
    BothSided,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Defaults to the optimal value for the algorithm.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    Balanced {
        #[arg(long)]
        m: u32,
    },
    Caterpillar {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rooted: bool,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
        model: ModelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        rooted: bool,
    },
    Fhk {
        #[arg(long)]
        h: u32,
        #[arg(long)]
        k: u32,
    },
    #[command(name = "swap-pair")]
    SwapPair {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        unrooted: bool,
    },
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rooted: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchAlgorithm {
    /// Balanced tree of height log n against a random tree.
    Match1,
    /// Balanced tree against a balanced tree with shuffled leaves.
    Match2,
    /// Random caterpillar against a random tree.
    Caterpillar,
    /// Two random unrooted trees.
    Agree,
    /// Exact rooted MAST of two random rooted trees.
    MastExact,
    /// `mast(n)` by enumeration (one row per n).
    MastFloor,
}

impl BenchAlgorithm {
    fn name(&self) -> &'static str {
        match self {
            BenchAlgorithm::Match1 => "match1",
            BenchAlgorithm::Match2 => "match2",
            BenchAlgorithm::Caterpillar => "caterpillar",
            BenchAlgorithm::Agree => "agree",
            BenchAlgorithm::MastExact => "mast-exact",
            BenchAlgorithm::MastFloor => "mast-floor",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "algorithm", value_enum, required = true, value_delimiter = ',')]
    pub algorithms: Vec<BenchAlgorithm>,
    #[arg(long = "n", required = true, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModelArg::Uniform)]
    pub model: ModelArg,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Record wall-clock times (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

/// One benchmark trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub model: String,
    pub seed: u64,
    pub algorithm: String,
    pub delta: Option<f64>,
    pub result_size: usize,
    pub bound_value: f64,
    pub exact_size: Option<usize>,
    pub runtime_ms: Option<f64>,
    pub certificate_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub n: usize,
    pub algorithm: String,
    pub trials: usize,
    pub min_achieved: usize,
    pub mean_achieved: f64,
    pub max_bound: f64,
    pub all_met: bool,
}

/// Largest `n` for which bench records the exact optimum.
pub const BENCH_EXACT_MAX: usize = 64;

/// Result of a compute command.
#[derive(Debug, Serialize)]
struct Outcome {
    algorithm: String,
    size: usize,
    leaves: LeafSet,
    certificate: Option<String>,
    report: Option<GuaranteeReport>,
    details: serde_json::Value,
}

enum Failure {
    Usage(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Disagreement(_) | Error::RamseyViolation(_) => Failure::Violation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Violation(m)) => {
            let _ = writeln!(err, "GUARANTEE VIOLATION: {m}");
            2
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Gen { kind } => cmd_gen(kind, out),
        Command::MastExact(p) => {
            let (a, b) = read_pair(p)?;
            let o = match (&a, &b) {
                (Tree::Rooted(x), Tree::Rooted(y)) => {
                    let r = mast_rooted(x, y)?;
                    outcome("mast-exact", r.witness, r.certificate.map(|c| c.restricted_shape), None)
                }
                _ => {
                    let r = mast_unrooted(&a.to_unrooted()?, &b.to_unrooted()?)?;
                    outcome("mast-exact", r.witness, r.certificate.map(|c| c.restricted_shape), None)
                }
            };
            emit(cli.format, &o, out)
        }
        Command::Match1(p) => {
            let (a, b) = read_pair(p)?;
            let delta = p.delta.unwrap_or(bounds::optimal_delta_match1().0);
            let o = match (&a, &b) {
                (Tree::Rooted(x), Tree::Rooted(y)) => {
                    let r = match1(x, y, delta)?;
                    if cli.trace {
                        for s in &r.trace {
                            trace_line(err, s)?;
                        }
                    }
                    let cert = verify_agreement(x, y, &r.leaves)?;
                    let report = r.report()?;
                    let mut o = outcome("match1", r.leaves.clone(), Some(cert.restricted_shape), Some(report));
                    let (a, b, c, d, e) = r.line_counts();
                    o.details = serde_json::json!({
                        "line_counts": [a, b, c, d, e],
                        "trace_inequality": r.product_inequality_holds(),
                    });
                    o
                }
                _ => {
                    let (x, y) = (a.to_unrooted()?, b.to_unrooted()?);
                    let r = match1_unrooted(&x, &y, delta)?;
                    let cert = verify_agreement(&x, &y, &r.leaves)?;
                    let report = GuaranteeReport::new("match1-unrooted", r.bound, r.leaves.len())
                        .with_param("delta", delta)
                        .with_param("local_bound", r.local_bound);
                    let mut o = outcome("match1-unrooted", r.leaves.clone(), Some(cert.restricted_shape), Some(report));
                    o.details = serde_json::json!({ "class": r.class, "kept": r.kept.len() });
                    o
                }
            };
            emit(cli.format, &o, out)
        }
        Command::Match2(p) => {
            let (a, b) = read_pair(p)?;
            let delta = p.delta.unwrap_or(bounds::optimal_delta_match2().0);
            let o = match (&a, &b) {
                (Tree::Rooted(x), Tree::Rooted(y)) => {
                    let r = match2(x, y, delta)?;
                    if cli.trace {
                        for s in &r.trace {
                            trace_line(err, s)?;
                        }
                    }
                    let cert = verify_agreement(x, y, &r.leaves)?;
                    let report = r.report()?;
                    let mut o = outcome("match2", r.leaves.clone(), Some(cert.restricted_shape), Some(report));
                    o.details = serde_json::json!({
                        "drop_bounds": r.drop_bounds_hold(),
                        "max_path_length": r.max_path_length(),
                        "min_branchings": r.min_branchings(),
                    });
                    o
                }
                _ => {
                    let (x, y) = (a.to_unrooted()?, b.to_unrooted()?);
                    let r = match2_unrooted(&x, &y, delta)?;
                    let cert = verify_agreement(&x, &y, &r.result.leaves)?;
                    let report = GuaranteeReport::new("match2-unrooted", r.result.bound, r.result.leaves.len())
                        .with_param("delta", delta)
                        .with_param("local_bound", r.result.local_bound);
                    let mut o = outcome("match2-unrooted", r.result.leaves.clone(), Some(cert.restricted_shape), Some(report));
                    o.details = serde_json::json!({ "class": r.result.class, "overlap": r.overlap });
                    o
                }
            };
            emit(cli.format, &o, out)
        }
        Command::MatchMulti { files, delta } => {
            let trees: Vec<RootedTree> = files
                .iter()
                .map(|f| read_tree(f).and_then(|t| t.as_rooted().cloned().ok_or_else(|| {
                    Failure::Usage(format!("{}: expected a rooted tree", f.display()))
                })))
                .collect::<std::result::Result<_, _>>()?;
            let delta = delta.unwrap_or(bounds::optimal_delta_match2().0);
            let r = match2_multi(&trees, delta)?;
            let last = r.stages.last();
            let report = last.map(|s| {
                GuaranteeReport::new("match-multi", s.bound, r.leaves.len()).with_param("delta", delta)
            });
            let cert = verify_agreement(&trees[0], &trees[1], &r.leaves)?;
            let mut o = outcome("match-multi", r.leaves.clone(), Some(cert.restricted_shape), report);
            o.details = serde_json::json!({ "stages": r.stages, "stopped": r.stopped });
            let all_stages_met = r.stages.iter().all(|s| s.matched as f64 >= s.bound.max(1.0) - bounds::SLACK);
            let code = emit(cli.format, &o, out)?;
            Ok(if all_stages_met { code } else { 2 })
        }
        Command::MatchAb { pair, k, mode } => {
            let (a, b) = read_pair(pair)?;
            let (x, y) = (a.to_unrooted()?, b.to_unrooted()?);
            let mode = match mode {
                ModeArg::OneSided => AlmostMode::OneSided,
                ModeArg::BothSided => AlmostMode::BothSided,
            };
            let delta = pair.delta.unwrap_or(match mode {
                AlmostMode::OneSided => bounds::delta_for_alpha_k(*k)?,
                AlmostMode::BothSided => bounds::delta_for_beta_k(*k)?,
            });
            let r = match_almost_balanced(&x, &y, *k, delta, mode)?;
            let cert = verify_agreement(&x, &y, &r.leaves)?;
            let report = GuaranteeReport::new("match-ab", r.bound, r.leaves.len())
                .with_param("delta", delta)
                .with_param("k", *k);
            let mut o = outcome("match-ab", r.leaves.clone(), Some(cert.restricted_shape), Some(report));
            o.details = serde_json::json!({
                "mode": r.mode,
                "padded_heights": r.padded_heights,
                "asymptotic_bound": r.asymptotic_bound,
            });
            emit(cli.format, &o, out)
        }
        Command::Agree(p) => {
            let (a, b) = read_pair(p)?;
            let (x, y) = (a.to_unrooted()?, b.to_unrooted()?);
            let r = agree_general(&x, &y)?;
            let cert = verify_agreement(&x, &y, &r.leaves)?;
            let mut o = outcome("agree", r.leaves.clone(), Some(cert.restricted_shape), Some(r.report.clone()));
            o.details = serde_json::json!({ "attempts": r.attempts, "splits": r.splits });
            emit(cli.format, &o, out)
        }
        Command::Decompose { file, a } => {
            let t = read_tree(file)?.to_unrooted()?;
            let s = ramsey_split(&t, *a, 1.0 - a)?;
            match cli.format {
                Format::Json => writeln!(out, "{}", to_json(&s)?)?,
                _ => {
                    let (tag, size, measure) = match &s.outcome {
                        crate::decompose::RamseyOutcome::BalancedFound { leaves, height } => {
                            ("balanced", leaves.len(), *height as usize)
                        }
                        crate::decompose::RamseyOutcome::PathFound { leaves, edge_length } => {
                            ("path", leaves.len(), *edge_length)
                        }
                    };
                    writeln!(out, "outcome: {tag}")?;
                    writeln!(out, "measure: {measure}")?;
                    writeln!(out, "leaves: {size}")?;
                    writeln!(out, "phi: {:.6}", s.phi)?;
                    writeln!(out, "path_threshold: {:.6}", s.path_threshold)?;
                    writeln!(out, "balanced_height: {}", s.balanced_height)?;
                    writeln!(out, "diameter: {}", s.diameter)?;
                }
            }
            Ok(if s.meets_threshold() { 0 } else { 2 })
        }
        Command::Verify {
            first,
            second,
            leaves,
        } => {
            let x = parse_leaves(leaves)?;
            let (a, b) = (read_tree(first)?, read_tree(second)?);
            let cert = match (&a, &b) {
                (Tree::Rooted(p), Tree::Rooted(q)) => verify_agreement(p, q, &x),
                _ => verify_agreement(&a.to_unrooted()?, &b.to_unrooted()?, &x),
            };
            match cert {
                Ok(c) => {
                    let o = outcome("verify", x, Some(c.restricted_shape), None);
                    emit(cli.format, &o, out)
                }
                Err(e @ Error::Disagreement(_)) => {
                    writeln!(err, "invalid: {e}")?;
                    Ok(2)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Bounds { n, h } => cmd_bounds(*n, *h, cli.format, out),
        Command::Bench(b) => cmd_bench(b, err),
    }
}

fn outcome(
    algorithm: &str,
    leaves: LeafSet,
    certificate: Option<String>,
    report: Option<GuaranteeReport>,
) -> Outcome {
    Outcome {
        algorithm: algorithm.to_string(),
        size: leaves.len(),
        leaves,
        certificate,
        report,
        details: serde_json::Value::Null,
    }
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure::Usage(e.to_string()))
}

fn trace_line<T: Serialize>(err: &mut dyn Write, v: &T) -> std::result::Result<(), Failure> {
    writeln!(err, "{}", to_json(v)?)?;
    Ok(())
}

fn emit(format: Format, o: &Outcome, out: &mut dyn Write) -> CliResult {
    match format {
        Format::Text => {
            writeln!(out, "algorithm: {}", o.algorithm)?;
            writeln!(out, "size: {}", o.size)?;
            writeln!(out, "leaves: {}", o.leaves)?;
            if let Some(c) = &o.certificate {
                writeln!(out, "certificate: {c}")?;
            }
            if let Some(r) = &o.report {
                writeln!(out, "bound: {:.6}", r.bound_value)?;
                writeln!(out, "clamped_bound: {:.6}", r.clamped_bound())?;
                writeln!(out, "achieved: {}", r.achieved)?;
                writeln!(out, "met: {}", r.met())?;
            }
            if !o.details.is_null() {
                writeln!(out, "details: {}", o.details)?;
            }
        }
        Format::Json => writeln!(out, "{}", to_json(o)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let row = (
                &o.algorithm,
                o.size,
                o.leaves.to_string(),
                o.certificate.clone().unwrap_or_default(),
                o.report.as_ref().map(|r| r.bound_value),
                o.report.as_ref().map(|r| r.met()),
            );
            let csv_err = |e: csv::Error| Failure::Usage(e.to_string());
            w.write_record(["algorithm", "size", "leaves", "certificate", "bound", "met"])
                .map_err(csv_err)?;
            w.serialize(row).map_err(csv_err)?;
            let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
            out.write_all(&bytes)?;
        }
    }
    Ok(match &o.report {
        Some(r) if !r.met() => 2,
        _ => 0,
    })
}

fn read_tree(path: &Path) -> std::result::Result<Tree, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_newick(text.trim()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_pair(p: &PairArgs) -> std::result::Result<(Tree, Tree), Failure> {
    Ok((read_tree(&p.first)?, read_tree(&p.second)?))
}

fn parse_leaves(s: &str) -> std::result::Result<LeafSet, Failure> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<Label>()
                .map_err(|_| Failure::Usage(format!("bad leaf label {t:?}")))
        })
        .collect()
}

fn cmd_gen(kind: &GenKind, out: &mut dyn Write) -> CliResult {
    let guard = Guard::from_env();
    match kind {
        GenKind::Balanced { m } => writeln!(out, "{}", to_newick_rooted(&gen_balanced(*m)?))?,
        GenKind::Caterpillar { n, rooted } => {
            let s = if *rooted {
                to_newick_rooted(&gen_caterpillar_rooted(*n)?)
            } else {
                to_newick_unrooted(&gen_caterpillar(*n)?)
            };
            writeln!(out, "{s}")?
        }
        GenKind::Random {
            n,
            model,
            seed,
            rooted,
        } => {
            let rm = RandomModel::new((*model).into(), *seed);
            let s = if *rooted {
                to_newick_rooted(&gen_random_rooted(*n, &rm)?)
            } else {
                to_newick_unrooted(&gen_random(*n, &rm)?)
            };
            writeln!(out, "{s}")?
        }
        GenKind::Fhk { h, k } => writeln!(out, "{}", to_newick_rooted(&gen_extremal_fhk(*h, *k)?))?,
        GenKind::SwapPair { k, unrooted } => {
            if *unrooted {
                let (a, b) = gen_swap_pair_unrooted(*k)?;
                writeln!(out, "{}\n{}", to_newick_unrooted(&a), to_newick_unrooted(&b))?
            } else {
                let (a, b) = gen_swap_pair(*k)?;
                writeln!(out, "{}\n{}", to_newick_rooted(&a), to_newick_rooted(&b))?
            }
        }
        GenKind::Enumerate { n, rooted } => {
            if *rooted {
                for t in enumerate_rooted(*n, guard)? {
                    writeln!(out, "{}", to_newick(&Tree::Rooted(t)))?;
                }
            } else {
                for t in enumerate_unrooted(*n, guard)? {
                    writeln!(out, "{}", to_newick(&Tree::Unrooted(t)))?;
                }
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct BoundsTable {
    delta_star_match1: f64,
    alpha_star: f64,
    delta_star_match2: f64,
    beta_star: f64,
    beta_delta_limit: f64,
    t2_constant: f64,
    n: Option<NTable>,
    f: Option<Vec<(u32, u32, String)>>,
}

#[derive(Serialize)]
struct NTable {
    n: usize,
    phi: f64,
    psi: f64,
    path_threshold: f64,
    general_bound: f64,
    t1_bound: f64,
}

fn cmd_bounds(n: Option<usize>, h: Option<u32>, format: Format, out: &mut dyn Write) -> CliResult {
    let (d1, a1) = bounds::optimal_delta_match1();
    let (d2, b2) = bounds::optimal_delta_match2();
    let table = BoundsTable {
        delta_star_match1: d1,
        alpha_star: a1,
        delta_star_match2: d2,
        beta_star: b2,
        beta_delta_limit: bounds::beta_delta_limit(),
        t2_constant: bounds::t2_constant(d2)?,
        n: match n {
            Some(n) => Some(NTable {
                n,
                phi: bounds::phi(n, 0.5)?,
                psi: bounds::psi(n, 0.5)?,
                path_threshold: bounds::path_threshold(n, 0.5)?,
                general_bound: bounds::general_bound(n)?,
                t1_bound: a1 * (2.0 * n as f64 / 3.0).log2(),
            }),
            None => None,
        },
        f: match h {
            Some(h) => Some(
                (0..=h)
                    .map(|k| Ok((h, k, bounds::f_closed(h, k)?.to_string())))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        },
    };
    match format {
        Format::Json => writeln!(out, "{}", to_json(&table)?)?,
        _ => {
            let mut s = String::new();
            let _ = writeln!(s, "delta_star_match1: {:.6}", table.delta_star_match1);
            let _ = writeln!(s, "alpha_star: {:.6}", table.alpha_star);
            let _ = writeln!(s, "delta_star_match2: {:.6}", table.delta_star_match2);
            let _ = writeln!(s, "beta_star: {:.6}", table.beta_star);
            let _ = writeln!(s, "beta_delta_limit: {:.6}", table.beta_delta_limit);
            let _ = writeln!(s, "t2_constant: {:.6}", table.t2_constant);
            if let Some(t) = &table.n {
                let _ = writeln!(s, "n: {}", t.n);
                let _ = writeln!(s, "phi: {:.6}", t.phi);
                let _ = writeln!(s, "psi: {:.6}", t.psi);
                let _ = writeln!(s, "path_threshold: {:.6}", t.path_threshold);
                let _ = writeln!(s, "general_bound: {:.6}", t.general_bound);
                let _ = writeln!(s, "t1_bound: {:.6}", t.t1_bound);
            }
            if let Some(f) = &table.f {
                for (h, k, v) in f {
                    let _ = writeln!(s, "f({h},{k}) = {v}");
                }
            }
            out.write_all(s.as_bytes())?;
        }
    }
    Ok(0)
}

/// Runs one trial; `seed` drives every random choice.
fn run_trial(
    alg: BenchAlgorithm,
    n: usize,
    seed: u64,
    model: Model,
    delta: Option<f64>,
) -> Result<TrialRecord> {
    let mut rng = seeded_rng(seed);
    let labels: Vec<Label> = (1..=n as Label).collect();
    let (size, bound, exact, ok, delta) = match alg {
        BenchAlgorithm::Match1 | BenchAlgorithm::Match2 => {
            if !n.is_power_of_two() {
                return Err(Error::Domain(format!("{} needs n a power of two, got {n}", alg.name())));
            }
            let m = n.trailing_zeros();
            let t1 = gen_balanced(m)?;
            let t2 = if alg == BenchAlgorithm::Match1 {
                random_rooted_with(&mut rng, &labels, model)?
            } else {
                let mut shuffled = labels.clone();
                shuffled.shuffle(&mut rng);
                balanced_with_labels(&shuffled)?
            };
            let (leaves, bound, delta) = if alg == BenchAlgorithm::Match1 {
                let d = delta.unwrap_or(bounds::optimal_delta_match1().0);
                let r = match1(&t1, &t2, d)?;
                (r.leaves, bounds::match1_bound(m, n, d)?, d)
            } else {
                let d = delta.unwrap_or(bounds::optimal_delta_match2().0);
                let r = match2(&t1, &t2, d)?;
                (r.leaves, bounds::match2_bound(m, m, n, d)?, d)
            };
            let exact = (n <= BENCH_EXACT_MAX).then(|| mast_rooted(&t1, &t2).map(|r| r.size)).transpose()?;
            let ok = verify_agreement(&t1, &t2, &leaves).is_ok();
            (leaves.len(), bound, exact, ok, Some(delta))
        }
        BenchAlgorithm::Caterpillar | BenchAlgorithm::Agree => {
            let t1 = if alg == BenchAlgorithm::Caterpillar {
                let mut order = labels.clone();
                order.shuffle(&mut rng);
                caterpillar_with_labels(&order)?.unroot()?
            } else {
                random_unrooted_with(&mut rng, &labels, model)?
            };
            let t2 = random_unrooted_with(&mut rng, &labels, model)?;
            let (leaves, bound) = if alg == BenchAlgorithm::Caterpillar {
                (caterpillar_agree(&t1, &t2)?.leaves, (n as f64).log2() / 3.0)
            } else {
                (agree_general(&t1, &t2)?.leaves, bounds::general_bound(n)?)
            };
            let exact = (n <= BENCH_EXACT_MAX).then(|| mast_unrooted(&t1, &t2).map(|r| r.size)).transpose()?;
            let ok = verify_agreement(&t1, &t2, &leaves).is_ok();
            (leaves.len(), bound, exact, ok, None)
        }
        BenchAlgorithm::MastExact => {
            let t1 = random_rooted_with(&mut rng, &labels, model)?;
            let t2 = random_rooted_with(&mut rng, &labels, model)?;
            let r = mast_rooted(&t1, &t2)?;
            let ok = verify_agreement(&t1, &t2, &r.witness).is_ok();
            (r.size, 1.0, Some(r.size), ok, None)
        }
        BenchAlgorithm::MastFloor => {
            let v = mast_floor(n, false)?;
            (v, 1.0, Some(v), true, None)
        }
    };
    Ok(TrialRecord {
        n,
        model: if alg == BenchAlgorithm::MastFloor {
            "enumerate".into()
        } else {
            model.name().into()
        },
        seed,
        algorithm: alg.name().into(),
        delta,
        result_size: size,
        bound_value: bound,
        exact_size: exact,
        runtime_ms: None,
        certificate_ok: ok,
    })
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn cmd_bench(b: &BenchArgs, err: &mut dyn Write) -> CliResult {
    let model: Model = b.model.into();
    let mut jobs = Vec::new();
    for &alg in &b.algorithms {
        for &n in &b.ns {
            let trials = if alg == BenchAlgorithm::MastFloor { 1 } else { b.trials };
            for i in 0..trials {
                jobs.push((alg, n, b.seed + i));
            }
        }
    }
    let timing = b.timing;
    let mut records = jobs
        .par_iter()
        .map(|&(alg, n, seed)| {
            let start = Instant::now();
            let mut r = run_trial(alg, n, seed, model, b.delta)?;
            if timing {
                r.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|x, y| {
        (x.algorithm.as_str(), x.n, x.seed).cmp(&(y.algorithm.as_str(), y.n, y.seed))
    });

    let csv_err = |e: csv::Error| Failure::Usage(e.to_string());
    let mut w = csv::Writer::from_path(&b.out).map_err(csv_err)?;
    for r in &records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;

    let mut summaries: Vec<SummaryRecord> = Vec::new();
    for r in &records {
        let met = r.certificate_ok && r.result_size as f64 >= r.bound_value.max(1.0) - bounds::SLACK;
        match summaries.last_mut() {
            Some(s) if s.n == r.n && s.algorithm == r.algorithm => {
                s.mean_achieved = (s.mean_achieved * s.trials as f64 + r.result_size as f64)
                    / (s.trials + 1) as f64;
                s.trials += 1;
                s.min_achieved = s.min_achieved.min(r.result_size);
                s.max_bound = s.max_bound.max(r.bound_value);
                s.all_met &= met;
            }
            _ => summaries.push(SummaryRecord {
                n: r.n,
                algorithm: r.algorithm.clone(),
                trials: 1,
                min_achieved: r.result_size,
                mean_achieved: r.result_size as f64,
                max_bound: r.bound_value,
                all_met: met,
            }),
        }
    }
    let mut w = csv::Writer::from_path(summary_path(&b.out)).map_err(csv_err)?;
    for s in &summaries {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush()?;
    let violations = summaries.iter().filter(|s| !s.all_met).count();
    if violations > 0 {
        writeln!(err, "GUARANTEE VIOLATION: {violations} (n, algorithm) groups missed their bound")?;
        return Ok(2);
    }
    Ok(0)
}
