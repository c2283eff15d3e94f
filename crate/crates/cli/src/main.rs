//! `mpcjoin`: generate instances, run the simulated join, check bounds,
//! enumerate subgraphs and summarise load scaling.
//!
//! Exit codes: 0 when every requested check holds, 1 when a correctness or
//! bound check fails, 2 on usage, input or I/O errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mpcjoin::datagen::{generate, Dist, Shape};
use mpcjoin::joinalg::{choose_lambda, BoundCheck, BoundSuite};
use mpcjoin::mpcsim::mix64;
use mpcjoin::relcore::join_oracle;
use mpcjoin::relcore::text::{read_query_dir, write_query_dir, write_relation, write_relation_file};
use mpcjoin::subgraph::{enumerate_embeddings, DataGraph, Mode, PatternGraph};
use mpcjoin::{hypergraph, solve_join, Catalog, JoinQuery, LoadReport, Rational, SolveOptions};
use serde_json::json;

/// Above this input size the brute-force oracle is skipped.
const ORACLE_LIMIT: usize = 100_000;
const SAMPLED_CHECKS: usize = 1000;

#[derive(Parser)]
#[command(name = "mpcjoin", version, about = "Constant-round MPC joins in a load-exact simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance as one TSV file per relation.
    Gen(GenArgs),
    /// Solve a query for every (p, seed) pair and verify the result.
    Run(RunArgs),
    /// Evaluate the bound suite for every heavy set H.
    CheckBounds(CheckArgs),
    /// Enumerate occurrences of a pattern in an edge-list graph.
    Subgraph(SubgraphArgs),
    /// Compare measured loads against m / p^(1/rho).
    ScalingReport(ScalingArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    shape: Shape,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, default_value = "uniform")]
    dist: Dist,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Where the query comes from: files on disk or the generator.
#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
    query_dir: Option<PathBuf>,
    #[arg(long)]
    shape: Option<Shape>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, default_value = "uniform")]
    dist: Dist,
    /// Generator seed, separate from the solver seeds.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl Source {
    fn load(&self) -> Result<(JoinQuery, Catalog)> {
        match (&self.query_dir, self.shape) {
            (Some(dir), _) => {
                let mut cat = Catalog::new();
                let q = read_query_dir(dir, &mut cat).with_context(|| format!("reading {}", dir.display()))?;
                Ok((q, cat))
            }
            (None, Some(shape)) => Ok((generate(shape, self.m as usize, &self.dist, self.data_seed)?, shape.catalog())),
            (None, None) => bail!("either --query-dir or --shape is required"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Oracle,
    Bounds,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_delimiter = ',', default_value = "16", value_parser = clap::value_parser!(u64).range(1..))]
    p: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    lambda: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "oracle")]
    checks: Vec<Check>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    /// Heavy threshold; defaults to the solver's choice for `--p`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    lambda: Option<u64>,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// JSON-lines output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SubgraphArgs {
    /// A built-in pattern name or a path to an edge-list file.
    #[arg(long)]
    pattern: String,
    /// Data graph as an edge list, one "u v" pair per line.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "homomorphism")]
    mode: Mode,
    /// Keep one embedding per automorphism orbit.
    #[arg(long)]
    dedup: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    /// Load CSV files written by `run`.
    #[arg(required = true)]
    loads: Vec<PathBuf>,
    /// Fractional edge covering number, e.g. `3/2`.
    #[arg(long)]
    rho: Rational,
    /// Largest tolerated ratio between the extreme per-p ratios.
    #[arg(long, default_value_t = 4.0)]
    band: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|()| true),
        Command::Run(a) => run(a),
        Command::CheckBounds(a) => check_bounds(a),
        Command::Subgraph(a) => subgraph(a).map(|()| true),
        Command::ScalingReport(a) => scaling_report(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let q = generate(a.shape, a.m as usize, &a.dist, a.seed)?;
    fs::create_dir_all(&a.out)?;
    write_query_dir(&a.out, &q, &a.shape.catalog())?;
    println!(
        "wrote {} relations, {} tuples to {}",
        q.relations().len(),
        q.input_size(),
        a.out.display()
    );
    Ok(())
}

fn loads_header() -> &'static str {
    "p,seed,m,round,label,machine,words\n"
}

fn loads_rows(out: &mut String, p: usize, seed: u64, m: usize, report: &LoadReport) {
    for (r, (label, row)) in report.labels.iter().zip(&report.per_round).enumerate() {
        for (machine, w) in row.iter().enumerate() {
            writeln!(out, "{p},{seed},{m},{r},{label},{machine},{w}").unwrap();
        }
    }
}

fn bound_json(c: &BoundCheck, cat: &Catalog) -> String {
    json!({
        "check": c.check,
        "H": cat.names_of(&c.h),
        "J": cat.names_of(&c.j),
        "packing": c.packing,
        "lhs": c.lhs.to_string(),
        "rhs": c.rhs.to_string(),
        "holds": c.holds,
    })
    .to_string()
}

/// Result tuples must project into every input relation.
fn sampled_membership(q: &JoinQuery, result: &mpcjoin::Relation, seed: u64) -> Result<bool> {
    let rows = result.rows();
    if rows.is_empty() {
        return Ok(true);
    }
    let cols: Vec<Vec<usize>> = q
        .relations()
        .iter()
        .map(|r| r.scheme().iter().map(|&x| result.column(x).context("result misses an attribute")).collect())
        .collect::<Result<_>>()?;
    for i in 0..SAMPLED_CHECKS.min(rows.len()) {
        let row = &rows[(mix64(seed ^ i as u64) % rows.len() as u64) as usize];
        for (r, c) in q.relations().iter().zip(&cols) {
            let proj: Vec<u64> = c.iter().map(|&j| row[j]).collect();
            if !r.contains_row(&proj) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn run(a: RunArgs) -> Result<bool> {
    let (q, cat) = a.source.load()?;
    let m = q.input_size();
    fs::create_dir_all(&a.out)?;
    let use_oracle = a.checks.contains(&Check::Oracle) && m <= ORACLE_LIMIT;
    let oracle = if use_oracle {
        let truth = join_oracle(&q);
        write_relation_file(&a.out.join("oracle.tsv"), &truth, &cat)?;
        Some(truth)
    } else {
        if a.checks.contains(&Check::Oracle) {
            info!("m = {m} exceeds {ORACLE_LIMIT}; using AGM and sampled membership checks");
        }
        None
    };
    let mut all_ok = true;
    let mut loads = String::from(loads_header());
    let mut bounds = String::new();
    for &p in &a.p {
        for &seed in &a.seed {
            let opts = SolveOptions {
                lambda: a.lambda,
                ..SolveOptions::new(p as usize, seed)
            };
            let out = solve_join(&q, &opts)?;
            write_relation_file(&a.out.join(format!("result_p{p}_seed{seed}.tsv")), &out.result, &cat)?;
            loads_rows(&mut loads, p as usize, seed, m, &out.report);
            let (ok, verdict) = match &oracle {
                Some(truth) if truth == &out.result => (true, "oracle ok"),
                Some(_) => (false, "ORACLE MISMATCH"),
                None if a.checks.contains(&Check::Oracle) => {
                    let agm = BoundSuite::new(&q, out.lambda)?.agm_check_for(out.result.len())?.holds;
                    let sample = sampled_membership(&q, &out.result, seed)?;
                    match (agm, sample) {
                        (true, true) => (true, "agm+sample ok"),
                        (false, _) => (false, "AGM VIOLATED"),
                        (_, false) => (false, "SAMPLE NOT IN INPUT"),
                    }
                }
                None => (true, "unchecked"),
            };
            all_ok &= ok;
            println!(
                "p={p} seed={seed} lambda={} rounds={} load={} result={} {verdict}",
                out.lambda,
                out.report.rounds(),
                out.report.total_load(),
                out.result.len()
            );
            if a.checks.contains(&Check::Bounds) {
                let checks = BoundSuite::new(&q, out.lambda)?.run_all()?;
                let failed = checks.iter().filter(|c| !c.holds).count();
                all_ok &= failed == 0;
                for c in &checks {
                    bounds.push_str(&bound_json(c, &cat));
                    bounds.push('\n');
                }
                println!("p={p} seed={seed} bounds: {} checks, {failed} failed", checks.len());
            }
        }
    }
    fs::write(a.out.join("loads.csv"), loads)?;
    if a.checks.contains(&Check::Bounds) {
        fs::write(a.out.join("bounds.jsonl"), bounds)?;
    }
    Ok(all_ok)
}

fn check_bounds(a: CheckArgs) -> Result<bool> {
    let (q, cat) = a.source.load()?;
    q.require_binary()?;
    let lambda = match a.lambda {
        Some(l) => l,
        None => {
            let rho = hypergraph::edge_cover_lp(&hypergraph::build_hypergraph(&q))?.optimum;
            choose_lambda(a.p as usize, &rho).min(q.input_size().max(1) as u64)
        }
    };
    let checks = BoundSuite::new(&q, lambda)?.run_all()?;
    let mut sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    for c in &checks {
        writeln!(sink, "{}", bound_json(c, &cat))?;
    }
    sink.flush()?;
    let failed = checks.iter().filter(|c| !c.holds).count();
    eprintln!("lambda={lambda}: {} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

fn load_pattern(spec: &str) -> Result<PatternGraph> {
    let path = Path::new(spec);
    if path.is_file() {
        let f = fs::File::open(path)?;
        return Ok(PatternGraph::parse_edge_list(BufReader::new(f))?);
    }
    Ok(PatternGraph::builtin(spec)?)
}

fn subgraph(a: SubgraphArgs) -> Result<()> {
    let pattern = load_pattern(&a.pattern)?;
    let f = fs::File::open(&a.graph).with_context(|| format!("opening {}", a.graph.display()))?;
    let graph = DataGraph::parse(BufReader::new(f))?;
    let opts = SolveOptions::new(a.p as usize, a.seed);
    let found = enumerate_embeddings(&pattern, &graph, &opts, a.mode, a.dedup)?;
    println!(
        "{} {} embeddings ({} edges, p={}, load={})",
        found.len(),
        a.mode,
        graph.edge_count(),
        a.p,
        found.solve.report.total_load()
    );
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let cat = Catalog::letters(pattern.vertex_count());
        let rel = mpcjoin::Relation::new(found.solve.result.scheme().to_vec(), found.maps.iter().cloned())?;
        let mut w = io::BufWriter::new(fs::File::create(dir.join("embeddings.tsv"))?);
        write_relation(&mut w, &rel, &cat)?;
        w.flush()?;
        let mut loads = String::from(loads_header());
        loads_rows(&mut loads, a.p as usize, a.seed, 2 * graph.edge_count(), &found.solve.report);
        fs::write(dir.join("loads.csv"), loads)?;
    }
    Ok(())
}

fn scaling_report(a: ScalingArgs) -> Result<bool> {
    // (p, seed) -> (m, per-round max)
    let mut runs: BTreeMap<(u64, u64), (u64, BTreeMap<u64, u64>)> = BTreeMap::new();
    for path in &a.loads {
        let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                bail!("{}:{}: expected 7 fields, got {}", path.display(), i + 1, fields.len());
            }
            let num = |k: usize| -> Result<u64> {
                fields[k]
                    .parse()
                    .with_context(|| format!("{}:{}: bad number {:?}", path.display(), i + 1, fields[k]))
            };
            let (p, seed, m, round, words) = (num(0)?, num(1)?, num(2)?, num(3)?, num(6)?);
            let entry = runs.entry((p, seed)).or_insert((m, BTreeMap::new()));
            if entry.0 != m {
                bail!("mismatched inputs: p={p} seed={seed} appears with m={} and m={m}", entry.0);
            }
            let r = entry.1.entry(round).or_default();
            *r = (*r).max(words);
        }
    }
    let ms: std::collections::BTreeSet<u64> = runs.values().map(|r| r.0).collect();
    if ms.len() > 1 {
        bail!("mismatched inputs: runs have different input sizes {ms:?}");
    }
    let mut per_p: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (&(p, _), (_, rounds)) in &runs {
        per_p.entry(p).or_default().push(rounds.values().sum());
    }
    if per_p.len() < 2 {
        bail!("need ≥2 p values, got {}", per_p.len());
    }
    let m = *ms.iter().next().unwrap() as f64;
    let inv_rho = 1.0 / rational_to_f64(&a.rho)?;
    println!("p,total_load,target,ratio");
    let mut ratios = Vec::new();
    for (p, totals) in &per_p {
        let total = totals.iter().sum::<u64>() as f64 / totals.len() as f64;
        let target = m / (*p as f64).powf(inv_rho);
        let ratio = total / target;
        println!("{p},{total:.1},{target:.1},{ratio:.3}");
        ratios.push(ratio);
    }
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    let drift = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let ok = drift <= a.band;
    println!(
        "drift {drift:.3} (band {}){}",
        a.band,
        if ok { "" } else { " EXCEEDED" }
    );
    Ok(ok)
}

fn rational_to_f64(r: &Rational) -> Result<f64> {
    use num_traits::ToPrimitive;
    let v = r.to_f64().context("rho out of range")?;
    if v <= 0.0 {
        bail!("rho must be positive, got {r}");
    }
    Ok(v)
}
