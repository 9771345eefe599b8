use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drew::config::RunConfig;
use drew::golden::{self, GoldenEpsilon};
use drew::report::{write_curves, write_json};
use drew::suite::{self, EvalRequest, FullReport, Golden, Section, StoreSummary};
use drew::{csv_io, exit, format, DrewError};
use drew_core::channel::Query;
use drew_core::ecc::{CheckNode, ReliabilityMode, WatermarkKey};
use drew_core::eval::{capacity_curve, fer_sweep};
use drew_core::pipeline::{drew_query, naive_query, preprocess, QueryResult};
use drew_core::store::{normalize, Store};
use drew_core::synth::sphere_rows;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "drew",
    version,
    about = "Watermark-routed retrieval: build stores, run queries, evaluate"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $DREW_OUT_DIR, then ./drew-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    design_p: Option<f64>,
}

#[derive(Args)]
struct QueryFlags {
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    tau_r: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    reliability_mode: Option<ReliabilityMode>,
    #[arg(long, value_parser = parse_check_node)]
    check_node: Option<CheckNode>,
}

#[derive(Subcommand)]
enum Command {
    /// Partition embeddings into watermark-keyed clusters and write a store file.
    Build {
        /// Synthetic sphere-uniform embeddings, e.g. `--synthetic N=100000 d=64`.
        #[arg(long, num_args = 1.., value_name = "KEY=VALUE", conflicts_with = "csv")]
        synthetic: Option<Vec<String>>,
        /// CSV with header `id,v0,...`.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecFlags,
        #[arg(long)]
        partition_seed: Option<u64>,
        /// Store file to write (default: <out>/store.drew).
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Answer JSON-lines queries against a store.
    Query {
        #[arg(long)]
        store: Option<PathBuf>,
        /// Query file, one JSON object per line (`-` for stdin).
        #[arg(long, default_value = "-")]
        input: PathBuf,
        /// Result file (default: stdout).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Search the whole store without decoding the key.
        #[arg(long)]
        naive: bool,
        #[command(flatten)]
        query: QueryFlags,
    },
    /// Run the evaluation suite and check every acceptance band.
    Eval {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Comma-separated sections: accuracy, lemma, subset, roc, epsilon, capacity-curve, ecc-bench.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<Section>>,
        #[arg(long)]
        n_queries: Option<usize>,
        #[arg(long)]
        epsilon_trials: Option<u64>,
        #[command(flatten)]
        query: QueryFlags,
    },
    /// Capacity and minimum redundancy of the bit-flip channel.
    CapacityCurve {
        /// Comma-separated flip rates in [0, 0.5).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Frame-error-rate sweep of the polar code alone.
    EccBench {
        #[command(flatten)]
        spec: SpecFlags,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        frames: Option<u64>,
        #[command(flatten)]
        query: QueryFlags,
    },
}

fn parse_mode(s: &str) -> Result<ReliabilityMode, String> {
    serde_json::from_value(Value::String(s.into()))
        .map_err(|_| "expected last-bit or min-bit".into())
}

fn parse_check_node(s: &str) -> Result<CheckNode, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| "expected exact or min-sum".into())
}

struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<DrewError> for Failure {
    fn from(e: DrewError) -> Self {
        let (code, kind) = match &e {
            DrewError::Config(_) => (exit::USAGE, "config"),
            DrewError::Io { .. } => (exit::DATA, "io"),
            _ => (exit::DATA, "data"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<drew_core::Error> for Failure {
    fn from(e: drew_core::Error) -> Self {
        DrewError::from(e).into()
    }
}

type CmdResult = Result<i32, Failure>;

impl SpecFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = self.k {
            cfg.spec.k = k;
        }
        if let Some(n) = self.n {
            cfg.spec.n = n;
        }
        if let Some(p) = self.design_p {
            cfg.spec.design_p = p;
        }
    }
}

impl QueryFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let q = &mut cfg.query;
        if let Some(t) = self.threshold {
            q.reliability_threshold = t;
        }
        if let Some(t) = self.tau_r {
            q.tau_r = t;
        }
        if let Some(m) = self.reliability_mode {
            q.reliability_mode = m;
        }
        if let Some(c) = self.check_node {
            q.check_node = c;
        }
    }
}

fn parse_synthetic(pairs: &[String]) -> Result<(usize, usize), Failure> {
    let (mut count, mut d) = (None, None);
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Failure::usage(format!("`{pair}`: value must be a positive integer")))?;
        match key {
            "N" => count = Some(value),
            "d" => d = Some(value),
            _ => {
                return Err(Failure::usage(format!(
                    "unknown synthetic parameter `{key}` (expected N or d)"
                )))
            }
        }
    }
    match (count, d) {
        (Some(n), Some(d)) if n > 0 && d > 0 => Ok((n, d)),
        _ => Err(Failure::usage(
            "--synthetic needs positive N=<count> and d=<dim>",
        )),
    }
}

fn emit(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn cmd_build(cfg: &RunConfig, synthetic: Option<&[String]>, csv: Option<&Path>) -> CmdResult {
    let spec = cfg
        .spec
        .construct()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let raw = match (synthetic, csv) {
        (Some(pairs), None) => {
            let (count, d) = parse_synthetic(pairs)?;
            Store::ingest(sphere_rows(count, d, cfg.seed), d)?
        }
        (None, Some(path)) => csv_io::import_path(path)?,
        _ => {
            return Err(Failure::usage(
                "build needs exactly one of --synthetic or --csv",
            ))
        }
    };
    let k = u32::try_from(cfg.spec.k).map_err(|_| Failure::usage("k out of range"))?;
    let store = preprocess(&raw, k, cfg.partition_seed.unwrap_or(cfg.seed), &spec)?;
    let path = cfg.resolve_store();
    format::save(&store, &path)?;
    #[derive(Serialize)]
    struct Built {
        store: PathBuf,
        summary: StoreSummary,
    }
    emit(&Built {
        store: path,
        summary: StoreSummary::of(&store)?,
    });
    Ok(exit::SUCCESS)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryLine {
    #[serde(default)]
    query_id: Value,
    observed_key: WatermarkKey,
    observed_embedding: Vec<f64>,
    #[serde(default)]
    ground_truth_id: Option<u64>,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    query_id: &'a Value,
    matched_id: Option<u64>,
    similarity: Option<f64>,
    decoded_code: Option<String>,
    reliable: Option<bool>,
    scope_size: usize,
    ground_truth_id: Option<u64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    empty_cluster_fallback: bool,
}

fn answer(store: &Store, cfg: &RunConfig, naive: bool, line_no: usize, line: &str) -> String {
    let parsed: Result<QueryLine, String> = serde_json::from_str(line).map_err(|e| e.to_string());
    let id_hint = serde_json::from_str::<Value>(line)
        .ok()
        .and_then(|v| v.get("query_id").cloned())
        .unwrap_or(Value::Null);
    let outcome = parsed.and_then(|q| {
        let embedding =
            normalize(&q.observed_embedding).ok_or("observed_embedding is zero or non-finite")?;
        let query = Query {
            observed_key: q.observed_key.clone(),
            observed_embedding: embedding,
            ground_truth_id: q.ground_truth_id,
        };
        let run = if naive {
            naive_query(store, &query, &cfg.query)
        } else {
            drew_query(store, &query, &cfg.query)
        };
        let r: QueryResult = run.map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&ResultLine {
            query_id: &q.query_id,
            matched_id: r.matched_id,
            similarity: r.similarity,
            decoded_code: r.decoded_code.map(|c| c.to_string()),
            reliable: r.reliable,
            scope_size: r.scope_size,
            ground_truth_id: q.ground_truth_id,
            empty_cluster_fallback: r.empty_cluster_fallback,
        })
        .expect("serializable"))
    });
    outcome
        .unwrap_or_else(|e| json!({ "query_id": id_hint, "line": line_no, "error": e }).to_string())
}

fn cmd_query(cfg: &RunConfig, input: &Path, output: Option<&Path>, naive: bool) -> CmdResult {
    cfg.query
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let store = format::load(&cfg.resolve_store())?;
    let lines: Vec<String> = if input == Path::new("-") {
        std::io::stdin()
            .lock()
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| DrewError::io("<stdin>", e))?
    } else {
        let f = std::fs::File::open(input).map_err(|e| DrewError::io(input, e))?;
        std::io::BufReader::new(f)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| DrewError::io(input, e))?
    };
    let results: Vec<(usize, String)> = lines
        .par_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i, answer(&store, cfg, naive, i + 1, l)))
        .collect();
    let mut buf = Vec::new();
    for (_, r) in &results {
        buf.extend_from_slice(r.as_bytes());
        buf.push(b'\n');
    }
    match output {
        Some(path) => drew::report::write_atomic(path, &buf)?,
        None => {
            let mut out = BufWriter::new(std::io::stdout().lock());
            out.write_all(&buf)
                .and_then(|_| out.flush())
                .map_err(|e| DrewError::io("<stdout>", e))?;
        }
    }
    Ok(exit::SUCCESS)
}

fn load_golden(cfg: &RunConfig) -> Result<Golden, Failure> {
    match &cfg.golden {
        None => Ok(Golden {
            source: "built-in".into(),
            values: Some(golden::parse(golden::DEFAULT_GOLDEN_JSON)?),
        }),
        Some(path) if !path.exists() => Ok(Golden {
            source: path.display().to_string(),
            values: None,
        }),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DrewError::io(path, e))?;
            let values: GoldenEpsilon = golden::parse(&text).map_err(|e| Failure {
                code: exit::DATA,
                kind: "golden",
                message: format!("{}: {e}", path.display()),
            })?;
            Ok(Golden {
                source: path.display().to_string(),
                values: Some(values),
            })
        }
    }
}

fn cmd_eval(cfg: &RunConfig, only: Option<&[Section]>) -> CmdResult {
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let sections = only.map_or_else(|| Section::ALL.to_vec(), <[Section]>::to_vec);
    let suite = cfg.load_suite()?;
    let store = format::load(&cfg.resolve_store())?;
    let golden = if sections.contains(&Section::Epsilon) {
        Some(load_golden(cfg)?)
    } else {
        None
    };
    let req = EvalRequest {
        store: &store,
        suite: &suite,
        query: cfg.query,
        params: &cfg.eval,
        sections: &sections,
        seed: cfg.seed,
        golden,
    };
    let report = suite::run(&req)?;
    finish_eval(cfg, &report)
}

fn finish_eval(cfg: &RunConfig, report: &FullReport) -> CmdResult {
    let out = cfg.resolve_out_dir();
    let report_path = out.join("report.json");
    let curves_path = out.join("curves.csv");
    write_json(&report_path, report)?;
    write_curves(&curves_path, &suite::curve_rows(report))?;
    let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
    let mut summary = json!({
        "report": report_path,
        "curves": curves_path,
        "checks": report.checks.len(),
        "failed": failed,
    });
    if report.calibration_required() {
        let eps = report.epsilon.as_ref().expect("epsilon section");
        let candidate = out.join("epsilon_r.candidate.json");
        write_json(&candidate, &eps.sweep)?;
        summary["calibration_candidate"] = json!(candidate);
        summary["calibration_reason"] = json!(eps.golden_note);
    }
    emit(&summary);
    for c in report.failed() {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(if !failed.is_empty() {
        exit::ACCEPTANCE
    } else if report.calibration_required() {
        exit::CALIBRATION_REQUIRED
    } else {
        exit::SUCCESS
    })
}

fn cmd_capacity(cfg: &RunConfig, grid: Option<&[f64]>) -> CmdResult {
    let grid = grid.unwrap_or(&cfg.eval.capacity_grid);
    let rows = capacity_curve(grid).map_err(|e| Failure::usage(e.to_string()))?;
    write_curves(
        &cfg.resolve_out_dir().join("capacity_curve.csv"),
        &suite::capacity_rows(&rows),
    )?;
    emit(&rows);
    Ok(exit::SUCCESS)
}

fn cmd_ecc_bench(cfg: &RunConfig, grid: Option<&[f64]>, frames: Option<u64>) -> CmdResult {
    cfg.query
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let spec = cfg
        .spec
        .construct()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let grid = grid.unwrap_or(&cfg.eval.ecc_grid);
    let frames = frames.unwrap_or(cfg.eval.ecc_frames);
    let points = fer_sweep(
        &spec,
        &cfg.query.decoder(),
        cfg.query.reliability_threshold,
        grid,
        frames,
        cfg.seed,
    )
    .map_err(|e| Failure::usage(e.to_string()))?;
    write_curves(
        &cfg.resolve_out_dir().join("ecc_bench.csv"),
        &suite::fer_rows(&points, cfg.seed),
    )?;
    emit(
        &json!({ "spec": spec, "seed": cfg.seed, "points": points, "check": suite::fer_monotone_check(&points) }),
    );
    Ok(exit::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = Some(out);
    }
    match cli.command {
        Command::Build {
            synthetic,
            csv,
            spec,
            partition_seed,
            store,
        } => {
            spec.apply(&mut cfg);
            if partition_seed.is_some() {
                cfg.partition_seed = partition_seed;
            }
            if store.is_some() {
                cfg.store = store;
            }
            cmd_build(&cfg, synthetic.as_deref(), csv.as_deref())
        }
        Command::Query {
            store,
            input,
            output,
            naive,
            query,
        } => {
            query.apply(&mut cfg);
            if store.is_some() {
                cfg.store = store;
            }
            cmd_query(&cfg, &input, output.as_deref(), naive)
        }
        Command::Eval {
            store,
            suite,
            golden,
            only,
            n_queries,
            epsilon_trials,
            query,
        } => {
            query.apply(&mut cfg);
            if store.is_some() {
                cfg.store = store;
            }
            if suite.is_some() {
                cfg.suite = suite;
            }
            if golden.is_some() {
                cfg.golden = golden;
            }
            if let Some(n) = n_queries {
                cfg.eval.n_queries = n;
            }
            if let Some(t) = epsilon_trials {
                cfg.eval.epsilon_trials = t;
            }
            cmd_eval(&cfg, only.as_deref())
        }
        Command::CapacityCurve { grid } => cmd_capacity(&cfg, grid.as_deref()),
        Command::EccBench {
            spec,
            grid,
            frames,
            query,
        } => {
            spec.apply(&mut cfg);
            query.apply(&mut cfg);
            cmd_ecc_bench(&cfg, grid.as_deref(), frames)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": { "kind": f.kind, "code": f.code, "message": f.message } })
            );
            f.code
        }
    };
    ExitCode::from(code as u8)
}
