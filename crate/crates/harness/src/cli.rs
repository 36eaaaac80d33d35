//! The `splitlink` command line.
//!
//! Exit codes: 0 on completion (model failures included), 1 for usage
//! errors, 2 for infrastructure errors such as unreadable inputs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use splitlink_core::evalx::{comparison_table, EvalReport, InferenceMode};
use splitlink_core::promptgen::{PromptTemplateSet, Stage};

use crate::catalog_io::{attach_samples, db_file, load_catalogs, Catalogs};
use crate::client::{Client, EndpointConfig, RetryPolicy};
use crate::dataset::emit_sft_dataset;
use crate::evaluate::{evaluate, write_report, EvalOptions};
use crate::ingest::{load_split, split_name, Split};
use crate::orchestrate::{read_traces, run_pipeline, write_traces};

#[derive(Parser, Debug)]
#[command(
    name = "splitlink",
    version,
    about = "Two-stage text-to-SQL datasets, inference and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a fine-tuning dataset for one prompt stage.
    Prepare(PrepareArgs),
    /// Run a split through a chat-completions endpoint and record traces.
    Infer(InferArgs),
    /// Score traces with execution accuracy and exact set match.
    Eval(EvalArgs),
    /// Print several evaluation reports as one table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Schema metadata file (tables.json).
    #[arg(long)]
    tables: PathBuf,
    /// Examples file: JSON array of {question, query, db_id}.
    #[arg(long)]
    examples: PathBuf,
    /// Database root holding <db_id>/<db_id>.sqlite.
    #[arg(long)]
    db_root: PathBuf,
    /// Name used in example ids; defaults to the examples file stem.
    #[arg(long)]
    split_name: Option<String>,
    /// Directory with generation.txt, linking.txt, generation_system.txt
    /// and linking_system.txt overriding the built-in prompts.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageArg {
    Full,
    Link,
    Gen,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Full => Stage::Full,
            StageArg::Link => Stage::Link,
            StageArg::Gen => Stage::Gen,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Full,
    Dts,
    OracleLink,
}

impl From<ModeArg> for InferenceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => InferenceMode::Full,
            ModeArg::Dts => InferenceMode::Dts,
            ModeArg::OracleLink => InferenceMode::OracleLink,
        }
    }
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Prompt stage: full tables, schema linking, or reduced-schema generation.
    #[arg(long, value_enum)]
    stage: StageArg,
}

#[derive(Args, Debug)]
struct EndpointArgs {
    /// Endpoint base URL up to the API version, e.g. http://localhost:8000/v1.
    #[arg(long)]
    base_url: String,
    /// Model name sent with each request.
    #[arg(long)]
    model: String,
    /// Sampling temperature; 0 is greedy.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Completion length cap sent as max_tokens.
    #[arg(long, default_value_t = 512)]
    max_tokens: u32,
    /// Per-request timeout.
    #[arg(long, default_value_t = 60_000)]
    request_timeout_ms: u64,
    /// Examples in flight at once.
    #[arg(long, default_value_t = 4)]
    max_parallel: usize,
    /// Retries after a transport error, 5xx, 408 or 429.
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// First retry delay; doubles per retry.
    #[arg(long, default_value_t = 500)]
    backoff_ms: u64,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
}

impl EndpointArgs {
    fn config(&self) -> EndpointConfig {
        EndpointConfig {
            base_url: self.base_url.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_tokens,
            request_timeout_ms: self.request_timeout_ms,
            max_parallel_requests: self.max_parallel,
            retry: RetryPolicy {
                max_retries: self.max_retries,
                backoff_ms: self.backoff_ms,
            },
            api_key_env: self.api_key_env.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    endpoint: EndpointArgs,
    /// full: every table; dts: link then generate; oracle-link: gold tables.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Record wall times in traces (makes output run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Ex,
    Em,
    Link,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Trace file written by `infer`.
    #[arg(long)]
    traces: PathBuf,
    /// Metrics to report. EX and EM are always computed; `link` adds
    /// schema-linking precision, recall and exact match.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ex,em")]
    metrics: Vec<Metric>,
    /// Replace literals before exact set match.
    #[arg(long)]
    ignore_values: bool,
    /// Per-query execution timeout.
    #[arg(long, default_value_t = crate::exec::DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Model name shown in the report table.
    #[arg(long)]
    model_label: Option<String>,
    /// Record per-phase times in verdicts (makes output run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// report.json files written by `eval`.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Infra(String),
}

fn infra(e: impl std::fmt::Display) -> Failure {
    Failure::Infra(e.to_string())
}

struct Loaded {
    catalogs: Catalogs,
    split: Split,
    templates: PromptTemplateSet,
}

fn load(inputs: &Inputs) -> Result<Loaded, Failure> {
    let templates = match &inputs.templates {
        Some(dir) => crate::load_templates(dir).map_err(infra)?,
        None => PromptTemplateSet::default(),
    };
    let mut catalogs = load_catalogs(&inputs.tables).map_err(infra)?;
    let name = inputs
        .split_name
        .clone()
        .unwrap_or_else(|| split_name(&inputs.examples));
    let split = load_split(&inputs.examples, &name, &catalogs, &inputs.db_root).map_err(infra)?;
    let used: std::collections::BTreeSet<&str> = split.examples.iter().map(|e| e.db_id.as_str()).collect();
    for (id, catalog) in catalogs.iter_mut().filter(|(id, _)| used.contains(id.as_str())) {
        let file = db_file(&inputs.db_root, id);
        if !file.is_file() {
            eprintln!("warning: {} missing; its examples cannot be executed", file.display());
            continue;
        }
        for w in attach_samples(catalog, &file, 3).map_err(|e| infra(format!("{}: {e}", file.display())))? {
            eprintln!("warning: {w}");
        }
    }
    fs::create_dir_all(&inputs.out).map_err(|e| infra(format!("{}: {e}", inputs.out.display())))?;
    Ok(Loaded {
        catalogs,
        split,
        templates,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(infra)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| infra(format!("{}: {e}", path.display())))
}

fn prepare(args: PrepareArgs) -> Result<(), Failure> {
    let loaded = load(&args.inputs)?;
    let stage = Stage::from(args.stage);
    let out = &args.inputs.out;
    let data = out.join(format!("{}.jsonl", stage.as_str()));
    let emitted = emit_sft_dataset(&loaded.split, &loaded.catalogs, stage, &loaded.templates, &data)
        .map_err(|e| infra(format!("{}: {e}", data.display())))?;
    write_json(
        &out.join(format!("{}.manifest.json", stage.as_str())),
        &emitted.manifest,
    )?;
    write_json(
        &out.join(format!("{}.quarantine.json", stage.as_str())),
        &emitted.quarantine,
    )?;
    println!(
        "{}: {} records, {} quarantined, sha256 {}",
        data.display(),
        emitted.manifest.count,
        emitted.manifest.quarantined.len(),
        emitted.manifest.sha256
    );
    Ok(())
}

fn infer(args: InferArgs) -> Result<(), Failure> {
    let config = args.endpoint.config();
    config.validate().map_err(Failure::Usage)?;
    let loaded = load(&args.inputs)?;
    let client = Client::new(config);
    let mode = InferenceMode::from(args.mode);
    let (traces, summary) = run_pipeline(
        mode,
        &loaded.split,
        &loaded.catalogs,
        &loaded.templates,
        &client,
        args.timings,
    );
    let out = &args.inputs.out;
    let path = out.join("traces.jsonl");
    write_traces(&path, &traces).map_err(|e| infra(format!("{}: {e}", path.display())))?;
    write_json(&out.join("run_summary.json"), &summary)?;
    println!(
        "{}: {} traced, {} failed, {} link fallbacks, {} quarantined",
        path.display(),
        summary.n,
        summary.failed,
        summary.fallbacks,
        summary.quarantined.len()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let loaded = load(&args.inputs)?;
    let traces = read_traces(&args.traces).map_err(|e| infra(format!("{}: {e}", args.traces.display())))?;
    let opts = EvalOptions {
        link_metrics: args.metrics.contains(&Metric::Link),
        ignore_values: args.ignore_values,
        timeout_ms: args.timeout_ms,
        timings: args.timings,
        model: args.model_label,
    };
    let report = evaluate(&traces, &loaded.split, &loaded.catalogs, &opts).map_err(infra)?;
    write_report(&args.inputs.out, &report).map_err(infra)?;
    print!("{}", report.to_table());
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let mut reports = Vec::new();
    for p in &args.reports {
        let text = fs::read_to_string(p).map_err(|e| infra(format!("{}: {e}", p.display())))?;
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| infra(format!("{}: {e}", p.display())))?;
        reports.push(r);
    }
    let table = comparison_table(&reports);
    if let Some(out) = &args.out {
        fs::write(out, &table).map_err(|e| infra(format!("{}: {e}", out.display())))?;
    }
    print!("{table}");
    Ok(())
}

/// Runs the command line on `args` (program name first) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Infra(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}
