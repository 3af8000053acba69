//! `flowdsl` command-line driver.
//!
//! Exit codes: 0 on success, 1 when the user's own flow does not parse,
//! 2 for configuration and I/O errors. Model outputs that fail to parse
//! inside an eval are reported as data and do not change the exit code.

mod backend_spec;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flowdsl::backends::{GenerationRequest, Pacing};
use flowdsl::catalog::{load_catalog, signatures_of, Catalog};
use flowdsl::dsl::{compile_source, Flow, ParseError};
use flowdsl::eval::{load_eval_records, run_eval, EvalConfig, EvalReport};
use flowdsl::load::{render_load_table, run_load, LoadReport, RampMode, RampPlan};
use flowdsl::metrics::flow_similarity;
use flowdsl::prompting::{
    build_prompt, render_f2nl_metaprompt, render_paraphrase_metaprompt, render_steps_metaprompt, PromptSpec,
    TagPosition,
};
use flowdsl::retrieval::{load_corpus, ExampleStore};
use serde::Deserialize;

use backend_spec::BackendSpec;
use config::{GlobalConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "flowdsl",
    version,
    about = "Parse, score, evaluate and load-test flow DSL generation"
)]
struct Cli {
    /// TOML file with catalog, corpus, backend, seed, output, workers and k.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Operation catalog (JSON array of signatures).
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Few-shot corpus (JSONL with `nl` and `dsl`).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// replay:PATH | echo | synthetic[:k=v,...] | http:URL
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for eval and load reports.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Drop wall-clock fields from reports.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a flow and print its trigger and actions as JSON.
    Parse { file: PathBuf },
    /// Print the similarity of two flows with 2 decimals.
    Score { a: PathBuf, b: PathBuf },
    /// Run a test set through the backend and write reports.
    Eval(EvalArgs),
    /// Drive a ramp-up load test and write reports.
    Load(LoadArgs),
    /// Render a metaprompt or an inference prompt.
    Render {
        #[command(subcommand)]
        template: RenderCommand,
        /// Write the rendering here instead of stdout.
        #[arg(long, short = 'o', global = true)]
        out: Option<PathBuf>,
    },
    /// Print the k nearest corpus records to a query as JSON lines.
    Retrieve {
        query: String,
        #[arg(long, short, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL test set.
    testset: PathBuf,
    /// Few-shot examples per prompt: 0, 3 or 5.
    #[arg(long, short)]
    k: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    model_label: Option<String>,
    #[arg(long, default_value = "")]
    train_label: String,
    #[arg(long, default_value = "prefix")]
    tag_position: TagPosition,
    #[arg(long, default_value_t = 1024)]
    max_tokens: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fast,
    Slow,
}

#[derive(Args)]
struct LoadArgs {
    /// Plan file (TOML); flags override its fields.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Peak concurrency.
    #[arg(long)]
    peak: Option<usize>,
    /// Ramp length in nominal seconds (slow mode).
    #[arg(long)]
    ramp: Option<f64>,
    /// Run length in nominal seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    think: Option<f64>,
    /// Nominal seconds per wall-clock second.
    #[arg(long)]
    time_scale: Option<f64>,
    /// Natural-language query sent in every request.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    max_tokens: Option<u32>,
}

#[derive(Subcommand)]
enum RenderCommand {
    /// Flow-to-description metaprompt from 5 DSL files.
    F2nl { dsls: Vec<PathBuf> },
    /// Step-by-step metaprompt for a task and its flow.
    Steps {
        #[arg(long)]
        task: String,
        #[arg(long)]
        flow: PathBuf,
    },
    /// Query paraphrasing metaprompt.
    Paraphrase {
        #[arg(long)]
        query: String,
        #[arg(long)]
        explanation: String,
    },
    /// Inference prompt for a query, with few-shots from the corpus.
    Prompt {
        #[arg(long)]
        nl: String,
        #[arg(long, short, default_value_t = 0)]
        k: usize,
        #[arg(long)]
        tenant_tag: Option<String>,
        #[arg(long, default_value = "prefix")]
        tag_position: TagPosition,
    },
}

/// The user's own input did not parse.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {error}")]
struct RejectedInput {
    path: String,
    error: ParseError,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            if error.downcast_ref::<RejectedInput>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        catalog: cli.catalog,
        corpus: cli.corpus,
        backend: cli.backend,
        seed: cli.seed,
        output: cli.output,
        deterministic: cli.deterministic,
    };
    let config = GlobalConfig::resolve(cli.config.as_deref(), overrides)?;
    let catalog = Arc::new(read_catalog(&config)?);
    match cli.command {
        Command::Parse { file } => cmd_parse(&file, &catalog),
        Command::Score { a, b } => cmd_score(&a, &b, &catalog),
        Command::Eval(args) => cmd_eval(args, &config, catalog),
        Command::Load(args) => cmd_load(args, &config, catalog),
        Command::Render { template, out } => cmd_render(template, out.as_deref(), &config, &catalog),
        Command::Retrieve { query, k } => cmd_retrieve(&query, k, &config),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_catalog(config: &GlobalConfig) -> anyhow::Result<Catalog> {
    match &config.catalog {
        Some(path) => load_catalog(&read(path)?).with_context(|| format!("loading {}", path.display())),
        None => Ok(Catalog::empty()),
    }
}

fn read_store(config: &GlobalConfig) -> anyhow::Result<ExampleStore> {
    let Some(path) = &config.corpus else {
        bail!("this command needs --corpus");
    };
    let records = load_corpus(&read(path)?).with_context(|| format!("loading {}", path.display()))?;
    Ok(ExampleStore::with_default_embedder(records)?)
}

fn compile_file(path: &Path, catalog: &Catalog) -> anyhow::Result<Flow> {
    compile_source(&read(path)?, catalog).map_err(|error| {
        RejectedInput {
            path: path.display().to_string(),
            error,
        }
        .into()
    })
}

fn cmd_parse(file: &Path, catalog: &Catalog) -> anyhow::Result<()> {
    let flow = compile_file(file, catalog)?;
    let grounding = signatures_of(&flow, catalog);
    let summary = flow.summary();
    let out = serde_json::json!({
        "trigger": summary.trigger,
        "actions": summary.actions,
        "dsl": summary.dsl,
        "unknown": if catalog.is_empty() { Vec::new() } else { grounding.unknown },
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_score(a: &Path, b: &Path, catalog: &Catalog) -> anyhow::Result<()> {
    let (a, b) = (compile_file(a, catalog)?, compile_file(b, catalog)?);
    println!("{:.2}", flow_similarity(&a, &b).value());
    Ok(())
}

fn backend_spec(config: &GlobalConfig, default: &str) -> anyhow::Result<BackendSpec> {
    config.backend.as_deref().unwrap_or(default).parse()
}

fn write_reports(dir: &Path, files: &[(&str, &str)]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn strip_eval_timing(report: &mut EvalReport) {
    for row in &mut report.rows {
        row.latency = None;
    }
    for detail in &mut report.details {
        detail.latency_s = None;
    }
}

fn cmd_eval(args: EvalArgs, config: &GlobalConfig, catalog: Arc<Catalog>) -> anyhow::Result<()> {
    let records = load_eval_records(&read(&args.testset)?)
        .with_context(|| format!("loading {}", args.testset.display()))?;
    let k = args.k.unwrap_or(config.k);
    let store = if k > 0 { Some(read_store(config)?) } else { None };
    let backend = backend_spec(config, "echo")?.build(&catalog, &records, config.seed)?;
    let mut eval = EvalConfig::new(backend, catalog);
    eval.k = k;
    eval.seed = config.seed;
    eval.workers = args.workers.unwrap_or(config.workers);
    eval.max_tokens = args.max_tokens;
    eval.tag_position = args.tag_position;
    eval.train_label = args.train_label;
    if let Some(label) = args.model_label {
        eval.model_label = label;
    }
    let mut report = run_eval(&records, store.as_ref(), &eval)?;
    if config.deterministic {
        strip_eval_timing(&mut report);
    }
    let table = report.to_text_table();
    write_reports(
        &config.output,
        &[
            ("eval.json", &report.to_json()),
            ("eval.txt", &table),
            ("eval.csv", &report.to_csv()?),
        ],
    )?;
    print!("{table}");
    Ok(())
}

/// Load plan file; every field is optional and falls back to flags or defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    mode: Option<RampMode>,
    peak: Option<usize>,
    ramp_s: Option<f64>,
    duration_s: Option<f64>,
    think_time_s: Option<f64>,
    time_scale: Option<f64>,
    query: Option<String>,
    max_tokens: Option<u32>,
}

const DEFAULT_LOAD_QUERY: &str = "Send me the weather forecast every morning";

fn load_plan(args: &LoadArgs) -> anyhow::Result<RampPlan> {
    let file: PlanFile = match &args.plan {
        Some(path) => toml::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => PlanFile::default(),
    };
    let mode = match args.mode {
        Some(ModeArg::Fast) => RampMode::Fast,
        Some(ModeArg::Slow) => RampMode::Slow,
        None => file.mode.unwrap_or(RampMode::Fast),
    };
    let peak = args.peak.or(file.peak).unwrap_or(10);
    let duration = args.duration.or(file.duration_s).unwrap_or(60.0);
    let query = args
        .query
        .clone()
        .or(file.query)
        .unwrap_or_else(|| DEFAULT_LOAD_QUERY.to_owned());
    let prompt = build_prompt(&PromptSpec::new(query))?.text;
    let request = GenerationRequest::new("load", prompt, args.max_tokens.or(file.max_tokens).unwrap_or(256))?;
    let mut plan = match mode {
        RampMode::Fast => RampPlan::fast(peak, duration, request),
        RampMode::Slow => RampPlan::slow(peak, args.ramp.or(file.ramp_s).unwrap_or(60.0), duration, request),
    };
    if let (RampMode::Fast, Some(ramp)) = (mode, args.ramp.or(file.ramp_s)) {
        plan.ramp_s = ramp;
    }
    plan.think_time_s = args.think.or(file.think_time_s).unwrap_or(0.0);
    plan.time_scale = args.time_scale.or(file.time_scale).unwrap_or(1.0);
    plan.validate()?;
    Ok(plan)
}

fn strip_load_timing(report: &mut LoadReport) {
    report.max_in_flight = None;
    report.peak_reached_s = None;
}

fn cmd_load(args: LoadArgs, config: &GlobalConfig, catalog: Arc<Catalog>) -> anyhow::Result<()> {
    let plan = load_plan(&args)?;
    let mut spec = backend_spec(config, "synthetic")?;
    // a synthetic backend must sleep on the plan's clock
    if let BackendSpec::Synthetic(params) = &mut spec {
        match params.time_scale {
            Some(scale) if scale != plan.time_scale => {
                bail!(
                    "backend time_scale {scale} differs from the plan's {}",
                    plan.time_scale
                )
            }
            _ => {
                params.config.pacing = Pacing::Realtime {
                    time_scale: plan.time_scale,
                    capacity_rpm: params.capacity_rpm,
                }
            }
        }
    }
    if matches!(spec, BackendSpec::Echo) {
        bail!("the echo backend only answers eval records");
    }
    let backend = spec.build(&catalog, &[], config.seed)?;
    let mut report = run_load(&plan, backend)?.report;
    if config.deterministic {
        strip_load_timing(&mut report);
    }
    let table = render_load_table(std::slice::from_ref(&report));
    let plan_json = serde_json::to_string_pretty(&plan)?;
    write_reports(
        &config.output,
        &[
            ("load.json", &report.to_json()),
            ("load.txt", &table),
            ("load_plan.json", &plan_json),
        ],
    )?;
    print!("{table}");
    Ok(())
}

fn cmd_render(
    template: RenderCommand,
    out: Option<&Path>,
    config: &GlobalConfig,
    catalog: &Catalog,
) -> anyhow::Result<()> {
    let text = match template {
        RenderCommand::F2nl { dsls } => {
            let contexts = dsls.iter().map(|p| read(p)).collect::<anyhow::Result<Vec<_>>>()?;
            render_f2nl_metaprompt(&contexts)?
        }
        RenderCommand::Steps { task, flow } => {
            let parsed = compile_file(&flow, catalog)?;
            let signatures = flowdsl::catalog::extract_signature_list(&parsed);
            render_steps_metaprompt(&task, &read(&flow)?, &signatures)?
        }
        RenderCommand::Paraphrase { query, explanation } => {
            render_paraphrase_metaprompt(&query, &explanation)?
        }
        RenderCommand::Prompt {
            nl,
            k,
            tenant_tag,
            tag_position,
        } => {
            let mut spec = PromptSpec::new(nl);
            spec.tenant_tag = tenant_tag;
            spec.tag_position = tag_position;
            if k > 0 {
                let store = read_store(config)?;
                spec.few_shots = store
                    .top_k(&spec.nl_query, k)?
                    .into_iter()
                    .map(|hit| hit.record.clone())
                    .collect();
            }
            build_prompt(&spec)?.text
        }
    };
    match out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_retrieve(query: &str, k: usize, config: &GlobalConfig) -> anyhow::Result<()> {
    let store = read_store(config)?;
    for hit in store.top_k(query, k)? {
        let line = serde_json::json!({
            "index": hit.index,
            "score": hit.score,
            "nl": hit.record.nl,
            "dsl": hit.record.dsl,
        });
        println!("{line}");
    }
    Ok(())
}
