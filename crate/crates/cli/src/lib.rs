//! The `cfx` command line.
//!
//! Exit codes: `0` success, `1` error, `2` search finished without a
//! counterfactual (`generate` only).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use cfx_core::eval::{
    compare_plausibility_modes, evaluate_batch, render_table, synth_dataset, BatchEvaluation,
    PlausibilityComparison, SynthSpec,
};
use cfx_core::io::{
    build_detector, build_model, default_schema_path, load_dataset, load_json, save_dataset,
    save_json, save_schema, Dataset, RunConfig, SchemaDocument,
};
use cfx_core::models::{
    build_rule_model, dataset_shape, LofDetector, PlausibilityCheck, PredictiveModel,
};
use cfx_core::{
    generate_with, CfxError, FeatureSchema, Learner, LearnerCheckpoint, Problem, Result,
    SearchReport,
};
use clap::{Args, Parser, Subcommand};
use log::info;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "cfx",
    version,
    about = "Counterfactual explanations for time-series models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search a counterfactual for one sample.
    Generate(GenerateArgs),
    /// Search counterfactuals for every misclassified sample and report metrics.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset, schema, and rule model for a catalog dataset.
    Synth(SynthArgs),
    /// Summarise a JSON report written by `generate` or `evaluate`.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Long-format CSV dataset.
    #[arg(long)]
    input: PathBuf,
    /// Schema document; overrides the config and the `<input>.schema.json` default.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Overrides `search.seed`.
    #[arg(long, env = "CFX_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    sample_id: String,
    /// Report path; overrides `output.report`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from a saved learner instead of a fresh policy.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Save the learner after the search.
    #[arg(long)]
    save_policy: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Report path; overrides `output.report`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics table path; overrides `output.table`.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Run with the plausibility gate off and on.
    #[arg(long)]
    plausibility_compare: bool,
    /// Worker threads; overrides `workers`.
    #[arg(long, env = "CFX_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    dataset_id: String,
    /// 1 = conjunctive rule, 2 = disjunctive rule.
    #[arg(long, default_value_t = 1)]
    variant: u8,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of every cell.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| EXIT_OK),
        Command::Synth(a) => cmd_synth(a).map(|_| EXIT_OK),
        Command::Report(a) => cmd_report(a).map(|_| EXIT_OK),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

struct Context {
    config: RunConfig<f64>,
    dataset: Dataset<f64>,
    problem: Problem<f64>,
    model: Box<dyn PredictiveModel<f64>>,
    detector: Option<LofDetector<f64>>,
}

impl Context {
    fn load(args: &RunArgs) -> Result<Self> {
        let mut config = RunConfig::<f64>::load(&args.config)?;
        if let Some(seed) = args.seed {
            config.search.seed = seed;
        }
        let schema_path = args
            .schema
            .clone()
            .or_else(|| config.data.schema.clone())
            .unwrap_or_else(|| default_schema_path(&args.input));
        let dataset = load_dataset::<f64>(&args.input, &schema_path)?;
        let steps = dataset.steps().ok_or_else(|| {
            CfxError::Config(format!("{} holds no samples", args.input.display()))
        })?;
        let model = build_model(&config.model, &dataset.schema, steps)?;
        let detector = config
            .plausibility
            .as_ref()
            .map(|p| build_detector(p, &dataset.schema, &config.target))
            .transpose()?;
        let problem = config.problem(dataset.schema.clone())?;
        Ok(Self {
            config,
            dataset,
            problem,
            model,
            detector,
        })
    }

    fn detector(&self) -> Option<&dyn PlausibilityCheck<f64>> {
        self.detector
            .as_ref()
            .map(|d| d as &dyn PlausibilityCheck<f64>)
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<i32> {
    let ctx = Context::load(&args.run)?;
    let named = ctx.dataset.find(&args.sample_id).ok_or_else(|| {
        CfxError::Config(format!(
            "no sample `{}` in {}",
            args.sample_id,
            args.run.input.display()
        ))
    })?;
    let mut learner = match &args.resume {
        Some(path) => Learner::try_from(load_json::<LearnerCheckpoint<f64>>(path)?)?,
        None => Learner::new(
            ctx.problem.schema.action_layout(named.sample.steps()),
            &ctx.config.search,
        ),
    };
    let report = generate_with(
        ctx.model.as_ref(),
        &ctx.problem,
        &named.sample,
        &ctx.config.search,
        ctx.detector(),
        &mut learner,
    )?;
    if let Some(path) = &args.save_policy {
        save_json(path, &LearnerCheckpoint::from(&learner))?;
    }
    match args.out.as_ref().or(ctx.config.output.report.as_ref()) {
        Some(path) => save_json(path, &report)?,
        None => println!("{}", to_json(&report)?),
    }
    print!("{}", describe_report(&args.sample_id, &report));
    Ok(if report.succeeded {
        EXIT_OK
    } else {
        EXIT_NOT_FOUND
    })
}

fn to_json<V: serde::Serialize>(value: &V) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| CfxError::Config(e.to_string()))
}

fn describe_report(id: &str, report: &SearchReport<f64>) -> String {
    let mut out = format!(
        "sample {id}: {} episodes, {} interventions, {} counterfactuals\n",
        report.episodes_run,
        report.total_interventions,
        report.cfe_set.len()
    );
    match (report.best_proximity, report.best_sparsity) {
        _ if report.already_satisfied => out.push_str("input already meets the target\n"),
        (Some(p), Some(s)) => out.push_str(&format!(
            "best counterfactual: proximity {p:.6}, sparsity {s}\n"
        )),
        _ => out.push_str("no counterfactual found\n"),
    }
    out
}

enum Evaluation {
    Single(BatchEvaluation<f64>),
    Compared(PlausibilityComparison<f64>),
}

impl Evaluation {
    fn table(&self) -> String {
        match self {
            Evaluation::Single(b) => render_table(&[("cfx", &b.summary)]),
            Evaluation::Compared(c) => render_table(&[
                ("cfx", &c.ungated.summary),
                ("cfx-plausible", &c.gated.summary),
            ]),
        }
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let ctx = Context::load(&args.run)?;
    let workers = args.workers.or(ctx.config.workers);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CfxError::Config("workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CfxError::Config(format!("cannot start worker pool: {e}")))?;
    let started = std::time::Instant::now();
    let evaluation = pool.install(|| -> Result<Evaluation> {
        let samples = &ctx.dataset.samples;
        if args.plausibility_compare {
            let detector = ctx.detector().ok_or_else(|| {
                CfxError::Config(
                    "--plausibility-compare needs a [plausibility] section in the config".into(),
                )
            })?;
            compare_plausibility_modes(
                ctx.model.as_ref(),
                samples,
                &ctx.problem,
                &ctx.config.search,
                detector,
            )
            .map(Evaluation::Compared)
        } else {
            evaluate_batch(
                ctx.model.as_ref(),
                samples,
                &ctx.problem,
                &ctx.config.search,
                ctx.detector(),
            )
            .map(Evaluation::Single)
        }
    })?;
    info!("evaluation finished in {:.2?}", started.elapsed());

    let json = match &evaluation {
        Evaluation::Single(b) => to_json(b)?,
        Evaluation::Compared(c) => to_json(c)?,
    };
    if let Some(path) = args.out.as_ref().or(ctx.config.output.report.as_ref()) {
        write_text(path, &(json + "\n"))?;
    }
    let table = evaluation.table();
    if let Some(path) = args.table.as_ref().or(ctx.config.output.table.as_ref()) {
        write_text(path, &table)?;
    }
    print!("{table}");
    eprintln!("wall clock: {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> CfxError {
    CfxError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let (steps, features) = dataset_shape(&args.dataset_id)?;
    let rule = build_rule_model::<f64>(&args.dataset_id, args.variant, steps, features)?;
    let spec = SynthSpec {
        steps,
        features,
        n_samples: args.n,
        noise: args.noise,
        seed: args.seed,
    };
    let samples = synth_dataset(&spec, &rule)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let id = &args.dataset_id;
    let data_path = args.out.join(format!("{id}.csv"));
    let schema_path = args.out.join(format!("{id}.schema.json"));
    let rule_path = args.out.join(format!("{id}.rule.json"));
    save_dataset(&data_path, &samples)?;
    save_schema(
        &schema_path,
        &SchemaDocument::new(
            &FeatureSchema::<f64>::all_continuous(features)?,
            Some(steps),
        ),
    )?;
    save_json(&rule_path, &rule)?;
    let positives = samples
        .iter()
        .filter(|s| s.label == Some(rule.target_label))
        .count();
    println!(
        "wrote {} samples (K={steps}, D={features}, {positives} labelled {}) to {}",
        samples.len(),
        rule.target_label,
        data_path.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let value: serde_json::Value = load_json(&args.input)?;
    let parse_err =
        |e: serde_json::Error| CfxError::Config(format!("{}: {e}", args.input.display()));
    if value.get("ungated").is_some() {
        let c: PlausibilityComparison<f64> = serde_json::from_value(value).map_err(parse_err)?;
        print!("{}", Evaluation::Compared(c).table());
    } else if value.get("summary").is_some() {
        let b: BatchEvaluation<f64> = serde_json::from_value(value).map_err(parse_err)?;
        print!("{}", Evaluation::Single(b).table());
    } else {
        let r: SearchReport<f64> = serde_json::from_value(value).map_err(parse_err)?;
        let id = args
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        print!("{}", describe_report(&id, &r));
    }
    Ok(())
}
