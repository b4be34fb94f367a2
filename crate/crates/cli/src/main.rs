use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sculpt_core::metrics::{krippendorff_alpha, DistanceReport, Level, RatingMatrix};
use sculpt_core::model::{load_encoder, save_encoder, save_model, train_action_head, Hyper, Mode, ModelDims};
use sculpt_core::pipeline::{
    load_datasets, make_dataset, plan_only, run_episode, run_pretrain, run_suite, ActionBackendKind, DatasetJob,
    EvalJob, PlannerBackend, PretrainJob, RunConfig, SubgoalBackendKind, SuiteOptions,
};
use sculpt_core::pointcloud::ply;
use sculpt_core::{Error, Result};

/// The eight shape prompts of the sculpting experiments.
const DEFAULT_PROMPTS: [&str; 8] = ["X", "line", "flower", "column", "pyramid", "airplane", "chair", "pottery"];

#[derive(Parser)]
#[command(name = "sculpt", version, about = "Plan, sculpt and evaluate clay shapes from text prompts")]
struct Cli {
    /// Refuse network-backed (LLM) backends.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan chunk placements for a prompt.
    Plan(PlanArgs),
    /// Run one sculpting episode.
    Run(RunArgs),
    /// Run several prompts with repeats and write summary tables.
    Suite(SuiteArgs),
    /// Generate simulated action tuples and pre-training pairs.
    MakeDataset(DatasetArgs),
    /// Pre-train the point-cloud encoder on synthetic pairs.
    TrainEncoder(EncoderArgs),
    /// Train the action model on action tuples.
    TrainAction(ActionArgs),
    /// Compare the action model variants with the baselines.
    Evaluate(EvaluateArgs),
    /// Distances between two clouds, and optionally inter-rater agreement.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct EpisodeOpts {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, value_enum)]
    planner: Option<PlannerArg>,
    #[arg(long, value_enum)]
    subgoal: Option<SubgoalArg>,
    #[arg(long, value_enum)]
    action: Option<ActionArg>,
    /// Action model checkpoint for `--action model`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    prompt: String,
    #[arg(long, value_enum, default_value = "template")]
    backend: PlannerArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "plan.json")]
    out: PathBuf,
    /// Planner audit log; defaults to `<out stem>_audit.jsonl` next to the plan.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    prompt: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: EpisodeOpts,
}

#[derive(Args)]
struct SuiteArgs {
    /// Comma-separated prompts.
    #[arg(long, value_delimiter = ',')]
    prompts: Option<Vec<String>>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Give every repeat the root seed instead of a derived one.
    #[arg(long)]
    share_seed: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: EpisodeOpts,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long, default_value_t = 4000)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EncoderArgs {
    /// Directory written by make-dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ActionArgs {
    #[arg(long)]
    data: PathBuf,
    /// Pre-trained encoder; required unless the mode is end-to-end.
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "frozen")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    encoder: PathBuf,
    /// Output directory for table.csv and table.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rating CSV: one row per rater, one column per item, blank when missing.
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Number of rating levels (values 1..=levels).
    #[arg(long, default_value_t = 5)]
    levels: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Template,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubgoalArg {
    Heuristic,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActionArg {
    Search,
    Model,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Frozen,
    Unfrozen,
    EndToEnd,
}

impl From<PlannerArg> for PlannerBackend {
    fn from(a: PlannerArg) -> Self {
        match a {
            PlannerArg::Template => PlannerBackend::Template,
            PlannerArg::Llm => PlannerBackend::Llm,
        }
    }
}

fn load_config(path: Option<&Path>, offline: bool) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.offline |= offline;
    Ok(cfg)
}

impl EpisodeOpts {
    fn config(&self, offline: bool) -> Result<RunConfig> {
        let mut cfg = load_config(self.config.as_deref(), offline)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.max_rounds {
            cfg.max_rounds = r;
        }
        if let Some(p) = self.planner {
            cfg.backends.planner = p.into();
        }
        if let Some(s) = self.subgoal {
            cfg.backends.subgoal = match s {
                SubgoalArg::Heuristic => SubgoalBackendKind::Heuristic,
                SubgoalArg::Llm => SubgoalBackendKind::Llm,
            };
        }
        if let Some(a) = self.action {
            cfg.backends.action = match a {
                ActionArg::Search => ActionBackendKind::Search,
                ActionArg::Model => ActionBackendKind::Model,
                ActionArg::Random => ActionBackendKind::Random,
            };
        }
        if let Some(m) = &self.model {
            cfg.model = Some(m.clone());
        }
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn cmd_plan(a: PlanArgs, offline: bool) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref(), offline)?;
    cfg.prompt = a.prompt;
    cfg.backends.planner = a.backend.into();
    let audit_path = a.audit.unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plan".into());
        a.out.with_file_name(format!("{stem}_audit.jsonl"))
    });
    let outcome = plan_only(&cfg, None)?;
    outcome.plan.write(&a.out)?;
    std::fs::write(&audit_path, outcome.audit_jsonl()?).map_err(|e| Error::io(&audit_path, e))?;
    println!("{} placements in {} iterations -> {}", outcome.plan.len(), outcome.iterations, a.out.display());
    Ok(())
}

fn cmd_run(a: RunArgs, offline: bool) -> Result<()> {
    let mut cfg = a.opts.config(offline)?;
    if let Some(p) = a.prompt {
        cfg.prompt = p;
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    let r = run_episode(&cfg)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    println!(
        "{}: {} placements, {} rounds, chamfer {} -> {}",
        r.prompt,
        r.plan.len(),
        r.rounds.len(),
        fmt(r.chamfer_initial),
        fmt(r.chamfer_final)
    );
    Ok(())
}

fn cmd_suite(a: SuiteArgs, offline: bool) -> Result<()> {
    let cfg = a.opts.config(offline)?;
    let prompts = a.prompts.unwrap_or_else(|| DEFAULT_PROMPTS.map(String::from).to_vec());
    let summary = run_suite(&prompts, SuiteOptions { repeats: a.repeats, share_seed: a.share_seed }, &cfg, &a.out)?;
    for row in &summary.rows {
        println!(
            "{:<10} {}/{} ok  chamfer {:.4e} ± {:.1e}",
            row.prompt,
            row.episodes - row.failed,
            row.episodes,
            row.chamfer_final_mean,
            row.chamfer_final_std
        );
    }
    Ok(())
}

fn cmd_make_dataset(a: DatasetArgs) -> Result<()> {
    let job = DatasetJob { train: a.train, test: a.test, pairs: a.pairs, seed: a.seed, ..Default::default() };
    let d = make_dataset(&job, &a.out)?;
    println!("{} train, {} test tuples, {} pairs -> {}", d.train.len(), d.test.len(), d.pairs.len(), a.out.display());
    Ok(())
}

fn cmd_train_encoder(a: EncoderArgs) -> Result<()> {
    let data = load_datasets(&a.data)?;
    let mut job = PretrainJob::default();
    job.hyper.epochs = a.epochs;
    job.hyper.seed = a.seed;
    let pre = run_pretrain(&data.pairs, &job)?;
    save_encoder(&a.out, &pre.encoder)?;
    write_json(&a.out.with_extension("report.json"), &pre.report)?;
    println!(
        "validation loss {:.4e} -> {:.4e}; encoder -> {}",
        pre.report.initial_val_loss,
        pre.report.final_val_loss,
        a.out.display()
    );
    Ok(())
}

fn cmd_train_action(a: ActionArgs) -> Result<()> {
    let data = load_datasets(&a.data)?;
    let defaults = EvalJob::default();
    let (mode, hyper) = match a.mode {
        ModeArg::Frozen => (Mode::Frozen, defaults.frozen),
        ModeArg::Unfrozen => (Mode::Unfrozen, defaults.unfrozen),
        ModeArg::EndToEnd => (Mode::EndToEnd, defaults.end_to_end),
    };
    let hyper = Hyper { epochs: a.epochs.unwrap_or(hyper.epochs), seed: a.seed, ..hyper };
    let encoder = a.encoder.as_deref().map(load_encoder).transpose()?;
    let (model, report) =
        train_action_head(&data.train, encoder.as_ref(), mode, ModelDims::default(), defaults.bounds, &hyper)?;
    save_model(&a.out, &model)?;
    write_json(&a.out.with_extension("report.json"), &report)?;
    println!("action model -> {}", a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let data = load_datasets(&a.data)?;
    let encoder = load_encoder(&a.encoder)?;
    let job = EvalJob { seed: a.seed, ..Default::default() };
    let table = sculpt_core::pipeline::evaluate(&data.train, &data.test, &encoder, &job)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    table.write_csv(&a.out.join("table.csv"))?;
    write_json(&a.out.join("table.json"), &table)?;
    println!("{:<14} {:>10} {:>10} {:>10} {:>10} {:>10}", "method", "val MSE", "test MSE", "CD", "EMD", "HD");
    for r in &table.rows {
        println!(
            "{:<14} {:>10.4e} {:>10.4e} {:>10.3e} {:>10.3e} {:>10.3e}",
            r.method, r.val_mse, r.test_mse, r.cd, r.emd, r.hd
        );
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let (ca, cb) = (ply::read(&a.a)?, ply::read(&a.b)?);
    let d = DistanceReport::compute(&ca, &cb)?;
    let mut report = json!({ "cd": d.cd, "emd": d.emd, "hd": d.hd });
    if let Some(path) = &a.ratings {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = RatingMatrix::from_csv(&text, a.levels)?;
        report["alpha"] = json!({
            "nominal": krippendorff_alpha(&m, Level::Nominal)?,
            "ordinal": krippendorff_alpha(&m, Level::Ordinal)?,
            "interval": krippendorff_alpha(&m, Level::Interval)?,
        });
    }
    write_json(&a.out, &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let offline = cli.offline;
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a, offline),
        Command::Run(a) => cmd_run(a, offline),
        Command::Suite(a) => cmd_suite(a, offline),
        Command::MakeDataset(a) => cmd_make_dataset(a),
        Command::TrainEncoder(a) => cmd_train_encoder(a),
        Command::TrainAction(a) => cmd_train_action(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", e.kind());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
