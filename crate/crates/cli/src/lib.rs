//! Command-line front end: `train`, `eval`, `curriculum` and `render`.

pub mod config;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use uavtrack::agent::{
    evaluate_checkpoint, parse_trajectory, quartile_means, write_trajectory, EvalSummary,
    ExplorationParams, MetricsWriter, Trainer,
};
use uavtrack::environment::Simulator;
use uavtrack::error::{ConfigError, Error};
use uavtrack::qnet::Checkpoint;

use config::RunConfig;
use manifest::RunManifest;

/// Environment variable naming the root under which default output
/// directories are created.
pub const OUT_DIR_ENV: &str = "UAVTRACK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "uavtrack",
    version,
    about = "Train and evaluate DQN agents that track a ground vehicle from a UAV"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent from scratch.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the greedy policy.
    Eval(EvalArgs),
    /// Fine-tune a checkpoint on a new environment and compare before/after.
    Curriculum(CurriculumArgs),
    /// Draw a trajectory log as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to `$UAVTRACK_OUT_DIR/train-seed<N>` (or `runs/...`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write one trajectory log per episode into this directory.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurriculumArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Configuration of the new environment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fine-tuning episodes; a quarter of the configured budget by default.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Line-delimited JSON trajectory log.
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an altitude-over-time view here.
    #[arg(long)]
    pub side_view: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration: exit code 1.
    Config(String),
    /// Failure while running: exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Curriculum(a) => cmd_curriculum(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn default_out_dir(command: &str, seed: u64) -> PathBuf {
    let root = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{command}-seed{seed}"))
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn simulator(cfg: &RunConfig) -> Result<Simulator, CliError> {
    Simulator::new(
        cfg.env_config()?,
        cfg.reward,
        cfg.train.terminate_on_collision,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

fn exploration(cfg: &RunConfig) -> ExplorationParams {
    cfg.exploration
}

fn print_summary(label: &str, s: &EvalSummary) {
    println!("{label}avg_distance = {:.4}", s.avg_distance);
    println!("{label}avg_time = {:.4}", s.avg_time);
    println!("{label}avg_reward = {:.4}", s.avg_reward);
}

/// Streams metrics and periodic checkpoints while training; shared by
/// `train` and `curriculum`.
fn run_training(
    trainer: &mut Trainer,
    episodes: usize,
    out: &Path,
    checkpoint_every: usize,
    manifest: &mut RunManifest,
) -> Result<Vec<uavtrack::agent::EpisodeMetrics>, CliError> {
    let metrics_path = out.join("metrics.csv");
    let ck_dir = out.join("checkpoints");
    if checkpoint_every > 0 {
        fs::create_dir_all(&ck_dir).map_err(io_err(&ck_dir))?;
    }
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let mut saved = Vec::new();
    let mut done = 0usize;
    let rows = trainer.train(episodes, |t, row| {
        writer.write(row)?;
        done += 1;
        if checkpoint_every > 0 && done.is_multiple_of(checkpoint_every) {
            let name =
                PathBuf::from("checkpoints").join(format!("episode_{:06}.json", t.episodes_done()));
            t.checkpoint().save(&out.join(&name))?;
            saved.push(name);
        }
        Ok(())
    })?;
    writer.flush()?;
    let final_path = PathBuf::from("checkpoint.json");
    trainer
        .checkpoint()
        .save(&out.join(&final_path))
        .map_err(Error::from)?;
    manifest.artifacts.metrics = Some("metrics.csv".into());
    manifest.artifacts.checkpoints = saved;
    manifest.artifacts.final_checkpoint = Some(final_path);
    Ok(rows)
}

fn write_config_snapshot(
    cfg: &RunConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let path = out.join("config.toml");
    fs::write(&path, cfg.to_toml()).map_err(io_err(&path))?;
    manifest.artifacts.config = Some("config.toml".into());
    Ok(())
}

pub fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(n) = args.episodes {
        cfg.train.episodes = n;
    }
    cfg.validate()?;
    let out = args
        .out
        .unwrap_or_else(|| default_out_dir("train", cfg.train.seed));
    prepare_out_dir(&out)?;
    let mut manifest = RunManifest::start("train", cfg.train.seed, &cfg);
    write_config_snapshot(&cfg, &out, &mut manifest)?;
    manifest.write(&out).map_err(io_err(&out))?;

    let mut trainer = Trainer::new(simulator(&cfg)?, cfg.train_config(), exploration(&cfg))?;
    let rows = run_training(
        &mut trainer,
        cfg.train.episodes,
        &out,
        cfg.train.checkpoint_every,
        &mut manifest,
    )?;
    manifest.finish();
    manifest.write(&out).map_err(io_err(&out))?;

    let (first, last) = quartile_means(&rows, |r| r.mean_step_reward);
    println!("trained {} episodes into {}", rows.len(), out.display());
    println!("mean step reward: first quarter {first:.4}, last quarter {last:.4}");
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::Runtime(e.to_string()))
}

fn check_schema(ck: &Checkpoint, cfg: &RunConfig) -> Result<(), CliError> {
    let (have, want) = (ck.observation.dim(), cfg.observation().dim());
    if ck.observation != cfg.observation() {
        return Err(CliError::Runtime(format!(
            "checkpoint observation has dimension {have} but the configuration produces dimension {want}"
        )));
    }
    Ok(())
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let ck = load_checkpoint(&args.checkpoint)?;
    check_schema(&ck, &cfg)?;
    let episodes = args.episodes.unwrap_or(cfg.train.eval_episodes);
    if episodes == 0 {
        return Err(CliError::Config("--episodes must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or(cfg.train.seed);
    let sim = simulator(&cfg)?;
    let eval = evaluate_checkpoint(&ck, &sim, episodes, seed, args.trajectories.is_some())?;
    if let (Some(dir), Some(trajectories)) = (&args.trajectories, &eval.trajectories) {
        prepare_out_dir(dir)?;
        let mut manifest = RunManifest::start("eval", seed, &cfg);
        manifest.source_checkpoint = Some(args.checkpoint.clone());
        for (i, records) in trajectories.iter().enumerate() {
            let name = PathBuf::from(format!("episode_{i:04}.jsonl"));
            write_trajectory(&dir.join(&name), records)?;
            manifest.artifacts.trajectories.push(name);
        }
        manifest.finish();
        manifest.write(dir).map_err(io_err(dir))?;
    }
    println!("episodes = {episodes}");
    print_summary("", &eval.summary);
    Ok(())
}

pub fn cmd_curriculum(args: CurriculumArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    let episodes = args.episodes.unwrap_or((cfg.train.episodes / 4).max(1));
    cfg.train.episodes = episodes;
    cfg.validate()?;
    let ck = load_checkpoint(&args.checkpoint)?;
    check_schema(&ck, &cfg)?;
    let out = args
        .out
        .unwrap_or_else(|| default_out_dir("curriculum", cfg.train.seed));
    prepare_out_dir(&out)?;
    let mut manifest = RunManifest::start("curriculum", cfg.train.seed, &cfg);
    manifest.source_checkpoint = Some(args.checkpoint.clone());
    write_config_snapshot(&cfg, &out, &mut manifest)?;
    manifest.write(&out).map_err(io_err(&out))?;

    let sim = simulator(&cfg)?;
    let eval_episodes = cfg.train.eval_episodes;
    let seed = cfg.train.seed;
    let before = evaluate_checkpoint(&ck, &sim, eval_episodes, seed, false)?.summary;
    let mut trainer = Trainer::from_checkpoint(
        sim.clone(),
        cfg.train_config(),
        exploration(&cfg),
        &ck,
        cfg.train.reset_k,
    )?;
    run_training(
        &mut trainer,
        episodes,
        &out,
        cfg.train.checkpoint_every,
        &mut manifest,
    )?;
    let after =
        evaluate_checkpoint(&trainer.checkpoint(), &sim, eval_episodes, seed, false)?.summary;

    let table = comparison_table(&before, &after);
    let path = out.join("comparison.csv");
    fs::write(&path, &table).map_err(io_err(&path))?;
    manifest.artifacts.comparison = Some("comparison.csv".into());
    manifest.finish();
    manifest.write(&out).map_err(io_err(&out))?;
    println!("fine-tuned {episodes} episodes into {}", out.display());
    print!("{table}");
    Ok(())
}

/// CSV with one row per phase and one column per metric.
pub fn comparison_table(before: &EvalSummary, after: &EvalSummary) -> String {
    let mut out = String::from("phase,avg_distance,avg_time,avg_reward\n");
    for (phase, s) in [("before", before), ("after", after)] {
        out.push_str(&format!(
            "{phase},{},{},{}\n",
            s.avg_distance, s.avg_time, s.avg_reward
        ));
    }
    out
}

pub fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let env = cfg.env_config()?;
    let text = fs::read_to_string(&args.trajectory).map_err(io_err(&args.trajectory))?;
    let records = parse_trajectory(&text).map_err(|(line, msg)| {
        CliError::Runtime(format!("{}: line {line}: {msg}", args.trajectory.display()))
    })?;
    fs::write(&args.out, svg::render_top_down(&env, &records)).map_err(io_err(&args.out))?;
    if let Some(side) = &args.side_view {
        fs::write(side, svg::render_altitude(&env, &records)).map_err(io_err(side))?;
    }
    println!("rendered {} steps to {}", records.len(), args.out.display());
    Ok(())
}
