use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use semifit::config::RunConfig;
use semifit::evaluator::{export_features, run_sweep};
use semifit::nets::ArchConfig;
use semifit::store::{generate_synthetic, inspect_embx, label_ladder, read_embx, write_embx, SyntheticSpec};
use semifit::trainer::{load_checkpoint, save_checkpoint, Method, Trainer};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "semifit", version, about = "Semi-supervised content/style fine-tuning on precomputed embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test pair of EMBX files.
    Synth(SynthArgs),
    /// Train one model on a labeled budget.
    Train(TrainArgs),
    /// Train every budget of the label ladder for both methods and several seeds.
    Sweep(SweepArgs),
    /// Print the header and metadata of an EMBX file.
    Inspect {
        #[arg(long)]
        file: PathBuf,
    },
    /// Write content-head features of a dataset under a trained checkpoint.
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 6000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = 8)]
    nuisance_dim: usize,
    #[arg(long, default_value_t = 4.0)]
    nuisance_scale: f64,
    #[arg(long, default_value_t = 4.0)]
    mean_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: $SEMIFIT_OUT/synth]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Options shared by `train` and `sweep`; flags override the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Architecture preset: full or desk.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value = "semi")]
    method: Method,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory [default: $SEMIFIT_OUT/<method>-b<budget>-s<seed>]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of seeds; seeds 0..S are used.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Comma-separated budgets [default: the label ladder of the train set]
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory [default: $SEMIFIT_OUT/sweep]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_root() -> PathBuf {
    std::env::var_os("SEMIFIT_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.arch {
        cfg.arch = ArchConfig::preset(name)?;
    }
    if let Some(steps) = args.steps {
        cfg.schedule.total_steps = steps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Frozen config plus version and seed, common to every run directory.
fn write_run_files(dir: &Path, cfg: &RunConfig, command: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join("config.toml"), cfg.to_toml())?;
    write(&dir.join("VERSION"), format!("semifit {VERSION}\ncommand {command}\nseed {}\n", cfg.seed))
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        classes: args.classes,
        cls_dim: args.dim,
        mean_scale: args.mean_scale,
        noise_scale: args.noise_scale,
        nuisance_dim: args.nuisance_dim,
        nuisance_scale: args.nuisance_scale,
        n_train: args.n_train,
        n_test: args.n_test,
        seed: args.seed,
    };
    let data = generate_synthetic(&spec)?;
    let dir = args.out.unwrap_or_else(|| out_root().join("synth"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_embx(dir.join("train.embx"), &data.train)?;
    write_embx(dir.join("test.embx"), &data.test)?;
    let report = json!({ "spec": spec, "linear_probe_error": data.probe_error, "version": VERSION });
    write(&dir.join("synth.json"), serde_json::to_string_pretty(&report)?)?;
    println!("wrote {} (linear probe error {:.4})", dir.display(), data.probe_error);
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = resolve_config(&args.run)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let train = read_embx(&args.run.train)?;
    let test = read_embx(&args.run.test)?;
    let dir = args
        .out
        .unwrap_or_else(|| out_root().join(format!("{}-b{}-s{}", args.method, args.budget, cfg.seed)));

    let start = Instant::now();
    let mut trainer = Trainer::new(&cfg, args.method, &train, &test, args.budget)?;
    trainer.run()?;
    let secs = start.elapsed().as_secs_f64();

    write_run_files(&dir, &cfg, "train")?;
    save_checkpoint(&trainer.checkpoint(), dir.join("checkpoint.sfck"))?;
    let report = trainer.report();
    write(&dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    write(&dir.join("timing.json"), serde_json::to_string_pretty(&json!({ "seconds": secs }))?)?;
    println!(
        "{} budget {} seed {}: best error {:.4} at step {} ({} steps) -> {}",
        args.method,
        args.budget,
        cfg.seed,
        report.best_error,
        report.best_step,
        report.steps_run,
        dir.display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = resolve_config(&args.run)?;
    let train = read_embx(&args.run.train)?;
    let test = read_embx(&args.run.test)?;
    let budgets = match args.budgets {
        Some(b) => b,
        None => label_ladder(train.labels.iter().filter(|&&l| l >= 0).count(), train.num_classes)?,
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let dir = args.out.unwrap_or_else(|| out_root().join("sweep"));

    let start = Instant::now();
    let result = run_sweep(&train, &test, &budgets, &[Method::Sup, Method::Semi], &seeds, &cfg, args.jobs)?;
    let secs = start.elapsed().as_secs_f64();

    write_run_files(&dir, &cfg, "sweep")?;
    write(&dir.join("sweep.csv"), result.to_csv())?;
    write(&dir.join("timing.json"), serde_json::to_string_pretty(&json!({ "seconds": secs }))?)?;
    for &b in &budgets {
        let sup = result.mean_error(b, Method::Sup).unwrap_or(f64::NAN);
        let semi = result.mean_error(b, Method::Semi).unwrap_or(f64::NAN);
        println!("budget {b:>6}: supervised {sup:.4}  semi-supervised {semi:.4}");
    }
    Ok(())
}

fn inspect(file: &Path) -> Result<()> {
    let h = inspect_embx(file)?;
    println!("version     {}", h.version);
    println!("cls_dim     {}", h.cls_dim);
    println!("num_classes {}", h.num_classes);
    println!("rows        {}", h.rows);
    println!("split       {}", h.split);
    for (k, v) in &h.metadata {
        println!("meta        {k}={v}");
    }
    Ok(())
}

fn export(checkpoint: &Path, data: &Path, out: &Path) -> Result<()> {
    let bundle = load_checkpoint(checkpoint)?.bundle()?;
    let ds = read_embx(data)?;
    let pca = export_features(&bundle, &ds, out)?;
    let ratios: Vec<String> = pca.explained_variance_ratio.iter().map(|r| format!("{r:.4}")).collect();
    println!("wrote {} rows to {} (PCA explained variance {})", ds.len(), out.display(), ratios.join(" "));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => synth(args),
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Inspect { file } => inspect(&file),
        Command::ExportFeatures { checkpoint, data, out } => export(&checkpoint, &data, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let class = match (err.downcast_ref::<semifit::Error>(), err.downcast_ref::<std::io::Error>()) {
                (Some(e), _) => e.class(),
                (None, Some(_)) => "io",
                (None, None) => "usage",
            };
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("{class}: {msg}");
            ExitCode::FAILURE
        }
    }
}
