use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::warn;

use wildprep::dataset::{
    apply_fold_plan, balance, ingest, kfold_plan, preprocess_all, read_manifest, stratified_split,
    write_manifest, ClassLabel, DatasetManifest, Failure,
};
use wildprep::pipeline::{
    run_all, stamp, stats_text, write_run_lock, ConfigOverrides, PipelineConfig, MANIFEST_FILE,
    RUN_LOCK_FILE,
};
use wildprep::Error;

#[derive(Parser, Debug)]
#[command(
    name = "wildprep",
    version,
    about = "Segment, rebalance and split wild-animal photo corpora"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Master seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for image processing [default: available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite existing outputs
    #[arg(long, global = true)]
    force: bool,
    /// Flat TOML file of parameter values; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    denoise_window: Option<usize>,
    #[arg(long, global = true)]
    target_size: Option<u32>,
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    max_angle: Option<f64>,
    #[arg(long, global = true)]
    zoom_min: Option<f64>,
    #[arg(long, global = true)]
    zoom_max: Option<f64>,
    #[arg(long, global = true)]
    max_chain_len: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan a class-per-directory tree into a manifest
    Ingest {
        root: PathBuf,
        #[arg(short, long, default_value = MANIFEST_FILE)]
        output: PathBuf,
    },
    /// Resize, segment and augment every record into a PNG tree
    Segment {
        manifest: PathBuf,
        out_dir: PathBuf,
        /// Where to write the updated manifest [default: OUT_DIR/manifest.jsonl]
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Oversample minority classes with augmentation chains
    Balance {
        manifest: PathBuf,
        /// [default: rewrite MANIFEST, which needs --force]
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assign a stratified train/test split
    Split {
        manifest: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assign cross-validation folds to the training records
    Kfold {
        manifest: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print class, provenance, split and fold counts
    Stats { manifest: PathBuf },
    /// Run every stage from a raw corpus to a finished output directory
    RunAll { root: PathBuf, out_dir: PathBuf },
}

/// Exit statuses.
const USER_ERROR: u8 = 1;
const PARTIAL_FAILURE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USER_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("failed: {}: {}", f.id, f.reason);
            }
            eprintln!("{} record(s) could not be processed", failures.len());
            ExitCode::from(PARTIAL_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let all_failed = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::AllFailed { .. })));
            ExitCode::from(if all_failed {
                PARTIAL_FAILURE
            } else {
                USER_ERROR
            })
        }
    }
}

impl GlobalOpts {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            seed: self.seed,
            k: self.k,
            max_iters: self.max_iters,
            tol: self.tol,
            denoise_window: self.denoise_window,
            target_size: self.target_size,
            test_fraction: self.test_fraction,
            folds: self.folds,
            max_angle: self.max_angle,
            zoom_min: self.zoom_min,
            zoom_max: self.zoom_max,
            max_chain_len: self.max_chain_len,
        }
    }

    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let file = match &self.config {
            Some(path) => Some(ConfigOverrides::load(path)?),
            None => None,
        };
        Ok(PipelineConfig::resolve(file.as_ref(), &self.overrides())?)
    }

    fn jobs(&self) -> anyhow::Result<usize> {
        match self.jobs {
            Some(0) => bail!("--jobs must be at least 1"),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Vec<Failure>> {
    let config = cli.global.resolve()?;
    let force = cli.global.force;
    match &cli.command {
        Command::Ingest { root, output } => {
            guard(output, force)?;
            let ingested = ingest(root, config.seed)?;
            for w in &ingested.warnings {
                warn!("{w}");
            }
            finish(ingested.manifest, output, &config)?;
        }
        Command::Segment {
            manifest,
            out_dir,
            output,
        } => {
            let output = output
                .clone()
                .unwrap_or_else(|| out_dir.join(MANIFEST_FILE));
            guard(&output, force)?;
            let m = load(manifest)?;
            let processed = preprocess_all(&m, &config.preprocess(), out_dir, cli.global.jobs()?)?;
            finish(processed.manifest, &output, &config)?;
            return Ok(processed.failures);
        }
        Command::Balance { manifest, output } => {
            let output = in_place(manifest, output, force)?;
            let m = balance(&load(manifest)?, config.seed, &config.augment_policy())?;
            finish(m, &output, &config)?;
        }
        Command::Split { manifest, output } => {
            let output = in_place(manifest, output, force)?;
            let m = stratified_split(&load(manifest)?, config.test_fraction, config.seed)?;
            finish(m, &output, &config)?;
        }
        Command::Kfold { manifest, output } => {
            let output = in_place(manifest, output, force)?;
            let m = load(manifest)?;
            let plan = kfold_plan(&m, config.folds, config.seed)?;
            finish(apply_fold_plan(&m, &plan)?, &output, &config)?;
        }
        Command::Stats { manifest } => {
            print!("{}", stats_text(&load(manifest)?));
        }
        Command::RunAll { root, out_dir } => {
            prepare_out_dir(out_dir, force)?;
            let report = run_all(root, out_dir, &config, cli.global.jobs()?)?;
            for w in &report.warnings {
                warn!("{w}");
            }
            println!(
                "wrote {} records to {}",
                report.manifest.len(),
                out_dir.join(MANIFEST_FILE).display()
            );
            return Ok(report.failures);
        }
    }
    Ok(Vec::new())
}

fn load(path: &Path) -> anyhow::Result<DatasetManifest> {
    read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn guard(output: &Path, force: bool) -> anyhow::Result<()> {
    if output.exists() && !force {
        bail!(
            "{} already exists; pass --force to overwrite",
            output.display()
        );
    }
    Ok(())
}

fn in_place(input: &Path, output: &Option<PathBuf>, force: bool) -> anyhow::Result<PathBuf> {
    let output = output.clone().unwrap_or_else(|| input.to_path_buf());
    guard(&output, force)?;
    Ok(output)
}

/// Stamps and writes a manifest, with `run.lock` beside it.
fn finish(
    mut manifest: DatasetManifest,
    output: &Path,
    config: &PipelineConfig,
) -> anyhow::Result<()> {
    stamp(&mut manifest, config);
    let dir = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_manifest(&manifest, output)?;
    write_run_lock(&dir, config)?;
    Ok(())
}

/// Refuses a previous run's output unless forced, in which case the files a
/// run owns are removed so nothing stale survives.
fn prepare_out_dir(out_dir: &Path, force: bool) -> anyhow::Result<()> {
    let manifest = out_dir.join(MANIFEST_FILE);
    if !manifest.exists() {
        return Ok(());
    }
    if !force {
        bail!(
            "{} already exists; pass --force to overwrite",
            manifest.display()
        );
    }
    for file in [MANIFEST_FILE, RUN_LOCK_FILE] {
        let p = out_dir.join(file);
        if p.exists() {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    for class in ClassLabel::ALL {
        let p = out_dir.join(class.name());
        if p.is_dir() {
            fs::remove_dir_all(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}
