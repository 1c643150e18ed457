use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ctph_core::imaging::{load_grayscale, Rect};
use ctph_core::pipeline::{
    ablate, evaluate, ingest, mask_experiment, run_features, run_log_header, set_jobs, train,
    DatasetIndex, FeatureRun, PipelineConfig, Predictor,
};
use ctph_core::{Error, Result};

/// Topological features and SVM classification for two-class image folders.
#[derive(Debug, Parser)]
#[command(name = "ctph", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat `key = value` config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = ".ctph-cache")]
    cache_dir: PathBuf,
    /// Grid step 0.5, PGA k 2400 and PCA d 4800, applied after the config file.
    #[arg(long, global = true)]
    paper_fidelity: bool,
    /// Extra `KEY=VALUE` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index `ROOT/<positive_dir>` and `ROOT/<negative_dir>`.
    Ingest {
        root: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute (or load cached) feature vectors.
    Features {
        root: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold evaluation.
    Evaluate(ReportArgs),
    /// k-fold report plus a final model trained on every image.
    Train {
        #[command(flatten)]
        report: ReportArgs,
        /// Directory for the trained model.
        #[arg(long)]
        model: PathBuf,
    },
    /// One single-feature model per diagram type.
    Ablate(ReportArgs),
    /// Predict an image before and after filling a rectangle.
    Mask {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Half-open `ROW0,COL0,ROW1,COL1`.
        #[arg(long, value_parser = parse_rect)]
        rect: Rect,
        #[arg(long, default_value_t = 0)]
        fill: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    root: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn parse_rect(s: &str) -> std::result::Result<Rect, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| format!("bad coordinate {p:?}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [r0, c0, r1, c1] => Ok(Rect::new(r0, c0, r1, c1)),
        _ => Err("expected ROW0,COL0,ROW1,COL1".into()),
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut config = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if g.paper_fidelity {
        config = config.paper_fidelity();
    }
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            std::fs::write(path, text).map_err(|e| io_error(path, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Appends the run header to `<cache-dir>/run.log` and echoes it at debug level.
fn record_run(cache_dir: &Path, command: &str, config: &PipelineConfig) -> Result<()> {
    let header = run_log_header(command, config);
    log::debug!("{header}");
    std::fs::create_dir_all(cache_dir).map_err(|e| io_error(cache_dir, e))?;
    let path = cache_dir.join("run.log");
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| io_error(&path, e))?;
    writeln!(f, "{header}").map_err(|e| io_error(&path, e))
}

fn indexed(root: &Path, config: &PipelineConfig) -> Result<DatasetIndex> {
    let index = ingest(root, &config.positive_dir, &config.negative_dir)?;
    let (p, n) = index.counts();
    log::info!(
        "indexed {p} positive and {n} negative images, {} skipped",
        index.skipped.len()
    );
    Ok(index)
}

fn features(root: &Path, config: &PipelineConfig, cache_dir: &Path) -> Result<FeatureRun> {
    let index = indexed(root, config)?;
    let start = Instant::now();
    let run = run_features(&index, config, cache_dir)?;
    log::info!(
        "features for {} images in {:.2?}: diagram cache {} hits / {} misses, riemannian stage {}",
        run.features.rows.len(),
        start.elapsed(),
        run.diagram_hits,
        run.diagram_misses,
        if run.riemannian_cached {
            "cached"
        } else {
            "computed"
        }
    );
    for (path, why) in &run.features.skipped {
        log::warn!("skipped {}: {why}", path.display());
    }
    Ok(run)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        set_jobs(jobs);
    }
    if let Command::Mask {
        model,
        image,
        rect,
        fill,
        out,
    } = &cli.command
    {
        let predictor = Predictor::load(model)?;
        record_run(&g.cache_dir, "mask", &predictor.config)?;
        let img = load_grayscale(image)?;
        let outcome = mask_experiment(&predictor, &img, *rect, *fill)?;
        return emit(&outcome.to_text(), out.as_deref());
    }

    let config = resolve_config(g)?;
    let name = match &cli.command {
        Command::Ingest { .. } => "ingest",
        Command::Features { .. } => "features",
        Command::Evaluate(_) => "evaluate",
        Command::Train { .. } => "train",
        Command::Ablate(_) => "ablate",
        Command::Mask { .. } => unreachable!("handled above"),
    };
    record_run(&g.cache_dir, name, &config)?;

    match &cli.command {
        Command::Ingest { root, out } => emit(&indexed(root, &config)?.to_text(), out.as_deref()),
        Command::Features { root, out } => {
            let run = features(root, &config, &g.cache_dir)?;
            emit(&run.features.to_text(), out.as_deref())
        }
        Command::Evaluate(a) => {
            let run = features(&a.root, &config, &g.cache_dir)?;
            let report = evaluate(&run.features, &config)?;
            log::info!("accuracy {:.3} ± {:.3}", report.mean[0], report.std[0]);
            emit(
                &if a.json {
                    report.to_json()
                } else {
                    report.to_text()
                },
                a.out.as_deref(),
            )
        }
        Command::Train { report: a, model } => {
            let run = features(&a.root, &config, &g.cache_dir)?;
            let (report, classifier) = train(&run.features, &config)?;
            Predictor {
                config: config.clone(),
                pga: run.models,
                classifier,
            }
            .save(model)?;
            log::info!("model written to {}", model.display());
            emit(
                &if a.json {
                    report.to_json()
                } else {
                    report.to_text()
                },
                a.out.as_deref(),
            )
        }
        Command::Ablate(a) => {
            let run = features(&a.root, &config, &g.cache_dir)?;
            let table = ablate(&run.features, &config)?;
            emit(
                &if a.json {
                    table.to_json()
                } else {
                    table.to_text()
                },
                a.out.as_deref(),
            )
        }
        Command::Mask { .. } => unreachable!("handled above"),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Argument(_) => 2,
        Error::Data(_) | Error::Format(_) | Error::Io { .. } => 3,
        Error::NotConverged { .. } => 4,
        Error::Consistency(_) | Error::Antipodal => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
