//! The `ecvqa` command line: `extract`, `train`, `score`, `eval`, `analyze`.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 runtime
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{PipelineConfig, LOG_ENV};
use crate::encoders::{EncoderHandles, EncoderRegistry};
use crate::error::{Error, Result};
use crate::eval::{
    analyze_video, evaluate, load_split_samples, write_attribute_series_csv, write_attributes_csv, write_report_json,
    write_scores_csv, AttributeReport,
};
use crate::features::{extract_features, is_fresh, read_cache, write_cache, FeatureBundle, ProvenanceHeader};
use crate::ingest::{decode_video, load_manifest, DatasetManifest, Split};
use crate::model::{export_hvs_weights, forward, load_params, save_params, QualityModelParams};
use crate::sampling::CLIP_COUNT;
use crate::training::{load_training_data, Checkpoint, EpochRecord, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const EXTRACT_ERROR_LOG: &str = "extract-errors.log";
pub const ANALYZE_ERROR_LOG: &str = "analyze-errors.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BEST_PARAMS_FILE: &str = "best_params.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const LOSS_CSV: &str = "loss.csv";
pub const HVS_CSV: &str = "hvs_weights.csv";
pub const HVS_JSON: &str = "hvs_weights.json";

#[derive(Debug, Parser)]
#[command(name = "ecvqa", version, about = "Quality assessment for exposure-corrected video")]
pub struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Worker thread cap; all cores if unset.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log filter (`error`..`trace`); falls back to `ECVQA_LOG`, then `info`.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract and cache features for every video in the manifest.
    Extract(ExtractArgs),
    /// Train the model on the cached train split.
    Train(TrainArgs),
    /// Score one video or every video of a manifest.
    Score(ScoreArgs),
    /// Metrics of a trained model on one split.
    Eval(EvalArgs),
    /// Per-video brightness, contrast and colorfulness.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Same as `--set data.manifest=PATH`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Same as `--set data.cache_dir=PATH`.
    #[arg(long, value_name = "PATH")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Recompute entries that are already fresh.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Run directory; `<runs_dir>/<timestamp>-seed<seed>` if unset.
    #[arg(long, value_name = "PATH", conflicts_with = "resume")]
    pub run_dir: Option<PathBuf>,
    /// Continue from a checkpoint, writing into its directory.
    #[arg(long, value_name = "CHECKPOINT")]
    pub resume: Option<PathBuf>,
    /// Same as `--set train.epochs=N`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Same as `--set train.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the checkpoint every N epochs (the last epoch is always written).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub checkpoint_every: u64,
    /// Stop after this many epochs of this invocation; continue later with `--resume`.
    #[arg(long, value_name = "N")]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Training checkpoint or parameter file.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// A single video file or frame directory.
    #[arg(long, value_name = "PATH", conflicts_with = "manifest")]
    pub video: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV destination for manifest scoring; stdout if unset.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Training checkpoint or parameter file.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// `train`, `val` or `test`.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Report directory; the checkpoint's directory if unset.
    #[arg(long, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Same as `--set data.manifest=PATH`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Output directory; `<runs_dir>/analysis` if unset.
    #[arg(long, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_USAGE,
            e if e.is_data_error() => EXIT_DATA,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command with the
/// built-in mock encoders. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_registry(args, &EncoderRegistry::with_mocks())
}

/// As [`run`], with backbones resolved through `registry`.
pub fn run_with_registry<I, T>(args: I, registry: &EncoderRegistry) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.log_level.as_deref());
    match execute(cli, registry) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn init_logging(level: Option<&str>) {
    let filter = level
        .map(str::to_string)
        .or_else(|| std::env::var(LOG_ENV).ok())
        .unwrap_or_else(|| "info".into());
    let _ = env_logger::Builder::new()
        .parse_filters(&filter)
        .format_target(false)
        .try_init();
}

pub fn execute(cli: Cli, registry: &EncoderRegistry) -> CliResult<()> {
    let mut sets = cli.sets.clone();
    // Command flags are the last layer, after the generic `--set` list.
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            sets.push(format!("{key}={v}"));
        }
    };
    let path_value = |p: &Option<PathBuf>| p.as_ref().map(|p| toml_string(&p.to_string_lossy()));
    let data = match &cli.command {
        Command::Extract(a) => Some(&a.data),
        Command::Train(a) => Some(&a.data),
        Command::Score(a) => Some(&a.data),
        Command::Eval(a) => Some(&a.data),
        Command::Analyze(_) => None,
    };
    if let Some(d) = data {
        flag("data.manifest", path_value(&d.manifest));
        flag("data.cache_dir", path_value(&d.cache_dir));
    }
    match &cli.command {
        Command::Train(a) => {
            flag("train.epochs", a.epochs.map(|v| v.to_string()));
            flag("train.seed", a.seed.map(|v| v.to_string()));
        }
        Command::Analyze(a) => flag("data.manifest", path_value(&a.manifest)),
        _ => {}
    }
    let cfg = PipelineConfig::load(cli.config.as_deref(), std::env::vars(), &sets)?;
    log::debug!("effective config:\n{}", cfg.to_toml()?);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError {
        code: EXIT_RUNTIME,
        message: format!("thread pool: {e}"),
    })?;
    pool.install(|| match &cli.command {
        Command::Extract(a) => cmd_extract(&cfg, registry, a.force),
        Command::Train(a) => cmd_train(&cfg, registry, a),
        Command::Score(a) => cmd_score(&cfg, registry, a),
        Command::Eval(a) => cmd_eval(&cfg, registry, a),
        Command::Analyze(a) => cmd_analyze(&cfg, a),
    })
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn manifest_of(cfg: &PipelineConfig) -> CliResult<DatasetManifest> {
    let path = cfg
        .data
        .manifest
        .as_deref()
        .ok_or_else(|| CliError::usage("no manifest: pass --manifest or set data.manifest"))?;
    let m = load_manifest(path, cfg.data.normalization, cfg.data.video_root.as_deref())?;
    for issue in m.validate().issues {
        log::warn!("manifest: {issue}");
    }
    Ok(m)
}

fn encoders_of(cfg: &PipelineConfig, registry: &EncoderRegistry) -> Result<(EncoderHandles, ProvenanceHeader)> {
    let handles = registry.build(&cfg.encoders, &cfg.prompts.brightness, &cfg.prompts.noise)?;
    let header = ProvenanceHeader::new(&handles, &cfg.prompts, &cfg.features);
    Ok((handles, header))
}

fn extract_one(path: &Path, video_id: &str, cfg: &PipelineConfig, handles: &EncoderHandles) -> Result<FeatureBundle> {
    let video = decode_video(path)?;
    let mut bundle = extract_features(&video, handles, &cfg.prompts, &cfg.features)?;
    bundle.video_id = video_id.to_string();
    Ok(bundle)
}

/// Writes `video_id<TAB>path<TAB>error` lines, or removes an old log when
/// there is nothing to report.
fn write_error_log(path: &Path, failures: &[(String, PathBuf, String)]) -> Result<()> {
    if failures.is_empty() {
        if path.exists() {
            fs::remove_file(path)?;
        }
        return Ok(());
    }
    let mut f = fs::File::create(path)?;
    for (id, video, err) in failures {
        writeln!(f, "{id}\t{}\t{}", video.display(), err.replace('\n', " "))?;
    }
    Ok(())
}

pub fn cmd_extract(cfg: &PipelineConfig, registry: &EncoderRegistry, force: bool) -> CliResult<()> {
    let manifest = manifest_of(cfg)?;
    let (handles, header) = encoders_of(cfg, registry)?;
    let cache = &cfg.data.cache_dir;
    fs::create_dir_all(cache).map_err(Error::from)?;
    let outcomes: Vec<Result<bool>> = manifest
        .records
        .par_iter()
        .map(|rec| {
            if !force && is_fresh(&rec.video_id, cache, &header) {
                return Ok(false);
            }
            let bundle = extract_one(&manifest.resolve(rec), &rec.video_id, cfg, &handles)?;
            write_cache(&bundle, cache)?;
            Ok(true)
        })
        .collect();
    let mut failures = Vec::new();
    let (mut computed, mut skipped) = (0, 0);
    for (rec, outcome) in manifest.records.iter().zip(outcomes) {
        match outcome {
            Ok(true) => computed += 1,
            Ok(false) => skipped += 1,
            Err(e) => {
                log::error!("{}: {e}", rec.video_id);
                failures.push((rec.video_id.clone(), manifest.resolve(rec), e.to_string()));
            }
        }
    }
    let log_path = cache.join(EXTRACT_ERROR_LOG);
    write_error_log(&log_path, &failures)?;
    log::info!(
        "extract: {computed} computed, {skipped} fresh, {} failed, cache {}",
        failures.len(),
        cache.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{} of {} videos failed; see {}",
            failures.len(),
            manifest.records.len(),
            log_path.display()
        )))
    }
}

fn default_run_dir(cfg: &PipelineConfig) -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    cfg.data.runs_dir.join(format!("{stamp}-seed{}", cfg.train.seed))
}

fn write_loss_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record([
        "epoch",
        "learning_rate",
        "train_loss",
        "train_mae",
        "train_rank",
        "val_srcc",
        "val_plcc",
        "val_rmse",
    ])
    .map_err(|e| Error::Io(e.into()))?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.learning_rate.to_string(),
            r.train_loss.to_string(),
            r.train_mae.to_string(),
            r.train_rank.to_string(),
            opt(r.val.srcc),
            opt(r.val.plcc_raw),
            r.val.rmse.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_hvs_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut header = vec!["epoch".to_string()];
    header.extend((1..=CLIP_COUNT).map(|i| format!("w_{i}")));
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for r in history {
        let mut row = vec![r.epoch.to_string()];
        row.extend(r.hvs_weights.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn header_mismatch(trained: &ProvenanceHeader, current: &ProvenanceHeader) -> CliError {
    CliError::usage(format!(
        "model was trained on features that differ in {:?}; configure the same encoders, prompts and features",
        trained.differences(current)
    ))
}

pub fn cmd_train(cfg: &PipelineConfig, registry: &EncoderRegistry, args: &TrainArgs) -> CliResult<()> {
    let manifest = manifest_of(cfg)?;
    let (_, header) = encoders_of(cfg, registry)?;
    let (train, val) = load_training_data(&manifest, &cfg.data.cache_dir, &header)?;
    log::info!("train: {} training and {} validation videos", train.len(), val.len());

    let (mut trainer, run_dir) = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if let Some(h) = &ck.feature_header {
                if h != &header {
                    return Err(header_mismatch(h, &header));
                }
            }
            if ck.config != cfg.train {
                log::warn!("resuming with the checkpoint's [train] settings; the configured ones are ignored");
            }
            log::info!("resuming after epoch {}", ck.epochs_done());
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (Trainer::resume(ck)?, dir)
        }
        None => {
            let dir = args.run_dir.clone().unwrap_or_else(|| default_run_dir(cfg));
            if dir.join(CHECKPOINT_FILE).exists() {
                return Err(CliError::usage(format!(
                    "{} already holds a run; use --resume {}",
                    dir.display(),
                    dir.join(CHECKPOINT_FILE).display()
                )));
            }
            let params = QualityModelParams::init(cfg.model.clone(), header.si_dim(), header.ti_dim(), cfg.train.seed)?;
            let trainer = Trainer::new(params, cfg.train.clone(), &train)?.with_feature_header(header);
            (trainer, dir)
        }
    };
    fs::create_dir_all(&run_dir).map_err(Error::from)?;
    let mut echo = cfg.clone();
    echo.train = trainer.state().config.clone();
    echo.model = trainer.state().params.config.clone();
    fs::write(run_dir.join(CONFIG_ECHO_FILE), echo.to_toml()?).map_err(Error::from)?;
    log::info!("run directory {}", run_dir.display());

    let every = args.checkpoint_every as usize;
    let total = trainer.state().config.epochs;
    let mut best_epoch = trainer.state().best.as_ref().map(|b| b.epoch);
    let mut ran = 0;
    while !trainer.is_finished() && args.stop_after.is_none_or(|n| ran < n) {
        let rec = trainer.run_epoch(&train, &val)?;
        ran += 1;
        log::info!(
            "epoch {:>4}  lr {:.3e}  loss {:.4}  val srcc {}",
            rec.epoch,
            rec.learning_rate,
            rec.train_loss,
            rec.val.srcc.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        let state = trainer.state();
        if (rec.epoch + 1) % every == 0 || rec.epoch + 1 == total {
            state.save(&run_dir.join(CHECKPOINT_FILE))?;
        }
        let best = state.best.as_ref().map(|b| b.epoch);
        if best != best_epoch {
            save_params(&run_dir.join(BEST_PARAMS_FILE), state.best_params())?;
            best_epoch = best;
        }
        write_loss_csv(&run_dir.join(LOSS_CSV), &state.history)?;
        write_hvs_csv(&run_dir.join(HVS_CSV), &state.history)?;
    }
    let state = trainer.state();
    state.save(&run_dir.join(CHECKPOINT_FILE))?;
    save_params(&run_dir.join(BEST_PARAMS_FILE), state.best_params())?;
    export_hvs_weights(&run_dir.join(HVS_JSON), &state.best_params().hvs_weights)?;
    write_loss_csv(&run_dir.join(LOSS_CSV), &state.history)?;
    write_hvs_csv(&run_dir.join(HVS_CSV), &state.history)?;
    if let Some(b) = &state.best {
        log::info!(
            "best epoch {} (score {:.4}); val srcc {:?} rmse {:.4}",
            b.epoch,
            b.score,
            b.val.srcc,
            b.val.rmse
        );
    }
    println!("{}", run_dir.display());
    Ok(())
}

/// Loads either a training checkpoint (its selected model) or a bare
/// parameter file.
pub fn load_model(path: &Path) -> Result<(QualityModelParams, Option<ProvenanceHeader>)> {
    if !path.is_file() {
        return Err(Error::checkpoint(path, "not found"));
    }
    let bytes = fs::read(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| Error::checkpoint(path, e.to_string()))?;
    if value.get("history").is_some() {
        let ck = Checkpoint::load(path)?;
        let params = ck.best_params().clone();
        Ok((params, ck.feature_header))
    } else {
        Ok((load_params(path)?, None))
    }
}

fn model_for(cfg: &PipelineConfig, registry: &EncoderRegistry, path: &Path) -> CliResult<(QualityModelParams, EncoderHandles, ProvenanceHeader)> {
    let (params, trained) = load_model(path)?;
    let (handles, header) = encoders_of(cfg, registry)?;
    if let Some(h) = &trained {
        if h != &header {
            return Err(header_mismatch(h, &header));
        }
    }
    if params.si_dim != header.si_dim() || params.ti_dim != header.ti_dim() {
        return Err(CliError::usage(format!(
            "model expects |si| = {}, |ti| = {} but the configured encoders give {} and {}",
            params.si_dim,
            params.ti_dim,
            header.si_dim(),
            header.ti_dim()
        )));
    }
    Ok((params, handles, header))
}

fn score_line(id: &str, q: f64, clips: &[f64]) -> Vec<String> {
    let mut row = vec![id.to_string(), q.to_string()];
    row.extend(clips.iter().map(|v| v.to_string()));
    row
}

pub fn cmd_score(cfg: &PipelineConfig, registry: &EncoderRegistry, args: &ScoreArgs) -> CliResult<()> {
    let (params, handles, header) = model_for(cfg, registry, &args.checkpoint)?;
    if let Some(video) = &args.video {
        let id = video
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        let bundle = extract_one(video, &id, cfg, &handles)?;
        let (q, clips) = forward(&bundle, &params)?;
        println!("{}", score_line(&id, q, &clips).join(","));
        return Ok(());
    }
    let manifest = manifest_of(cfg)?;
    let cache = &cfg.data.cache_dir;
    let rows = manifest
        .records
        .par_iter()
        .map(|rec| {
            let bundle = if is_fresh(&rec.video_id, cache, &header) {
                read_cache(&rec.video_id, cache, &header)?
            } else {
                extract_one(&manifest.resolve(rec), &rec.video_id, cfg, &handles)?
            };
            let (q, clips) = forward(&bundle, &params)?;
            Ok(score_line(&rec.video_id, q, &clips))
        })
        .collect::<Result<Vec<_>>>()?;
    let sink: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(fs::File::create(p).map_err(Error::from)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header_row = vec!["video_id".to_string(), "q".to_string()];
    header_row.extend((1..=CLIP_COUNT).map(|i| format!("q_{i}")));
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(&header_row).map_err(csv_err)?;
    for r in &rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn cmd_eval(cfg: &PipelineConfig, registry: &EncoderRegistry, args: &EvalArgs) -> CliResult<()> {
    let (params, _, header) = model_for(cfg, registry, &args.checkpoint)?;
    let manifest = manifest_of(cfg)?;
    let samples = load_split_samples(&manifest, args.split, &cfg.data.cache_dir, &header)?;
    if samples.is_empty() {
        return Err(CliError::data(format!("split `{}` has no videos", args.split.as_str())));
    }
    let (report, rows) = evaluate(&params, &samples)?;
    let out = args
        .out_dir
        .clone()
        .or_else(|| args.checkpoint.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    fs::create_dir_all(&out).map_err(Error::from)?;
    let split = args.split.as_str();
    write_report_json(&out.join(format!("report_{split}.json")), &report)?;
    write_scores_csv(&out.join(format!("scores_{split}.csv")), &rows)?;
    println!("{}", serde_json::to_string(&report).map_err(|e| Error::Io(e.into()))?);
    Ok(())
}

pub fn cmd_analyze(cfg: &PipelineConfig, args: &AnalyzeArgs) -> CliResult<()> {
    let manifest = manifest_of(cfg)?;
    let out = args.out_dir.clone().unwrap_or_else(|| cfg.data.runs_dir.join("analysis"));
    fs::create_dir_all(&out).map_err(Error::from)?;
    let outcomes: Vec<Result<AttributeReport>> = manifest
        .records
        .par_iter()
        .map(|rec| {
            let video = decode_video(&manifest.resolve(rec))?;
            let mut report = analyze_video(&video)?;
            report.video_id = rec.video_id.clone();
            Ok(report)
        })
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (rec, o) in manifest.records.iter().zip(outcomes) {
        match o {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::error!("{}: {e}", rec.video_id);
                failures.push((rec.video_id.clone(), manifest.resolve(rec), e.to_string()));
            }
        }
    }
    write_attributes_csv(&out.join("attributes.csv"), &reports)?;
    write_attribute_series_csv(&out.join("attribute_series.csv"), &reports)?;
    let log_path = out.join(ANALYZE_ERROR_LOG);
    write_error_log(&log_path, &failures)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{} of {} videos failed; see {}",
            failures.len(),
            manifest.records.len(),
            log_path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(Error::decode("v.y4m", "bad")).code, EXIT_DATA);
        assert_eq!(CliError::from(Error::Training("nan".into())).code, EXIT_RUNTIME);
    }

    #[test]
    fn unknown_split_is_usage_error() {
        assert_eq!(run(["ecvqa", "eval", "--checkpoint", "c.json", "--split", "dev"]), EXIT_USAGE);
        assert_eq!(run(["ecvqa", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let code = run(["ecvqa", "score", "--checkpoint", "/nonexistent/ck.json", "--video", "v.y4m"]);
        assert_ne!(code, EXIT_OK);
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from(["ecvqa", "--set", "train.beta=0.5", "train", "--epochs", "3", "--manifest", "m.csv"])
            .unwrap();
        assert!(matches!(cli.command, Command::Train(TrainArgs { epochs: Some(3), .. })));
        assert_eq!(cli.sets, vec!["train.beta=0.5".to_string()]);
    }
}
