use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use carprice_core::dataset::{
    clean_listings, feature_names, parse_csv_path, split_dataset, subsample_indices, CleanDataset, CsvDialect,
    DatasetFile, DatasetSplit, FilterConfig,
};
use carprice_core::eda::eda_report;
use carprice_core::evaluation::{
    evaluate, feature_correlations, grid_search, mask_features, select_features, EvalReport, GridCandidate,
};
use carprice_core::forest::{fit_forest, Hyperparams};
use carprice_core::model::{BuildMetadata, FeatureSchema, ForestModel};
use carprice_core::seed;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::api::{router, AppState, LoadedModel};

#[derive(Debug, Parser)]
#[command(
    name = "carprice",
    version,
    about = "Used-car price model: cleaning, EDA, training, evaluation and serving"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw listings CSV into a dataset file
    Ingest(IngestArgs),
    /// Compute descriptive statistics of a cleaned dataset
    Eda(EdaArgs),
    /// Train a forest on the training split and write the model file
    Train(TrainArgs),
    /// Score a model on the train/test/validation splits
    Eval(EvalArgs),
    /// Serve the prediction API
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// TOML file overriding the cleaning tokens and bounds
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the filter report (default: `<output>.filter-report.json`)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EdaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Number of trees; with --grid, the largest tree count searched
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid-search tree counts in multiples of 50 up to --trees, scored on the validation split
    #[arg(long)]
    pub grid: bool,
    /// Also write an evaluation report
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Train and evaluate on a random subsample of this many rows
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Discard features whose |Pearson r| with price on the training split is below this
    #[arg(long)]
    pub min_abs_corr: Option<f64>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Worker threads (default: all cores); the model does not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Timestamp recorded in the model metadata (omitted by default)
    #[arg(long, env = "CARPRICE_TRAINED_AT")]
    pub trained_at: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CARPRICE_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "CARPRICE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "CARPRICE_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of static UI assets served at `/`
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Eda(a) => eda(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Serve(a) => serve(a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<FilterConfig> {
    let Some(path) = path else {
        return Ok(FilterConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let parsed = parse_csv_path(&a.input, CsvDialect::default())?;
    tracing::info!(
        rows = parsed.rows.len(),
        skipped = parsed.parse_errors,
        "parsed listings"
    );
    let mut cleaned = clean_listings(parsed.rows, &cfg)?;
    cleaned.report.parse_errors = parsed.parse_errors;

    let file = DatasetFile::new(&cleaned.dataset, cfg, cleaned.report.clone());
    file.save(&a.output)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".filter-report.json");
        PathBuf::from(p)
    });
    write_json(&report_path, &cleaned.report)?;

    let r = &cleaned.report;
    println!(
        "input rows: {}  surviving: {}  (csv rows skipped: {})",
        r.input_rows, r.surviving_rows, r.parse_errors
    );
    for c in &r.removed {
        println!("  rule {}: {:>8}  {}", c.rule, c.removed, c.description);
    }
    Ok(())
}

fn load_dataset(path: &Path) -> Result<(CleanDataset, FilterConfig)> {
    let file = DatasetFile::load(path).with_context(|| format!("cannot load dataset {}", path.display()))?;
    Ok((file.to_dataset()?, file.config))
}

fn eda(a: &EdaArgs) -> Result<()> {
    let (ds, _) = load_dataset(&a.input)?;
    let report = eda_report(&ds)?;
    write_json(&a.out, &report)?;
    let s = report.summary;
    println!(
        "rows: {}  mean price: {:.0}  mean km: {:.0}  median age: {}",
        report.rows, s.mean_price, s.mean_kilometer, s.median_age
    );
    Ok(())
}

/// Applies the optional subsample. Returns the dataset the split refers to.
fn working_set(ds: CleanDataset, subsample: Option<usize>, seed_value: u64) -> CleanDataset {
    match subsample {
        Some(k) if k < ds.len() => ds.subset(&subsample_indices(ds.len(), k, seed::derive(seed_value, u64::MAX))),
        _ => ds,
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TrainReport<'a> {
    #[serde(flatten)]
    eval: &'a EvalReport,
    discarded_features: &'a [String],
    training_seconds: f64,
}

fn train(a: &TrainArgs) -> Result<()> {
    if a.trees == 0 {
        bail!("--trees must be at least 1");
    }
    let (full, cfg) = load_dataset(&a.input)?;
    let dataset_rows = full.len();
    let ds = working_set(full, a.subsample, a.seed);
    let split = split_dataset(ds.len(), a.seed)?;
    let train = ds.subset(&split.train);
    let cv = ds.subset(&split.cv);

    let names = feature_names();
    let (train_x, cv_x, discarded) = match a.min_abs_corr {
        Some(t) => {
            let keep = select_features(&feature_correlations(&train), t);
            if keep.is_empty() {
                bail!("--min-abs-corr {t} discards every feature");
            }
            let discarded: Vec<String> = (0..names.len())
                .filter(|j| !keep.contains(j))
                .map(|j| names[j].clone())
                .collect();
            (
                mask_features(&train.features, &keep),
                mask_features(&cv.features, &keep),
                discarded,
            )
        }
        None => (train.features.clone(), cv.features.clone(), Vec::new()),
    };

    let params = Hyperparams {
        n_estimators: a.trees,
        max_features: a.max_features,
        min_samples_leaf: a.min_samples_leaf,
        max_depth: a.max_depth,
        bootstrap: true,
    };
    let pool = rayon_pool(a.workers)?;
    let started = std::time::Instant::now();
    let (forest, grid): (_, Option<Vec<GridCandidate>>) = pool.install(|| -> Result<_> {
        if a.grid {
            let grid: Vec<usize> = (1..=a.trees / 50).map(|k| k * 50).collect();
            if grid.is_empty() {
                bail!("--grid needs --trees >= 50");
            }
            let res = grid_search((&train_x, &train.target), (&cv_x, &cv.target), &grid, &params, a.seed)?;
            for c in &res.candidates {
                println!("  trees {:>4}: validation R² {:.4}", c.n_estimators, c.cv_r2);
            }
            Ok((res.model, Some(res.candidates)))
        } else {
            Ok((fit_forest(&train_x, &train.target, &params, a.seed)?, None))
        }
    })?;
    let training_seconds = started.elapsed().as_secs_f64();

    let model = ForestModel::new(
        forest,
        FeatureSchema::new(ds.vocab.clone(), &cfg),
        BuildMetadata {
            dataset_rows,
            train_rows: split.train.len(),
            split_seed: Some(a.seed),
            trained_at: a.trained_at.clone(),
            subsample: a.subsample.filter(|&k| k < dataset_rows),
            discarded_features: discarded.clone(),
        },
    )?;
    model.save(&a.out)?;
    println!(
        "trained {} trees on {} rows in {:.1}s -> {}",
        model.forest.trees().len(),
        split.train.len(),
        training_seconds,
        a.out.display()
    );

    if let Some(path) = &a.report {
        let masked = masked_dataset(&ds, &discarded);
        let report = pool.install(|| evaluate(&model.forest, &masked, &split, grid.as_deref()))?;
        print_scores(&report);
        write_json(
            path,
            &TrainReport {
                eval: &report,
                discarded_features: &discarded,
                training_seconds,
            },
        )?;
    }
    Ok(())
}

/// The dataset as the model sees it: discarded columns zeroed.
fn masked_dataset(ds: &CleanDataset, discarded: &[String]) -> CleanDataset {
    if discarded.is_empty() {
        return ds.clone();
    }
    let keep: Vec<usize> = feature_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| !discarded.contains(n))
        .map(|(j, _)| j)
        .collect();
    CleanDataset {
        features: mask_features(&ds.features, &keep),
        ..ds.clone()
    }
}

/// Runs work on a pool of the requested size, or on the global pool.
struct Pool(Option<rayon::ThreadPool>);

impl Pool {
    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.0 {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

fn rayon_pool(workers: Option<usize>) -> Result<Pool> {
    match workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => Ok(Pool(Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?))),
        None => Ok(Pool(None)),
    }
}

fn print_scores(r: &EvalReport) {
    println!(
        "R²  train {:.4}  test {:.4}  validation {:.4}   (linear baseline: train {:.4}, test {:.4})",
        r.train_r2, r.test_r2, r.cv_r2, r.baseline.train_r2, r.baseline.test_r2
    );
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = ForestModel::load(&a.model).with_context(|| format!("cannot load model {}", a.model.display()))?;
    let (full, _) = load_dataset(&a.input)?;
    if let Some(trained) = model.metadata.split_seed.filter(|&s| s != a.seed) {
        tracing::warn!(
            trained,
            requested = a.seed,
            "split seed differs from the one used for training"
        );
    }
    let ds = masked_dataset(
        &working_set(full, model.metadata.subsample, a.seed),
        &model.metadata.discarded_features,
    );
    let split: DatasetSplit = split_dataset(ds.len(), a.seed)?;
    let report = evaluate(&model.forest, &ds, &split, None)?;
    print_scores(&report);
    write_json(&a.out, &report)
}

fn serve(a: ServeArgs) -> Result<()> {
    let model = ForestModel::load(&a.model).with_context(|| format!("cannot load model {}", a.model.display()))?;
    let state = AppState::with_model(LoadedModel::new(model)?);
    let mut app = router(state.clone());
    if let Some(dir) = &a.static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("invalid host/port")?;

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        tracing::info!(%addr, "serving");
        println!("listening on http://{addr}");
        std::io::stdout().flush().ok();
        tokio::spawn(reload_on_hangup(state, a.model.clone()));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                tokio::signal::ctrl_c().await.ok();
            })
            .await
            .context("server error")
    })
}

#[cfg(unix)]
async fn reload_on_hangup(state: AppState, path: PathBuf) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else {
        return;
    };
    while hup.recv().await.is_some() {
        match ForestModel::load(&path)
            .map_err(anyhow::Error::from)
            .and_then(|m| Ok(LoadedModel::new(m)?))
        {
            Ok(m) => {
                tracing::info!(version = %m.version, "model reloaded");
                state.replace(m);
            }
            Err(e) => tracing::error!("reload failed, keeping current model: {e:#}"),
        }
    }
}

#[cfg(not(unix))]
async fn reload_on_hangup(_state: AppState, _path: PathBuf) {}
