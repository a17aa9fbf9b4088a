//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::data_io::synth::{synth_train_test, AnomalyKind, SynthSpec};
use crate::data_io::{load_series, read_labels, read_series, write_csv, write_labels, DataFormat, DatasetManifest};
use crate::error::{Result, VistaError};
use crate::eval::evaluate;
use crate::features::load_extractor;
use crate::memory::{load_bank, save_bank};
use crate::scoring::{fit, score_series, SeriesScores};
use crate::series::{segment_windows, TimeSeries};
use crate::stl::stl_decompose;
use crate::tcm::{build_tcm, downsample_tcm};
use crate::tuning::{grid_search, GridSpace};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VISTA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vista", version, about = "Training-free multivariate time-series anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a memory bank from normal training data.
    Fit(FitArgs),
    /// Score a test series against a memory bank.
    Score(ScoreArgs),
    /// Optimal-F1 and ROC-AUC of a score file against labels.
    Eval(EvalArgs),
    /// Write the per-window trend/seasonal/residual decomposition as CSV.
    Decompose(DecomposeArgs),
    /// Render temporal correlation matrices as RGB PNG images.
    Render(RenderArgs),
    /// Generate a synthetic train/test pair with labeled anomalies.
    Synth(SynthArgs),
    /// Search window size, coreset ratio and knn on a labeled validation split.
    Gridsearch(GridArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Key-value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub window_size: Option<usize>,
    #[arg(long)]
    pub seasonal_ratio: Option<f64>,
    #[arg(long)]
    pub coreset_ratio: Option<f64>,
    #[arg(long)]
    pub knn: Option<usize>,
    /// Comma-separated ResNet stages, e.g. `3,4`.
    #[arg(long)]
    pub layers: Option<String>,
    /// Comma-separated TCM channels from original, trend, seasonal, residual.
    #[arg(long)]
    pub components: Option<String>,
    /// `drop` or `pad_repeat`.
    #[arg(long)]
    pub tail_policy: Option<String>,
    /// `seeded:N` or a weight file path.
    #[arg(long)]
    pub extractor: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Any config key as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        let flags: [(&str, Option<String>); 9] = [
            ("window_size", self.window_size.map(|v| v.to_string())),
            ("seasonal_ratio", self.seasonal_ratio.map(|v| v.to_string())),
            ("coreset_ratio", self.coreset_ratio.map(|v| v.to_string())),
            ("knn", self.knn.map(|v| v.to_string())),
            ("layers", self.layers.clone()),
            ("components", self.components.clone()),
            ("tail_policy", self.tail_policy.clone()),
            ("extractor", self.extractor.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| VistaError::Config(format!("--set expects key=value, got `{o}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Training data (CSV or NPY, one column per variable).
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub train: Option<PathBuf>,
    /// Dataset manifest; its train split is used.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output bank file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub test: Option<PathBuf>,
    /// Dataset manifest; its test split is used.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub bank: PathBuf,
    /// Output CSV (`t,score,padded`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score CSV written by `score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub labels: Option<PathBuf>,
    /// Dataset manifest; its test labels are used.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write the report as key-value text to this file as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (`t,variable,trend,seasonal,residual`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for `w<start>_v<variable>.png` files.
    #[arg(long)]
    pub out: PathBuf,
    /// Render at window resolution instead of 32x32.
    #[arg(long)]
    pub full: bool,
    /// Render at most this many windows.
    #[arg(long)]
    pub max_windows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8192)]
    pub length: usize,
    #[arg(long, default_value_t = 3)]
    pub variables: usize,
    /// Comma-separated anomaly kinds: spike, level_shift, period_stretch.
    #[arg(long, default_value = "spike,level_shift,period_stretch")]
    pub kinds: String,
    #[arg(long, default_value_t = 0.05)]
    pub contamination: f64,
    /// Window size that anomaly durations are scaled to.
    #[arg(long, default_value_t = 64)]
    pub window_hint: usize,
    /// Output directory; receives train.csv, test.csv, test_labels.csv and synth.manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, requires = "val", conflicts_with = "manifest")]
    pub train: Option<PathBuf>,
    /// Labeled validation data.
    #[arg(long, requires = "val_labels")]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub val_labels: Option<PathBuf>,
    /// Dataset manifest; train split for fitting, test split for validation.
    #[arg(long, required_unless_present = "train")]
    pub manifest: Option<PathBuf>,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Comma-separated coreset ratios.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Comma-separated neighbor counts.
    #[arg(long, value_delimiter = ',')]
    pub knn_grid: Option<Vec<usize>>,
    /// Full results CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sizes the global thread pool from `VISTA_THREADS` when it is set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| VistaError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| VistaError::Config(format!("cannot size thread pool: {e}")))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| VistaError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| VistaError::io("<stdout>", e))
        }
    }
}

fn manifest_series(path: &Path) -> Result<(TimeSeries, TimeSeries)> {
    load_series(&DatasetManifest::from_file(path)?)
}

fn input_series(direct: &Option<PathBuf>, manifest: &Option<PathBuf>, test_split: bool) -> Result<TimeSeries> {
    match (direct, manifest) {
        (Some(p), _) => read_series(p),
        (None, Some(m)) => {
            let (train, test) = manifest_series(m)?;
            Ok(if test_split { test } else { train })
        }
        (None, None) => Err(VistaError::Config("no input given".into())),
    }
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let train = input_series(&a.train, &a.manifest, false)?;
    let extractor = load_extractor(&cfg.extractor)?;
    let bank = fit(&train, &cfg, &extractor)?;
    save_bank(&bank, &a.out)?;
    eprintln!(
        "bank: {} vectors of dimension {} -> {}",
        bank.len(),
        bank.dim(),
        a.out.display()
    );
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let test = input_series(&a.test, &a.manifest, true)?;
    let extractor = load_extractor(&cfg.extractor)?;
    let bank = load_bank(&a.bank)?;
    let scores = score_series(&test, &bank, &extractor, &cfg)?;
    write_output(a.out.as_deref(), &scores.to_csv())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.scores).map_err(|e| VistaError::io(&a.scores, e))?;
    let scores = SeriesScores::from_csv(&text)?;
    let labels = match (&a.labels, &a.manifest) {
        (Some(p), _) => read_labels(p, DataFormat::from_path(p))?,
        (None, Some(m)) => {
            let (_, test) = manifest_series(m)?;
            test.labels().map(<[u8]>::to_vec).unwrap_or_default()
        }
        (None, None) => return Err(VistaError::Config("no labels given".into())),
    };
    let (s, l) = scores.with_labels(&labels)?;
    let report = evaluate(&s, &l, None)?;
    if let Some(p) = &a.out {
        std::fs::write(p, report.to_kv()).map_err(|e| VistaError::io(p, e))?;
    }
    write_output(None, &report.to_text())
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let mut series = read_series(&a.input)?;
    if cfg.zscore {
        series = series.zscored();
    }
    let params = cfg.stl_params()?;
    let mut out = String::from("t,variable,trend,seasonal,residual\n");
    for w in segment_windows(&series, cfg.window_size, cfg.tail_policy)? {
        let d = stl_decompose(&w, &params)?;
        for c in 0..w.dims {
            let (tr, se, re) = (d.trend_column(c), d.seasonal_column(c), d.residual_column(c));
            for i in 0..w.observed() {
                out.push_str(&format!("{},{c},{},{},{}\n", w.start_index + i, tr[i], se[i], re[i]));
            }
        }
    }
    write_output(a.out.as_deref(), &out)
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let mut series = read_series(&a.input)?;
    if cfg.zscore {
        series = series.zscored();
    }
    let params = cfg.stl_params()?;
    std::fs::create_dir_all(&a.out).map_err(|e| VistaError::io(&a.out, e))?;
    let windows = segment_windows(&series, cfg.window_size, cfg.tail_policy)?;
    let limit = a.max_windows.unwrap_or(windows.len());
    let mut count = 0;
    for w in windows.iter().take(limit) {
        let d = stl_decompose(w, &params)?;
        for c in 0..w.dims {
            let tcm = build_tcm(&d, c, &cfg.components)?;
            let path = a.out.join(format!("w{:08}_v{:03}.png", w.start_index, c));
            if a.full {
                tcm.render_png(&path)?;
            } else {
                downsample_tcm(&tcm)?.render_png(&path)?;
            }
            count += 1;
        }
    }
    eprintln!("wrote {count} images to {}", a.out.display());
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let kinds = a
        .kinds
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<AnomalyKind>>>()?;
    let spec = SynthSpec {
        window_hint: a.window_hint,
        ..SynthSpec::new(a.seed, a.length, a.variables, &kinds, a.contamination)
    };
    let (train, test) = synth_train_test(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| VistaError::io(&a.out, e))?;
    write_csv(&a.out.join("train.csv"), &train)?;
    write_csv(&a.out.join("test.csv"), &test)?;
    write_labels(&a.out.join("test_labels.csv"), test.labels().unwrap_or_default())?;
    let manifest = format!(
        "name = synth-{}\nformat = csv\ntrain_path = train.csv\ntest_path = test.csv\n\
         label_path = test_labels.csv\nexpected_dims = {}\n",
        a.seed, a.variables
    );
    let mpath = a.out.join("synth.manifest");
    std::fs::write(&mpath, manifest).map_err(|e| VistaError::io(&mpath, e))
}

fn cmd_grid(a: &GridArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let (train, val) = match (&a.train, &a.manifest) {
        (Some(t), _) => {
            let val_path = a.val.as_ref().expect("clap requires --val");
            let labels_path = a.val_labels.as_ref().expect("clap requires --val-labels");
            let labels = read_labels(labels_path, DataFormat::from_path(labels_path))?;
            (read_series(t)?, read_series(val_path)?.with_labels(labels)?)
        }
        (None, Some(m)) => manifest_series(m)?,
        (None, None) => return Err(VistaError::Config("no input given".into())),
    };
    let defaults = GridSpace::default();
    let space = GridSpace {
        window_sizes: a.windows.clone().unwrap_or(defaults.window_sizes),
        coreset_ratios: a.ratios.clone().unwrap_or(defaults.coreset_ratios),
        knn: a.knn_grid.clone().unwrap_or(defaults.knn),
    };
    let extractor = load_extractor(&cfg.extractor)?;
    let report = grid_search(&train, &val, &cfg, &extractor, &space)?;
    if let Some(p) = &a.out {
        std::fs::write(p, report.to_csv()).map_err(|e| VistaError::io(p, e))?;
    }
    for w in &report.skipped {
        eprintln!("skipped window size {w}: series shorter than one window");
    }
    let best = report
        .best()
        .ok_or_else(|| VistaError::Data("no window size fits the data".into()))?;
    write_output(
        None,
        &format!(
            "window_size = {}\ncoreset_ratio = {}\nknn = {}\nf1 = {}\nroc_auc = {}\n",
            best.window_size, best.coreset_ratio, best.knn, best.f1, best.roc_auc
        ),
    )
}

pub fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Render(a) => cmd_render(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Gridsearch(a) => cmd_grid(a),
    }
}

/// Parses arguments, runs, and maps failures to exit codes: 1 for usage or
/// configuration errors, 2 for data errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
