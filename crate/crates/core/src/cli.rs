//! Command-line front end. `main.rs` only forwards argv and the exit code.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dtw::dtw_sum;
use crate::error::{Result, TtwError};
use crate::io::{load_series, load_ucr, save_json, save_result, LoadOptions, OutputFormat};
use crate::pipeline::{
    average_avg, averaging_experiment, classify, fit_nearest_centroid, stratified_halves, tune_k,
    ExperimentSpec, Method, DEFAULT_K_GRID,
};
use crate::series::{LabeledDataset, TimeSeries};
use crate::trainer::{train_with_progress, GradientMode, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ttw",
    version,
    about = "Multi-series time warping and DTW averaging"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Ttw,
    Avg,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ttw => Method::Ttw,
            MethodArg::Avg => Method::Avg,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// UCR-style dataset (label first, comma or tab separated)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Number of sine components per warp
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Adam step size
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Sinc window half-width
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Z-normalize every series at load time
    #[arg(long)]
    pub znorm: bool,
    /// Use the total derivative of the loss (centroid varies)
    #[arg(long)]
    pub exact_grad: bool,
    /// Stop early when the relative loss change drops below this value
    #[arg(long)]
    pub stop_rel_change: Option<f64>,
    /// Only use series with this label
    #[arg(long = "class")]
    pub class: Option<i64>,
    #[arg(long)]
    pub quiet: bool,
}

impl CommonArgs {
    fn config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            k: self.k,
            iterations: self.iters,
            step_size: self.lr,
            window_half_width: self.window,
            seed: self.seed,
            gradient: if self.exact_grad {
                GradientMode::Exact
            } else {
                GradientMode::Printed
            },
            stop_rel_change: self.stop_rel_change,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(&self) -> Result<LabeledDataset> {
        let (data, _) = load_ucr(
            &self.input,
            LoadOptions {
                znormalize: self.znorm,
            },
        )?;
        match self.class {
            None => Ok(data),
            Some(label) => {
                let labels = data.labels().ok_or(TtwError::MissingLabels)?;
                let idx: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == label).collect();
                if idx.is_empty() {
                    return Err(TtwError::EmptyClass { label });
                }
                data.select(&idx)
            }
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a centroid of the input series
    Average {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "ttw")]
        method: MethodArg,
    },
    /// Align the input series and write the synchronized signals and warps
    Align {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Nearest-centroid classification: --input is the training split
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID)]
        grid: Vec<usize>,
    },
    /// Score each K on the input and report the best
    TuneK {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID)]
        grid: Vec<usize>,
    },
    /// Repeated random-set averaging comparison
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        sets: usize,
        #[arg(long, default_value_t = 10)]
        set_size: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["ttw", "avg"])]
        methods: Vec<MethodArg>,
        /// Sample with replacement when a class is smaller than the set size
        #[arg(long)]
        replace: bool,
        /// Tune K per set over --grid instead of using --k
        #[arg(long)]
        tune_k: bool,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID)]
        grid: Vec<usize>,
    },
    /// DTW sum of a candidate series against the dataset
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Centroid file: JSON result or a single comma/tab separated row
        #[arg(long)]
        candidate: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(out: &mut dyn Write, quiet: bool, line: std::fmt::Arguments<'_>) {
    if !quiet {
        let _ = writeln!(out, "{line}");
    }
}

fn train_logged(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    quiet: bool,
    err: &mut dyn Write,
) -> Result<crate::series::AlignmentResult> {
    train_with_progress(data, cfg, |i, loss| {
        if !quiet && i % 10 == 0 {
            let _ = writeln!(err, "iter {i:>5}  loss {loss:.6e}");
        }
    })
}

#[derive(Serialize)]
struct AvgOutput<'a> {
    method: Method,
    centroid: &'a TimeSeries,
}

fn print_row(out: &mut dyn Write, values: &[f64]) {
    let row: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "{}", row.join(","));
}

fn write_centroid_only(centroid: &TimeSeries, path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => save_json(
            &AvgOutput {
                method: Method::Avg,
                centroid,
            },
            path,
        ),
        OutputFormat::Csv => {
            let row: Vec<String> = centroid.values().iter().map(|v| format!("{v:?}")).collect();
            std::fs::write(path, format!("{}\n", row.join(","))).map_err(|e| TtwError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Average { common, method } => {
            let cfg = common.config()?;
            let data = common.load()?;
            match Method::from(method) {
                Method::Avg => {
                    let centroid = average_avg(&data);
                    match &common.output {
                        Some(path) => write_centroid_only(&centroid, path, common.format.into())?,
                        None => print_row(out, centroid.values()),
                    }
                }
                Method::Ttw => {
                    let result = train_logged(&data, &cfg, common.quiet, err)?;
                    match &common.output {
                        Some(path) => {
                            save_result(&result, path, common.format.into())?;
                            let last = result.loss_trace.last().copied().unwrap_or(0.0);
                            emit(out, common.quiet, format_args!("final loss {last:.6e}"));
                        }
                        None => print_row(out, result.centroid.values()),
                    }
                }
            }
        }
        Command::Align { common } => {
            let cfg = common.config()?;
            let data = common.load()?;
            let result = train_logged(&data, &cfg, common.quiet, err)?;
            let path = common
                .output
                .clone()
                .ok_or_else(|| TtwError::InvalidConfig("align requires --output".into()))?;
            let written = save_result(&result, &path, common.format.into())?;
            for p in written {
                emit(out, common.quiet, format_args!("wrote {}", p.display()));
            }
            if result.endpoint_violations > 0 {
                emit(
                    out,
                    common.quiet,
                    format_args!(
                        "{} warps end away from T after clamping",
                        result.endpoint_violations
                    ),
                );
            }
        }
        Command::Classify { common, test, grid } => {
            let cfg = common.config()?;
            let train_all = common.load()?;
            let (test_set, _) = load_ucr(
                &test,
                LoadOptions {
                    znormalize: common.znorm,
                },
            )?;
            let (fit_half, val_half) = stratified_halves(&train_all, common.seed)?;
            let model = fit_nearest_centroid(&fit_half, val_half.as_ref(), &grid, &cfg)?;
            let report = classify(&model, &test_set)?;
            let _ = writeln!(out, "accuracy {:.4}", report.accuracy);
            emit(
                out,
                common.quiet,
                format_args!("k selection {:?}", model.k_selection),
            );
            for (c, (label, k)) in report.classes.iter().zip(&report.per_class_k).enumerate() {
                let row: Vec<String> = report.confusion[c].iter().map(usize::to_string).collect();
                emit(
                    out,
                    common.quiet,
                    format_args!("class {label} (K={k}): {}", row.join(" ")),
                );
            }
            if let Some(path) = &common.output {
                save_json(&report, path)?;
            }
        }
        Command::TuneK { common, grid } => {
            let cfg = common.config()?;
            let data = common.load()?;
            let tuning = tune_k(&data, &grid, &cfg)?;
            for s in &tuning.scores {
                let _ = writeln!(out, "K={} dtw_sum={:?}", s.k, s.dtw_sum);
            }
            let _ = writeln!(out, "best_k={}", tuning.best_k);
            if let Some(path) = &common.output {
                save_json(&tuning, path)?;
            }
        }
        Command::Experiment {
            common,
            sets,
            set_size,
            methods,
            replace,
            tune_k,
            grid,
        } => {
            let cfg = common.config()?;
            let data = common.load()?;
            let spec = ExperimentSpec {
                sets_per_class: sets,
                set_size,
                methods: methods.into_iter().map(Method::from).collect(),
                with_replacement: replace,
                k_grid: tune_k.then_some(grid),
                seed: common.seed,
            };
            let reports = averaging_experiment(&data, &spec, &cfg)?;
            for r in &reports {
                let _ = writeln!(
                    out,
                    "class {} method {:?} mean_dtw_sum {:?}",
                    r.class, r.method, r.mean_dtw_sum
                );
            }
            if let Some(path) = &common.output {
                save_json(&reports, path)?;
            }
        }
        Command::Eval { common, candidate } => {
            let data = common.load()?;
            let series = load_series(&candidate)?;
            let _ = writeln!(out, "{:?}", dtw_sum(series.values(), &data)?);
        }
    }
    Ok(())
}
