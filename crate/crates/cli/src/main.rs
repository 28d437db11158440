//! Command-line front end: loads a run configuration and data, drives the
//! training pipeline, and writes model documents and report tables.
//!
//! Exit codes: 0 success, 2 configuration or data problems, 3 when no
//! admissible model exists, 4 when a limit struck before any incumbent,
//! 1 for everything else.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use intscore::bounds::{
    self, kth_margin_lambda, l0_hypothesis_count, min_margin_lambda, occam_gap, BoundsError,
    MarginProfile, ResolutionBound, COPRIME_MAX_LAMBDA, COPRIME_MAX_P,
};
use intscore::config::{load_config, load_schema, ConfigError, RunConfig};
use intscore::data::{load_dataset, Dataset, LoadOptions};
use intscore::formulation::ModelFamily;
use intscore::pipeline::{self, PipelineError, TrainedModel};
use intscore::reduction;
use intscore::render::{default_format, render, RenderError, RenderFormat};

#[derive(Parser)]
#[command(
    name = "intscore",
    version,
    about = "Trains certifiably optimal discrete linear classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Training data CSV; overrides the configured path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sidecar (TOML) declaring feature kinds and binarization thresholds
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Overrides the configured solver seed
    #[arg(long)]
    seed: Option<u64>,
    /// Solve time limit in seconds; overrides the configured limit
    #[arg(long)]
    time_limit: Option<f64>,
    /// Directory the output files go to
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes model.json, model.txt, metrics.csv
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Text form: scoring-table, mofn-table, score-function, machine
        #[arg(long)]
        format: Option<String>,
    },
    /// Stratified k-fold cross-validation; writes cv_metrics.csv and the
    /// final full-data model
    Cv {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Regularization path over the sparsity penalty; writes path.csv
    Sweep {
        #[command(flatten)]
        shared: Shared,
    },
    /// Certified data reduction report; writes reduction_report.csv
    Reduce {
        #[command(flatten)]
        shared: Shared,
    },
    /// Hypothesis-count and grid-resolution bound calculators; writes
    /// density_table.csv
    Bounds {
        #[command(flatten)]
        shared: Shared,
        /// Confidence parameter for the generalization gap
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Saved model document to compute margin-based grid bounds for
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report kth-margin bounds for ranks 1..=this
        #[arg(long, default_value_t = 3)]
        max_rank: usize,
    },
    /// Re-render a saved model document
    Render {
        /// Saved model document (model.json)
        #[arg(long)]
        model: PathBuf,
        /// Text form: scoring-table, mofn-table, score-function, machine
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Pipeline(PipelineError),
    Render(RenderError),
    Bounds(BoundsError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::Render(e) => write!(f, "{e}"),
            CliError::Bounds(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Render(RenderError::Document(e)) => e.exit_code() as u8,
            CliError::Render(_) => 2,
            CliError::Bounds(BoundsError::Io(_)) => 1,
            CliError::Bounds(_) => 2,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<intscore::data::DataError> for CliError {
    fn from(e: intscore::data::DataError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::Render(e)
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Bounds(e)
    }
}

impl From<reduction::ReductionError> for CliError {
    fn from(e: reduction::ReductionError) -> Self {
        CliError::Pipeline(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { shared, format } => cmd_train(&shared, format.as_deref()),
        Command::Cv { shared, folds } => cmd_cv(&shared, folds),
        Command::Sweep { shared } => cmd_sweep(&shared),
        Command::Reduce { shared } => cmd_reduce(&shared),
        Command::Bounds {
            shared,
            delta,
            model,
            max_rank,
        } => cmd_bounds(&shared, delta, model.as_deref(), max_rank),
        Command::Render { model, format } => cmd_render(&model, format.as_deref()),
    }
}

fn invalid(field: &str, msg: &str) -> CliError {
    ConfigError::Invalid {
        field: field.to_string(),
        msg: msg.to_string(),
    }
    .into()
}

/// Loads the configuration, applies the schema sidecar and command-line
/// overrides, and loads the data.
fn load_run(shared: &Shared) -> Result<(RunConfig, Dataset), CliError> {
    let mut cfg = load_config(&shared.config)?;
    if let Some(sp) = &shared.schema {
        let schema = load_schema(sp)?;
        cfg.apply_schema(&schema);
    }
    if let Some(seed) = shared.seed {
        cfg.solve.seed = seed;
    }
    if let Some(t) = shared.time_limit {
        if !(t > 0.0) {
            return Err(invalid("time-limit", "must be positive"));
        }
        cfg.solve.time_limit_secs = Some(t);
    }
    let data_path = shared
        .data
        .clone()
        .or_else(|| cfg.data.path.clone())
        .ok_or_else(|| invalid("data.path", "no data file; set [data].path or pass --data"))?;
    let opts = LoadOptions {
        label_column: cfg.data.label_column().to_string(),
        mapping: cfg.data.to_mapping(),
        kinds: cfg.data.kinds.clone(),
    };
    let ds = load_dataset(&data_path, &opts)?;
    Ok((cfg, ds))
}

fn parse_format(token: Option<&str>, family: ModelFamily) -> Result<RenderFormat, CliError> {
    match token {
        Some(t) => Ok(t.parse::<RenderFormat>()?),
        None => Ok(default_format(family)),
    }
}

fn metrics_csv(model: &TrainedModel) -> String {
    let m = &model.metrics;
    let mut out = String::from(
        "error,weighted_error,tpr,fpr,n_errors,predicted_positive_fraction,objective,model_size,status,gap,wall_time_secs\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        m.error,
        m.weighted_error,
        m.tpr,
        m.fpr,
        m.n_errors,
        m.predicted_positive_fraction,
        model.objective,
        model.model_size,
        model.solve.status,
        model.solve.gap,
        model.solve.wall_time_secs,
    ));
    out
}

fn summary_line(model: &TrainedModel) -> String {
    format!(
        "status {} | objective {:.6} | training error {:.4} | model size {} | gap {:.3e} | {:.2}s",
        model.solve.status,
        model.objective,
        model.metrics.error,
        model.model_size,
        model.solve.gap,
        model.solve.wall_time_secs,
    )
}

fn write_model_files(
    out_dir: &Path,
    model: &TrainedModel,
    format: Option<&str>,
) -> Result<String, CliError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("model.json"), model.to_json()?)?;
    let text = render(model, parse_format(format, model.family)?)?;
    fs::write(out_dir.join("model.txt"), &text)?;
    Ok(text)
}

fn cmd_train(shared: &Shared, format: Option<&str>) -> Result<(), CliError> {
    let (cfg, ds) = load_run(shared)?;
    let outcome = pipeline::train(&cfg, ds)?;
    let text = write_model_files(&shared.out_dir, &outcome.model, format)?;
    fs::write(
        shared.out_dir.join("metrics.csv"),
        metrics_csv(&outcome.model),
    )?;
    if let Some(trace) = &outcome.benders_trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).map_err(io::Error::from)?;
        fs::write(shared.out_dir.join("benders_trace.csv"), buf)?;
    }
    print!("{text}");
    println!("{}", summary_line(&outcome.model));
    Ok(())
}

fn cmd_cv(shared: &Shared, folds: usize) -> Result<(), CliError> {
    let (cfg, ds) = load_run(shared)?;
    let report = pipeline::cross_validate(&cfg, ds, folds)?;
    fs::create_dir_all(&shared.out_dir)?;
    let mut buf = Vec::new();
    pipeline::write_cv_csv(&report, &mut buf)?;
    fs::write(shared.out_dir.join("cv_metrics.csv"), buf)?;
    let text = write_model_files(&shared.out_dir, &report.final_model, None)?;
    print!("{text}");
    println!(
        "cv error {:.2}% +/- {:.2}% over {} folds | model size median {} min {} max {}",
        100.0 * report.mean_test_error,
        100.0 * report.std_test_error,
        report.folds.len(),
        report.median_size,
        report.min_size,
        report.max_size,
    );
    println!("final model: {}", summary_line(&report.final_model));
    Ok(())
}

fn cmd_sweep(shared: &Shared) -> Result<(), CliError> {
    let (cfg, ds) = load_run(shared)?;
    let rows = pipeline::sweep(&cfg, ds, None)?;
    fs::create_dir_all(&shared.out_dir)?;
    let mut buf = Vec::new();
    pipeline::write_sweep_csv(&rows, &mut buf)?;
    fs::write(shared.out_dir.join("path.csv"), buf)?;
    for r in &rows {
        match r.test_error {
            Some(t) => println!(
                "c0 {:<12.6} train error {:.4} test error {:.4} size {}",
                r.c0, r.train_error, t, r.model_size
            ),
            None => println!(
                "c0 {:<12.6} train error {:.4} size {}",
                r.c0, r.train_error, r.model_size
            ),
        }
    }
    println!("{} path points -> path.csv", rows.len());
    Ok(())
}

fn cmd_reduce(shared: &Shared) -> Result<(), CliError> {
    let (cfg, ds) = load_run(shared)?;
    if cfg.model.family != ModelFamily::Slim {
        return Err(invalid(
            "reduction",
            "data reduction applies to scoring systems only",
        ));
    }
    let rcfg = cfg.reduction.clone().unwrap_or_default();
    let prep = pipeline::prepare(&cfg, ds)?;
    let model = pipeline::build_training(&cfg, &prep)?;
    let analysis = reduction::analyze(&prep.train, &model, rcfg.proxy.to_kind())?;
    let eps_max = reduction::epsilon_max(&prep.train, &model, analysis.proxy_optimum)?;
    let width = rcfg.width.unwrap_or(eps_max);

    println!("proxy optimum {:.6}", analysis.proxy_optimum);
    println!("widest sound width from the zero model: {eps_max:.6}");
    // Removal counts across the width grid; removal can only shrink as the
    // level set widens.
    for g in 0..rcfg.grid {
        let w = eps_max * g as f64 / (rcfg.grid - 1) as f64;
        let removed = analysis.removal_flags(w).iter().filter(|&&r| r).count();
        println!("width {w:<12.6} removed {removed}");
    }

    let result = analysis.at_width(width)?;
    fs::create_dir_all(&shared.out_dir)?;
    let mut buf = Vec::new();
    result.write_report_csv(&mut buf)?;
    fs::write(shared.out_dir.join("reduction_report.csv"), buf)?;
    println!(
        "at width {:.6}: removed {} of {} examples -> reduction_report.csv",
        width,
        result.removed_indices.len(),
        prep.train.n(),
    );
    Ok(())
}

fn cmd_bounds(
    shared: &Shared,
    delta: f64,
    model_path: Option<&Path>,
    max_rank: usize,
) -> Result<(), CliError> {
    let (cfg, ds) = load_run(shared)?;
    let n = ds.n();
    let p = ds.p();

    let default_set = cfg.model.coefficients.default.to_set("default")?;
    let lambda_cap = default_set
        .values()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .round() as u64;
    let c0 = cfg
        .penalty
        .c0
        .unwrap_or_else(|| 1.0 / (n as f64 * p as f64));
    println!("n {n} | p {p} | coefficient cap {lambda_cap} | c0 {c0}");

    let count = l0_hypothesis_count(p, lambda_cap, c0)?;
    let gap = occam_gap(&count, n, delta)?;
    println!("hypothesis count {count}");
    println!("generalization gap at delta {delta}: {gap:.6}");

    let ps: Vec<usize> = (1..=p.min(COPRIME_MAX_P)).collect();
    let lambdas: Vec<u64> = (1..=lambda_cap.min(COPRIME_MAX_LAMBDA)).collect();
    fs::create_dir_all(&shared.out_dir)?;
    let mut buf = Vec::new();
    bounds::write_density_table(&mut buf, &ps, &lambdas, delta, n)?;
    fs::write(shared.out_dir.join("density_table.csv"), buf)?;
    println!("coprime density table -> density_table.csv");

    if let Some(mp) = model_path {
        let model = TrainedModel::from_json(&fs::read_to_string(mp)?)?;
        let space = pipeline::project(&model, &ds)?;
        let rho = &model.coefficients[1..];
        let points: Vec<Vec<f64>> = space
            .examples()
            .iter()
            .map(|ex| ex.features[1..].to_vec())
            .collect();
        let profile = MarginProfile::new(rho, &points)?;
        for k in 1..=max_rank.min(profile.n()) {
            let bound = kth_margin_lambda(&profile, k)?;
            let label = match bound {
                ResolutionBound::Lambda(l) => format!("lambda {l}"),
                ResolutionBound::ZeroMargin => "zero margin at this rank".to_string(),
                ResolutionBound::Degenerate => "all margins given up".to_string(),
            };
            println!("rank-{k} margin grid bound: {label}");
        }
        if let ResolutionBound::Lambda(l) = min_margin_lambda(&profile) {
            println!("rounding onto a grid of radius {l} preserves every hard classification");
        }
    }
    Ok(())
}

fn cmd_render(model_path: &Path, format: Option<&str>) -> Result<(), CliError> {
    let model = TrainedModel::from_json(&fs::read_to_string(model_path)?)?;
    let text = render(&model, parse_format(format, model.family)?)?;
    print!("{text}");
    Ok(())
}
