//! End-to-end training runs: data preparation, model building, solving,
//! independent verification of the result, and the cross-validation and
//! regularization-path protocols layered on top.
//!
//! Every reported metric is recomputed from the decoded coefficient vector
//! and the prepared data, never read back from solver variables, so a model
//! document can always be checked against its own numbers.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BendersConfig, CoefficientsConfig, ConfigError, NormalizeConfig, RunConfig};
use crate::data::{
    self, apply_rules, make_weights, scale_columns, BinaryRuleSet, ClassWeights, DataError,
    Dataset, FeatureKind,
};
use crate::evaluate::{self, Metrics, PenaltySpec};
use crate::exec;
use crate::formulation::{
    build_mofn, build_pilm, build_slim, build_tilm, default_margin, ops_feasible, BuiltModel,
    FormulationError, ModelFamily,
};
use crate::interp::InterpretabilitySet;
use crate::loss_decomposition::{
    benders_solve, BendersOptions, BendersTrace, DecompositionError, LossKind,
};
use crate::milp::{self, MilpError, SolveStatus};
use crate::reduction::{self, ReductionError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solve(#[from] MilpError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("no admissible model satisfies the constraints")]
    Infeasible,
    #[error("hit the solve limit before any feasible model was found; raise the limit or relax the constraints")]
    NoIncumbent,
    #[error("trained model fails the independent constraint re-check; refusing to emit it")]
    CertificationFailed,
    #[error("data reduction removed every example at this width; use a smaller width")]
    ReductionEmptied,
    #[error("fold count {folds} outside 2..={n}")]
    BadFolds { folds: usize, n: usize },
    #[error("fold {fold}: training split lost an entire class")]
    FoldLostClass { fold: usize },
    #[error("holdout split lost an entire class on the training side; use a smaller holdout")]
    SplitLostClass,
    #[error("regularization paths apply to l0-penalized families, not {0}")]
    SweepFamily(ModelFamily),
    #[error("path value {0} is not a positive penalty")]
    BadSweepValue(f64),
    #[error("model document: {0}")]
    Document(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("internal invariant broken: {0}")]
    Internal(&'static str),
}

impl PipelineError {
    /// Process exit code for command-line front ends: 2 for configuration
    /// and data problems, 3 when no admissible model exists, 4 when a limit
    /// struck before any incumbent, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Data(_) => 2,
            PipelineError::Infeasible => 3,
            PipelineError::NoIncumbent => 4,
            _ => 1,
        }
    }
}

/// Data after the configured preprocessing: the raw table, the matrix the
/// model actually trains on, and the bookkeeping needed to map between them.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub raw: Dataset,
    pub train: Dataset,
    /// Present when training runs on binarized rule columns.
    pub rules: Option<BinaryRuleSet>,
    /// Per raw-feature `(lo, hi)` when normalization rescaled the column.
    pub transform: Vec<Option<(f64, f64)>>,
    /// Names the operational constraints resolve against: rule-column names
    /// for models over binarized data, parent feature names for
    /// threshold-rule models, feature names otherwise.
    pub unit_names: Vec<String>,
}

/// Applies the configured preprocessing. Rule-table and threshold-rule
/// families always binarize (explicit thresholds when configured, all
/// adjacent midpoints otherwise); other families binarize only when asked,
/// and otherwise rescale real columns to [0, 1] per the normalize setting.
pub fn prepare(cfg: &RunConfig, raw: Dataset) -> Result<PreparedData, PipelineError> {
    let needs_rules = matches!(cfg.model.family, ModelFamily::Mofn | ModelFamily::Tilm);
    if needs_rules || cfg.binarize.is_some() {
        let opts = cfg.binarize.clone().unwrap_or_default().to_options();
        let (train, rules) = data::binarize(&raw, &opts)?;
        let unit_names = match cfg.model.family {
            ModelFamily::Tilm => rules
                .groups()
                .iter()
                .map(|g| rules.rules[g[0]].parent_name.clone())
                .collect(),
            _ => train.feature_names().to_vec(),
        };
        let transform = vec![None; raw.p()];
        Ok(PreparedData {
            raw,
            train,
            rules: Some(rules),
            transform,
            unit_names,
        })
    } else {
        let transform = normalization_plan(&raw, cfg.data.normalize);
        let train = scale_columns(&raw, &transform)?;
        let unit_names = train.feature_names().to_vec();
        Ok(PreparedData {
            raw,
            train,
            rules: None,
            transform,
            unit_names,
        })
    }
}

/// Columns to rescale: real features under `On`, real features holding at
/// least one non-integer value under `Auto` (integer-valued columns keep
/// interpretable unit steps), none under `Off`. Constant columns never
/// rescale.
fn normalization_plan(ds: &Dataset, mode: NormalizeConfig) -> Vec<Option<(f64, f64)>> {
    (0..ds.p())
        .map(|j| {
            let wanted = match mode {
                NormalizeConfig::Off => false,
                NormalizeConfig::On => ds.kinds()[j] == FeatureKind::Real,
                NormalizeConfig::Auto => {
                    ds.kinds()[j] == FeatureKind::Real
                        && ds
                            .examples()
                            .iter()
                            .any(|ex| ex.features[j + 1].fract() != 0.0)
                }
            };
            if !wanted {
                return None;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for ex in ds.examples() {
                lo = lo.min(ex.features[j + 1]);
                hi = hi.max(ex.features[j + 1]);
            }
            if hi > lo {
                Some((lo, hi))
            } else {
                None
            }
        })
        .collect()
}

fn build_model(
    cfg: &RunConfig,
    prep: &PreparedData,
    ds: &Dataset,
    weights: ClassWeights,
    c0_override: Option<f64>,
    forced_tiebreak: Option<f64>,
) -> Result<BuiltModel, PipelineError> {
    let ops = cfg.constraints.resolve(&prep.unit_names)?;
    let margin = cfg.model.margin;
    let model = match cfg.model.family {
        ModelFamily::Slim => {
            let sets = cfg.model.coefficients.to_sets(ds.feature_names())?;
            let mut penalty = cfg.penalty.slim(ModelFamily::Slim, ds.feature_names())?;
            if let Some(c0) = c0_override {
                penalty.c0 = c0;
                penalty.per_feature_c0 = None;
            }
            if forced_tiebreak.is_some() {
                penalty.l1_tiebreak = forced_tiebreak;
            }
            build_slim(ds, &sets, &penalty, weights, &ops, margin)?
        }
        ModelFamily::Pilm => {
            let intercept = cfg.model.coefficients.intercept.to_set("intercept")?;
            let levels = cfg.penalty.pilm_levels()?;
            build_pilm(ds, &intercept, &levels, weights, &ops, margin)?
        }
        ModelFamily::Mofn => {
            let c0 = match c0_override {
                Some(c0) => c0,
                None => cfg.penalty.mofn_c0()?,
            };
            build_mofn(ds, c0, weights, &ops, margin)?
        }
        ModelFamily::Tilm => {
            let rules = prep
                .rules
                .as_ref()
                .ok_or(PipelineError::Internal("threshold rules without binarization"))?;
            let sets = tilm_sets(&cfg.model.coefficients, rules)?;
            let penalty = cfg.penalty.tilm()?;
            build_tilm(ds, rules, &sets, &penalty, weights, &ops, margin)?
        }
    };
    Ok(model)
}

/// Coefficient sets for threshold-rule models: a per-feature entry keyed by
/// the parent feature name covers all of that feature's rule columns, with
/// rule-column names accepted too.
fn tilm_sets(
    coeffs: &CoefficientsConfig,
    rules: &BinaryRuleSet,
) -> Result<Vec<InterpretabilitySet>, ConfigError> {
    let known: BTreeSet<&str> = rules
        .rules
        .iter()
        .flat_map(|r| [r.parent_name.as_str(), r.name.as_str()])
        .collect();
    for key in coeffs.per_feature.keys() {
        if !known.contains(key.as_str()) {
            return Err(ConfigError::UnknownFeature(key.clone()));
        }
    }
    let mut sets = vec![coeffs.intercept.to_set("intercept")?];
    for rule in &rules.rules {
        let sc = coeffs
            .per_feature
            .get(&rule.name)
            .or_else(|| coeffs.per_feature.get(&rule.parent_name))
            .unwrap_or(&coeffs.default);
        sets.push(sc.to_set(&rule.parent_name)?);
    }
    Ok(sets)
}

/// Greedy per-slot descent on margin loss plus penalty over the admissible
/// sets, from the zero vector. Ignores operational constraints; the caller
/// verifies the end state against the full program before using it as a
/// warm start.
pub fn coordinate_descent(ds: &Dataset, model: &BuiltModel, max_sweeps: usize) -> Vec<f64> {
    let objective = |lambda: &[f64]| {
        evaluate::weighted_margin_loss(ds, lambda, model.weights, model.big_m.margin)
            + evaluate::penalty_value(&model.penalty, lambda)
    };
    let mut lambda = vec![0.0; model.n_coefficients()];
    let mut best = objective(&lambda);
    for _ in 0..max_sweeps {
        let mut improved = false;
        for j in 0..lambda.len() {
            let current = lambda[j];
            let mut slot_best = best;
            let mut slot_value = current;
            for &v in model.sets[j].values() {
                if v == current {
                    continue;
                }
                lambda[j] = v;
                let obj = objective(&lambda);
                if obj < slot_best - 1e-12 {
                    slot_best = obj;
                    slot_value = v;
                }
            }
            lambda[j] = slot_value;
            if slot_value != current {
                best = slot_best;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    lambda
}

/// How a model was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SolveMethod {
    /// Exact branch and bound on the margin-loss program.
    Exact,
    /// Loss decomposition under a convex surrogate.
    Decomposition {
        loss: LossKind,
        iterations: usize,
        converged: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveMeta {
    pub method: SolveMethod,
    pub status: SolveStatus,
    /// Relative optimality gap at termination.
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Not serialized: wall time varies run to run, and model documents for
    /// the same configuration and seed must be byte-identical.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionMeta {
    /// Level-set width the removals were certified at.
    pub width: f64,
    pub removed: usize,
    pub kept: usize,
}

/// A trained model with everything needed to apply, verify, and render it.
/// `coefficients[0]` is the intercept; `feature_names` matches the
/// remaining slots and names rule columns when training ran on binarized
/// data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: ModelFamily,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Count of nonzero non-intercept coefficients.
    pub model_size: usize,
    pub margin: f64,
    pub weights: ClassWeights,
    /// Training metrics, recomputed from `coefficients` on the prepared
    /// training data.
    pub metrics: Metrics,
    /// Objective of the problem that was solved: margin loss plus penalty
    /// for exact runs, convex surrogate plus penalty for decomposition runs,
    /// always evaluated on the full prepared training data.
    pub objective: f64,
    pub solve: SolveMeta,
    /// Per raw-feature scaling applied before training; apply the same
    /// transform before scoring new data.
    pub transform: Vec<Option<(f64, f64)>>,
    /// Rule definitions when training ran on binarized columns; new data is
    /// scored by evaluating these rules first.
    pub rules: Option<BinaryRuleSet>,
    pub reduction: Option<ReductionMeta>,
    pub seed: u64,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String, PipelineError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A finished training run. The trace is present for decomposition runs.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub benders_trace: Option<BendersTrace>,
}

pub fn train(cfg: &RunConfig, raw: Dataset) -> Result<TrainOutcome, PipelineError> {
    let prep = prepare(cfg, raw)?;
    train_prepared(cfg, &prep, None)
}

/// Trains on already-prepared data; `c0_override` swaps the sparsity
/// penalty without touching the rest of the configuration, which is how
/// regularization paths reuse one preparation.
pub fn train_prepared(
    cfg: &RunConfig,
    prep: &PreparedData,
    c0_override: Option<f64>,
) -> Result<TrainOutcome, PipelineError> {
    let weights = make_weights(
        cfg.weights.to_mode()?,
        prep.train.n_positive(),
        prep.train.n_negative(),
    )?;
    if let Some(bcfg) = &cfg.solve.benders {
        return train_benders(cfg, prep, weights, bcfg, c0_override);
    }

    let full_model = build_model(cfg, prep, &prep.train, weights, c0_override, None)?;

    let mut reduction_meta = None;
    let mut solve_ds = prep.train.clone();
    let mut model = full_model;
    if let Some(rcfg) = &cfg.reduction {
        let analysis = reduction::analyze(&prep.train, &model, rcfg.proxy.to_kind())?;
        let width = match rcfg.width {
            Some(w) => w,
            None => reduction::epsilon_max(&prep.train, &model, analysis.proxy_optimum)?,
        };
        let result = analysis.at_width(width)?;
        reduction_meta = Some(ReductionMeta {
            width,
            removed: result.removed_indices.len(),
            kept: result.kept_indices.len(),
        });
        if result.kept_indices.is_empty() {
            return Err(PipelineError::ReductionEmptied);
        }
        if !result.removed_indices.is_empty() {
            let reduced = result.reduced_dataset(&prep.train);
            // Training on the surviving examples must keep the original 1/N
            // loss normalization and tiebreak, so the reduced objective
            // agrees with the full objective on the kept set: scale the
            // class weights by the survival fraction and pin the tiebreak
            // computed on the full data.
            let scale = reduced.n() as f64 / prep.train.n() as f64;
            let scaled = ClassWeights {
                w_plus: weights.w_plus * scale,
                w_minus: weights.w_minus * scale,
            };
            let eps = match &model.penalty {
                PenaltySpec::L0L1 { eps, .. } => Some(*eps),
                _ => return Err(PipelineError::Internal("reduction on a non-l0l1 penalty")),
            };
            model = build_model(cfg, prep, &reduced, scaled, c0_override, eps)?;
            solve_ds = reduced;
        }
    }

    let mut opts = cfg.solve.to_options();
    if cfg.solve.warm_start {
        let warm = coordinate_descent(&solve_ds, &model, 12);
        let assignment = model.assignment_for(&solve_ds, &warm);
        if model.program.max_violation(&assignment) <= 1e-6 {
            opts.initial_incumbent = Some(assignment);
        }
    }
    let res = milp::solve(&model.program, &opts)?;
    let verified = match res.status {
        SolveStatus::Optimal | SolveStatus::FeasibleLimit => {
            model.canonicalize(&solve_ds, &res.x)?
        }
        SolveStatus::Infeasible => return Err(PipelineError::Infeasible),
        SolveStatus::LimitNoSolution => return Err(PipelineError::NoIncumbent),
        SolveStatus::Unbounded => {
            return Err(PipelineError::Internal("bounded program reported unbounded"))
        }
    };
    let lambda = verified.lambda;

    let ops = cfg.constraints.resolve(&prep.unit_names)?;
    let groups = model.rule_groups.clone();
    let group_view = if groups.is_empty() { None } else { Some(&groups[..]) };
    if !ops_feasible(&solve_ds, &ops, &lambda, model.big_m.margin, group_view) {
        return Err(PipelineError::CertificationFailed);
    }

    // Reporting always happens on the full prepared data with the caller's
    // weights, whatever subset the solver saw.
    let metrics = evaluate::metrics(&prep.train, &lambda, weights);
    let objective = evaluate::weighted_margin_loss(&prep.train, &lambda, weights, model.big_m.margin)
        + evaluate::penalty_value(&model.penalty, &lambda);

    let trained = TrainedModel {
        family: cfg.model.family,
        feature_names: prep.train.feature_names().to_vec(),
        model_size: evaluate::model_size(&lambda),
        coefficients: lambda,
        margin: model.big_m.margin,
        weights,
        metrics,
        objective,
        solve: SolveMeta {
            method: SolveMethod::Exact,
            status: res.status,
            gap: res.gap,
            nodes: res.node_count,
            lp_iterations: res.lp_iterations,
            wall_time_secs: res.wall_time,
        },
        transform: prep.transform.clone(),
        rules: prep.rules.clone(),
        reduction: reduction_meta,
        seed: cfg.solve.seed,
    };
    Ok(TrainOutcome {
        model: trained,
        benders_trace: None,
    })
}

fn train_benders(
    cfg: &RunConfig,
    prep: &PreparedData,
    weights: ClassWeights,
    bcfg: &BendersConfig,
    c0_override: Option<f64>,
) -> Result<TrainOutcome, PipelineError> {
    let ds = &prep.train;
    let sets = cfg.model.coefficients.to_sets(ds.feature_names())?;
    let mut penalty = cfg.penalty.slim(ModelFamily::Slim, ds.feature_names())?;
    if let Some(c0) = c0_override {
        penalty.c0 = c0;
        penalty.per_feature_c0 = None;
    }
    let ops = cfg.constraints.resolve(&prep.unit_names)?;
    let bopts = BendersOptions {
        gap_tol: bcfg.gap_tolerance,
        max_iters: bcfg.max_iterations,
        solve: cfg.solve.to_options(),
    };
    let res = benders_solve(ds, bcfg.loss, &sets, &penalty, weights, &ops, &bopts)?;

    let margin = cfg.model.margin.unwrap_or_else(|| default_margin(ds));
    if !ops_feasible(ds, &ops, &res.lambda, margin, None) {
        return Err(PipelineError::CertificationFailed);
    }
    let metrics = evaluate::metrics(ds, &res.lambda, weights);
    let gap = (res.objective - res.lower_bound) / res.objective.abs().max(1e-10);
    let status = if res.converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::FeasibleLimit
    };
    let trained = TrainedModel {
        family: cfg.model.family,
        feature_names: ds.feature_names().to_vec(),
        model_size: evaluate::model_size(&res.lambda),
        coefficients: res.lambda,
        margin,
        weights,
        metrics,
        objective: res.objective,
        solve: SolveMeta {
            method: SolveMethod::Decomposition {
                loss: bcfg.loss,
                iterations: res.trace.iterations.len(),
                converged: res.converged,
            },
            status,
            gap,
            nodes: 0,
            lp_iterations: 0,
            wall_time_secs: res
                .trace
                .iterations
                .iter()
                .map(|it| it.oracle_seconds + it.solve_seconds)
                .sum(),
        },
        transform: prep.transform.clone(),
        rules: prep.rules.clone(),
        reduction: None,
        seed: cfg.solve.seed,
    };
    Ok(TrainOutcome {
        model: trained,
        benders_trace: Some(res.trace),
    })
}

/// Builds the configured training program on prepared data without solving
/// it, for analyses that work on the program itself.
pub fn build_training(cfg: &RunConfig, prep: &PreparedData) -> Result<BuiltModel, PipelineError> {
    let weights = make_weights(
        cfg.weights.to_mode()?,
        prep.train.n_positive(),
        prep.train.n_negative(),
    )?;
    build_model(cfg, prep, &prep.train, weights, None, None)
}

/// Scores raw-space data under a trained model: evaluates the stored rules
/// or scaling first, then computes metrics with the training weights.
pub fn evaluate_on(model: &TrainedModel, raw: &Dataset) -> Result<Metrics, PipelineError> {
    let ds = project(model, raw)?;
    Ok(evaluate::metrics(&ds, &model.coefficients, model.weights))
}

/// Predicted labels for raw-space data under a trained model.
pub fn predict(model: &TrainedModel, raw: &Dataset) -> Result<Vec<i8>, PipelineError> {
    let ds = project(model, raw)?;
    Ok(evaluate::predictions(&ds, &model.coefficients))
}

/// Maps raw-space data into the space the model's coefficients act on, by
/// evaluating the stored rules or applying the stored scaling.
pub fn project(model: &TrainedModel, raw: &Dataset) -> Result<Dataset, PipelineError> {
    match &model.rules {
        Some(rules) => Ok(apply_rules(raw, rules)?),
        None => Ok(scale_columns(raw, &model.transform)?),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    pub model_size: usize,
    pub status: SolveStatus,
    pub gap: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug)]
pub struct CvReport {
    pub folds: Vec<FoldOutcome>,
    /// Model trained on the full data with the same configuration.
    pub final_model: TrainedModel,
    pub mean_test_error: f64,
    /// Sample standard deviation of per-fold test errors.
    pub std_test_error: f64,
    pub mean_train_error: f64,
    pub median_size: f64,
    pub min_size: usize,
    pub max_size: usize,
}

/// Round-robin fold assignment within each class after a seeded shuffle, so
/// folds are stratified and sized within one example of each other.
fn fold_assignment(ds: &Dataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..ds.n()).filter(|&i| ds.examples()[i].label > 0).collect();
    let mut neg: Vec<usize> = (0..ds.n()).filter(|&i| ds.examples()[i].label < 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assign = vec![0usize; ds.n()];
    for (c, &i) in pos.iter().enumerate() {
        assign[i] = c % folds;
    }
    // Continue the counter so fold totals stay balanced when classes are
    // uneven.
    for (c, &i) in neg.iter().enumerate() {
        assign[i] = (pos.len() + c) % folds;
    }
    assign
}

/// Stratified k-fold cross-validation: one solve per fold plus a final
/// full-data model. Preprocessing (binarization thresholds, scaling) is
/// refit on each fold's training split and applied to its held-out split.
/// Deterministic for a fixed configuration and seed; folds run
/// concurrently.
pub fn cross_validate(
    cfg: &RunConfig,
    raw: Dataset,
    folds: usize,
) -> Result<CvReport, PipelineError> {
    let n = raw.n();
    if folds < 2 || folds > n {
        return Err(PipelineError::BadFolds { folds, n });
    }
    let assignment = fold_assignment(&raw, folds, cfg.solve.seed);
    let results: Vec<Result<FoldOutcome, PipelineError>> = exec::map_indices(folds, |k| {
        let train_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] != k).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] == k).collect();
        let train_raw = raw.subset(&train_idx);
        if train_raw.n_positive() == 0 || train_raw.n_negative() == 0 {
            return Err(PipelineError::FoldLostClass { fold: k });
        }
        let outcome = train(cfg, train_raw)?;
        let test_metrics = evaluate_on(&outcome.model, &raw.subset(&test_idx))?;
        let m = outcome.model;
        Ok(FoldOutcome {
            fold: k,
            train_metrics: m.metrics,
            test_metrics,
            model_size: m.model_size,
            status: m.solve.status,
            gap: m.solve.gap,
            coefficients: m.coefficients,
        })
    });
    let mut fold_outcomes = Vec::with_capacity(folds);
    for r in results {
        fold_outcomes.push(r?);
    }
    let final_model = train(cfg, raw)?.model;

    let errs: Vec<f64> = fold_outcomes.iter().map(|f| f.test_metrics.error).collect();
    let mean_test_error = errs.iter().sum::<f64>() / errs.len() as f64;
    let var = errs
        .iter()
        .map(|e| (e - mean_test_error).powi(2))
        .sum::<f64>()
        / (errs.len() - 1) as f64;
    let mean_train_error = fold_outcomes
        .iter()
        .map(|f| f.train_metrics.error)
        .sum::<f64>()
        / folds as f64;
    let mut sizes: Vec<usize> = fold_outcomes.iter().map(|f| f.model_size).collect();
    sizes.sort_unstable();
    let median_size = if sizes.len() % 2 == 1 {
        sizes[sizes.len() / 2] as f64
    } else {
        (sizes[sizes.len() / 2 - 1] + sizes[sizes.len() / 2]) as f64 / 2.0
    };
    Ok(CvReport {
        mean_test_error,
        std_test_error: var.sqrt(),
        mean_train_error,
        median_size,
        min_size: sizes[0],
        max_size: sizes[sizes.len() - 1],
        folds: fold_outcomes,
        final_model,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub c0: f64,
    pub train_error: f64,
    /// Present when the sweep held out a test split.
    pub test_error: Option<f64>,
    pub model_size: usize,
    pub objective: f64,
    pub status: SolveStatus,
}

/// Penalty values log-spaced across the interesting range: below the low
/// end sparsity can no longer pay for a single loss increment, above the
/// high end the zero model always wins.
pub fn default_c0_grid(n: usize, p: usize, points: usize) -> Vec<f64> {
    let lo = 1.0 / (n as f64 * p as f64);
    let hi = 1.0 - 1.0 / n as f64;
    if points == 1 || lo >= hi {
        return vec![lo];
    }
    (0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// Traces the regularization path: one solve per penalty value over a
/// shared preparation. `values` overrides the configured list (an empty
/// override yields an empty table); otherwise the configured list is used,
/// or a log-spaced default grid when none is configured. With a configured
/// holdout fraction, a stratified test split is carved off before
/// preparation and scored per point. Points run concurrently.
pub fn sweep(
    cfg: &RunConfig,
    raw: Dataset,
    values: Option<&[f64]>,
) -> Result<Vec<SweepRow>, PipelineError> {
    if !matches!(cfg.model.family, ModelFamily::Slim | ModelFamily::Mofn) {
        return Err(PipelineError::SweepFamily(cfg.model.family));
    }
    let holdout = cfg.sweep.as_ref().map_or(0.0, |s| s.holdout);
    let (train_raw, test_raw) = stratified_split(&raw, holdout, cfg.solve.seed)?;
    let prep = prepare(cfg, train_raw)?;
    let grid: Vec<f64> = match values {
        Some(v) => v.to_vec(),
        None => {
            let configured = cfg.sweep.as_ref().map_or(&[] as &[f64], |s| &s.c0);
            if configured.is_empty() {
                let points = cfg.sweep.as_ref().map_or(20, |s| s.points);
                default_c0_grid(prep.train.n(), prep.train.p(), points)
            } else {
                configured.to_vec()
            }
        }
    };
    if let Some(&bad) = grid.iter().find(|&&c0| !(c0 > 0.0)) {
        return Err(PipelineError::BadSweepValue(bad));
    }
    let rows: Vec<Result<SweepRow, PipelineError>> = exec::map_indices(grid.len(), |i| {
        let outcome = train_prepared(cfg, &prep, Some(grid[i]))?;
        let m = outcome.model;
        let test_error = match &test_raw {
            Some(t) => Some(evaluate_on(&m, t)?.error),
            None => None,
        };
        Ok(SweepRow {
            c0: grid[i],
            train_error: m.metrics.error,
            test_error,
            model_size: m.model_size,
            objective: m.objective,
            status: m.solve.status,
        })
    });
    rows.into_iter().collect()
}

/// Carves off a stratified test split of roughly `frac` of each class.
/// `frac` of zero, or one too small to claim a single example, keeps all
/// data for training.
fn stratified_split(
    ds: &Dataset,
    frac: f64,
    seed: u64,
) -> Result<(Dataset, Option<Dataset>), PipelineError> {
    if frac <= 0.0 {
        return Ok((ds.clone(), None));
    }
    // Decorrelated from the fold-assignment stream for the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pos: Vec<usize> = (0..ds.n()).filter(|&i| ds.examples()[i].label > 0).collect();
    let mut neg: Vec<usize> = (0..ds.n()).filter(|&i| ds.examples()[i].label < 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let tp = (pos.len() as f64 * frac).floor() as usize;
    let tn = (neg.len() as f64 * frac).floor() as usize;
    if tp + tn == 0 {
        return Ok((ds.clone(), None));
    }
    if tp >= pos.len() && !pos.is_empty() || tn >= neg.len() && !neg.is_empty() {
        return Err(PipelineError::SplitLostClass);
    }
    let mut test_idx: Vec<usize> = pos[..tp].iter().chain(neg[..tn].iter()).copied().collect();
    let mut train_idx: Vec<usize> = pos[tp..].iter().chain(neg[tn..].iter()).copied().collect();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((ds.subset(&train_idx), Some(ds.subset(&test_idx))))
}

/// One row per fold: index, errors, size, solve status, gap.
pub fn write_cv_csv<W: Write>(report: &CvReport, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "fold,train_error,test_error,model_size,status,gap"
    )?;
    for f in &report.folds {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            f.fold, f.train_metrics.error, f.test_metrics.error, f.model_size, f.status, f.gap
        )?;
    }
    Ok(())
}

/// One row per penalty value; the test column is empty without a holdout.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "c0,train_error,test_error,model_size")?;
    for r in rows {
        let test = r.test_error.map_or(String::new(), |e| e.to_string());
        writeln!(w, "{},{},{},{}", r.c0, r.train_error, test, r.model_size)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::formulation::brute_force_training;
    use crate::synth;

    fn slim_toml(c0: f64) -> String {
        format!(
            r#"
[model]
family = "slim"

[model.coefficients]
intercept = {{ min = -4, max = 4 }}
default = {{ min = -2, max = 2 }}

[penalty]
c0 = {c0}
"#
        )
    }

    fn slim_cfg(c0: f64) -> RunConfig {
        parse_config(&slim_toml(c0)).expect("valid config")
    }

    fn xor_dataset() -> Dataset {
        let rows = vec![
            (vec![0.0, 0.0], -1),
            (vec![1.0, 1.0], -1),
            (vec![0.0, 1.0], 1),
            (vec![1.0, 0.0], 1),
        ];
        Dataset::from_rows(
            vec!["a".into(), "b".into()],
            vec![FeatureKind::Binary; 2],
            rows,
        )
        .expect("dataset")
    }

    #[test]
    fn exact_training_matches_enumeration() {
        let cfg = slim_cfg(0.02);
        let ds = synth::margin_separable_instance(11, 14);
        let outcome = train(&cfg, ds.clone()).expect("train");
        let m = &outcome.model;

        let prep = prepare(&cfg, ds.clone()).expect("prepare");
        let built = build_model(&cfg, &prep, &prep.train, m.weights, None, None).expect("build");
        let brute = brute_force_training(
            &prep.train,
            &built.sets,
            &built.penalty,
            m.weights,
            &Default::default(),
            m.margin,
            None,
            None,
            1 << 24,
        )
        .expect("enumeration");
        assert!((m.objective - brute.minimum).abs() < 1e-9);
        assert!(brute
            .argmins
            .iter()
            .any(|a| a.iter().zip(&m.coefficients).all(|(x, y)| (x - y).abs() < 1e-9)));

        let recomputed = evaluate_on(m, &ds).expect("re-evaluate");
        assert_eq!(recomputed.n_errors, m.metrics.n_errors);
        assert!((recomputed.error - m.metrics.error).abs() < 1e-12);
    }

    #[test]
    fn model_documents_are_deterministic_and_round_trip() {
        let cfg = slim_cfg(0.03);
        let ds = synth::margin_separable_instance(3, 12);
        let mut a = train(&cfg, ds.clone()).expect("train").model;
        let mut b = train(&cfg, ds).expect("train").model;
        a.solve.wall_time_secs = 0.0;
        b.solve.wall_time_secs = 0.0;
        let ja = a.to_json().expect("json");
        assert_eq!(ja, b.to_json().expect("json"));

        let back = TrainedModel::from_json(&ja).expect("parse");
        assert_eq!(ja, back.to_json().expect("json"));
    }

    #[test]
    fn warm_start_keeps_the_optimum() {
        let ds = synth::margin_separable_instance(7, 16);
        let cold_cfg = {
            let mut c = slim_cfg(0.05);
            c.solve.warm_start = false;
            c
        };
        let warm = train(&slim_cfg(0.05), ds.clone()).expect("warm").model;
        let cold = train(&cold_cfg, ds).expect("cold").model;
        assert!((warm.objective - cold.objective).abs() < 1e-9);
        assert_eq!(warm.solve.status, SolveStatus::Optimal);
    }

    #[test]
    fn normalization_modes_track_columns() {
        let rows: Vec<(Vec<f64>, i8)> = (0..12)
            .map(|i| {
                let y: i8 = if i % 2 == 0 { 1 } else { -1 };
                let x = 1000.0 + 37.5 * i as f64 * y as f64;
                (vec![x, i as f64], y)
            })
            .collect();
        let ds = Dataset::from_rows(
            vec!["wide".into(), "count".into()],
            vec![FeatureKind::Real; 2],
            rows,
        )
        .expect("dataset");

        let auto = train(&slim_cfg(0.02), ds.clone()).expect("auto").model;
        assert!(auto.transform[0].is_some());
        assert!(auto.transform[1].is_none());
        let scored = evaluate_on(&auto, &ds).expect("scores raw units");
        assert!((scored.error - auto.metrics.error).abs() < 1e-12);

        let mut off_cfg = slim_cfg(0.02);
        off_cfg.data.normalize = NormalizeConfig::Off;
        let off = train(&off_cfg, ds.clone()).expect("off").model;
        assert!(off.transform.iter().all(|t| t.is_none()));

        let mut on_cfg = slim_cfg(0.02);
        on_cfg.data.normalize = NormalizeConfig::On;
        let on = train(&on_cfg, ds).expect("on").model;
        assert!(on.transform.iter().all(|t| t.is_some()));
    }

    #[test]
    fn rule_table_pipeline_round_trips() {
        let rows = vec![
            (vec![1.0, 0.0, 1.0], 1),
            (vec![1.0, 1.0, 0.0], 1),
            (vec![1.0, 1.0, 1.0], 1),
            (vec![0.0, 0.0, 1.0], -1),
            (vec![0.0, 1.0, 0.0], -1),
            (vec![0.0, 0.0, 0.0], -1),
        ];
        let ds = Dataset::from_rows(
            vec!["r1".into(), "r2".into(), "r3".into()],
            vec![FeatureKind::Binary; 3],
            rows,
        )
        .expect("dataset");
        let cfg = parse_config(
            r#"
[model]
family = "mofn"

[penalty]
c0 = 0.01
"#,
        )
        .expect("config");
        let m = train(&cfg, ds.clone()).expect("train").model;
        assert!(m.rules.is_some());
        assert!(m.coefficients[1..].iter().all(|&v| v == 0.0 || v == 1.0));
        let rescored = evaluate_on(&m, &ds).expect("rescore");
        assert_eq!(rescored.n_errors, m.metrics.n_errors);
    }

    #[test]
    fn threshold_rule_pipeline_uses_parent_units() {
        let rows: Vec<(Vec<f64>, i8)> = (0..14)
            .map(|i| {
                let y: i8 = if i < 7 { 1 } else { -1 };
                (vec![i as f64, (i % 3) as f64], y)
            })
            .collect();
        let ds = Dataset::from_rows(
            vec!["age".into(), "noise".into()],
            vec![FeatureKind::Real; 2],
            rows,
        )
        .expect("dataset");
        let cfg = parse_config(
            r#"
[model]
family = "tilm"

[model.coefficients]
intercept = { min = -4, max = 4 }
default = { min = -2, max = 2 }

[penalty]
cf = 0.02
ct = 0.005
max_thresholds = 2

[binarize]
thresholds = { age = [3.5, 6.5, 9.5], noise = [0.5] }

[constraints]
max_model_size = 1

[constraints.signs]
age = "nonneg"
"#,
        )
        .expect("config");
        let prep = prepare(&cfg, ds.clone()).expect("prepare");
        assert_eq!(prep.unit_names, vec!["age".to_string(), "noise".to_string()]);
        let m = train(&cfg, ds.clone()).expect("train").model;
        // One parent feature at most, non-negative age coefficients.
        let groups = m.rules.as_ref().expect("rules").groups();
        let used: Vec<bool> = groups
            .iter()
            .map(|g| g.iter().any(|&t| m.coefficients[t + 1] != 0.0))
            .collect();
        assert!(used.iter().filter(|&&u| u).count() <= 1);
        assert!(groups[0].iter().all(|&t| m.coefficients[t + 1] >= 0.0));
        assert_eq!(m.metrics.n_errors, evaluate_on(&m, &ds).expect("re").n_errors);
    }

    #[test]
    fn infeasible_caps_are_reported() {
        let mut cfg = slim_cfg(0.02);
        cfg.constraints.max_fpr = Some(0.0);
        cfg.constraints.max_fnr = Some(0.0);
        let err = train(&cfg, xor_dataset()).expect_err("xor cannot be split perfectly");
        assert!(matches!(err, PipelineError::Infeasible));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn cross_validation_is_stratified_and_deterministic() {
        let cfg = slim_cfg(0.05);
        let ds = synth::margin_separable_instance(5, 24);
        let a = cross_validate(&cfg, ds.clone(), 4).expect("cv");
        assert_eq!(a.folds.len(), 4);
        for f in &a.folds {
            assert!(f.test_metrics.error <= 1.0);
        }
        assert!(a.mean_test_error <= 0.5);
        let b = cross_validate(&cfg, ds, 4).expect("cv again");
        assert_eq!(a.mean_test_error, b.mean_test_error);
        assert_eq!(a.std_test_error, b.std_test_error);
        let (mut fa, mut fb) = (a.final_model, b.final_model);
        fa.solve.wall_time_secs = 0.0;
        fb.solve.wall_time_secs = 0.0;
        assert_eq!(fa.to_json().expect("json"), fb.to_json().expect("json"));
    }

    #[test]
    fn leave_one_out_runs_on_five_points() {
        let rows = vec![
            (vec![2.0], 1),
            (vec![1.5], 1),
            (vec![1.0], 1),
            (vec![-1.0], -1),
            (vec![-2.0], -1),
        ];
        let ds = Dataset::from_rows(
            vec!["x".into()],
            vec![FeatureKind::Real],
            rows,
        )
        .expect("dataset");
        let report = cross_validate(&slim_cfg(0.05), ds.clone(), 5).expect("leave-one-out");
        assert_eq!(report.folds.len(), 5);

        assert!(matches!(
            cross_validate(&slim_cfg(0.05), ds.clone(), 1),
            Err(PipelineError::BadFolds { .. })
        ));
        assert!(matches!(
            cross_validate(&slim_cfg(0.05), ds, 6),
            Err(PipelineError::BadFolds { .. })
        ));
    }

    #[test]
    fn lost_class_in_a_fold_is_an_error() {
        let mut rows: Vec<(Vec<f64>, i8)> = (0..9).map(|i| (vec![i as f64], 1)).collect();
        rows.push((vec![-5.0], -1));
        let ds = Dataset::from_rows(
            vec!["x".into()],
            vec![FeatureKind::Real],
            rows,
        )
        .expect("dataset");
        let err = cross_validate(&slim_cfg(0.05), ds, 2).expect_err("single negative");
        assert!(matches!(err, PipelineError::FoldLostClass { .. }));
    }

    #[test]
    fn sweep_grids_and_holdout() {
        let cfg = slim_cfg(0.05);
        let ds = synth::margin_separable_instance(9, 20);

        let empty = sweep(&cfg, ds.clone(), Some(&[])).expect("empty grid");
        assert!(empty.is_empty());

        let twice = sweep(&cfg, ds.clone(), Some(&[0.02, 0.02])).expect("duplicate points");
        assert_eq!(twice.len(), 2);
        assert_eq!(twice[0].train_error, twice[1].train_error);
        assert_eq!(twice[0].model_size, twice[1].model_size);
        assert!((twice[0].objective - twice[1].objective).abs() < 1e-12);
        assert!(twice.iter().all(|r| r.test_error.is_none()));

        let mut hcfg = parse_config(&format!(
            "{}\n[sweep]\npoints = 4\nholdout = 0.25\n",
            slim_toml(0.05)
        ))
        .expect("config");
        hcfg.solve.seed = 2;
        let rows = sweep(&hcfg, ds.clone(), None).expect("default grid");
        assert_eq!(rows.len(), 4);
        let held = (ds.n_positive() as f64 * 0.25).floor() + (ds.n_negative() as f64 * 0.25).floor();
        let n_train = ds.n() as f64 - held;
        let lo = 1.0 / (n_train * 2.0);
        let hi = 1.0 - 1.0 / n_train;
        assert!((rows[0].c0 - lo).abs() < 1e-12);
        assert!((rows[3].c0 - hi).abs() < 1e-12);
        for r in &rows {
            assert!(r.c0 >= lo - 1e-12 && r.c0 <= hi + 1e-12);
            assert!(r.test_error.is_some());
        }

        assert!(matches!(
            sweep(&hcfg, ds, Some(&[-0.5])),
            Err(PipelineError::BadSweepValue(_))
        ));
    }

    #[test]
    fn reduction_in_the_pipeline_preserves_the_optimum() {
        use crate::config::DataReductionConfig;
        use crate::reduction::{analyze, epsilon_from_feasible, ProxyKind};

        let mut any_removed = false;
        for seed in 0..3u64 {
            let ds = synth::margin_separable_instance(seed, 12);
            let plain_cfg = slim_cfg(0.004);
            let plain = train(&plain_cfg, ds.clone()).expect("plain").model;

            // Width from the known optimum: the tightest certified level
            // set, where removal is both aggressive and argmin-preserving.
            let prep = prepare(&plain_cfg, ds.clone()).expect("prepare");
            let built = build_model(&plain_cfg, &prep, &prep.train, plain.weights, None, None)
                .expect("build");
            let analysis =
                analyze(&prep.train, &built, ProxyKind::IpRelaxation).expect("analysis");
            let width = epsilon_from_feasible(plain.objective, analysis.proxy_optimum)
                .expect("ordering");

            let mut reduced_cfg = slim_cfg(0.004);
            reduced_cfg.reduction = Some(DataReductionConfig {
                width: Some(width),
                ..Default::default()
            });
            let red = train(&reduced_cfg, ds).expect("reduced").model;
            let meta = red.reduction.as_ref().expect("reduction metadata");
            assert_eq!(meta.removed + meta.kept, 12);
            any_removed |= meta.removed > 0;
            // Objective and metrics are reported on the full data, so a
            // sound reduction reproduces the plain run exactly.
            assert!((red.objective - plain.objective).abs() < 1e-9);
            assert_eq!(red.metrics.n_errors, plain.metrics.n_errors);
        }
        assert!(any_removed);
    }

    #[test]
    fn decomposition_route_reports_its_trace() {
        let cfg = parse_config(&format!(
            "{}\n[solve.benders]\nloss = \"logistic\"\n",
            slim_toml(0.05)
        ))
        .expect("config");
        let ds = synth::margin_separable_instance(2, 12);
        let outcome = train(&cfg, ds.clone()).expect("train");
        let trace = outcome.benders_trace.expect("trace");
        assert!(!trace.iterations.is_empty());
        let m = outcome.model;
        match m.solve.method {
            SolveMethod::Decomposition { loss, iterations, converged } => {
                assert_eq!(loss, LossKind::Logistic);
                assert_eq!(iterations, trace.iterations.len());
                assert_eq!(converged, m.solve.status == SolveStatus::Optimal);
            }
            SolveMethod::Exact => panic!("expected the decomposition route"),
        }
        let rescored = evaluate_on(&m, &ds).expect("rescore");
        assert_eq!(rescored.n_errors, m.metrics.n_errors);
    }

    #[test]
    fn report_csvs_have_stable_shapes() {
        let cfg = slim_cfg(0.05);
        let ds = synth::margin_separable_instance(4, 16);
        let report = cross_validate(&cfg, ds.clone(), 4).expect("cv");
        let mut buf = Vec::new();
        write_cv_csv(&report, &mut buf).expect("write");
        let text = String::from_utf8(buf).expect("utf8");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "fold,train_error,test_error,model_size,status,gap");
        assert!(lines[1].starts_with("0,"));

        let rows = sweep(&cfg, ds, Some(&[0.05, 0.4])).expect("sweep");
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).expect("write");
        let text = String::from_utf8(buf).expect("utf8");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "c0,train_error,test_error,model_size");
        assert!(lines[1].ends_with(",,1") || lines[1].contains(",,"));
    }
}
