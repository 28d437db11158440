//! Builders that turn a dataset, admissible coefficient sets, a penalty, and
//! operational constraints into an [`IntegerProgram`], plus the reverse maps
//! from solver output back to coefficient vectors.
//!
//! Four model families share one loss encoding: a binary indicator per
//! example forced to 1 by a big-M row whenever the margin is missed. They
//! differ in how coefficients and penalties are wired:
//!
//! - scoring systems: integer coefficients, per-feature use cost plus a
//!   magnitude tiebreak,
//! - level-set models: every coefficient picks exactly one admissible value,
//!   priced by the level it came from,
//! - M-of-N rule tables: 0/1 rule coefficients, nonpositive integer
//!   intercept, flat cost per rule,
//! - threshold-rule models: rule coefficients grouped by parent feature,
//!   priced per feature used and per extra threshold, with per-feature sign
//!   agreement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BinaryRuleSet, ClassWeights, Dataset};
use crate::evaluate::{self, CoefficientLevel, PenaltySpec};
use crate::interp::{InterpretabilitySet, Sign};
use crate::milp::{self, Enumeration};
use crate::program::{IntegerProgram, Sense, VarKind, VarRole};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("coefficient slot {0}: sign restriction leaves no nonzero value")]
    EmptySignedSet(usize),
    #[error("got {got} value sets for {want} coefficient slots")]
    SetCount { got: usize, want: usize },
    #[error("penalty weight must be positive, got {0}")]
    BadPenalty(f64),
    #[error("per-feature penalty list has {got} entries for {want} features")]
    PenaltyCount { got: usize, want: usize },
    #[error("margin must be positive, got {0}")]
    BadMargin(f64),
    #[error("value {0} appears in more than one penalty level")]
    OverlappingLevels(f64),
    #[error("penalty level costs must be strictly increasing")]
    LevelCostsNotIncreasing,
    #[error("no penalty level contains 0")]
    ZeroNotInLevels,
    #[error("penalty level with an empty value list")]
    EmptyLevel,
    #[error("column {0} is not 0/1")]
    NonBinaryColumn(usize),
    #[error("max thresholds per feature must be at least 1")]
    BadMaxThresholds,
    #[error("missing count {missing} exceeds dataset size {n}")]
    MissingExceedsN { missing: usize, n: usize },
    #[error("every non-intercept value list is {{0}}, so the magnitude tiebreak bound is degenerate")]
    DegenerateL1Bound,
    #[error("operational constraint fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("operational constraint references unit {got}; valid ids are 1..={max}")]
    BadFeatureId { got: usize, max: usize },
    #[error("rule metadata covers {got} columns but the dataset has {want}")]
    RuleCount { got: usize, want: usize },
    #[error("decoded assignment violates the program by {0:.3e}")]
    SolutionInfeasible(f64),
    #[error("program objective {program} differs from direct evaluation {direct}")]
    ObjectiveMismatch { program: f64, direct: f64 },
    #[error(transparent)]
    Enumeration(#[from] milp::MilpError),
}

/// The four supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Slim,
    Pilm,
    Mofn,
    Tilm,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelFamily::Slim => "slim",
            ModelFamily::Pilm => "pilm",
            ModelFamily::Mofn => "mofn",
            ModelFamily::Tilm => "tilm",
        };
        f.write_str(s)
    }
}

/// Margin and per-example big-M constants for the loss rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BigMParameters {
    pub margin: f64,
    /// m[i] >= margin - y_i * lambda . x_i for every admissible lambda.
    pub m: Vec<f64>,
}

/// 0.5 when every feature is 0/1 (scores are integers and any margin in
/// (0,1) is exact), 0.1 otherwise.
pub fn default_margin(ds: &Dataset) -> f64 {
    if ds.all_binary() {
        0.5
    } else {
        0.1
    }
}

/// Tightest valid per-example big-M: the worst admissible score deficit,
/// maximized coordinate-wise since the value sets are independent.
pub fn compute_big_m(ds: &Dataset, sets: &[InterpretabilitySet], margin: f64) -> BigMParameters {
    let m = ds
        .examples()
        .iter()
        .map(|ex| {
            let y = ex.label as f64;
            let mut acc = margin;
            for (j, set) in sets.iter().enumerate() {
                acc += set.max_scaled(-y * ex.features[j]);
            }
            acc
        })
        .collect();
    BigMParameters { margin, m }
}

/// Magnitude-tiebreak weight small enough that it can never change which
/// support is optimal: half of min(1/N, C0) divided by the largest possible
/// non-intercept L1 norm.
pub fn default_l1_tiebreak(
    c0: f64,
    n: usize,
    sets: &[InterpretabilitySet],
) -> Result<f64, FormulationError> {
    if c0 <= 0.0 {
        return Err(FormulationError::BadPenalty(c0));
    }
    let max_l1: f64 = sets[1..].iter().map(|s| s.max_abs()).sum();
    if max_l1 == 0.0 {
        return Err(FormulationError::DegenerateL1Bound);
    }
    Ok(c0.min(1.0 / n as f64) / max_l1 / 2.0)
}

/// Per-feature use penalty inflated by the fraction of imputed values, so a
/// fully imputed feature costs more than any accuracy it could buy.
pub fn adjust_penalty_for_missing(
    c0: f64,
    missing: usize,
    n: usize,
) -> Result<f64, FormulationError> {
    if missing > n {
        return Err(FormulationError::MissingExceedsN { missing, n });
    }
    Ok(c0 + missing as f64 / n as f64)
}

/// Hard requirements layered onto any family's program.
///
/// Unit ids are 1-based: coefficient slots for scoring systems and level-set
/// models, rule columns for M-of-N tables, parent features for
/// threshold-rule models. Id 0 (the intercept) is never constrainable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperationalConstraints {
    /// Cap on the number of units in use.
    pub max_model_size: Option<usize>,
    /// Cap on the fraction of negatives scored at or above the decision
    /// boundary.
    pub max_fpr: Option<f64>,
    /// Cap on the fraction of positives scored at or below it; boundary ties
    /// count against both caps.
    pub max_fnr: Option<f64>,
    /// Cap on the fraction of all examples predicted positive.
    pub prediction_budget: Option<f64>,
    /// Per-unit sign restrictions.
    pub signs: Vec<(usize, Sign)>,
    /// At most one of each pair in use.
    pub either_or: Vec<(usize, usize)>,
    /// Using any antecedent requires the consequent.
    pub if_then: Vec<(Vec<usize>, usize)>,
    /// (leaf, ancestor): the leaf may only be used with its ancestor.
    pub hierarchy: Vec<(usize, usize)>,
}

impl OperationalConstraints {
    fn check_id(id: usize, units: usize) -> Result<(), FormulationError> {
        if id == 0 || id > units {
            Err(FormulationError::BadFeatureId {
                got: id,
                max: units,
            })
        } else {
            Ok(())
        }
    }

    pub fn validate(&self, units: usize) -> Result<(), FormulationError> {
        for f in [self.max_fpr, self.max_fnr, self.prediction_budget]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&f) {
                return Err(FormulationError::BadFraction(f));
            }
        }
        for &(id, _) in &self.signs {
            Self::check_id(id, units)?;
        }
        for &(a, b) in &self.either_or {
            Self::check_id(a, units)?;
            Self::check_id(b, units)?;
        }
        for (ante, cons) in &self.if_then {
            for &a in ante {
                Self::check_id(a, units)?;
            }
            Self::check_id(*cons, units)?;
        }
        for &(leaf, anc) in &self.hierarchy {
            Self::check_id(leaf, units)?;
            Self::check_id(anc, units)?;
        }
        Ok(())
    }
}

/// Which operational constraint makes the all-zero model infeasible.
///
/// The zero model scores every example 0, which the loss rows treat as an
/// error for both classes and the prediction indicators treat as positive,
/// so any rate cap below 1 on a nonempty class excludes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroExcludedBy {
    MaxFpr,
    MaxFnr,
    PredictionBudget,
}

fn zero_exclusion(ds: &Dataset, ops: &OperationalConstraints) -> Option<ZeroExcludedBy> {
    if let Some(f) = ops.max_fpr {
        let neg = ds.n_negative() as f64;
        if neg > f * neg + RATE_TOL {
            return Some(ZeroExcludedBy::MaxFpr);
        }
    }
    if let Some(f) = ops.max_fnr {
        let pos = ds.n_positive() as f64;
        if pos > f * pos + RATE_TOL {
            return Some(ZeroExcludedBy::MaxFnr);
        }
    }
    if let Some(b) = ops.prediction_budget {
        let n = ds.n() as f64;
        if n > b * n + RATE_TOL {
            return Some(ZeroExcludedBy::PredictionBudget);
        }
    }
    None
}

/// Headroom added to every rate-cap right-hand side so integer counts sitting
/// exactly on the cap stay feasible.
const RATE_TOL: f64 = 1e-9;

/// Scoring-system penalty parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SlimPenalty {
    /// Cost per feature in use.
    pub c0: f64,
    /// Per-feature override of `c0`, one entry per non-intercept slot.
    pub per_feature_c0: Option<Vec<f64>>,
    /// Magnitude tiebreak; computed from the sets when absent.
    pub l1_tiebreak: Option<f64>,
}

/// Threshold-rule penalty parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TilmPenalty {
    /// Cost per parent feature in use.
    pub cf: f64,
    /// Cost per threshold beyond the first on a used feature.
    pub ct: f64,
    /// Magnitude tiebreak over rule coefficients; computed when absent.
    pub l1_tiebreak: Option<f64>,
    /// Max thresholds per feature; extra-threshold counts live in
    /// [0, max_thresholds - 1].
    pub max_thresholds: usize,
}

/// A family program plus everything needed to map solutions back to
/// coefficient vectors.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub program: IntegerProgram,
    pub family: ModelFamily,
    /// Effective admissible sets per slot, after sign restrictions.
    pub sets: Vec<InterpretabilitySet>,
    pub weights: ClassWeights,
    pub penalty: PenaltySpec,
    pub big_m: BigMParameters,
    /// Operational constraint that excludes the all-zero model, if any.
    pub zero_excluded_by: Option<ZeroExcludedBy>,
    /// Variable index of each coefficient slot.
    pub coeff_vars: Vec<usize>,
    /// Selector values by (slot, ordinal) for set-encoded slots.
    pub selector_values: Vec<Vec<f64>>,
    /// Rule columns per parent feature; empty outside threshold-rule models.
    pub rule_groups: Vec<Vec<usize>>,
}

/// A solver assignment reduced to its coefficient vector and re-encoded in
/// canonical form (indicators at their forced levels).
#[derive(Debug, Clone)]
pub struct VerifiedSolution {
    pub lambda: Vec<f64>,
    pub assignment: Vec<f64>,
    /// Program objective of the canonical assignment; equals margin loss
    /// plus penalty.
    pub objective: f64,
}

impl BuiltModel {
    pub fn n_coefficients(&self) -> usize {
        self.coeff_vars.len()
    }

    /// Coefficient vector from a solver assignment, snapped onto the
    /// admissible sets.
    pub fn decode(&self, x: &[f64]) -> Vec<f64> {
        self.coeff_vars
            .iter()
            .enumerate()
            .map(|(j, &v)| self.sets[j].nearest(x[v]))
            .collect()
    }

    /// Full variable assignment implied by a coefficient vector, with every
    /// indicator at its forced level; `lambda` must hold exact admissible
    /// values. Feasible whenever `lambda` itself satisfies the operational
    /// constraints.
    pub fn assignment_for(&self, ds: &Dataset, lambda: &[f64]) -> Vec<f64> {
        let gamma = self.big_m.margin;
        let scores: Vec<f64> = ds
            .examples()
            .iter()
            .map(|ex| evaluate::score(lambda, &ex.features))
            .collect();
        // One selector per slot may light up; pick the closest value once so
        // near-ties cannot double-select.
        let chosen: Vec<Option<usize>> = self
            .selector_values
            .iter()
            .enumerate()
            .map(|(j, vals)| {
                vals.iter()
                    .position(|&v| (lambda[j] - v).abs() <= 1e-9)
            })
            .collect();
        let group_used = |g: usize| -> usize {
            self.rule_groups[g]
                .iter()
                .filter(|&&t| evaluate::is_nonzero(lambda[t + 1]))
                .count()
        };
        let mut out = vec![0.0; self.program.n_vars()];
        for (idx, var) in self.program.vars.iter().enumerate() {
            out[idx] = match var.role {
                VarRole::Coefficient(j) => lambda[j],
                VarRole::Loss(i) => {
                    let y = ds.examples()[i].label as f64;
                    if y * scores[i] < gamma {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::PredictedPositive(i) => {
                    if scores[i] > -gamma {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::Selection(j) => {
                    if evaluate::is_nonzero(lambda[j]) {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::Magnitude(j) => lambda[j].abs(),
                VarRole::ValueSelector { coeff, ordinal } => {
                    if chosen[coeff] == Some(ordinal) {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::FeatureUse(g) => {
                    if group_used(g) > 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::ExtraThresholds(g) => group_used(g).saturating_sub(1) as f64,
                VarRole::SignAgreement(g) => {
                    if self.rule_groups[g].iter().any(|&t| lambda[t + 1] > 0.0) {
                        1.0
                    } else {
                        0.0
                    }
                }
                VarRole::Penalty(_) | VarRole::EpigraphLoss | VarRole::Aux => 0.0,
            };
        }
        out
    }

    /// Decode, re-encode, and cross-check a solver assignment: the canonical
    /// form must satisfy the program and its objective must equal the
    /// directly evaluated margin loss plus penalty.
    pub fn canonicalize(
        &self,
        ds: &Dataset,
        x: &[f64],
    ) -> Result<VerifiedSolution, FormulationError> {
        let lambda = self.decode(x);
        let assignment = self.assignment_for(ds, &lambda);
        let viol = self.program.max_violation(&assignment);
        if viol > 1e-6 {
            return Err(FormulationError::SolutionInfeasible(viol));
        }
        let program = self.program.objective_value(&assignment);
        let direct = evaluate::weighted_margin_loss(ds, &lambda, self.weights, self.big_m.margin)
            + evaluate::penalty_value(&self.penalty, &lambda);
        if (program - direct).abs() > 1e-9 {
            return Err(FormulationError::ObjectiveMismatch { program, direct });
        }
        Ok(VerifiedSolution {
            lambda,
            assignment,
            objective: program,
        })
    }
}

/// Applies sign restrictions, erroring when a restriction strips a slot of
/// every nonzero value it had. `slot_ids` maps each 1-based unit id to the
/// coefficient slots it governs.
pub(crate) fn apply_signs(
    sets: &mut [InterpretabilitySet],
    signs: &[(usize, Sign)],
    slot_ids: impl Fn(usize) -> Vec<usize>,
) -> Result<(), FormulationError> {
    for &(id, sign) in signs {
        for slot in slot_ids(id) {
            let restricted = sets[slot].sign_restricted(sign);
            if restricted.nonzero_values().is_empty() && !sets[slot].nonzero_values().is_empty() {
                return Err(FormulationError::EmptySignedSet(slot));
            }
            sets[slot] = restricted;
        }
    }
    Ok(())
}

/// Adds the coefficient variable for one slot. Contiguous integer sets get a
/// plain bounded integer; anything else gets a continuous variable tied to
/// one-hot value selectors over the nonzero values (at most one on; all off
/// means 0).
pub(crate) fn add_set_coefficient(
    p: &mut IntegerProgram,
    slot: usize,
    set: &InterpretabilitySet,
) -> (usize, Vec<(usize, f64)>) {
    if let Some((lo, hi)) = set.contiguous_integers() {
        let v = p.add_var(
            format!("lam_{slot}"),
            VarKind::Integer,
            lo as f64,
            hi as f64,
            VarRole::Coefficient(slot),
        );
        return (v, Vec::new());
    }
    let v = p.add_var(
        format!("lam_{slot}"),
        VarKind::Continuous,
        set.min(),
        set.max(),
        VarRole::Coefficient(slot),
    );
    let mut selectors = Vec::new();
    let mut link = vec![(v, 1.0)];
    let mut pick = Vec::new();
    for (k, &val) in set.nonzero_values().iter().enumerate() {
        let u = p.add_var(
            format!("u_{slot}_{k}"),
            VarKind::Binary,
            0.0,
            1.0,
            VarRole::ValueSelector {
                coeff: slot,
                ordinal: k,
            },
        );
        selectors.push((u, val));
        link.push((u, -val));
        pick.push((u, 1.0));
    }
    p.add_constraint(format!("pick_{slot}"), pick, Sense::Le, 1.0);
    p.add_constraint(format!("val_{slot}"), link, Sense::Eq, 0.0);
    (v, selectors)
}

/// Adds one loss indicator and its big-M forcing row; no objective term.
fn add_loss_indicator(
    p: &mut IntegerProgram,
    ds: &Dataset,
    i: usize,
    big_m: &BigMParameters,
    coeff_vars: &[usize],
) -> usize {
    let ex = &ds.examples()[i];
    let v = p.add_binary(format!("psi_{i}"), VarRole::Loss(i));
    let y = ex.label as f64;
    let mut terms = vec![(v, big_m.m[i])];
    for (j, &cv) in coeff_vars.iter().enumerate() {
        let x = ex.features[j];
        if x != 0.0 {
            terms.push((cv, y * x));
        }
    }
    p.add_constraint(format!("loss_{i}"), terms, Sense::Ge, big_m.margin);
    v
}

/// Loss indicators for every example, each carrying its class weight over N
/// in the objective.
fn add_loss_block(
    p: &mut IntegerProgram,
    ds: &Dataset,
    weights: ClassWeights,
    big_m: &BigMParameters,
    coeff_vars: &[usize],
) -> Vec<usize> {
    let n = ds.n() as f64;
    (0..ds.n())
        .map(|i| {
            let v = add_loss_indicator(p, ds, i, big_m, coeff_vars);
            p.set_objective_term(v, weights.multiplier_for(ds.examples()[i].label) / n);
            v
        })
        .collect()
}

/// Use indicator plus magnitude carrier for one scoring-system feature:
/// alpha pins the use state (linked to the coefficient range, or summed over
/// the value selectors), beta dominates |lambda|; costs go straight into the
/// objective.
pub(crate) fn add_use_and_magnitude(
    p: &mut IntegerProgram,
    slot: usize,
    set: &InterpretabilitySet,
    selectors: &[(usize, f64)],
    lam: usize,
    c0: f64,
    eps: f64,
) -> usize {
    let alpha = if selectors.is_empty() {
        let a = p.add_binary(format!("alpha_{slot}"), VarRole::Selection(slot));
        let (lo, hi) = (set.min(), set.max());
        if hi != 0.0 {
            p.add_constraint(
                format!("use_hi_{slot}"),
                vec![(lam, 1.0), (a, -hi)],
                Sense::Le,
                0.0,
            );
        }
        if lo != 0.0 {
            p.add_constraint(
                format!("use_lo_{slot}"),
                vec![(lam, 1.0), (a, -lo)],
                Sense::Ge,
                0.0,
            );
        }
        a
    } else {
        // Sum of one-hot selectors is already 0/1; the equality keeps alpha
        // continuous but integral.
        let a = p.add_var(
            format!("alpha_{slot}"),
            VarKind::Continuous,
            0.0,
            1.0,
            VarRole::Selection(slot),
        );
        let mut row = vec![(a, 1.0)];
        for &(u, _) in selectors {
            row.push((u, -1.0));
        }
        p.add_constraint(format!("use_{slot}"), row, Sense::Eq, 0.0);
        a
    };
    p.set_objective_term(alpha, c0);
    let beta = p.add_var(
        format!("beta_{slot}"),
        VarKind::Continuous,
        0.0,
        set.max_abs(),
        VarRole::Magnitude(slot),
    );
    p.add_constraint(
        format!("mag_hi_{slot}"),
        vec![(lam, 1.0), (beta, -1.0)],
        Sense::Le,
        0.0,
    );
    p.add_constraint(
        format!("mag_lo_{slot}"),
        vec![(lam, 1.0), (beta, 1.0)],
        Sense::Ge,
        0.0,
    );
    if eps != 0.0 {
        p.set_objective_term(beta, eps);
    }
    alpha
}

/// Everything the operational-constraint appender needs from a family
/// builder. `per_feature` maps each 1-based unit id to a linear expression
/// valued 0/1 at admissible assignments; entry 0 is unused.
pub(crate) struct OpsWiring<'a> {
    pub sets: &'a [InterpretabilitySet],
    pub coeff_vars: &'a [usize],
    pub big_m: &'a BigMParameters,
    /// Loss indicators by example when the program already has them;
    /// otherwise rate caps create their own.
    pub psi: Option<&'a [usize]>,
    pub per_feature: Vec<Vec<(usize, f64)>>,
}

/// Appends size, logic, sign-free rate, and budget constraints. Rate caps
/// reuse the loss indicators when present; the prediction budget always adds
/// its own predicted-positive indicators because a loss indicator at a
/// boundary tie undercounts positive predictions on the correct class.
pub(crate) fn append_operational_constraints(
    p: &mut IntegerProgram,
    ds: &Dataset,
    ops: &OperationalConstraints,
    w: &OpsWiring,
) -> Result<(), FormulationError> {
    let expr = |id: usize| w.per_feature[id].clone();
    if let Some(k) = ops.max_model_size {
        let mut row = Vec::new();
        for id in 1..w.per_feature.len() {
            row.extend(expr(id));
        }
        p.add_constraint("size_cap", row, Sense::Le, k as f64);
    }
    for (c, &(a, b)) in ops.either_or.iter().enumerate() {
        let mut row = expr(a);
        row.extend(expr(b));
        p.add_constraint(format!("either_or_{c}"), row, Sense::Le, 1.0);
    }
    for (c, (ante, cons)) in ops.if_then.iter().enumerate() {
        let mut row = Vec::new();
        for &a in ante {
            row.extend(expr(a));
        }
        for (v, coef) in expr(*cons) {
            row.push((v, -coef * ante.len() as f64));
        }
        p.add_constraint(format!("if_then_{c}"), row, Sense::Le, 0.0);
    }
    for (c, &(leaf, anc)) in ops.hierarchy.iter().enumerate() {
        let mut row = expr(leaf);
        for (v, coef) in expr(anc) {
            row.push((v, -coef));
        }
        p.add_constraint(format!("hierarchy_{c}"), row, Sense::Le, 0.0);
    }
    let class_cap = |p: &mut IntegerProgram,
                         idx: Vec<usize>,
                         frac: f64,
                         name: &str| {
        let row: Vec<(usize, f64)> = idx
            .iter()
            .map(|&i| {
                let v = match w.psi {
                    Some(psi) => psi[i],
                    None => add_loss_indicator(p, ds, i, w.big_m, w.coeff_vars),
                };
                (v, 1.0)
            })
            .collect();
        let cap = frac * idx.len() as f64 + RATE_TOL;
        p.add_constraint(name, row, Sense::Le, cap);
    };
    if let Some(f) = ops.max_fpr {
        class_cap(p, ds.negative_indices(), f, "fpr_cap");
    }
    if let Some(f) = ops.max_fnr {
        class_cap(p, ds.positive_indices(), f, "fnr_cap");
    }
    if let Some(b) = ops.prediction_budget {
        let gamma = w.big_m.margin;
        let mut row = Vec::with_capacity(ds.n());
        for (i, ex) in ds.examples().iter().enumerate() {
            let pi = p.add_binary(format!("pi_{i}"), VarRole::PredictedPositive(i));
            // Forced to 1 exactly when the score clears -margin, which for
            // integer scores is the predicted-positive condition score >= 0.
            let mut mp = gamma;
            for (j, set) in w.sets.iter().enumerate() {
                mp += set.max_scaled(ex.features[j]);
            }
            let mut terms = vec![(pi, mp)];
            for (j, &cv) in w.coeff_vars.iter().enumerate() {
                let x = ex.features[j];
                if x != 0.0 {
                    terms.push((cv, -x));
                }
            }
            p.add_constraint(format!("pred_{i}"), terms, Sense::Ge, gamma);
            row.push((pi, 1.0));
        }
        p.add_constraint(
            "budget_cap",
            row,
            Sense::Le,
            b * ds.n() as f64 + RATE_TOL,
        );
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<(), FormulationError> {
    if m > 0.0 {
        Ok(())
    } else {
        Err(FormulationError::BadMargin(m))
    }
}

fn check_binary_columns(ds: &Dataset) -> Result<(), FormulationError> {
    for j in 1..=ds.p() {
        for ex in ds.examples() {
            let v = ex.features[j];
            if v != 0.0 && v != 1.0 {
                return Err(FormulationError::NonBinaryColumn(j));
            }
        }
    }
    Ok(())
}

/// Scoring-system program: integer coefficients over the given sets, loss
/// indicators, per-feature use costs plus a magnitude tiebreak, and the
/// operational constraints.
pub fn build_slim(
    ds: &Dataset,
    sets: &[InterpretabilitySet],
    penalty: &SlimPenalty,
    weights: ClassWeights,
    ops: &OperationalConstraints,
    margin: Option<f64>,
) -> Result<BuiltModel, FormulationError> {
    let pf = ds.p();
    if sets.len() != pf + 1 {
        return Err(FormulationError::SetCount {
            got: sets.len(),
            want: pf + 1,
        });
    }
    ops.validate(pf)?;
    let c0 = match &penalty.per_feature_c0 {
        Some(v) => {
            if v.len() != pf {
                return Err(FormulationError::PenaltyCount {
                    got: v.len(),
                    want: pf,
                });
            }
            v.clone()
        }
        None => vec![penalty.c0; pf],
    };
    for &c in &c0 {
        if c <= 0.0 {
            return Err(FormulationError::BadPenalty(c));
        }
    }
    let mut effective = sets.to_vec();
    apply_signs(&mut effective, &ops.signs, |id| vec![id])?;
    let margin = margin.unwrap_or_else(|| default_margin(ds));
    check_margin(margin)?;
    let min_c0 = c0.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = match penalty.l1_tiebreak {
        Some(e) => e,
        None => match default_l1_tiebreak(min_c0, ds.n(), &effective) {
            Ok(e) => e,
            Err(FormulationError::DegenerateL1Bound) => 0.0,
            Err(e) => return Err(e),
        },
    };
    let big_m = compute_big_m(ds, &effective, margin);

    let mut p = IntegerProgram::new();
    let mut coeff_vars = Vec::with_capacity(pf + 1);
    let mut selector_values: Vec<Vec<f64>> = Vec::with_capacity(pf + 1);
    let mut selectors_by_slot = Vec::with_capacity(pf + 1);
    for (slot, set) in effective.iter().enumerate() {
        let (lam, sel) = add_set_coefficient(&mut p, slot, set);
        coeff_vars.push(lam);
        selector_values.push(sel.iter().map(|&(_, v)| v).collect());
        selectors_by_slot.push(sel);
    }
    let mut per_feature: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for j in 1..=pf {
        let alpha = add_use_and_magnitude(
            &mut p,
            j,
            &effective[j],
            &selectors_by_slot[j],
            coeff_vars[j],
            c0[j - 1],
            eps,
        );
        per_feature.push(vec![(alpha, 1.0)]);
    }
    let psi = add_loss_block(&mut p, ds, weights, &big_m, &coeff_vars);
    let wiring = OpsWiring {
        sets: &effective,
        coeff_vars: &coeff_vars,
        big_m: &big_m,
        psi: Some(&psi),
        per_feature,
    };
    append_operational_constraints(&mut p, ds, ops, &wiring)?;

    Ok(BuiltModel {
        program: p,
        family: ModelFamily::Slim,
        sets: effective,
        weights,
        penalty: PenaltySpec::L0L1 { c0, eps },
        big_m,
        zero_excluded_by: zero_exclusion(ds, ops),
        coeff_vars,
        selector_values,
        rule_groups: Vec::new(),
    })
}

/// Level-set program: every coefficient selects exactly one admissible
/// value, priced by the level that contains it; the intercept rides along
/// unpriced.
pub fn build_pilm(
    ds: &Dataset,
    intercept_set: &InterpretabilitySet,
    levels: &[CoefficientLevel],
    weights: ClassWeights,
    ops: &OperationalConstraints,
    margin: Option<f64>,
) -> Result<BuiltModel, FormulationError> {
    let pf = ds.p();
    ops.validate(pf)?;
    if levels.is_empty() {
        return Err(FormulationError::EmptyLevel);
    }
    let mut seen: Vec<f64> = Vec::new();
    for lvl in levels {
        if lvl.values.is_empty() {
            return Err(FormulationError::EmptyLevel);
        }
        for &v in &lvl.values {
            if seen.contains(&v) {
                return Err(FormulationError::OverlappingLevels(v));
            }
            seen.push(v);
        }
    }
    for pair in levels.windows(2) {
        if pair[1].cost <= pair[0].cost {
            return Err(FormulationError::LevelCostsNotIncreasing);
        }
    }
    if !seen.contains(&0.0) {
        return Err(FormulationError::ZeroNotInLevels);
    }
    let union = InterpretabilitySet::from_values(seen).expect("level values are distinct");
    let mut effective = vec![intercept_set.clone()];
    effective.extend(std::iter::repeat_with(|| union.clone()).take(pf));
    apply_signs(&mut effective, &ops.signs, |id| vec![id])?;
    let margin = margin.unwrap_or_else(|| default_margin(ds));
    check_margin(margin)?;
    let big_m = compute_big_m(ds, &effective, margin);

    let mut p = IntegerProgram::new();
    let mut coeff_vars = Vec::with_capacity(pf + 1);
    let mut selector_values: Vec<Vec<f64>> = Vec::with_capacity(pf + 1);
    let (lam0, sel0) = add_set_coefficient(&mut p, 0, &effective[0]);
    coeff_vars.push(lam0);
    selector_values.push(sel0.iter().map(|&(_, v)| v).collect());
    let mut per_feature: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for j in 1..=pf {
        let set = &effective[j];
        let lam = p.add_var(
            format!("lam_{j}"),
            VarKind::Continuous,
            set.min(),
            set.max(),
            VarRole::Coefficient(j),
        );
        coeff_vars.push(lam);
        // One selector per admissible value, cost taken from its level;
        // exactly one fires, so lambda_j = the chosen value.
        let mut vals = Vec::new();
        let mut link = vec![(lam, 1.0)];
        let mut pick = Vec::new();
        let mut use_expr = Vec::new();
        for lvl in levels {
            for &v in &lvl.values {
                if !set.contains(v) {
                    continue;
                }
                let k = vals.len();
                let u = p.add_var(
                    format!("u_{j}_{k}"),
                    VarKind::Binary,
                    0.0,
                    1.0,
                    VarRole::ValueSelector {
                        coeff: j,
                        ordinal: k,
                    },
                );
                vals.push(v);
                link.push((u, -v));
                pick.push((u, 1.0));
                if lvl.cost != 0.0 {
                    p.set_objective_term(u, lvl.cost);
                }
                if v != 0.0 {
                    use_expr.push((u, 1.0));
                }
            }
        }
        p.add_constraint(format!("pick_{j}"), pick, Sense::Eq, 1.0);
        p.add_constraint(format!("val_{j}"), link, Sense::Eq, 0.0);
        selector_values.push(vals);
        per_feature.push(use_expr);
    }
    let psi = add_loss_block(&mut p, ds, weights, &big_m, &coeff_vars);
    let wiring = OpsWiring {
        sets: &effective,
        coeff_vars: &coeff_vars,
        big_m: &big_m,
        psi: Some(&psi),
        per_feature,
    };
    append_operational_constraints(&mut p, ds, ops, &wiring)?;

    Ok(BuiltModel {
        program: p,
        family: ModelFamily::Pilm,
        sets: effective,
        weights,
        penalty: PenaltySpec::Levels {
            levels: levels.to_vec(),
        },
        big_m,
        zero_excluded_by: zero_exclusion(ds, ops),
        coeff_vars,
        selector_values,
        rule_groups: Vec::new(),
    })
}

/// M-of-N rule table program: 0/1 rule coefficients with a flat cost each
/// and a nonpositive integer intercept. A solution selects N rules and
/// predicts positive when at least M = -intercept of them fire.
pub fn build_mofn(
    ds: &Dataset,
    c0: f64,
    weights: ClassWeights,
    ops: &OperationalConstraints,
    margin: Option<f64>,
) -> Result<BuiltModel, FormulationError> {
    let pf = ds.p();
    ops.validate(pf)?;
    check_binary_columns(ds)?;
    if c0 <= 0.0 {
        return Err(FormulationError::BadPenalty(c0));
    }
    let mut effective = vec![InterpretabilitySet::integer_range(-(pf as i64), 0)
        .expect("nonempty intercept range")];
    for _ in 0..pf {
        effective.push(InterpretabilitySet::integer_range(0, 1).expect("binary range"));
    }
    apply_signs(&mut effective, &ops.signs, |id| vec![id])?;
    let margin = margin.unwrap_or(0.5);
    check_margin(margin)?;
    let big_m = compute_big_m(ds, &effective, margin);

    let mut p = IntegerProgram::new();
    let mut coeff_vars = Vec::with_capacity(pf + 1);
    let mut selector_values = Vec::with_capacity(pf + 1);
    let mut per_feature: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for (slot, set) in effective.iter().enumerate() {
        let (lam, sel) = add_set_coefficient(&mut p, slot, set);
        coeff_vars.push(lam);
        selector_values.push(sel.iter().map(|&(_, v)| v).collect::<Vec<_>>());
        if slot > 0 {
            // The 0/1 coefficient is its own use indicator.
            p.set_objective_term(lam, c0);
            per_feature.push(vec![(lam, 1.0)]);
        }
    }
    let psi = add_loss_block(&mut p, ds, weights, &big_m, &coeff_vars);
    let wiring = OpsWiring {
        sets: &effective,
        coeff_vars: &coeff_vars,
        big_m: &big_m,
        psi: Some(&psi),
        per_feature,
    };
    append_operational_constraints(&mut p, ds, ops, &wiring)?;

    Ok(BuiltModel {
        program: p,
        family: ModelFamily::Mofn,
        sets: effective,
        weights,
        penalty: PenaltySpec::RuleL0 { c0 },
        big_m,
        zero_excluded_by: zero_exclusion(ds, ops),
        coeff_vars,
        selector_values,
        rule_groups: Vec::new(),
    })
}

/// Threshold-rule program: integer coefficients on 0/1 rule columns grouped
/// by parent feature, priced per feature used and per threshold beyond the
/// first, with all of a feature's coefficients agreeing in sign.
pub fn build_tilm(
    ds: &Dataset,
    rules: &BinaryRuleSet,
    sets: &[InterpretabilitySet],
    penalty: &TilmPenalty,
    weights: ClassWeights,
    ops: &OperationalConstraints,
    margin: Option<f64>,
) -> Result<BuiltModel, FormulationError> {
    let pf = ds.p();
    if rules.len() != pf {
        return Err(FormulationError::RuleCount {
            got: rules.len(),
            want: pf,
        });
    }
    if sets.len() != pf + 1 {
        return Err(FormulationError::SetCount {
            got: sets.len(),
            want: pf + 1,
        });
    }
    if penalty.max_thresholds < 1 {
        return Err(FormulationError::BadMaxThresholds);
    }
    if penalty.cf <= 0.0 {
        return Err(FormulationError::BadPenalty(penalty.cf));
    }
    if penalty.ct < 0.0 {
        return Err(FormulationError::BadPenalty(penalty.ct));
    }
    check_binary_columns(ds)?;
    let groups = rules.groups();
    ops.validate(groups.len())?;
    let mut effective = sets.to_vec();
    apply_signs(&mut effective, &ops.signs, |id| {
        groups[id - 1].iter().map(|&t| t + 1).collect()
    })?;
    let margin = margin.unwrap_or(0.5);
    check_margin(margin)?;
    let eps = match penalty.l1_tiebreak {
        Some(e) => e,
        None => {
            let max_l1: f64 = effective[1..].iter().map(|s| s.max_abs()).sum();
            if max_l1 == 0.0 {
                0.0
            } else {
                let mut cap = 1.0 / ds.n() as f64;
                cap = cap.min(penalty.cf);
                if penalty.ct > 0.0 {
                    cap = cap.min(penalty.ct);
                }
                cap / max_l1 / 2.0
            }
        }
    };
    let big_m = compute_big_m(ds, &effective, margin);

    let mut p = IntegerProgram::new();
    let mut coeff_vars = Vec::with_capacity(pf + 1);
    let mut selector_values: Vec<Vec<f64>> = Vec::with_capacity(pf + 1);
    let mut selectors_by_slot = Vec::with_capacity(pf + 1);
    for (slot, set) in effective.iter().enumerate() {
        let (lam, sel) = add_set_coefficient(&mut p, slot, set);
        coeff_vars.push(lam);
        selector_values.push(sel.iter().map(|&(_, v)| v).collect());
        selectors_by_slot.push(sel);
    }
    // Per-rule use indicators with the magnitude tiebreak; the per-rule cost
    // is zero, pricing happens at the feature level.
    let mut alphas = Vec::with_capacity(pf + 1);
    alphas.push(0);
    for t in 0..pf {
        let slot = t + 1;
        let alpha = add_use_and_magnitude(
            &mut p,
            slot,
            &effective[slot],
            &selectors_by_slot[slot],
            coeff_vars[slot],
            0.0,
            eps,
        );
        alphas.push(alpha);
    }
    let mut per_feature: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for (g, cols) in groups.iter().enumerate() {
        let nu = p.add_binary(format!("nu_{g}"), VarRole::FeatureUse(g));
        p.set_objective_term(nu, penalty.cf);
        let tau = p.add_var(
            format!("tau_{g}"),
            VarKind::Integer,
            0.0,
            (penalty.max_thresholds - 1) as f64,
            VarRole::ExtraThresholds(g),
        );
        if penalty.ct != 0.0 {
            p.set_objective_term(tau, penalty.ct);
        }
        // T * nu covers every rule of the feature; tau counts the rest
        // beyond the first, and its upper bound caps thresholds per feature.
        let mut cover = vec![(nu, cols.len() as f64)];
        let mut count = vec![(nu, -1.0), (tau, -1.0)];
        for &t in cols {
            cover.push((alphas[t + 1], -1.0));
            count.push((alphas[t + 1], 1.0));
        }
        p.add_constraint(format!("feature_cover_{g}"), cover, Sense::Ge, 0.0);
        p.add_constraint(format!("extra_count_{g}"), count, Sense::Eq, 0.0);
        let delta = p.add_binary(format!("delta_{g}"), VarRole::SignAgreement(g));
        for &t in cols {
            let slot = t + 1;
            let (lo, hi) = (effective[slot].min(), effective[slot].max());
            if hi > 0.0 {
                p.add_constraint(
                    format!("agree_hi_{g}_{t}"),
                    vec![(coeff_vars[slot], 1.0), (delta, -hi)],
                    Sense::Le,
                    0.0,
                );
            }
            if lo < 0.0 {
                // lambda >= lo * (1 - delta).
                p.add_constraint(
                    format!("agree_lo_{g}_{t}"),
                    vec![(coeff_vars[slot], 1.0), (delta, lo)],
                    Sense::Ge,
                    lo,
                );
            }
        }
        per_feature.push(vec![(nu, 1.0)]);
    }
    let psi = add_loss_block(&mut p, ds, weights, &big_m, &coeff_vars);
    let wiring = OpsWiring {
        sets: &effective,
        coeff_vars: &coeff_vars,
        big_m: &big_m,
        psi: Some(&psi),
        per_feature,
    };
    append_operational_constraints(&mut p, ds, ops, &wiring)?;

    Ok(BuiltModel {
        program: p,
        family: ModelFamily::Tilm,
        sets: effective,
        weights,
        penalty: PenaltySpec::ThresholdRules {
            cf: penalty.cf,
            ct: penalty.ct,
            eps,
            groups: groups.clone(),
        },
        big_m,
        zero_excluded_by: zero_exclusion(ds, ops),
        coeff_vars,
        selector_values,
        rule_groups: groups,
    })
}

/// Whether a coefficient vector satisfies the operational constraints using
/// the same margin semantics as the programs. `rule_groups` switches unit
/// ids from coefficient slots to parent features.
pub fn ops_feasible(
    ds: &Dataset,
    ops: &OperationalConstraints,
    lambda: &[f64],
    margin: f64,
    rule_groups: Option<&[Vec<usize>]>,
) -> bool {
    let used: Vec<bool> = match rule_groups {
        Some(groups) => {
            let mut u = vec![false];
            u.extend(groups.iter().map(|g| {
                g.iter().any(|&t| evaluate::is_nonzero(lambda[t + 1]))
            }));
            u
        }
        None => {
            let mut u = vec![false];
            u.extend(lambda[1..].iter().map(|&v| evaluate::is_nonzero(v)));
            u
        }
    };
    if let Some(k) = ops.max_model_size {
        if used[1..].iter().filter(|&&b| b).count() > k {
            return false;
        }
    }
    for &(id, sign) in &ops.signs {
        let slots: Vec<usize> = match rule_groups {
            Some(groups) => groups[id - 1].iter().map(|&t| t + 1).collect(),
            None => vec![id],
        };
        for s in slots {
            match sign {
                Sign::Free => {}
                Sign::NonNeg => {
                    if lambda[s] < 0.0 {
                        return false;
                    }
                }
                Sign::NonPos => {
                    if lambda[s] > 0.0 {
                        return false;
                    }
                }
            }
        }
    }
    for &(a, b) in &ops.either_or {
        if used[a] && used[b] {
            return false;
        }
    }
    for (ante, cons) in &ops.if_then {
        if ante.iter().any(|&a| used[a]) && !used[*cons] {
            return false;
        }
    }
    for &(leaf, anc) in &ops.hierarchy {
        if used[leaf] && !used[anc] {
            return false;
        }
    }
    if ops.max_fpr.is_none() && ops.max_fnr.is_none() && ops.prediction_budget.is_none() {
        return true;
    }
    let scores: Vec<f64> = ds
        .examples()
        .iter()
        .map(|ex| evaluate::score(lambda, &ex.features))
        .collect();
    if let Some(f) = ops.max_fpr {
        let neg = ds.negative_indices();
        let fp = neg.iter().filter(|&&i| scores[i] > -margin).count();
        if fp as f64 > f * neg.len() as f64 + RATE_TOL {
            return false;
        }
    }
    if let Some(f) = ops.max_fnr {
        let pos = ds.positive_indices();
        let fnx = pos.iter().filter(|&&i| scores[i] < margin).count();
        if fnx as f64 > f * pos.len() as f64 + RATE_TOL {
            return false;
        }
    }
    if let Some(b) = ops.prediction_budget {
        let pred = scores.iter().filter(|&&s| s > -margin).count();
        if pred as f64 > b * ds.n() as f64 + RATE_TOL {
            return false;
        }
    }
    true
}

/// Exhaustive training: enumerates every admissible coefficient vector,
/// filters by the operational constraints (plus per-feature sign agreement
/// and the threshold cap when `rule_groups` is given), and minimizes margin
/// loss plus penalty. Infeasible vectors score infinity, so a result with a
/// non-finite minimum means nothing was feasible.
pub fn brute_force_training(
    ds: &Dataset,
    sets: &[InterpretabilitySet],
    penalty: &PenaltySpec,
    weights: ClassWeights,
    ops: &OperationalConstraints,
    margin: f64,
    rule_groups: Option<&[Vec<usize>]>,
    max_thresholds: Option<usize>,
    budget: u128,
) -> Result<Enumeration, FormulationError> {
    let objective = |lambda: &[f64]| -> f64 {
        if !ops_feasible(ds, ops, lambda, margin, rule_groups) {
            return f64::INFINITY;
        }
        if let Some(groups) = rule_groups {
            for g in groups {
                let mut pos = false;
                let mut neg = false;
                let mut cnt = 0usize;
                for &t in g {
                    let v = lambda[t + 1];
                    if evaluate::is_nonzero(v) {
                        cnt += 1;
                        if v > 0.0 {
                            pos = true;
                        } else {
                            neg = true;
                        }
                    }
                }
                if pos && neg {
                    return f64::INFINITY;
                }
                if let Some(r) = max_thresholds {
                    if cnt > r {
                        return f64::INFINITY;
                    }
                }
            }
        }
        evaluate::weighted_margin_loss(ds, lambda, weights, margin)
            + evaluate::penalty_value(penalty, lambda)
    };
    Ok(milp::enumerate_assignments(sets, budget, objective)?)
}
