//! Direct evaluation of models on data: scores, losses, penalties, metrics.
//!
//! Everything here works straight from a coefficient vector. Solver outputs
//! are always re-scored through these functions; indicator variables from a
//! solve are never trusted for reporting.

use serde::{Deserialize, Serialize};

use crate::data::{ClassWeights, Dataset, Example};
use crate::exec;

/// Linear score lambda . x (x includes the intercept slot).
pub fn score(lambda: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(lambda.len(), x.len());
    let mut s = 0.0;
    for (l, v) in lambda.iter().zip(x) {
        s += l * v;
    }
    s
}

/// Decision rule: scores at exactly 0 predict +1.
pub fn predict(s: f64) -> i8 {
    if s >= 0.0 {
        1
    } else {
        -1
    }
}

/// Training-loss indicator: y * score <= 0 counts as an error for either
/// class, so the zero vector scores loss 1 and optimizers avoid ties.
fn loss_indicator(label: i8, s: f64) -> bool {
    (label as f64) * s <= 0.0
}

/// Weighted 0-1 training loss (1/N) * sum 2*w_y * 1{y * score <= 0}.
pub fn weighted_zero_one_loss(ds: &Dataset, lambda: &[f64], w: ClassWeights) -> f64 {
    let n = ds.n() as f64;
    exec::blocked_sum(ds.examples(), |ex| {
        if loss_indicator(ex.label, score(lambda, &ex.features)) {
            w.multiplier_for(ex.label)
        } else {
            0.0
        }
    }) / n
}

/// Margin training loss (1/N) * sum 2*w_y * 1{y * score < margin}: the loss
/// the Big-M formulations price. Coincides with `weighted_zero_one_loss`
/// whenever scores are integer-valued and margin is in (0, 1].
pub fn weighted_margin_loss(ds: &Dataset, lambda: &[f64], w: ClassWeights, margin: f64) -> f64 {
    let n = ds.n() as f64;
    exec::blocked_sum(ds.examples(), |ex| {
        if (ex.label as f64) * score(lambda, &ex.features) < margin {
            w.multiplier_for(ex.label)
        } else {
            0.0
        }
    }) / n
}

/// Same loss restricted to `active` examples while keeping the original
/// denominator `denom_n`; removing an example deletes its term without
/// rescaling the rest, which is what optimality-preserving reduction needs.
pub fn weighted_zero_one_loss_masked(
    ds: &Dataset,
    lambda: &[f64],
    w: ClassWeights,
    active: &[bool],
    denom_n: usize,
) -> f64 {
    assert_eq!(active.len(), ds.n());
    let mut acc = 0.0;
    for (ex, &on) in ds.examples().iter().zip(active) {
        if on && loss_indicator(ex.label, score(lambda, &ex.features)) {
            acc += w.multiplier_for(ex.label);
        }
    }
    acc / denom_n as f64
}

/// One level of a personalized coefficient-set penalty: every value in
/// `values` costs `cost` when used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientLevel {
    pub cost: f64,
    pub values: Vec<f64>,
}

/// Interpretability penalty, evaluated directly from coefficients.
/// The intercept (index 0) is never penalized.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    /// c0_j per nonzero coefficient plus eps per unit of magnitude.
    L0L1 { c0: Vec<f64>, eps: f64 },
    /// Cost of the level set each coefficient value belongs to.
    Levels { levels: Vec<CoefficientLevel> },
    /// Flat cost per selected 0/1 rule (L1 = L0 for binary coefficients).
    RuleL0 { c0: f64 },
    /// Per-feature cost, per-extra-threshold cost, and an L1 tiebreak over
    /// rule columns grouped by parent feature.
    ThresholdRules {
        cf: f64,
        ct: f64,
        eps: f64,
        groups: Vec<Vec<usize>>,
    },
}

const NNZ_TOL: f64 = 1e-9;

pub(crate) fn is_nonzero(v: f64) -> bool {
    v.abs() > NNZ_TOL
}

/// Count of nonzero non-intercept coefficients.
pub fn model_size(lambda: &[f64]) -> usize {
    lambda[1..].iter().filter(|&&v| is_nonzero(v)).count()
}

/// Penalty value for a coefficient vector (intercept at index 0).
pub fn penalty_value(spec: &PenaltySpec, lambda: &[f64]) -> f64 {
    match spec {
        PenaltySpec::L0L1 { c0, eps } => {
            let mut acc = 0.0;
            for (j, &v) in lambda[1..].iter().enumerate() {
                if is_nonzero(v) {
                    acc += c0[j] + eps * v.abs();
                }
            }
            acc
        }
        PenaltySpec::Levels { levels } => {
            let mut acc = 0.0;
            for &v in &lambda[1..] {
                let lvl = levels
                    .iter()
                    .find(|l| l.values.iter().any(|&u| u == v))
                    .expect("coefficient value outside every level set");
                acc += lvl.cost;
            }
            acc
        }
        PenaltySpec::RuleL0 { c0 } => {
            c0 * lambda[1..].iter().filter(|&&v| is_nonzero(v)).count() as f64
        }
        PenaltySpec::ThresholdRules { cf, ct, eps, groups } => {
            let mut acc = 0.0;
            for g in groups {
                let used = g.iter().filter(|&&t| is_nonzero(lambda[t + 1])).count();
                if used > 0 {
                    acc += cf + ct * (used - 1) as f64;
                }
                for &t in g {
                    acc += eps * lambda[t + 1].abs();
                }
            }
            acc
        }
    }
}

/// Loss plus penalty: the quantity every solver path must reproduce.
pub fn objective(ds: &Dataset, lambda: &[f64], w: ClassWeights, penalty: &PenaltySpec) -> f64 {
    weighted_zero_one_loss(ds, lambda, w) + penalty_value(penalty, lambda)
}

/// Classification metrics under the reporting decision rule sign(0) = +1.
///
/// Note `error` can differ from the training loss on examples scoring
/// exactly 0: the loss counts them against both classes, the decision rule
/// calls them positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub error: f64,
    pub weighted_error: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub n_errors: usize,
    pub predicted_positive_fraction: f64,
}

pub fn metrics(ds: &Dataset, lambda: &[f64], w: ClassWeights) -> Metrics {
    let mut errors = 0usize;
    let mut werr = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut npos = 0usize;
    let mut nneg = 0usize;
    let mut predicted_pos = 0usize;
    for ex in ds.examples() {
        let pred = predict(score(lambda, &ex.features));
        if pred > 0 {
            predicted_pos += 1;
        }
        if ex.label > 0 {
            npos += 1;
            if pred > 0 {
                tp += 1;
            }
        } else {
            nneg += 1;
            if pred > 0 {
                fp += 1;
            }
        }
        if pred != ex.label {
            errors += 1;
            werr += w.multiplier_for(ex.label);
        }
    }
    let n = ds.n() as f64;
    Metrics {
        error: errors as f64 / n,
        weighted_error: werr / n,
        tpr: if npos > 0 { tp as f64 / npos as f64 } else { f64::NAN },
        fpr: if nneg > 0 { fp as f64 / nneg as f64 } else { f64::NAN },
        n_errors: errors,
        predicted_positive_fraction: predicted_pos as f64 / n,
    }
}

/// Predictions for every example under the reporting rule.
pub fn predictions(ds: &Dataset, lambda: &[f64]) -> Vec<i8> {
    ds.examples()
        .iter()
        .map(|ex: &Example| predict(score(lambda, &ex.features)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;

    fn tiny() -> Dataset {
        Dataset::from_rows(
            vec!["a".into(), "b".into()],
            vec![FeatureKind::Real, FeatureKind::Real],
            vec![
                (vec![1.0, 1.0], 1),
                (vec![-1.0, -1.0], -1),
                (vec![1.0, -1.0], 1),
                (vec![-1.0, 1.0], -1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_vector_scores_loss_one_unweighted() {
        let ds = tiny();
        let loss = weighted_zero_one_loss(&ds, &[0.0, 0.0, 0.0], ClassWeights::unweighted());
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn ties_count_against_both_classes_in_loss_but_not_in_error() {
        let ds = Dataset::from_rows(
            vec!["a".into()],
            vec![FeatureKind::Real],
            vec![(vec![0.0], 1), (vec![0.0], -1)],
        )
        .unwrap();
        // Scores are 0 for both rows: loss 1, decision-rule error 1/2.
        let lambda = [0.0, 1.0];
        assert_eq!(
            weighted_zero_one_loss(&ds, &lambda, ClassWeights::unweighted()),
            1.0
        );
        let m = metrics(&ds, &lambda, ClassWeights::unweighted());
        assert_eq!(m.error, 0.5);
        assert_eq!(m.predicted_positive_fraction, 1.0);
    }

    #[test]
    fn separating_model_has_zero_loss() {
        let ds = tiny();
        let loss = weighted_zero_one_loss(&ds, &[0.0, 1.0, 0.0], ClassWeights::unweighted());
        assert_eq!(loss, 0.0);
        let m = metrics(&ds, &[0.0, 1.0, 0.0], ClassWeights::unweighted());
        assert_eq!(m.error, 0.0);
        assert_eq!(m.tpr, 1.0);
        assert_eq!(m.fpr, 0.0);
    }

    #[test]
    fn masked_loss_keeps_original_denominator() {
        let ds = tiny();
        let w = ClassWeights::unweighted();
        let lambda = [0.0, 0.0, 0.0];
        let active = [true, true, false, false];
        let l = weighted_zero_one_loss_masked(&ds, &lambda, w, &active, ds.n());
        assert_eq!(l, 0.5);
    }

    #[test]
    fn l0l1_penalty() {
        let spec = PenaltySpec::L0L1 {
            c0: vec![0.01, 0.02],
            eps: 1e-3,
        };
        let v = penalty_value(&spec, &[5.0, 2.0, 0.0]);
        assert!((v - (0.01 + 2e-3)).abs() < 1e-15);
        assert_eq!(penalty_value(&spec, &[7.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn level_penalty_matches_level_of_value() {
        let spec = PenaltySpec::Levels {
            levels: vec![
                CoefficientLevel { cost: 0.0, values: vec![0.0] },
                CoefficientLevel { cost: 0.01, values: vec![-1.0, 1.0, 2.0] },
                CoefficientLevel { cost: 0.05, values: vec![20.0] },
            ],
        };
        let v = penalty_value(&spec, &[3.0, 2.0, 20.0, 0.0]);
        assert!((v - 0.06).abs() < 1e-15);
    }

    #[test]
    fn threshold_rule_penalty_counts_features_and_extras() {
        let spec = PenaltySpec::ThresholdRules {
            cf: 0.1,
            ct: 0.02,
            eps: 0.0,
            groups: vec![vec![0, 1, 2], vec![3, 4]],
        };
        // Two rules used in group 0, none in group 1.
        let v = penalty_value(&spec, &[0.0, 1.0, -2.0, 0.0, 0.0, 0.0]);
        assert!((v - 0.12).abs() < 1e-15);
    }

    #[test]
    fn model_size_ignores_intercept() {
        assert_eq!(model_size(&[5.0, 0.0, 1.0, -2.0]), 2);
        assert_eq!(model_size(&[5.0, 0.0, 0.0, 0.0]), 0);
    }
}
