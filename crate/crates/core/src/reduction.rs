//! Optimality-preserving training-data reduction.
//!
//! A convex proxy of the training problem is solved once for its optimum and
//! baseline predictions, then re-solved N times, each variant forcing one
//! example to be classified against its baseline. When a variant's optimum
//! exceeds the proxy optimum by more than the level-set width, every
//! classifier in the level set (and so every optimal classifier of the
//! original problem, when the width is valid) must agree with the baseline
//! on that example, and the example can be dropped before the integer solve.
//!
//! Proxies get one explicit score variable per example tied by an equality
//! row, so each variant differs from the baseline only in a single variable
//! bound and re-solves warm from the previous basis.

use std::io::{self, Write};

use thiserror::Error;

use crate::data::Dataset;
use crate::evaluate::{self, PenaltySpec};
use crate::formulation::BuiltModel;
use crate::program::Sense;
use crate::simplex::{LpEngine, LpError, LpProblem, LpStatus};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("proxy problem is {0}")]
    ProxyUnsolvable(&'static str),
    #[error("level-set width must be nonnegative, got {0}")]
    BadWidth(f64),
    #[error("the hinge proxy needs a per-feature use-cost penalty")]
    UnsupportedPenalty,
    #[error("feasible objective {feasible} is below the relaxation optimum {relaxed}")]
    OrderingViolated { feasible: f64, relaxed: f64 },
    #[error("certificate constant must be positive, got {0}")]
    NonPositiveConstant(f64),
}

/// Which convex proxy stands in for the training problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyKind {
    /// The built program with integrality dropped; its optimum
    /// underestimates the training optimum, so [`epsilon_from_feasible`]
    /// widths are valid.
    IpRelaxation,
    /// A hinge LP over the coefficient boxes, normalized so the hinge term
    /// upper-bounds the margin loss; widths must come from a level-set
    /// certificate.
    HingeLoss,
}

#[derive(Debug, Clone)]
pub struct ReductionConfig {
    pub proxy: ProxyKind,
    /// Level-set width epsilon: how far above the proxy optimum a
    /// classifier may sit and still be considered a candidate optimum.
    pub level_set_width: f64,
}

/// Width-independent part of a reduction run: one baseline solve plus one
/// variant solve per example.
#[derive(Debug, Clone)]
pub struct ReductionAnalysis {
    pub proxy_optimum: f64,
    /// Baseline predictions of the proxy optimizer (scores at 0 predict +1).
    pub baseline_labels: Vec<i8>,
    /// Variant optimum per example; None when the variant is infeasible and
    /// the example is unconditionally fixed.
    pub variant_objectives: Vec<Option<f64>>,
}

impl ReductionAnalysis {
    /// Removal decisions at a given width: removed when the variant optimum
    /// exceeds proxy optimum + width (with an absolute guard against float
    /// noise in the comparison), or when the variant is infeasible.
    pub fn removal_flags(&self, width: f64) -> Vec<bool> {
        let cap = self.proxy_optimum + width + 1e-12;
        self.variant_objectives
            .iter()
            .map(|v| match v {
                Some(obj) => *obj > cap,
                None => true,
            })
            .collect()
    }

    /// Packages the analysis as a result at one width, so several widths
    /// can reuse a single set of variant solves.
    pub fn at_width(self, width: f64) -> Result<ReductionResult, ReductionError> {
        if width < 0.0 {
            return Err(ReductionError::BadWidth(width));
        }
        let removed = self.removal_flags(width);
        let kept_indices: Vec<usize> = removed
            .iter()
            .enumerate()
            .filter(|(_, &r)| !r)
            .map(|(i, _)| i)
            .collect();
        let removed_indices: Vec<usize> = removed
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i)
            .collect();
        Ok(ReductionResult {
            analysis: self,
            level_set_width: width,
            removed,
            kept_indices,
            removed_indices,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub analysis: ReductionAnalysis,
    pub level_set_width: f64,
    pub removed: Vec<bool>,
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
}

impl ReductionResult {
    /// The reduced training data, original order preserved.
    pub fn reduced_dataset(&self, ds: &Dataset) -> Dataset {
        ds.subset(&self.kept_indices)
    }

    /// Fixed label of a removed example: the baseline prediction every
    /// level-set classifier must reproduce.
    pub fn fixed_label(&self, i: usize) -> i8 {
        self.analysis.baseline_labels[i]
    }

    /// One row per example: index, baseline label, variant objective
    /// (inf when the variant is infeasible), removed flag.
    pub fn write_report_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,baseline_label,variant_objective,removed")?;
        for (i, obj) in self.analysis.variant_objectives.iter().enumerate() {
            let cell = match obj {
                Some(v) => format!("{v}"),
                None => "inf".to_string(),
            };
            writeln!(
                w,
                "{},{},{},{}",
                i,
                self.analysis.baseline_labels[i],
                cell,
                self.removed[i]
            )?;
        }
        Ok(())
    }
}

struct ProxyLp {
    engine: LpEngine,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Column of each example's score variable.
    score_cols: Vec<usize>,
}

/// Relaxation proxy: the built program's columns with their declared bounds
/// (integrality is simply not imposed) plus score variables.
fn relaxation_proxy(ds: &Dataset, model: &BuiltModel) -> ProxyLp {
    let p = &model.program;
    let base = p.n_vars();
    let ncols = base + ds.n();
    let mut cost = vec![0.0; ncols];
    for &(v, c) in &p.objective {
        cost[v] += c;
    }
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = p
        .constraints
        .iter()
        .map(|c| (c.terms.clone(), c.sense, c.rhs))
        .collect();
    let mut score_cols = Vec::with_capacity(ds.n());
    for (i, ex) in ds.examples().iter().enumerate() {
        let s = base + i;
        let mut terms = vec![(s, 1.0)];
        for (j, &cv) in model.coeff_vars.iter().enumerate() {
            let x = ex.features[j];
            if x != 0.0 {
                terms.push((cv, -x));
            }
        }
        rows.push((terms, Sense::Eq, 0.0));
        score_cols.push(s);
    }
    let mut lower = Vec::with_capacity(ncols);
    let mut upper = Vec::with_capacity(ncols);
    for v in &p.vars {
        lower.push(v.lower);
        upper.push(v.upper);
    }
    lower.extend(std::iter::repeat(f64::NEG_INFINITY).take(ds.n()));
    upper.extend(std::iter::repeat(f64::INFINITY).take(ds.n()));
    let engine = LpEngine::new(LpProblem {
        ncols,
        cost,
        constant: p.objective_constant,
        rows,
    });
    ProxyLp {
        engine,
        lower,
        upper,
        score_cols,
    }
}

/// Hinge proxy: coefficients over their convex boxes, relaxed use and
/// magnitude carriers, and hinge terms normalized by the margin so each
/// upper-bounds its example's loss indicator.
fn hinge_proxy(ds: &Dataset, model: &BuiltModel) -> Result<ProxyLp, ReductionError> {
    let (c0, eps) = match &model.penalty {
        PenaltySpec::L0L1 { c0, eps } => (c0.clone(), *eps),
        _ => return Err(ReductionError::UnsupportedPenalty),
    };
    let pf = ds.p();
    let n = ds.n();
    let gamma = model.big_m.margin;
    // Column layout: lambda (P+1) | alpha (P) | beta (P) | hinge (N) | score (N).
    let lam = |j: usize| j;
    let alpha = |j: usize| pf + j; // j is 1-based, so this lands after lambda.
    let beta = |j: usize| 2 * pf + j;
    let hinge = |i: usize| 3 * pf + 1 + i;
    let score = |i: usize| 3 * pf + 1 + n + i;
    let ncols = 3 * pf + 1 + 2 * n;
    let mut cost = vec![0.0; ncols];
    let mut lower = vec![f64::NEG_INFINITY; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for (slot, set) in model.sets.iter().enumerate() {
        lower[lam(slot)] = set.min();
        upper[lam(slot)] = set.max();
    }
    for j in 1..=pf {
        let set = &model.sets[j];
        lower[alpha(j)] = 0.0;
        upper[alpha(j)] = 1.0;
        cost[alpha(j)] = c0[j - 1];
        let (lo, hi) = (set.min(), set.max());
        if hi != 0.0 {
            rows.push((vec![(lam(j), 1.0), (alpha(j), -hi)], Sense::Le, 0.0));
        }
        if lo != 0.0 {
            rows.push((vec![(lam(j), 1.0), (alpha(j), -lo)], Sense::Ge, 0.0));
        }
        lower[beta(j)] = 0.0;
        upper[beta(j)] = set.max_abs();
        cost[beta(j)] = eps;
        rows.push((vec![(lam(j), 1.0), (beta(j), -1.0)], Sense::Le, 0.0));
        rows.push((vec![(lam(j), 1.0), (beta(j), 1.0)], Sense::Ge, 0.0));
    }
    let nf = n as f64;
    for (i, ex) in ds.examples().iter().enumerate() {
        lower[hinge(i)] = 0.0;
        cost[hinge(i)] = model.weights.multiplier_for(ex.label) / nf;
        let mut terms = vec![(score(i), 1.0)];
        for j in 0..=pf {
            let x = ex.features[j];
            if x != 0.0 {
                terms.push((lam(j), -x));
            }
        }
        rows.push((terms, Sense::Eq, 0.0));
        // h_i >= 1 - y_i s_i / gamma, so h_i >= 1 whenever the margin is
        // missed entirely.
        rows.push((
            vec![(hinge(i), 1.0), (score(i), ex.label as f64 / gamma)],
            Sense::Ge,
            1.0,
        ));
    }
    let engine = LpEngine::new(LpProblem {
        ncols,
        cost,
        constant: 0.0,
        rows,
    });
    Ok(ProxyLp {
        engine,
        lower,
        upper,
        score_cols: (0..n).map(score).collect(),
    })
}

/// Solves the proxy once for the baseline, then one variant per example; the
/// variant flips only one score bound, so each re-solve starts warm from
/// the previous optimal basis.
pub fn analyze(
    ds: &Dataset,
    model: &BuiltModel,
    proxy: ProxyKind,
) -> Result<ReductionAnalysis, ReductionError> {
    let mut lp = match proxy {
        ProxyKind::IpRelaxation => relaxation_proxy(ds, model),
        ProxyKind::HingeLoss => hinge_proxy(ds, model)?,
    };
    let base = lp.engine.solve(&lp.lower, &lp.upper)?;
    match base.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(ReductionError::ProxyUnsolvable("infeasible")),
        LpStatus::Unbounded => return Err(ReductionError::ProxyUnsolvable("unbounded")),
    }
    let proxy_optimum = base.objective;
    let baseline_labels: Vec<i8> = lp
        .score_cols
        .iter()
        .map(|&c| evaluate::predict(base.x[c]))
        .collect();
    let mut variant_objectives = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let col = lp.score_cols[i];
        let (saved_lo, saved_hi) = (lp.lower[col], lp.upper[col]);
        if baseline_labels[i] > 0 {
            lp.upper[col] = 0.0;
        } else {
            lp.lower[col] = 0.0;
        }
        let variant = lp.engine.solve(&lp.lower, &lp.upper)?;
        variant_objectives.push(match variant.status {
            LpStatus::Optimal => Some(variant.objective),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => return Err(ReductionError::ProxyUnsolvable("unbounded")),
        });
        lp.lower[col] = saved_lo;
        lp.upper[col] = saved_hi;
    }
    Ok(ReductionAnalysis {
        proxy_optimum,
        baseline_labels,
        variant_objectives,
    })
}

pub fn reduce(
    ds: &Dataset,
    model: &BuiltModel,
    config: &ReductionConfig,
) -> Result<ReductionResult, ReductionError> {
    if config.level_set_width < 0.0 {
        return Err(ReductionError::BadWidth(config.level_set_width));
    }
    analyze(ds, model, config.proxy)?.at_width(config.level_set_width)
}

/// Level-set width from any feasible training objective and the relaxation
/// optimum: every training optimum lies within this width of the proxy
/// optimum, since the relaxation underestimates and the feasible objective
/// overestimates the training optimum.
pub fn epsilon_from_feasible(feasible: f64, relaxed: f64) -> Result<f64, ReductionError> {
    if feasible < relaxed - 1e-9 {
        return Err(ReductionError::OrderingViolated { feasible, relaxed });
    }
    Ok((feasible - relaxed).max(0.0))
}

/// The guess-free width: the zero vector is always feasible with zero
/// penalty, and its loss counts every example (ties penalize both classes).
pub fn epsilon_max(ds: &Dataset, model: &BuiltModel, relaxed: f64) -> Result<f64, ReductionError> {
    let zero = vec![0.0; model.n_coefficients()];
    let z0 = evaluate::weighted_zero_one_loss(ds, &zero, model.weights);
    epsilon_from_feasible(z0, relaxed)
}

/// Analytic constants certifying that a proxy loss's level set covers the
/// training optima (supplied per proxy; not derived here).
#[derive(Debug, Clone, Copy)]
pub struct LevelSetCertificate {
    /// Lipschitz constant of the proxy objective near its optimum.
    pub lipschitz: f64,
    /// Radius of the Lipschitz neighborhood.
    pub radius: f64,
    /// Distance beyond which the proxy objective must have risen by c_psi.
    pub c_lambda: f64,
    /// Required objective rise at distance c_lambda.
    pub c_psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateOutcome {
    /// The certified width to use as level_set_width.
    Satisfied { epsilon: f64 },
    /// The curvature rise does not dominate twice the width (strictly).
    Violated { epsilon: f64 },
}

/// The sufficient condition: with epsilon = lipschitz * c_lambda, the
/// certificate holds iff c_psi > 2 * epsilon (strict).
pub fn check_level_set_certificate(
    cert: &LevelSetCertificate,
) -> Result<CertificateOutcome, ReductionError> {
    for v in [cert.lipschitz, cert.radius, cert.c_lambda, cert.c_psi] {
        if v <= 0.0 {
            return Err(ReductionError::NonPositiveConstant(v));
        }
    }
    let epsilon = cert.lipschitz * cert.c_lambda;
    if cert.c_psi > 2.0 * epsilon {
        Ok(CertificateOutcome::Satisfied { epsilon })
    } else {
        Ok(CertificateOutcome::Violated { epsilon })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassWeights, Dataset, FeatureKind};
    use crate::formulation::{
        build_slim, brute_force_training, OperationalConstraints, SlimPenalty,
    };
    use crate::interp::InterpretabilitySet;
    use crate::milp::{self, SolveOptions, SolveStatus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(rows: Vec<(Vec<f64>, i8)>) -> Dataset {
        let p = rows[0].0.len();
        let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        let kinds = vec![FeatureKind::Real; p];
        Dataset::from_rows(names, kinds, rows).unwrap()
    }

    fn range_sets(p: usize, lo: i64, hi: i64) -> Vec<InterpretabilitySet> {
        (0..=p)
            .map(|_| InterpretabilitySet::integer_range(lo, hi).unwrap())
            .collect()
    }

    fn slim_penalty(c0: f64) -> SlimPenalty {
        SlimPenalty {
            c0,
            per_feature_c0: None,
            l1_tiebreak: None,
        }
    }

    fn random_instance(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(Vec<f64>, i8)> = (0..n)
            .map(|_| {
                let y = if rng.gen_bool(0.5) { 1 } else { -1 };
                let f: Vec<f64> = (0..2)
                    .map(|_| {
                        let centered = y as f64 + rng.gen_range(-2..=2) as f64;
                        centered.clamp(-2.0, 2.0)
                    })
                    .collect();
                (f, y)
            })
            .collect();
        tiny(rows)
    }

    /// First feature separates with margin 1; second is noise. A unit
    /// coefficient reaches zero loss, so with a small use cost the
    /// relaxation sits close to the training optimum and exact widths
    /// certify real removals.
    fn separable_instance(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(Vec<f64>, i8)> = (0..n)
            .map(|_| {
                let y: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
                let f = vec![
                    (y as i64 * rng.gen_range(1..=2)) as f64,
                    rng.gen_range(-2..=2) as f64,
                ];
                (f, y)
            })
            .collect();
        tiny(rows)
    }

    #[test]
    fn huge_width_removes_nothing() {
        let ds = random_instance(3, 14);
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let r = reduce(
            &ds,
            &model,
            &ReductionConfig {
                proxy: ProxyKind::IpRelaxation,
                level_set_width: 100.0,
            },
        )
        .unwrap();
        assert!(r.removed_indices.is_empty());
        assert_eq!(r.kept_indices.len(), ds.n());
    }

    #[test]
    fn negative_width_rejected() {
        let ds = random_instance(4, 8);
        let model = build_slim(
            &ds,
            &range_sets(2, -1, 1),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        assert!(matches!(
            reduce(
                &ds,
                &model,
                &ReductionConfig {
                    proxy: ProxyKind::IpRelaxation,
                    level_set_width: -0.1,
                }
            ),
            Err(ReductionError::BadWidth(_))
        ));
    }

    /// Reduced-data training with the original denominator: removed terms
    /// drop out, nothing rescales, so argmins must coincide when every
    /// removal is sound.
    fn argmins_with_mask(
        ds: &Dataset,
        model: &crate::formulation::BuiltModel,
        active: &[bool],
    ) -> (f64, Vec<Vec<f64>>) {
        let margin = model.big_m.margin;
        let obj = |lambda: &[f64]| {
            let mut acc = 0.0;
            for (ex, &on) in ds.examples().iter().zip(active) {
                if on && (ex.label as f64) * evaluate::score(lambda, &ex.features) < margin {
                    acc += model.weights.multiplier_for(ex.label);
                }
            }
            acc / ds.n() as f64 + evaluate::penalty_value(&model.penalty, lambda)
        };
        let e = milp::enumerate_assignments(&model.sets, 1 << 24, obj).unwrap();
        (e.minimum, e.argmins)
    }

    #[test]
    fn reduced_training_preserves_argmin_sets() {
        let mut checked_nonempty = 0;
        for seed in 0..8u64 {
            let ds = if seed < 6 {
                separable_instance(seed, 12)
            } else {
                random_instance(seed, 12)
            };
            if ds.n_positive() == 0 || ds.n_negative() == 0 {
                continue;
            }
            // The equivalence needs the kept set to still anchor the
            // optimum: with a vanishing use cost the exact width removes
            // every example and intercept-only models win on the remnant,
            // so the use cost is kept large enough for partial removal.
            let model = build_slim(
                &ds,
                &range_sets(2, -2, 2),
                &slim_penalty(if seed < 6 { 0.004 } else { 0.03 }),
                ClassWeights::unweighted(),
                &OperationalConstraints::default(),
                None,
            )
            .unwrap();
            // Exact training optimum supplies the tightest valid width.
            let opt = milp::solve(&model.program, &SolveOptions::default()).unwrap();
            assert_eq!(opt.status, SolveStatus::Optimal);
            let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
            let width = epsilon_from_feasible(opt.objective, analysis.proxy_optimum).unwrap();
            let removed = analysis.removal_flags(width);
            let all_active = vec![true; ds.n()];
            let kept: Vec<bool> = removed.iter().map(|r| !r).collect();
            let (zn, argn) = argmins_with_mask(&ds, &model, &all_active);
            let (zm, argm) = argmins_with_mask(&ds, &model, &kept);
            // Same argmin set; reduced objectives differ from full ones by
            // the constant contribution of removed examples.
            assert_eq!(argn.len(), argm.len(), "seed {seed}");
            for (a, b) in argn.iter().zip(&argm) {
                assert_eq!(a, b, "seed {seed}");
            }
            assert!(zm <= zn + 1e-12);
            // Every removed example's fixed label matches every optimal
            // classifier's prediction.
            for (i, &r) in removed.iter().enumerate() {
                if !r {
                    continue;
                }
                checked_nonempty += 1;
                for lam in &argn {
                    let s = evaluate::score(lam, &ds.examples()[i].features);
                    assert_eq!(
                        evaluate::predict(s),
                        analysis.baseline_labels[i],
                        "seed {seed} example {i}"
                    );
                }
            }
        }
        assert!(checked_nonempty > 0, "no removals exercised across seeds");
    }

    #[test]
    fn width_grid_removals_are_nested() {
        let ds = random_instance(11, 16);
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
        let e_max = epsilon_max(&ds, &model, analysis.proxy_optimum).unwrap();
        let widths: Vec<f64> = (0..10).map(|k| e_max * k as f64 / 9.0).collect();
        let mut prev: Option<Vec<bool>> = None;
        for w in widths {
            let flags = analysis.removal_flags(w);
            if let Some(p) = &prev {
                // Larger width can only keep more: removed(w2) subset of
                // removed(w1) for w1 <= w2.
                for (now, before) in flags.iter().zip(p) {
                    assert!(!now || *before);
                }
            }
            prev = Some(flags);
        }
    }

    #[test]
    fn rate_cap_makes_variants_infeasible() {
        let ds = tiny(vec![
            (vec![1.0, 0.0], 1),
            (vec![2.0, 1.0], 1),
            (vec![-1.0, 0.0], -1),
            (vec![-2.0, -1.0], -1),
        ]);
        let ops = OperationalConstraints {
            max_fnr: Some(0.0),
            ..Default::default()
        };
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &ops,
            None,
        )
        .unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
        // Every positive is pinned correct by the rate cap, so flipping one
        // is impossible and the variant reports infeasible.
        for &i in &ds.positive_indices() {
            assert_eq!(analysis.baseline_labels[i], 1);
            assert!(analysis.variant_objectives[i].is_none(), "example {i}");
        }
        let flags = analysis.removal_flags(0.0);
        for &i in &ds.positive_indices() {
            assert!(flags[i]);
        }
    }

    #[test]
    fn hinge_proxy_runs_and_nests() {
        let ds = random_instance(21, 14);
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::HingeLoss).unwrap();
        assert!(analysis.proxy_optimum >= -1e-9);
        let a = analysis.removal_flags(0.05);
        let b = analysis.removal_flags(0.2);
        for (wide, narrow) in b.iter().zip(&a) {
            assert!(!wide || *narrow);
        }
        // The hinge term upper-bounds each loss indicator, so the proxy
        // optimum cannot fall below the relaxation optimum minus penalty
        // slack; sanity-check it is at least the all-zero hinge value times
        // zero (nonnegative).
        let r = reduce(
            &ds,
            &model,
            &ReductionConfig {
                proxy: ProxyKind::HingeLoss,
                level_set_width: 0.5,
            },
        )
        .unwrap();
        assert_eq!(r.kept_indices.len() + r.removed_indices.len(), ds.n());
    }

    #[test]
    fn hinge_proxy_rejects_rule_penalties() {
        let ds = tiny(vec![(vec![1.0], 1), (vec![0.0], -1)]);
        let model = crate::formulation::build_mofn(
            &ds,
            0.01,
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        assert!(matches!(
            analyze(&ds, &model, ProxyKind::HingeLoss),
            Err(ReductionError::UnsupportedPenalty)
        ));
    }

    #[test]
    fn epsilon_helpers() {
        assert_eq!(epsilon_from_feasible(0.5, 0.2).unwrap(), 0.3);
        assert_eq!(epsilon_from_feasible(0.2, 0.2).unwrap(), 0.0);
        assert!(matches!(
            epsilon_from_feasible(0.1, 0.2),
            Err(ReductionError::OrderingViolated { .. })
        ));
        let ds = random_instance(5, 10);
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
        // Unweighted zero vector misclassifies everything, so the guess-free
        // width is 1 - proxy optimum.
        let e = epsilon_max(&ds, &model, analysis.proxy_optimum).unwrap();
        assert!((e - (1.0 - analysis.proxy_optimum)).abs() < 1e-12);
    }

    #[test]
    fn smaller_width_filters_at_least_as_much() {
        // The solved-optimum width filters no less than the guess-free one.
        let ds = random_instance(31, 16);
        let model = build_slim(
            &ds,
            &range_sets(2, -2, 2),
            &slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let opt = milp::solve(&model.program, &SolveOptions::default()).unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
        let e_min = epsilon_from_feasible(opt.objective, analysis.proxy_optimum).unwrap();
        let e_max = epsilon_max(&ds, &model, analysis.proxy_optimum).unwrap();
        assert!(e_min <= e_max + 1e-12);
        let with_min = analysis.removal_flags(e_min).iter().filter(|&&b| b).count();
        let with_max = analysis.removal_flags(e_max).iter().filter(|&&b| b).count();
        assert!(with_min >= with_max);
    }

    #[test]
    fn certificate_checker_cases() {
        let ok = check_level_set_certificate(&LevelSetCertificate {
            lipschitz: 1.0,
            radius: 1.0,
            c_lambda: 0.1,
            c_psi: 0.3,
        })
        .unwrap();
        assert_eq!(ok, CertificateOutcome::Satisfied { epsilon: 0.1 });
        let boundary = check_level_set_certificate(&LevelSetCertificate {
            lipschitz: 1.0,
            radius: 1.0,
            c_lambda: 0.1,
            c_psi: 0.2,
        })
        .unwrap();
        assert_eq!(boundary, CertificateOutcome::Violated { epsilon: 0.1 });
        let arith = check_level_set_certificate(&LevelSetCertificate {
            lipschitz: 2.0,
            radius: 1.0,
            c_lambda: 0.2,
            c_psi: 0.5,
        })
        .unwrap();
        match arith {
            CertificateOutcome::Violated { epsilon } => {
                assert!((epsilon - 0.4).abs() < 1e-15)
            }
            _ => panic!("0.5 > 0.8 is false"),
        }
        assert!(check_level_set_certificate(&LevelSetCertificate {
            lipschitz: 0.0,
            radius: 1.0,
            c_lambda: 0.1,
            c_psi: 0.3,
        })
        .is_err());
    }

    #[test]
    fn report_csv_shape() {
        let ds = random_instance(41, 8);
        let model = build_slim(
            &ds,
            &range_sets(2, -1, 1),
            &slim_penalty(0.05),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let r = reduce(
            &ds,
            &model,
            &ReductionConfig {
                proxy: ProxyKind::IpRelaxation,
                level_set_width: 0.1,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_report_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), ds.n() + 1);
        assert_eq!(lines[0], "index,baseline_label,variant_objective,removed");
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 4);
        }
    }

    #[test]
    fn brute_force_and_reduced_solver_agree_end_to_end() {
        // Reduction then exact training on the reduced program matches
        // training on the full data.
        let ds = random_instance(51, 14);
        let sets = range_sets(2, -2, 2);
        let penalty = slim_penalty(0.03);
        let model = build_slim(
            &ds,
            &sets,
            &penalty,
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            None,
        )
        .unwrap();
        let full = milp::solve(&model.program, &SolveOptions::default()).unwrap();
        let analysis = analyze(&ds, &model, ProxyKind::IpRelaxation).unwrap();
        let width = epsilon_from_feasible(full.objective, analysis.proxy_optimum).unwrap();
        let removed = analysis.removal_flags(width);
        let kept: Vec<bool> = removed.iter().map(|r| !r).collect();
        let brute_full = brute_force_training(
            &ds,
            &model.sets,
            &model.penalty,
            model.weights,
            &OperationalConstraints::default(),
            model.big_m.margin,
            None,
            None,
            1 << 24,
        )
        .unwrap();
        let (_, argm) = argmins_with_mask(&ds, &model, &kept);
        assert_eq!(brute_full.argmins, argm);
    }
}
