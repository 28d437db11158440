//! Cutting-plane training for convex losses.
//!
//! The aggregate loss enters the integer program only through supporting
//! hyperplanes supplied by an oracle, so each proxy solve touches a program
//! whose size depends on P and the number of cuts, never on N. The driver
//! alternates proxy solves (lower bounds) with oracle evaluations at the
//! proxy argmin (upper bounds) until the gap closes.

use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ClassWeights, Dataset, Example};
use crate::evaluate::{self, PenaltySpec};
use crate::exec;
use crate::formulation::{
    add_set_coefficient, add_use_and_magnitude, append_operational_constraints,
    apply_signs, compute_big_m, default_l1_tiebreak, default_margin, FormulationError,
    OperationalConstraints, OpsWiring, SlimPenalty,
};
use crate::interp::InterpretabilitySet;
use crate::milp::{self, MilpError, SolveOptions, SolveStatus};
use crate::program::{IntegerProgram, Sense, VarKind, VarRole};

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solve(#[from] MilpError),
    #[error("proxy solve ended with status {0:?}; the decomposition needs exact proxy optima")]
    ProxyStatus(SolveStatus),
}

/// Convex surrogate losses with closed-form subgradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Hinge,
    Quadratic,
    Logistic,
    Exponential,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LossKind::Hinge => "hinge",
            LossKind::Quadratic => "quadratic",
            LossKind::Logistic => "logistic",
            LossKind::Exponential => "exponential",
        };
        f.write_str(s)
    }
}

/// ln(1 + e^z) without overflow for large |z|.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// 1 / (1 + e^-z) evaluated from the side that cannot overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss value and d(loss)/d(margin) at margin m, both per-example.
fn loss_and_slope(kind: LossKind, m: f64) -> (f64, f64) {
    match kind {
        LossKind::Hinge => {
            if m < 1.0 {
                (1.0 - m, -1.0)
            } else {
                (0.0, 0.0)
            }
        }
        LossKind::Quadratic => {
            let r = 1.0 - m;
            (r * r, -2.0 * r)
        }
        LossKind::Logistic => (softplus(-m), -sigmoid(-m)),
        LossKind::Exponential => {
            // Clip the exponent so pathological margins degrade to a huge
            // finite value instead of inf, keeping the subgradient usable.
            let e = (1.0 - m).min(700.0).exp();
            (e, -e)
        }
    }
}

fn oracle_block(
    kind: LossKind,
    chunk: &[Example],
    lambda: &[f64],
    w: ClassWeights,
) -> (f64, Vec<f64>) {
    let d = lambda.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    for ex in chunk {
        let y = ex.label as f64;
        let m = y * evaluate::score(lambda, &ex.features);
        let (l, slope) = loss_and_slope(kind, m);
        let omega = w.multiplier_for(ex.label);
        value += omega * l;
        let c = omega * slope * y;
        if c != 0.0 {
            for (g, &x) in grad.iter_mut().zip(&ex.features) {
                *g += c * x;
            }
        }
    }
    (value, grad)
}

fn combine_blocks(n: usize, d: usize, parts: Vec<(f64, Vec<f64>)>) -> (f64, Vec<f64>) {
    let nf = n as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    for (v, g) in parts {
        value += v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    for g in grad.iter_mut() {
        *g /= nf;
    }
    (value / nf, grad)
}

/// Aggregate loss value and subgradient at `lambda`: the weighted average of
/// per-example losses and of -omega_i y_i x_i scaled by the loss slope.
/// Block-partitioned with a fixed reduction order, so the result does not
/// depend on the parallel feature.
pub fn oracle_eval(
    kind: LossKind,
    ds: &Dataset,
    lambda: &[f64],
    w: ClassWeights,
) -> (f64, Vec<f64>) {
    let parts = exec::map_blocks(ds.examples(), exec::BLOCK, |chunk| {
        oracle_block(kind, chunk, lambda, w)
    });
    combine_blocks(ds.n(), lambda.len(), parts)
}

/// Forced-sequential twin of [`oracle_eval`] with identical partition
/// arithmetic; exists so the two paths can be benchmarked in one build.
pub fn oracle_eval_seq(
    kind: LossKind,
    ds: &Dataset,
    lambda: &[f64],
    w: ClassWeights,
) -> (f64, Vec<f64>) {
    let parts = exec::map_blocks_seq(ds.examples(), exec::BLOCK, |chunk| {
        oracle_block(kind, chunk, lambda, w)
    });
    combine_blocks(ds.n(), lambda.len(), parts)
}

/// One supporting hyperplane: theta >= value + subgradient . (lambda - anchor).
#[derive(Debug, Clone)]
pub struct Cut {
    pub anchor: Vec<f64>,
    pub value: f64,
    pub subgradient: Vec<f64>,
}

/// The cuts collected so far; their pointwise maximum underestimates the
/// aggregate loss everywhere (floored at 0 since all losses are nonnegative).
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    pub cuts: Vec<Cut>,
}

impl CutPool {
    pub fn add(&mut self, anchor: Vec<f64>, value: f64, subgradient: Vec<f64>) {
        self.cuts.push(Cut {
            anchor,
            value,
            subgradient,
        });
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// Piecewise-linear lower model at `lambda`.
    pub fn evaluate(&self, lambda: &[f64]) -> f64 {
        let mut best = 0.0_f64;
        for c in &self.cuts {
            let mut v = c.value;
            for (j, &g) in c.subgradient.iter().enumerate() {
                v += g * (lambda[j] - c.anchor[j]);
            }
            best = best.max(v);
        }
        best
    }
}

/// One driver iteration: the proxy argmin, the bounds after the oracle call,
/// and where the time went.
#[derive(Debug, Clone)]
pub struct BendersIteration {
    pub k: usize,
    pub lambda: Vec<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub oracle_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BendersTrace {
    pub iterations: Vec<BendersIteration>,
}

impl BendersTrace {
    /// One row per iteration: k, lower bound, upper bound, gap, oracle
    /// seconds, solve seconds.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,lower_bound,upper_bound,gap,oracle_seconds,solve_seconds")?;
        for it in &self.iterations {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                it.k,
                it.lower_bound,
                it.upper_bound,
                it.upper_bound - it.lower_bound,
                it.oracle_seconds,
                it.solve_seconds
            )?;
        }
        Ok(())
    }
}

/// Why the driver loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BendersExit {
    /// Upper and lower bounds met within the tolerance.
    GapClosed,
    /// The proxy returned the previous argmin again, which pins the bounds
    /// together on the next update.
    Repetition,
    /// Iteration cap; the result carries the best incumbent, unconverged.
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct BendersOptions {
    /// Stop when upper bound - lower bound <= this.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Options for each proxy solve; the status must come back optimal.
    pub solve: SolveOptions,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions {
            gap_tol: 1e-6,
            max_iters: 200,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BendersResult {
    /// Incumbent achieving the best upper bound.
    pub lambda: Vec<f64>,
    /// Best upper bound: true objective of `lambda`.
    pub objective: f64,
    pub lower_bound: f64,
    pub exit: BendersExit,
    pub converged: bool,
    pub trace: BendersTrace,
    pub pool: CutPool,
}

struct Proxy {
    program: IntegerProgram,
    coeff_vars: Vec<usize>,
}

/// Proxy program: epigraph variable over the cut pool plus the use/magnitude
/// penalty machinery over the coefficient sets, plus operational constraints
/// (rate caps create their own forced indicators here since the proxy has no
/// loss rows).
fn build_proxy(
    ds: &Dataset,
    sets: &[InterpretabilitySet],
    c0: &[f64],
    eps: f64,
    ops: &OperationalConstraints,
    pool: &CutPool,
) -> Result<Proxy, FormulationError> {
    let margin = default_margin(ds);
    let big_m = compute_big_m(ds, sets, margin);
    let mut p = IntegerProgram::new();
    let mut coeff_vars = Vec::with_capacity(sets.len());
    let mut selectors_by_slot = Vec::with_capacity(sets.len());
    for (slot, set) in sets.iter().enumerate() {
        let (lam, sel) = add_set_coefficient(&mut p, slot, set);
        coeff_vars.push(lam);
        selectors_by_slot.push(sel);
    }
    let mut per_feature: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for j in 1..sets.len() {
        let alpha = add_use_and_magnitude(
            &mut p,
            j,
            &sets[j],
            &selectors_by_slot[j],
            coeff_vars[j],
            c0[j - 1],
            eps,
        );
        per_feature.push(vec![(alpha, 1.0)]);
    }
    let theta = p.add_var(
        "theta",
        VarKind::Continuous,
        0.0,
        f64::INFINITY,
        VarRole::EpigraphLoss,
    );
    p.set_objective_term(theta, 1.0);
    for (c, cut) in pool.cuts.iter().enumerate() {
        let mut row = vec![(theta, 1.0)];
        let mut rhs = cut.value;
        for (j, &g) in cut.subgradient.iter().enumerate() {
            if g != 0.0 {
                row.push((coeff_vars[j], -g));
            }
            rhs -= g * cut.anchor[j];
        }
        p.add_constraint(format!("cut_{c}"), row, Sense::Ge, rhs);
    }
    let wiring = OpsWiring {
        sets,
        coeff_vars: &coeff_vars,
        big_m: &big_m,
        psi: None,
        per_feature,
    };
    append_operational_constraints(&mut p, ds, ops, &wiring)?;
    Ok(Proxy {
        program: p,
        coeff_vars,
    })
}

/// Trains a discrete-coefficient model under a convex loss by alternating
/// proxy solves and oracle cuts. The lower bound is the proxy optimum and
/// never decreases; the upper bound is the best true objective seen and
/// never increases; the loop stops when they meet within `gap_tol`, when
/// the proxy repeats an argmin, or at the iteration cap (flagged).
pub fn benders_solve(
    ds: &Dataset,
    kind: LossKind,
    sets: &[InterpretabilitySet],
    penalty: &SlimPenalty,
    weights: ClassWeights,
    ops: &OperationalConstraints,
    opts: &BendersOptions,
) -> Result<BendersResult, DecompositionError> {
    let pf = ds.p();
    if sets.len() != pf + 1 {
        return Err(FormulationError::SetCount {
            got: sets.len(),
            want: pf + 1,
        }
        .into());
    }
    ops.validate(pf)?;
    let c0 = match &penalty.per_feature_c0 {
        Some(v) => {
            if v.len() != pf {
                return Err(FormulationError::PenaltyCount {
                    got: v.len(),
                    want: pf,
                }
                .into());
            }
            v.clone()
        }
        None => vec![penalty.c0; pf],
    };
    for &c in &c0 {
        if c <= 0.0 {
            return Err(FormulationError::BadPenalty(c).into());
        }
    }
    let mut effective = sets.to_vec();
    apply_signs(&mut effective, &ops.signs, |id| vec![id])?;
    let min_c0 = c0.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = match penalty.l1_tiebreak {
        Some(e) => e,
        None => match default_l1_tiebreak(min_c0, ds.n(), &effective) {
            Ok(e) => e,
            Err(FormulationError::DegenerateL1Bound) => 0.0,
            Err(e) => return Err(e.into()),
        },
    };
    let penalty_spec = PenaltySpec::L0L1 {
        c0: c0.clone(),
        eps,
    };

    let mut pool = CutPool::default();
    let mut trace = BendersTrace::default();
    let mut lower = 0.0_f64;
    let mut upper = f64::INFINITY;
    let mut incumbent: Vec<f64> = vec![0.0; pf + 1];
    let mut previous: Option<Vec<f64>> = None;
    let mut exit = BendersExit::IterationCap;

    for k in 1..=opts.max_iters {
        let t0 = Instant::now();
        let proxy = build_proxy(ds, &effective, &c0, eps, ops, &pool)
            .map_err(DecompositionError::Formulation)?;
        let r = milp::solve(&proxy.program, &opts.solve)?;
        if r.status != SolveStatus::Optimal {
            return Err(DecompositionError::ProxyStatus(r.status));
        }
        let solve_seconds = t0.elapsed().as_secs_f64();
        // Growing the pool only shrinks the proxy's epigraph, so its optimum
        // is monotone; the clamp guards against solve-order noise.
        lower = lower.max(r.objective);
        let lambda: Vec<f64> = proxy
            .coeff_vars
            .iter()
            .enumerate()
            .map(|(j, &v)| effective[j].nearest(r.x[v]))
            .collect();

        let t1 = Instant::now();
        let (value, grad) = oracle_eval(kind, ds, &lambda, weights);
        let oracle_seconds = t1.elapsed().as_secs_f64();
        let z = value + evaluate::penalty_value(&penalty_spec, &lambda);
        if z < upper {
            upper = z;
            incumbent = lambda.clone();
        }
        pool.add(lambda.clone(), value, grad);
        trace.iterations.push(BendersIteration {
            k,
            lambda: lambda.clone(),
            lower_bound: lower,
            upper_bound: upper,
            oracle_seconds,
            solve_seconds,
        });
        if upper - lower <= opts.gap_tol {
            exit = BendersExit::GapClosed;
            break;
        }
        if previous.as_deref() == Some(&lambda[..]) {
            exit = BendersExit::Repetition;
            break;
        }
        previous = Some(lambda);
    }

    Ok(BendersResult {
        lambda: incumbent,
        objective: upper,
        lower_bound: lower,
        exit,
        converged: exit != BendersExit::IterationCap,
        trace,
        pool,
    })
}

/// True objective of `lambda` under the given convex loss and penalty;
/// convenience for sweeps and tests.
pub fn convex_objective(
    kind: LossKind,
    ds: &Dataset,
    lambda: &[f64],
    weights: ClassWeights,
    penalty: &PenaltySpec,
) -> f64 {
    let (value, _) = oracle_eval(kind, ds, lambda, weights);
    value + evaluate::penalty_value(penalty, lambda)
}

/// Brute-force minimum of the convex objective over the admissible sets.
pub fn brute_force_convex(
    ds: &Dataset,
    kind: LossKind,
    sets: &[InterpretabilitySet],
    weights: ClassWeights,
    penalty: &PenaltySpec,
    budget: u128,
) -> Result<milp::Enumeration, DecompositionError> {
    let obj = |lambda: &[f64]| {
        let (value, _) = oracle_eval_seq(kind, ds, lambda, weights);
        value + evaluate::penalty_value(penalty, lambda)
    };
    Ok(milp::enumerate_assignments(sets, budget, obj)?)
}

/// Uniform use-cost penalty with derived tiebreak; the common case for
/// decomposition runs.
pub fn default_slim_penalty(c0: f64) -> SlimPenalty {
    SlimPenalty {
        c0,
        per_feature_c0: None,
        l1_tiebreak: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn tiny(rows: Vec<(Vec<f64>, i8)>) -> Dataset {
        let p = rows[0].0.len();
        let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
        let kinds = vec![FeatureKind::Real; p];
        Dataset::from_rows(names, kinds, rows).unwrap()
    }

    fn gaussian_pair(n_per_class: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::with_capacity(2 * n_per_class);
        for _ in 0..n_per_class {
            let f: Vec<f64> = (0..dim).map(|_| 2.0 + noise.sample(&mut rng)).collect();
            rows.push((f, 1));
        }
        for _ in 0..n_per_class {
            let f: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
            rows.push((f, -1));
        }
        tiny(rows)
    }

    #[test]
    fn logistic_at_zero_has_closed_form() {
        let ds = tiny(vec![
            (vec![1.0, -2.0], 1),
            (vec![0.5, 1.0], -1),
            (vec![-1.0, 0.0], 1),
        ]);
        let w = ClassWeights::unweighted();
        let (value, grad) = oracle_eval(LossKind::Logistic, &ds, &[0.0, 0.0, 0.0], w);
        assert!((value - std::f64::consts::LN_2).abs() < 1e-15);
        let n = ds.n() as f64;
        for j in 0..3 {
            let expected: f64 = ds
                .examples()
                .iter()
                .map(|ex| -0.5 * ex.label as f64 * ex.features[j])
                .sum::<f64>()
                / n;
            assert!((grad[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_flat_region_is_exactly_zero() {
        let ds = tiny(vec![(vec![2.0], 1), (vec![-3.0], -1)]);
        // Margins are 1 + 2*2 = 5 and 1 + 3*2 = 7, both past the hinge.
        let (value, grad) = oracle_eval(LossKind::Hinge, &ds, &[1.0, 2.0], ClassWeights::unweighted());
        assert_eq!(value, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn subgradients_match_central_differences() {
        let ds = gaussian_pair(15, 2, 3);
        let w = ClassWeights::unweighted();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-5;
        for kind in [LossKind::Quadratic, LossKind::Logistic, LossKind::Exponential] {
            for _ in 0..20 {
                let lambda: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let (_, grad) = oracle_eval(kind, &ds, &lambda, w);
                for j in 0..3 {
                    let mut up = lambda.clone();
                    up[j] += h;
                    let mut dn = lambda.clone();
                    dn[j] -= h;
                    let (vu, _) = oracle_eval(kind, &ds, &up, w);
                    let (vd, _) = oracle_eval(kind, &ds, &dn, w);
                    let fd = (vu - vd) / (2.0 * h);
                    let scale = grad[j].abs().max(1.0);
                    assert!(
                        (grad[j] - fd).abs() / scale < 1e-5,
                        "{kind} coord {j}: analytic {} vs fd {}",
                        grad[j],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn losses_are_convex_along_random_chords() {
        let ds = gaussian_pair(10, 2, 17);
        let w = ClassWeights::unweighted();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for kind in [
            LossKind::Hinge,
            LossKind::Quadratic,
            LossKind::Logistic,
            LossKind::Exponential,
        ] {
            for _ in 0..50 {
                let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let t: f64 = rng.gen_range(0.0..1.0);
                let mid: Vec<f64> = a
                    .iter()
                    .zip(&b)
                    .map(|(&x, &y)| t * x + (1.0 - t) * y)
                    .collect();
                let (va, _) = oracle_eval(kind, &ds, &a, w);
                let (vb, _) = oracle_eval(kind, &ds, &b, w);
                let (vm, _) = oracle_eval(kind, &ds, &mid, w);
                assert!(vm <= t * va + (1.0 - t) * vb + 1e-9, "{kind} not convex");
            }
        }
    }

    #[test]
    fn all_loss_values_nonnegative() {
        let ds = gaussian_pair(8, 2, 41);
        let w = ClassWeights::unweighted();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [
            LossKind::Hinge,
            LossKind::Quadratic,
            LossKind::Logistic,
            LossKind::Exponential,
        ] {
            for _ in 0..30 {
                let lambda: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let (v, _) = oracle_eval(kind, &ds, &lambda, w);
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn parallel_and_sequential_paths_agree_bitwise() {
        let ds = gaussian_pair(300, 3, 7);
        let w = ClassWeights::unweighted();
        let lambda = vec![-1.5, 0.5, 2.0, -0.25];
        for kind in [LossKind::Hinge, LossKind::Logistic] {
            let (v1, g1) = oracle_eval(kind, &ds, &lambda, w);
            let (v2, g2) = oracle_eval_seq(kind, &ds, &lambda, w);
            assert_eq!(v1.to_bits(), v2.to_bits());
            for (a, b) in g1.iter().zip(&g2) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn cuts_underestimate_the_loss_everywhere() {
        let ds = gaussian_pair(12, 2, 19);
        let w = ClassWeights::unweighted();
        let mut pool = CutPool::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..8 {
            let anchor: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let (v, g) = oracle_eval(LossKind::Logistic, &ds, &anchor, w);
            pool.add(anchor, v, g);
        }
        for _ in 0..100 {
            let lambda: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (v, _) = oracle_eval(LossKind::Logistic, &ds, &lambda, w);
            assert!(pool.evaluate(&lambda) <= v + 1e-9);
        }
    }

    #[test]
    fn first_cut_is_tight_at_its_anchor() {
        let ds = gaussian_pair(10, 2, 23);
        let w = ClassWeights::unweighted();
        let anchor = vec![0.0, 1.0, -1.0];
        let (v, g) = oracle_eval(LossKind::Logistic, &ds, &anchor, w);
        let mut pool = CutPool::default();
        pool.add(anchor.clone(), v, g);
        assert!((pool.evaluate(&anchor) - v).abs() < 1e-12);
    }

    fn int_sets(p: usize, bound: i64) -> Vec<InterpretabilitySet> {
        (0..=p)
            .map(|_| InterpretabilitySet::integer_range(-bound, bound).unwrap())
            .collect()
    }

    #[test]
    fn two_dim_logistic_matches_brute_force() {
        let ds = gaussian_pair(20, 2, 11);
        let sets = int_sets(2, 5);
        let penalty = default_slim_penalty(0.9 / ds.n() as f64);
        let w = ClassWeights::unweighted();
        let opts = BendersOptions::default();
        let r = benders_solve(
            &ds,
            LossKind::Logistic,
            &sets,
            &penalty,
            w,
            &OperationalConstraints::default(),
            &opts,
        )
        .unwrap();
        assert!(r.converged, "exit {:?}", r.exit);
        assert_ne!(r.exit, BendersExit::IterationCap);
        let eps = match r.trace.iterations.first() {
            Some(_) => default_l1_tiebreak(penalty.c0, ds.n(), &sets).unwrap(),
            None => unreachable!(),
        };
        let spec = PenaltySpec::L0L1 {
            c0: vec![penalty.c0; 2],
            eps,
        };
        let brute =
            brute_force_convex(&ds, LossKind::Logistic, &sets, w, &spec, 1 << 20).unwrap();
        assert!(
            r.objective <= brute.minimum + opts.gap_tol + 1e-9,
            "benders {} brute {}",
            r.objective,
            brute.minimum
        );
        // The incumbent is a real admissible vector, so it cannot beat the
        // enumerated minimum either.
        assert!(r.objective >= brute.minimum - 1e-9);
        // Bound monotonicity along the trace.
        let mut prev_lb = f64::NEG_INFINITY;
        let mut prev_ub = f64::INFINITY;
        for it in &r.trace.iterations {
            assert!(it.lower_bound >= prev_lb - 1e-12);
            assert!(it.upper_bound <= prev_ub + 1e-12);
            assert!(it.lower_bound <= it.upper_bound + 1e-9);
            prev_lb = it.lower_bound;
            prev_ub = it.upper_bound;
        }
    }

    #[test]
    fn hinge_and_exponential_converge_on_small_instances() {
        let ds = gaussian_pair(12, 2, 29);
        let sets = int_sets(2, 3);
        let penalty = default_slim_penalty(0.05);
        let w = ClassWeights::unweighted();
        for kind in [LossKind::Hinge, LossKind::Exponential, LossKind::Quadratic] {
            let r = benders_solve(
                &ds,
                kind,
                &sets,
                &penalty,
                w,
                &OperationalConstraints::default(),
                &BendersOptions::default(),
            )
            .unwrap();
            assert!(r.converged, "{kind} exit {:?}", r.exit);
            let spec = PenaltySpec::L0L1 {
                c0: vec![penalty.c0; 2],
                eps: default_l1_tiebreak(penalty.c0, ds.n(), &sets).unwrap(),
            };
            let brute = brute_force_convex(&ds, kind, &sets, w, &spec, 1 << 20).unwrap();
            assert!(
                r.objective <= brute.minimum + 1e-6 + 1e-9,
                "{kind}: benders {} brute {}",
                r.objective,
                brute.minimum
            );
        }
    }

    #[test]
    fn operational_constraints_bind_inside_the_proxy() {
        let ds = gaussian_pair(15, 2, 37);
        let sets = int_sets(2, 4);
        let penalty = default_slim_penalty(0.01);
        let w = ClassWeights::unweighted();
        let ops = OperationalConstraints {
            max_model_size: Some(1),
            ..Default::default()
        };
        let r = benders_solve(
            &ds,
            LossKind::Logistic,
            &sets,
            &penalty,
            w,
            &ops,
            &BendersOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(evaluate::model_size(&r.lambda) <= 1);
        let free = benders_solve(
            &ds,
            LossKind::Logistic,
            &sets,
            &penalty,
            w,
            &OperationalConstraints::default(),
            &BendersOptions::default(),
        )
        .unwrap();
        assert!(free.objective <= r.objective + 1e-9);
    }

    #[test]
    fn trace_csv_has_one_row_per_iteration() {
        let ds = gaussian_pair(10, 2, 43);
        let sets = int_sets(2, 2);
        let r = benders_solve(
            &ds,
            LossKind::Logistic,
            &sets,
            &default_slim_penalty(0.02),
            ClassWeights::unweighted(),
            &OperationalConstraints::default(),
            &BendersOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        r.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), r.trace.iterations.len() + 1);
        assert!(lines[0].starts_with("k,lower_bound,upper_bound"));
    }
}
