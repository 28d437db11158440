//! Dense bounded-variable simplex engine.
//!
//! One engine instance owns the constraint matrix of a linear program and
//! solves it repeatedly under changing variable bounds. Cold solves run a
//! two-phase primal simplex from the slack basis; when a basis from a
//! previous solve is available, bound changes are applied in place and
//! repaired with a dual simplex pass, which is what makes node re-solves in
//! branch-and-bound cheap. Reduced costs are unaffected by bound values, so
//! a parent-optimal basis stays dual feasible in every child node.
//!
//! Determinism: pricing is Dantzig with lowest-index tie-breaks (Bland's
//! rule after a degenerate streak), ratio ties resolve to the lowest row,
//! and no randomness is used anywhere.

use crate::program::Sense;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;
const DEGEN_STREAK: usize = 400;
const REFRESH_EVERY: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values (empty unless status is Optimal).
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
}

/// A linear program in computational form: minimize cost . x subject to
/// rows, with per-variable bounds supplied at solve time.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub ncols: usize,
    pub cost: Vec<f64>,
    pub constant: f64,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
    FreeAtZero,
}

pub struct LpEngine {
    nstruct: usize,
    m: usize,
    /// Column layout: structural | slack | artificial.
    width: usize,
    slack_base: usize,
    art_base: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VStat>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    xb: Vec<f64>,
    rhs: Vec<f64>,
    constant: f64,
    rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
    has_basis: bool,
    pub iterations_total: usize,
}

impl LpEngine {
    pub fn new(prob: LpProblem) -> LpEngine {
        let m = prob.rows.len();
        let nstruct = prob.ncols;
        let width = nstruct + 2 * m;
        let slack_base = nstruct;
        let art_base = nstruct + m;
        let mut cost = vec![0.0; width];
        cost[..nstruct].copy_from_slice(&prob.cost);
        LpEngine {
            nstruct,
            m,
            width,
            slack_base,
            art_base,
            tab: vec![0.0; m * width],
            basis: vec![0; m],
            status: vec![VStat::AtLower; width],
            lower: vec![0.0; width],
            upper: vec![0.0; width],
            cost,
            d: vec![0.0; width],
            xb: vec![0.0; m],
            rhs: prob.rows.iter().map(|r| r.2).collect(),
            constant: prob.constant,
            rows: prob.rows,
            has_basis: false,
            iterations_total: 0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    fn set_struct_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        self.lower[..self.nstruct].copy_from_slice(lower);
        self.upper[..self.nstruct].copy_from_slice(upper);
        for r in 0..self.m {
            let (lo, hi) = match self.rows[r].1 {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            self.lower[self.slack_base + r] = lo;
            self.upper[self.slack_base + r] = hi;
            self.lower[self.art_base + r] = 0.0;
            self.upper[self.art_base + r] = 0.0;
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VStat::AtLower => self.lower[j],
            VStat::AtUpper => self.upper[j],
            VStat::FreeAtZero => 0.0,
            VStat::Basic => unreachable!(),
        }
    }

    /// Solves under the given structural bounds, warm-starting from the
    /// previous basis when one exists and falling back to a cold solve on
    /// any trouble.
    pub fn solve(&mut self, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
        for j in 0..self.nstruct {
            if lower[j] > upper[j] + 1e-12 {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective: f64::INFINITY,
                    x: Vec::new(),
                    iterations: 0,
                });
            }
        }
        if self.has_basis {
            match self.try_warm(lower, upper) {
                Ok(sol) => return Ok(sol),
                Err(_) => {
                    // fall through to a cold solve
                }
            }
        }
        self.solve_cold(lower, upper)
    }

    fn try_warm(&mut self, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
        self.set_struct_bounds(lower, upper);
        // Snap nonbasic variables to the (possibly moved) bound on their
        // recorded side; a nonbasic at an infinite bound is malformed.
        for j in 0..self.width {
            if self.status[j] == VStat::Basic {
                continue;
            }
            if self.lower[j] == self.upper[j] {
                self.status[j] = VStat::AtLower;
            }
            match self.status[j] {
                VStat::AtLower if !self.lower[j].is_finite() => {
                    if self.upper[j].is_finite() {
                        self.status[j] = VStat::AtUpper;
                    } else {
                        self.status[j] = VStat::FreeAtZero;
                    }
                }
                VStat::AtUpper if !self.upper[j].is_finite() => {
                    if self.lower[j].is_finite() {
                        self.status[j] = VStat::AtLower;
                    } else {
                        self.status[j] = VStat::FreeAtZero;
                    }
                }
                _ => {}
            }
        }
        self.recompute_xb();
        self.recompute_d();
        // The basis must still be dual feasible; otherwise reject and let
        // the caller cold-solve.
        for j in 0..self.width {
            if self.status[j] == VStat::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let bad = match self.status[j] {
                VStat::AtLower => self.d[j] < -1e-6,
                VStat::AtUpper => self.d[j] > 1e-6,
                VStat::FreeAtZero => self.d[j].abs() > 1e-6,
                VStat::Basic => false,
            };
            if bad {
                return Err(LpError::Numerical("warm basis not dual feasible".into()));
            }
        }
        let it0 = self.iterations_total;
        if !self.dual_loop()? {
            self.has_basis = false;
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                x: Vec::new(),
                iterations: self.iterations_total - it0,
            });
        }
        // Polish any dual infeasibility introduced by tolerance drift.
        let status = self.primal_loop(false)?;
        Ok(self.extract(status, self.iterations_total - it0))
    }

    fn solve_cold(&mut self, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
        self.set_struct_bounds(lower, upper);
        self.has_basis = false;
        // Rebuild the tableau: structural coefficients, slack identity,
        // artificial identity (sign fixed once residuals are known).
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for (r, (terms, _, _)) in self.rows.iter().enumerate() {
            let base = r * self.width;
            for &(j, a) in terms {
                self.tab[base + j] += a;
            }
            self.tab[base + self.slack_base + r] = 1.0;
        }
        for j in 0..self.width {
            self.status[j] = if self.lower[j].is_finite() {
                VStat::AtLower
            } else if self.upper[j].is_finite() {
                VStat::AtUpper
            } else {
                VStat::FreeAtZero
            };
        }
        // Slack basis with artificials absorbing bound violations.
        let mut phase1_needed = false;
        for r in 0..self.m {
            let mut v = self.rhs[r];
            for j in 0..self.nstruct {
                let a = self.tab[r * self.width + j];
                if a != 0.0 {
                    v -= a * self.nonbasic_value(j);
                }
            }
            let s = self.slack_base + r;
            let clamped = v.clamp(self.lower[s], self.upper[s]);
            let residual = v - clamped;
            let a = self.art_base + r;
            if residual.abs() > FEAS_TOL {
                // The artificial's original column is sigma*e_r; scaling the
                // row by sigma keeps the tableau equal to B^-1 * A with the
                // basic artificial column at +1.
                if residual < 0.0 {
                    let base = r * self.width;
                    for j in 0..self.width {
                        self.tab[base + j] = -self.tab[base + j];
                    }
                }
                self.tab[r * self.width + a] = 1.0;
                self.upper[a] = f64::INFINITY;
                self.basis[r] = a;
                self.status[a] = VStat::Basic;
                self.xb[r] = residual.abs();
                self.status[s] = if clamped <= self.lower[s] {
                    VStat::AtLower
                } else {
                    VStat::AtUpper
                };
                phase1_needed = true;
            } else {
                self.tab[r * self.width + a] = 1.0;
                self.basis[r] = s;
                self.status[s] = VStat::Basic;
                self.xb[r] = v.clamp(self.lower[s], self.upper[s]);
            }
        }
        let it0 = self.iterations_total;
        if phase1_needed {
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let saved = std::mem::take(&mut self.cost);
            self.cost = vec![0.0; self.width];
            for r in 0..self.m {
                self.cost[self.art_base + r] = 1.0;
            }
            self.recompute_d();
            let st = self.primal_loop(true)?;
            let p1 = self.phase_objective();
            self.cost = saved;
            if st == LpStatus::Unbounded {
                return Err(LpError::Numerical("phase 1 unbounded".into()));
            }
            if p1 > 1e-7 * scale {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective: f64::INFINITY,
                    x: Vec::new(),
                    iterations: self.iterations_total - it0,
                });
            }
            // Close the artificials for good.
            for r in 0..self.m {
                let a = self.art_base + r;
                self.upper[a] = 0.0;
                if self.status[a] != VStat::Basic {
                    self.status[a] = VStat::AtLower;
                }
            }
            self.drive_out_basic_artificials();
        }
        self.recompute_d();
        let status = self.primal_loop(false)?;
        self.has_basis = status == LpStatus::Optimal;
        Ok(self.extract(status, self.iterations_total - it0))
    }

    fn phase_objective(&self) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.m {
            acc += self.cost[self.basis[r]] * self.xb[r];
        }
        for j in 0..self.width {
            if self.status[j] != VStat::Basic && self.cost[j] != 0.0 {
                acc += self.cost[j] * self.nonbasic_value(j);
            }
        }
        acc
    }

    fn drive_out_basic_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.art_base {
                continue;
            }
            let mut pick = None;
            for j in 0..self.art_base {
                if self.status[j] != VStat::Basic && self.tab[r * self.width + j].abs() > 1e-7 {
                    pick = Some(j);
                    break;
                }
            }
            if let Some(q) = pick {
                // Degenerate pivot: the artificial sits at 0.
                let entering_value = self.nonbasic_value(q);
                self.pivot(r, q, entering_value, VStat::AtLower);
            }
            // A fully zero row is redundant; its artificial may stay basic
            // at 0 with fixed bounds and will never move again.
        }
    }

    fn recompute_xb(&mut self) {
        // Slack columns of the tableau hold the basis inverse (the slack
        // block of the original matrix is the identity).
        let mut binv_b = vec![0.0; self.m];
        for i in 0..self.m {
            let base = i * self.width;
            let mut acc = 0.0;
            for r in 0..self.m {
                acc += self.tab[base + self.slack_base + r] * self.rhs[r];
            }
            binv_b[i] = acc;
        }
        for j in 0..self.width {
            if self.status[j] == VStat::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for i in 0..self.m {
                    binv_b[i] -= v * self.tab[i * self.width + j];
                }
            }
        }
        self.xb = binv_b;
    }

    fn recompute_d(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let base = r * self.width;
                for j in 0..self.width {
                    self.d[j] -= cb * self.tab[base + j];
                }
            }
        }
        for r in 0..self.m {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, entering_value: f64, leaving_to: VStat) {
        let base = r * self.width;
        let piv = self.tab[base + q];
        debug_assert!(piv.abs() > 1e-12);
        let inv = 1.0 / piv;
        for j in 0..self.width {
            self.tab[base + j] *= inv;
        }
        self.tab[base + q] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * self.width + q];
            if f != 0.0 {
                let ibase = i * self.width;
                for j in 0..self.width {
                    self.tab[ibase + j] -= f * self.tab[base + j];
                }
                self.tab[ibase + q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for j in 0..self.width {
                self.d[j] -= f * self.tab[base + j];
            }
            self.d[q] = 0.0;
        }
        let old = self.basis[r];
        self.status[old] = leaving_to;
        self.basis[r] = q;
        self.status[q] = VStat::Basic;
        self.xb[r] = entering_value;
    }

    /// Primal simplex on the current cost row. `phase1` only affects the
    /// iteration-limit bookkeeping message.
    fn primal_loop(&mut self, phase1: bool) -> Result<LpStatus, LpError> {
        let cap = 200_000 + 200 * (self.m + self.nstruct);
        let mut degen_streak = 0usize;
        let mut bland = false;
        let mut since_refresh = 0usize;
        for _ in 0..cap {
            // entering variable
            let mut q = None;
            let mut best = OPT_TOL;
            for j in 0..self.width {
                if self.status[j] == VStat::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let impr = match self.status[j] {
                    VStat::AtLower => -self.d[j],
                    VStat::AtUpper => self.d[j],
                    VStat::FreeAtZero => self.d[j].abs(),
                    VStat::Basic => unreachable!(),
                };
                if impr > best {
                    if bland {
                        q = Some(j);
                        break;
                    }
                    best = impr;
                    q = Some(j);
                }
            }
            let q = match q {
                Some(q) => q,
                None => return Ok(LpStatus::Optimal),
            };
            let dir: f64 = match self.status[q] {
                VStat::AtLower => 1.0,
                VStat::AtUpper => -1.0,
                VStat::FreeAtZero => {
                    if self.d[q] > 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                VStat::Basic => unreachable!(),
            };
            // ratio test
            let range = self.upper[q] - self.lower[q];
            let mut limit = if range.is_finite() { range } else { f64::INFINITY };
            let mut leave: Option<(usize, VStat)> = None;
            for i in 0..self.m {
                let a = dir * self.tab[i * self.width + q];
                let b = self.basis[i];
                let (t, to) = if a > PIVOT_TOL {
                    if self.lower[b].is_finite() {
                        ((self.xb[i] - self.lower[b]) / a, VStat::AtLower)
                    } else {
                        continue;
                    }
                } else if a < -PIVOT_TOL {
                    if self.upper[b].is_finite() {
                        ((self.upper[b] - self.xb[i]) / (-a), VStat::AtUpper)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let better = if bland {
                    t < limit - 1e-12
                        || (t < limit + 1e-12
                            && leave.map(|(li, _)| b < self.basis[li]).unwrap_or(true))
                } else {
                    t < limit
                };
                if better {
                    limit = t;
                    leave = Some((i, to));
                }
            }
            if !limit.is_finite() {
                return if phase1 {
                    Err(LpError::Numerical("phase 1 unbounded".into()))
                } else {
                    Ok(LpStatus::Unbounded)
                };
            }
            self.iterations_total += 1;
            since_refresh += 1;
            if limit <= 1e-10 {
                degen_streak += 1;
                if degen_streak > DEGEN_STREAK {
                    bland = true;
                }
            } else {
                degen_streak = 0;
                bland = false;
            }
            match leave {
                None => {
                    // bound flip across the box
                    for i in 0..self.m {
                        let a = self.tab[i * self.width + q];
                        if a != 0.0 {
                            self.xb[i] -= dir * limit * a;
                        }
                    }
                    self.status[q] = match self.status[q] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        other => other,
                    };
                }
                Some((r, to)) => {
                    let entering_value = self.nonbasic_value(q) + dir * limit;
                    for i in 0..self.m {
                        if i != r {
                            let a = self.tab[i * self.width + q];
                            if a != 0.0 {
                                self.xb[i] -= dir * limit * a;
                            }
                        }
                    }
                    self.pivot(r, q, entering_value, to);
                }
            }
            if since_refresh >= REFRESH_EVERY {
                since_refresh = 0;
                self.recompute_xb();
                self.recompute_d();
            }
        }
        Err(LpError::IterationLimit)
    }

    /// Dual simplex: restores primal feasibility after bound changes while
    /// keeping dual feasibility. Returns false when a violated row admits
    /// no entering column, which certifies primal infeasibility.
    fn dual_loop(&mut self) -> Result<bool, LpError> {
        let cap = 100_000 + 100 * (self.m + self.nstruct);
        for _ in 0..cap {
            let mut r = None;
            let mut worst = FEAS_TOL;
            for i in 0..self.m {
                let b = self.basis[i];
                let viol = (self.lower[b] - self.xb[i]).max(self.xb[i] - self.upper[b]);
                if viol > worst {
                    worst = viol;
                    r = Some(i);
                }
            }
            let r = match r {
                Some(r) => r,
                None => return Ok(true),
            };
            let b = self.basis[r];
            let below = self.xb[r] < self.lower[b];
            let base = r * self.width;
            let mut enter: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..self.width {
                if self.status[j] == VStat::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.tab[base + j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let ok = match self.status[j] {
                    VStat::AtLower => {
                        if below {
                            a < 0.0
                        } else {
                            a > 0.0
                        }
                    }
                    VStat::AtUpper => {
                        if below {
                            a > 0.0
                        } else {
                            a < 0.0
                        }
                    }
                    VStat::FreeAtZero => true,
                    VStat::Basic => unreachable!(),
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                if ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12 && a.abs() > best_mag)
                {
                    best_ratio = ratio;
                    best_mag = a.abs();
                    enter = Some(j);
                }
            }
            let q = match enter {
                Some(q) => q,
                None => return Ok(false),
            };
            let a = self.tab[base + q];
            let target = if below { self.lower[b] } else { self.upper[b] };
            let delta = self.xb[r] - target;
            let step = delta / a;
            let entering_value = self.nonbasic_value(q) + step;
            for i in 0..self.m {
                if i != r {
                    let av = self.tab[i * self.width + q];
                    if av != 0.0 {
                        self.xb[i] -= step * av;
                    }
                }
            }
            let to = if below { VStat::AtLower } else { VStat::AtUpper };
            self.pivot(r, q, entering_value, to);
            self.iterations_total += 1;
        }
        Err(LpError::IterationLimit)
    }

    fn extract(&mut self, status: LpStatus, iterations: usize) -> LpSolution {
        if status != LpStatus::Optimal {
            if status == LpStatus::Infeasible {
                self.has_basis = false;
            }
            return LpSolution {
                status,
                objective: if status == LpStatus::Infeasible {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                x: Vec::new(),
                iterations,
            };
        }
        self.has_basis = true;
        let mut x = vec![0.0; self.nstruct];
        for j in 0..self.nstruct {
            if self.status[j] != VStat::Basic {
                x[j] = self.nonbasic_value(j);
            }
        }
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.nstruct {
                x[b] = self.xb[r];
            }
        }
        let mut obj = self.constant;
        for j in 0..self.nstruct {
            obj += self.cost[j] * x[j];
        }
        LpSolution {
            status: LpStatus::Optimal,
            objective: obj,
            x,
            iterations,
        }
    }
}

/// Convenience one-shot solve for callers without bound churn.
pub fn solve_lp(
    prob: &LpProblem,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, LpError> {
    let mut eng = LpEngine::new(prob.clone());
    eng.solve(lower, upper)
}
