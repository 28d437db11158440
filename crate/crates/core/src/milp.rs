//! Exact MILP solver: branch and bound on the bounded-variable simplex,
//! plus a direct enumerator for small discrete programs.
//!
//! The search is deterministic: best-bound node selection with sequential
//! node ids as tie-breaks, most-fractional branching with lowest-index
//! ties, and a node limit for reproducible truncation. Warm dual-simplex
//! re-solves make child nodes cheap because only variable bounds change
//! between nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::exec;
use crate::interp::InterpretabilitySet;
use crate::program::IntegerProgram;
use crate::simplex::{LpEngine, LpProblem, LpStatus};

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("enumeration space of {total} assignments exceeds budget {budget}")]
    EnumerationBudget { total: u128, budget: u128 },
    #[error("simplex failure: {0}")]
    Lp(#[from] crate::simplex::LpError),
    #[error("initial incumbent rejected: {0}")]
    BadIncumbent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// Stopped at a limit with a feasible incumbent in hand.
    FeasibleLimit,
    /// Stopped at a limit before any feasible point was found.
    LimitNoSolution,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let token = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleLimit => "feasible-limit",
            SolveStatus::LimitNoSolution => "limit-no-solution",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        };
        f.write_str(token)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    /// Relative gap at which the incumbent is declared optimal.
    pub gap_tolerance: f64,
    /// Feasible solutions retained in the result pool.
    pub pool_size: usize,
    /// Accepted for interface stability; the search is deterministic for
    /// any seed because node order and tie-breaks are structural.
    pub deterministic_seed: u64,
    /// Feasible starting assignment; verified before use.
    pub initial_incumbent: Option<Vec<f64>>,
    pub record_history: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: None,
            node_limit: None,
            gap_tolerance: 0.0,
            pool_size: 10,
            deterministic_seed: 0,
            initial_incumbent: None,
            record_history: false,
        }
    }
}

fn relative_gap(objective: f64, dual_bound: f64) -> f64 {
    if !objective.is_finite() || !dual_bound.is_finite() {
        return f64::INFINITY;
    }
    ((objective - dual_bound) / objective.abs().max(1e-10)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct HistoryPoint {
    pub nodes: usize,
    pub incumbent: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of `x` when a solution exists.
    pub objective: f64,
    pub x: Vec<f64>,
    /// Valid lower bound on the optimum at termination.
    pub dual_bound: f64,
    /// Relative gap (objective - dual_bound) / max(|objective|, 1e-10).
    pub gap: f64,
    /// Feasible assignments found, best first, truncated to pool_size.
    pub pool: Vec<(Vec<f64>, f64)>,
    pub node_count: usize,
    pub lp_iterations: usize,
    pub wall_time: f64,
    pub history: Vec<HistoryPoint>,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::FeasibleLimit
        )
    }
}

struct Node {
    bound: f64,
    id: usize,
    /// Arena index; bounds are reconstructed by walking parents.
    arena: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for best-bound-first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Arena {
    parent: Vec<Option<usize>>,
    change: Vec<(usize, f64, f64)>,
}

impl Arena {
    fn new() -> Self {
        Arena {
            parent: vec![None],
            change: vec![(usize::MAX, 0.0, 0.0)],
        }
    }

    fn child(&mut self, parent: usize, var: usize, lo: f64, hi: f64) -> usize {
        self.parent.push(Some(parent));
        self.change.push((var, lo, hi));
        self.parent.len() - 1
    }

    fn bounds_into(&self, node: usize, lower: &mut [f64], upper: &mut [f64]) {
        // Changes along a path only tighten, so intersecting them in any
        // order reproduces the node box.
        let mut chain = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            if i != 0 {
                chain.push(i);
            }
            cur = self.parent[i];
        }
        for &i in chain.iter().rev() {
            let (v, lo, hi) = self.change[i];
            lower[v] = lower[v].max(lo);
            upper[v] = upper[v].min(hi);
        }
    }
}

pub struct Solver {
    program: IntegerProgram,
    engine: LpEngine,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    int_vars: Vec<usize>,
}

/// Solves the program exactly by branch and bound.
pub fn solve(program: &IntegerProgram, options: &SolveOptions) -> Result<SolveResult, MilpError> {
    Solver::new(program.clone()).run(options)
}

impl Solver {
    pub fn new(program: IntegerProgram) -> Self {
        let rows = program
            .constraints
            .iter()
            .map(|c| (c.terms.clone(), c.sense, c.rhs))
            .collect::<Vec<_>>();
        let mut cost = vec![0.0; program.n_vars()];
        for &(v, c) in &program.objective {
            cost[v] += c;
        }
        let prob = LpProblem {
            ncols: program.n_vars(),
            cost,
            constant: program.objective_constant,
            rows,
        };
        let engine = LpEngine::new(prob);
        let root_lower: Vec<f64> = program.vars.iter().map(|v| v.lower).collect();
        let root_upper: Vec<f64> = program.vars.iter().map(|v| v.upper).collect();
        let int_vars = program.integer_indices();
        Solver {
            program,
            engine,
            root_lower,
            root_upper,
            int_vars,
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut pick = None;
        let mut best = INT_TOL;
        for &j in &self.int_vars {
            let frac = (x[j] - x[j].round()).abs();
            if frac > best {
                best = frac;
                pick = Some((j, x[j]));
            }
        }
        pick
    }

    /// Fixes integers to their rounded values and re-solves the continuous
    /// part, returning a cleaned feasible point when one exists.
    fn polish_integral(&mut self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut lo = self.root_lower.clone();
        let mut hi = self.root_upper.clone();
        for &j in &self.int_vars {
            let v = x[j].round();
            if v < lo[j] - 0.5 || v > hi[j] + 0.5 {
                return None;
            }
            lo[j] = v;
            hi[j] = v;
        }
        let sol = self.engine.solve(&lo, &hi).ok()?;
        if sol.status != LpStatus::Optimal {
            return None;
        }
        let mut cleaned = sol.x;
        for &j in &self.int_vars {
            cleaned[j] = cleaned[j].round();
        }
        if self.program.max_violation(&cleaned) > 1e-6 {
            return None;
        }
        let obj = self.program.objective_value(&cleaned);
        Some((cleaned, obj))
    }

    pub fn run(&mut self, options: &SolveOptions) -> Result<SolveResult, MilpError> {
        let start = Instant::now();
        let mut history = Vec::new();
        let mut pool: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut nodes_done = 0usize;
        let it0 = self.engine.iterations_total;

        let mut incumbent: Option<(Vec<f64>, f64)> = None;
        if let Some(x0) = &options.initial_incumbent {
            if x0.len() != self.program.n_vars() {
                return Err(MilpError::BadIncumbent(format!(
                    "length {} != {} variables",
                    x0.len(),
                    self.program.n_vars()
                )));
            }
            let mut x = x0.clone();
            for &j in &self.int_vars {
                if (x[j] - x[j].round()).abs() > 1e-4 {
                    return Err(MilpError::BadIncumbent(format!(
                        "variable {} = {} is not integral",
                        self.program.vars[j].name, x[j]
                    )));
                }
                x[j] = x[j].round();
            }
            let viol = self.program.max_violation(&x);
            if viol > 1e-6 {
                return Err(MilpError::BadIncumbent(format!(
                    "violates constraints by {viol:.3e}"
                )));
            }
            let obj = self.program.objective_value(&x);
            pool.push((x.clone(), obj));
            incumbent = Some((x, obj));
        }

        let no_solution = |status: SolveStatus, nodes: usize, bound: f64, it: usize, t: f64| {
            SolveResult {
                status,
                objective: if bound == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                },
                x: Vec::new(),
                dual_bound: bound,
                gap: f64::INFINITY,
                pool: Vec::new(),
                node_count: nodes,
                lp_iterations: it,
                wall_time: t,
                history: Vec::new(),
            }
        };

        let root = self
            .engine
            .solve(&self.root_lower, &self.root_upper)?;
        match root.status {
            LpStatus::Infeasible => {
                return Ok(no_solution(
                    SolveStatus::Infeasible,
                    1,
                    f64::INFINITY,
                    self.engine.iterations_total - it0,
                    start.elapsed().as_secs_f64(),
                ))
            }
            LpStatus::Unbounded => {
                return Ok(no_solution(
                    SolveStatus::Unbounded,
                    1,
                    f64::NEG_INFINITY,
                    self.engine.iterations_total - it0,
                    start.elapsed().as_secs_f64(),
                ))
            }
            LpStatus::Optimal => {}
        }

        // Rounding dive from the relaxation for an early incumbent.
        if !self.int_vars.is_empty() {
            if let Some((x, obj)) = self.polish_integral(&root.x) {
                pool.push((x.clone(), obj));
                if incumbent.as_ref().map(|(_, b)| obj < *b).unwrap_or(true) {
                    incumbent = Some((x, obj));
                }
            }
        }

        let mut arena = Arena::new();
        let mut heap = BinaryHeap::new();
        let mut next_id = 0usize;
        heap.push(Node {
            bound: root.objective,
            id: next_id,
            arena: 0,
        });
        next_id += 1;

        let mut best_bound = root.objective;
        let mut limit_hit = false;
        let record = |history: &mut Vec<HistoryPoint>,
                      nodes: usize,
                      inc: &Option<(Vec<f64>, f64)>,
                      bound: f64| {
            history.push(HistoryPoint {
                nodes,
                incumbent: inc.as_ref().map(|(_, b)| *b),
                bound,
            });
        };
        if options.record_history {
            record(&mut history, 0, &incumbent, best_bound);
        }

        let mut lower = self.root_lower.clone();
        let mut upper = self.root_upper.clone();
        while let Some(node) = heap.pop() {
            best_bound = node.bound;
            if let Some((_, inc_obj)) = &incumbent {
                if best_bound >= inc_obj - PRUNE_TOL {
                    best_bound = *inc_obj;
                    break;
                }
                if relative_gap(*inc_obj, best_bound) <= options.gap_tolerance {
                    break;
                }
            }
            if let Some(limit) = options.node_limit {
                if nodes_done >= limit {
                    limit_hit = true;
                    break;
                }
            }
            if let Some(limit) = options.time_limit {
                if start.elapsed().as_secs_f64() > limit {
                    limit_hit = true;
                    break;
                }
            }
            nodes_done += 1;

            lower.copy_from_slice(&self.root_lower);
            upper.copy_from_slice(&self.root_upper);
            arena.bounds_into(node.arena, &mut lower, &mut upper);
            let sol = self.engine.solve(&lower, &upper)?;
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    return Ok(no_solution(
                        SolveStatus::Unbounded,
                        nodes_done,
                        f64::NEG_INFINITY,
                        self.engine.iterations_total - it0,
                        start.elapsed().as_secs_f64(),
                    ))
                }
                LpStatus::Optimal => {}
            }
            if let Some((_, inc_obj)) = &incumbent {
                if sol.objective >= inc_obj - PRUNE_TOL {
                    continue;
                }
            }
            match self.most_fractional(&sol.x) {
                None => {
                    let cand = self
                        .polish_integral(&sol.x)
                        .or_else(|| {
                            let obj = self.program.objective_value(&sol.x);
                            if self.program.max_violation(&sol.x) <= 1e-6 {
                                Some((sol.x.clone(), obj))
                            } else {
                                None
                            }
                        });
                    if let Some((x, obj)) = cand {
                        if incumbent.as_ref().map(|(_, b)| obj < *b).unwrap_or(true) {
                            pool.push((x.clone(), obj));
                            incumbent = Some((x, obj));
                            if options.record_history {
                                record(&mut history, nodes_done, &incumbent, best_bound);
                            }
                        }
                    }
                }
                Some((j, v)) => {
                    let down = arena.child(node.arena, j, lower[j], v.floor());
                    heap.push(Node {
                        bound: sol.objective,
                        id: next_id,
                        arena: down,
                    });
                    next_id += 1;
                    let up = arena.child(node.arena, j, v.ceil(), upper[j]);
                    heap.push(Node {
                        bound: sol.objective,
                        id: next_id,
                        arena: up,
                    });
                    next_id += 1;
                }
            }
        }

        if heap.is_empty() && !limit_hit {
            best_bound = incumbent
                .as_ref()
                .map(|(_, b)| *b)
                .unwrap_or(f64::INFINITY);
        }
        if options.record_history {
            record(&mut history, nodes_done, &incumbent, best_bound);
        }
        let lp_iterations = self.engine.iterations_total - it0;
        let wall_time = start.elapsed().as_secs_f64();
        pool.sort_by(|a, b| a.1.total_cmp(&b.1));
        pool.dedup_by(|a, b| a.1 == b.1 && a.0 == b.0);
        pool.truncate(options.pool_size);
        Ok(match incumbent {
            Some((x, obj)) => {
                let gap = relative_gap(obj, best_bound);
                let optimal = !limit_hit || gap <= options.gap_tolerance;
                SolveResult {
                    status: if optimal {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::FeasibleLimit
                    },
                    objective: obj,
                    x,
                    dual_bound: best_bound,
                    gap,
                    pool,
                    node_count: nodes_done,
                    lp_iterations,
                    wall_time,
                    history,
                }
            }
            None => {
                let status = if limit_hit {
                    SolveStatus::LimitNoSolution
                } else {
                    SolveStatus::Infeasible
                };
                let bound = if limit_hit { best_bound } else { f64::INFINITY };
                let mut r = no_solution(status, nodes_done, bound, lp_iterations, wall_time);
                r.history = history;
                r
            }
        })
    }
}

/// Exhaustive minimum of an objective over the product of admissible sets.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub minimum: f64,
    /// All minimizers in enumeration order, within 1e-9 of the minimum.
    pub argmins: Vec<Vec<f64>>,
    pub truncated: bool,
    pub total: u128,
}

const ARGMIN_CAP: usize = 20_000;

/// Enumerates every assignment of values from `sets` (mixed-radix order,
/// first coordinate slowest) and minimizes `objective` over them. The
/// scan parallelizes over blocks; results are deterministic because min
/// is order-independent and matches are collected in enumeration order.
pub fn enumerate_assignments<F>(
    sets: &[InterpretabilitySet],
    budget: u128,
    objective: F,
) -> Result<Enumeration, MilpError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let radices: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let mut total: u128 = 1;
    for &r in &radices {
        total = total.saturating_mul(r as u128);
    }
    if total > budget {
        return Err(MilpError::EnumerationBudget { total, budget });
    }
    let total_u = total as usize;
    let block = 8192usize;
    let nblocks = total_u.div_ceil(block);
    let decode = |mut idx: usize, out: &mut [f64]| {
        for k in (0..radices.len()).rev() {
            let r = radices[k];
            out[k] = sets[k].values()[idx % r];
            idx /= r;
        }
    };
    let block_mins = exec::map_indices(nblocks, |b| {
        let lo = b * block;
        let hi = (lo + block).min(total_u);
        let mut buf = vec![0.0; sets.len()];
        let mut best = f64::INFINITY;
        for idx in lo..hi {
            decode(idx, &mut buf);
            let v = objective(&buf);
            if v < best {
                best = v;
            }
        }
        best
    });
    let minimum = block_mins.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let matches = exec::map_indices(nblocks, |b| {
        let lo = b * block;
        let hi = (lo + block).min(total_u);
        let mut buf = vec![0.0; sets.len()];
        let mut found = Vec::new();
        for idx in lo..hi {
            decode(idx, &mut buf);
            if objective(&buf) <= minimum + 1e-9 {
                found.push(buf.clone());
            }
        }
        found
    });
    let mut argmins = Vec::new();
    let mut truncated = false;
    'outer: for blk in matches {
        for x in blk {
            if argmins.len() >= ARGMIN_CAP {
                truncated = true;
                break 'outer;
            }
            argmins.push(x);
        }
    }
    Ok(Enumeration {
        minimum,
        argmins,
        truncated,
        total,
    })
}
