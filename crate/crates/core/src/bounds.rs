//! Resolution bounds for rounding real coefficient vectors onto integer
//! grids, generalization gaps for finite hypothesis classes, and the
//! hypothesis-counting helpers behind them.
//!
//! Everything here operates on the non-intercept coefficient sub-vector: the
//! margin analysis normalizes by the Euclidean norm, which only makes sense
//! over the feature coefficients.

use std::io::{self, Write};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("reference coefficient vector is zero")]
    ZeroVector,
    #[error("dimension mismatch: coefficients have {coeffs}, example has {example}")]
    DimensionMismatch { coeffs: usize, example: usize },
    #[error("margin rank {k} outside 1..={n}")]
    BadRank { k: usize, n: usize },
    #[error("no training examples")]
    EmptyData,
    #[error("hypothesis count must be at least 1")]
    BadCount,
    #[error("confidence must lie in (0, 1], got {0}")]
    BadConfidence(f64),
    #[error("sample size must be at least 1")]
    BadSample,
    #[error("penalty must be positive, got {0}")]
    BadPenalty(f64),
    #[error("enumeration budget exceeded: P = {p} (max {max_p}), Lambda = {lambda} (max {max_lambda})")]
    EnumerationBudget {
        p: usize,
        lambda: u64,
        max_p: usize,
        max_lambda: u64,
    },
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
}

/// Normalized margin geometry of a real coefficient vector on a point set.
#[derive(Debug, Clone)]
pub struct MarginProfile {
    rho: Vec<f64>,
    /// |rho . x| / ||rho||_2 per example, sorted non-decreasing.
    margins: Vec<f64>,
    /// ||x||_2 per example, ordered to match `margins`.
    norms: Vec<f64>,
    x_max: f64,
}

impl MarginProfile {
    /// `points` are feature rows without an intercept column, matching the
    /// length of `rho`.
    pub fn new(rho: &[f64], points: &[Vec<f64>]) -> Result<Self, BoundsError> {
        let norm = l2(rho);
        if norm == 0.0 {
            return Err(BoundsError::ZeroVector);
        }
        if points.is_empty() {
            return Err(BoundsError::EmptyData);
        }
        for x in points {
            if x.len() != rho.len() {
                return Err(BoundsError::DimensionMismatch {
                    coeffs: rho.len(),
                    example: x.len(),
                });
            }
        }
        let mut pairs: Vec<(f64, f64)> = points
            .iter()
            .map(|x| {
                let s: f64 = rho.iter().zip(x).map(|(r, v)| r * v).sum();
                (s.abs() / norm, l2(x))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let x_max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(MarginProfile {
            rho: rho.to_vec(),
            margins: pairs.iter().map(|p| p.0).collect(),
            norms: pairs.iter().map(|p| p.1).collect(),
            x_max,
        })
    }

    pub fn n(&self) -> usize {
        self.margins.len()
    }

    pub fn p(&self) -> usize {
        self.rho.len()
    }

    pub fn gamma_min(&self) -> f64 {
        self.margins[0]
    }

    /// k-th smallest normalized margin, 1-based.
    pub fn gamma_k(&self, k: usize) -> Result<f64, BoundsError> {
        if k == 0 || k > self.n() {
            return Err(BoundsError::BadRank { k, n: self.n() });
        }
        Ok(self.margins[k - 1])
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Largest example norm among examples with margin at least the k-th:
    /// examples strictly below it are the ones the k-th margin bound gives
    /// up on, so they drop out of the norm too.
    pub fn x_k(&self, k: usize) -> Result<f64, BoundsError> {
        let g = self.gamma_k(k)?;
        Ok(self
            .margins
            .iter()
            .zip(&self.norms)
            .filter(|(m, _)| **m >= g)
            .map(|(_, n)| *n)
            .fold(0.0, f64::max))
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Outcome of a resolution-bound computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionBound {
    /// Smallest integer grid radius strictly above the bound; rounding the
    /// reference vector onto this grid preserves its hard classifications.
    Lambda(i64),
    /// An example sits exactly on the hyperplane; the guarantee holds for
    /// any grid, so no radius is prescribed.
    ZeroMargin,
    /// Every example was given up on; no guarantee remains to size a grid
    /// for.
    Degenerate,
}

/// Grid radius that preserves every classification of the reference vector:
/// smallest integer strictly above X_max * sqrt(P) / (2 * gamma_min).
pub fn min_margin_lambda(profile: &MarginProfile) -> ResolutionBound {
    let g = profile.gamma_min();
    if g == 0.0 {
        return ResolutionBound::ZeroMargin;
    }
    let bound = profile.x_max() * (profile.p() as f64).sqrt() / (2.0 * g);
    ResolutionBound::Lambda(bound.floor() as i64 + 1)
}

/// Grid radius that preserves the reference classifications except on the
/// examples strictly below the k-th smallest margin: at most k - 1 of them,
/// so the rounded loss exceeds the reference loss by at most k - 1.
///
/// Exclusion is strict. Including the k-th margin itself would give up on at
/// least k examples and void the k - 1 guarantee.
pub fn kth_margin_lambda(profile: &MarginProfile, k: usize) -> Result<ResolutionBound, BoundsError> {
    let n = profile.n();
    if k == 0 || k > n {
        return Err(BoundsError::BadRank { k, n });
    }
    if k == n {
        // Giving up on all but the widest margin leaves a guarantee of
        // "at most N - 1 extra errors", which any grid satisfies.
        return Ok(ResolutionBound::Degenerate);
    }
    let g = profile.gamma_k(k)?;
    if g == 0.0 {
        return Ok(ResolutionBound::ZeroMargin);
    }
    let bound = profile.x_k(k)? * (profile.p() as f64).sqrt() / (2.0 * g);
    Ok(ResolutionBound::Lambda(bound.floor() as i64 + 1))
}

/// Rounds the unit-normalized reference vector onto the integer grid of
/// radius `lambda_cap`: each entry becomes the nearest integer to
/// cap * rho_j / ||rho||, ties away from zero.
pub fn round_to_grid(rho: &[f64], lambda_cap: i64) -> Result<Vec<i64>, BoundsError> {
    let norm = l2(rho);
    if norm == 0.0 {
        return Err(BoundsError::ZeroVector);
    }
    Ok(rho
        .iter()
        .map(|r| (lambda_cap as f64 * r / norm).round() as i64)
        .collect())
}

/// Natural log of a positive big integer, exact to f64 precision: the top
/// bits supply the mantissa, the remaining width the exponent.
fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 53;
    let top: BigUint = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Additive generalization gap for a finite hypothesis class:
/// sqrt((ln |L| - ln delta) / (2N)).
pub fn occam_gap(hypothesis_count: &BigUint, n: usize, delta: f64) -> Result<f64, BoundsError> {
    if hypothesis_count.is_zero() {
        return Err(BoundsError::BadCount);
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(BoundsError::BadConfidence(delta));
    }
    if n == 0 {
        return Err(BoundsError::BadSample);
    }
    Ok(((ln_biguint(hypothesis_count) - delta.ln()) / (2.0 * n as f64)).sqrt())
}

/// Number of coefficient vectors in the symmetric integer box of radius
/// `lambda_cap` that any use-cost optimum can reach: the zero model has
/// objective at most 1, so an optimum uses at most floor(1/c0) features.
pub fn l0_hypothesis_count(p: usize, lambda_cap: u64, c0: f64) -> Result<BigUint, BoundsError> {
    if c0 <= 0.0 {
        return Err(BoundsError::BadPenalty(c0));
    }
    let k_max = p.min((1.0 / c0).floor() as usize);
    let two_l = BigUint::from(2 * lambda_cap);
    let mut total = BigUint::zero();
    let mut choose = BigUint::one();
    let mut pow = BigUint::one();
    for k in 0..=k_max {
        if k > 0 {
            // C(p, k) = C(p, k-1) * (p - k + 1) / k, exact at every step.
            choose = choose * BigUint::from(p - k + 1) / BigUint::from(k);
            pow *= &two_l;
        }
        total += &choose * &pow;
    }
    Ok(total)
}

pub const COPRIME_MAX_P: usize = 6;
pub const COPRIME_MAX_LAMBDA: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoprimeCount {
    /// Nonzero vectors in the box whose absolute values have gcd 1.
    pub count: u128,
    /// Fraction of the full box (zero vector included in the denominator).
    pub relative_density: f64,
}

fn mobius(n: u64) -> i64 {
    if n == 1 {
        return 1;
    }
    let (mut m, mut sign) = (n, 1i64);
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            m /= d;
            if m % d == 0 {
                return 0;
            }
            sign = -sign;
        }
        d += 1;
    }
    if m > 1 {
        sign = -sign;
    }
    sign
}

/// Counts coprime vectors by inclusion-exclusion over the shared divisor:
/// vectors with every entry divisible by d form a box of radius
/// floor(lambda/d), and the Mobius function alternates the overlaps away.
pub fn coprime_count(p: usize, lambda_cap: u64) -> Result<CoprimeCount, BoundsError> {
    if p == 0 || p > COPRIME_MAX_P || lambda_cap == 0 || lambda_cap > COPRIME_MAX_LAMBDA {
        return Err(BoundsError::EnumerationBudget {
            p,
            lambda: lambda_cap,
            max_p: COPRIME_MAX_P,
            max_lambda: COPRIME_MAX_LAMBDA,
        });
    }
    let box_of = |radius: u64| -> u128 { (2 * radius as u128 + 1).pow(p as u32) };
    let mut count: i128 = 0;
    for d in 1..=lambda_cap {
        let mu = mobius(d) as i128;
        if mu != 0 {
            count += mu * (box_of(lambda_cap / d) - 1) as i128;
        }
    }
    let total = box_of(lambda_cap);
    Ok(CoprimeCount {
        count: count as u128,
        relative_density: count as f64 / total as f64,
    })
}

/// One row per (P, Lambda) pair: the coprime count and density, and the
/// relative reduction of the generalization gap versus the full box at the
/// given confidence and sample size.
pub fn write_density_table<W: Write>(
    mut w: W,
    ps: &[usize],
    lambdas: &[u64],
    delta: f64,
    n: usize,
) -> Result<(), BoundsError> {
    writeln!(w, "p,lambda,coprime_count,density,gap_improvement")?;
    for &p in ps {
        for &l in lambdas {
            let c = coprime_count(p, l)?;
            let full = BigUint::from(2 * l + 1).pow(p as u32);
            let gap_full = occam_gap(&full, n, delta)?;
            let gap_coprime = occam_gap(&BigUint::from(c.count), n, delta)?;
            let improvement = (gap_full - gap_coprime) / gap_full;
            writeln!(
                w,
                "{},{},{},{},{}",
                p, l, c.count, c.relative_density, improvement
            )?;
        }
    }
    Ok(())
}
