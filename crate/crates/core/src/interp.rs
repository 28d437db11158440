//! Admissible coefficient value sets.
//!
//! Each coefficient draws its value from a finite set of reals that always
//! contains 0, so the zero model is representable in every formulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error("coefficient set is empty")]
    Empty,
    #[error("coefficient set must contain 0")]
    MissingZero,
    #[error("coefficient set contains a non-finite value")]
    NonFinite,
    #[error("bad integer range [{0}, {1}]: must satisfy lo <= 0 <= hi")]
    BadRange(i64, i64),
}

/// Per-coefficient sign restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Free,
    NonNeg,
    NonPos,
}

/// A finite admissible value set for one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilitySet {
    values: Vec<f64>,
}

impl InterpretabilitySet {
    /// The symmetric integer box Z n [-lambda_max, lambda_max].
    pub fn bounded(lambda_max: u32) -> Self {
        let m = lambda_max as i64;
        InterpretabilitySet {
            values: (-m..=m).map(|v| v as f64).collect(),
        }
    }

    /// Z n [lo, hi]; requires lo <= 0 <= hi.
    pub fn integer_range(lo: i64, hi: i64) -> Result<Self, InterpError> {
        if lo > 0 || hi < 0 {
            return Err(InterpError::BadRange(lo, hi));
        }
        Ok(InterpretabilitySet {
            values: (lo..=hi).map(|v| v as f64).collect(),
        })
    }

    /// The singleton {0}.
    pub fn zero_only() -> Self {
        InterpretabilitySet { values: vec![0.0] }
    }

    /// An explicit value list; deduplicated and sorted, must contain 0.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self, InterpError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InterpError::NonFinite);
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        if values.is_empty() {
            return Err(InterpError::Empty);
        }
        if !values.contains(&0.0) {
            return Err(InterpError::MissingZero);
        }
        Ok(InterpretabilitySet { values })
    }

    /// Intersects with the half-line given by `sign`. 0 always survives.
    pub fn sign_restricted(&self, sign: Sign) -> Self {
        let values = match sign {
            Sign::Free => self.values.clone(),
            Sign::NonNeg => self.values.iter().copied().filter(|&v| v >= 0.0).collect(),
            Sign::NonPos => self.values.iter().copied().filter(|&v| v <= 0.0).collect(),
        };
        InterpretabilitySet { values }
    }

    /// Sorted admissible values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.values.iter().any(|&x| x == v)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max over the set of `v * c` for a fixed multiplier `c`.
    pub fn max_scaled(&self, c: f64) -> f64 {
        if c >= 0.0 {
            self.max() * c
        } else {
            self.min() * c
        }
    }

    /// The nonzero values, in sorted order.
    pub fn nonzero_values(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|&v| v != 0.0).collect()
    }

    /// Some((lo, hi)) when the set is exactly the consecutive integers
    /// lo..=hi, which lets formulations use a plain bounded integer
    /// variable instead of selector binaries.
    pub fn contiguous_integers(&self) -> Option<(i64, i64)> {
        if self.values.iter().any(|v| v.fract() != 0.0) {
            return None;
        }
        let lo = self.values[0] as i64;
        let hi = *self.values.last().unwrap() as i64;
        if (hi - lo + 1) as usize == self.values.len() {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Nearest admissible value to `x` (ties toward the larger value).
    pub fn nearest(&self, x: f64) -> f64 {
        let mut best = self.values[0];
        let mut bd = (x - best).abs();
        for &v in &self.values[1..] {
            let d = (x - v).abs();
            if d < bd || (d == bd && v > best) {
                best = v;
                bd = d;
            }
        }
        best
    }
}
