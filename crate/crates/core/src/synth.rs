//! Seeded generators for the bundled example corpora and for randomized
//! test instances. Every generator is a pure function of its seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, FeatureKind};

/// Per-feature class-conditional (mean, std) pairs, benign then malignant,
/// chosen to mimic the published per-class statistics of the Wisconsin
/// biopsy data: cell-size uniformity and bare nuclei dominate.
const BIOPSY: [(&str, f64, f64, f64, f64); 9] = [
    ("ClumpThickness", 2.9, 1.6, 7.2, 2.4),
    ("UniformityOfCellSize", 1.3, 0.9, 6.6, 2.5),
    ("UniformityOfCellShape", 1.4, 1.0, 6.6, 2.5),
    ("MarginalAdhesion", 1.4, 1.0, 5.5, 3.2),
    ("SingleEpithelialCellSize", 2.1, 0.9, 5.3, 2.5),
    ("BareNuclei", 1.3, 1.2, 7.6, 3.1),
    ("BlandChromatin", 2.1, 1.1, 6.0, 2.3),
    ("NormalNucleoli", 1.3, 1.0, 5.9, 3.4),
    ("Mitoses", 1.1, 0.5, 2.5, 2.6),
];

/// 683 biopsies, 9 integer-valued features in 1..=10, +1 = malignant
/// (239 of 683, the published class split).
pub fn breastcancer(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(683);
    for i in 0..683 {
        let malignant = i < 239;
        let vals = BIOPSY
            .iter()
            .map(|&(_, bm, bs, mm, ms)| {
                let (mean, std) = if malignant { (mm, ms) } else { (bm, bs) };
                Normal::new(mean, std).unwrap().sample(&mut rng).round().clamp(1.0, 10.0)
            })
            .collect();
        rows.push((vals, if malignant { 1 } else { -1 }));
    }
    rows.shuffle(&mut rng);
    Dataset::from_rows(
        BIOPSY.iter().map(|f| f.0.to_string()).collect(),
        vec![FeatureKind::Real; 9],
        rows,
    )
    .unwrap()
}

const FIRM_FEATURES: [&str; 6] = [
    "IndustrialRisk",
    "ManagementRisk",
    "FinancialFlexibility",
    "Credibility",
    "Competitiveness",
    "OperatingRisk",
];

/// 250 firms, 6 qualitative ratings in {A, N, P}, +1 = solvent (143 of
/// 250). Competitiveness dominates, so a near-perfect one-rule model
/// exists, as in the original qualitative-bankruptcy data.
pub fn bankruptcy(seed: u64) -> Dataset {
    // (P(A), P(N)) per feature; P is the remainder. Bankrupt row first.
    const BANKRUPT: [(f64, f64); 6] = [
        (0.35, 0.45),
        (0.35, 0.45),
        (0.30, 0.62),
        (0.30, 0.62),
        (0.05, 0.93),
        (0.35, 0.45),
    ];
    const SOLVENT: [(f64, f64); 6] = [
        (0.35, 0.20),
        (0.35, 0.20),
        (0.30, 0.08),
        (0.30, 0.08),
        (0.08, 0.02),
        (0.35, 0.20),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(250);
    for i in 0..250 {
        let bankrupt = i < 107;
        let table = if bankrupt { &BANKRUPT } else { &SOLVENT };
        let vals = table
            .iter()
            .map(|&(pa, pn)| {
                let u: f64 = rng.gen();
                if u < pa {
                    0.0
                } else if u < pa + pn {
                    1.0
                } else {
                    2.0
                }
            })
            .collect();
        rows.push((vals, if bankrupt { -1 } else { 1 }));
    }
    rows.shuffle(&mut rng);
    let mut ds = Dataset::from_rows(
        FIRM_FEATURES.iter().map(|s| s.to_string()).collect(),
        vec![FeatureKind::Categorical; 6],
        rows,
    )
    .unwrap();
    for name in FIRM_FEATURES {
        ds = ds
            .with_categories(name, vec!["A".into(), "N".into(), "P".into()])
            .unwrap();
    }
    ds
}

/// Balanced two-class Gaussian: positives at mean 2 in every coordinate,
/// negatives at 0, unit variance.
pub fn gaussian_instance(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let label: i8 = if i < n / 2 { 1 } else { -1 };
        let shift = if label > 0 { 2.0 } else { 0.0 };
        let vals = (0..p).map(|_| shift + norm.sample(&mut rng)).collect();
        rows.push((vals, label));
    }
    rows.shuffle(&mut rng);
    Dataset::from_rows(
        (0..p).map(|j| format!("x{}", j + 1)).collect(),
        vec![FeatureKind::Real; p],
        rows,
    )
    .unwrap()
}

/// Small integer-featured instance with weak label correlation: N in 6..=30,
/// P in 1..=4, features in [-3, 3], both classes present.
pub fn small_random_instance(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(6..=30);
    let p = rng.gen_range(1..=4);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let label: i8 = match i {
            0 => 1,
            1 => -1,
            _ => {
                if rng.gen_bool(0.5) {
                    1
                } else {
                    -1
                }
            }
        };
        let vals = (0..p)
            .map(|_| (label as i64 + rng.gen_range(-2..=2)) as f64)
            .collect();
        rows.push((vals, label));
    }
    rows.shuffle(&mut rng);
    Dataset::from_rows(
        (0..p).map(|j| format!("x{}", j + 1)).collect(),
        vec![FeatureKind::Real; p],
        rows,
    )
    .unwrap()
}

/// Real-valued points labeled by a random hyperplane through the origin,
/// with normalized margin above 0.05 on every example. Returns the
/// labeling coefficient vector alongside the data.
pub fn separable_instance(seed: u64, n: usize, p: usize) -> (Dataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho: Vec<f64> = loop {
        let r: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if r.iter().map(|a| a * a).sum::<f64>().sqrt() > 0.5 {
            break r;
        }
    };
    let norm = rho.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s: f64 = rho.iter().zip(&x).map(|(r, v)| r * v).sum();
        if s.abs() / norm <= 0.05 {
            continue;
        }
        rows.push((x, if s > 0.0 { 1 } else { -1 }));
    }
    let ds = Dataset::from_rows(
        (0..p).map(|j| format!("x{}", j + 1)).collect(),
        vec![FeatureKind::Real; p],
        rows,
    )
    .unwrap();
    (ds, rho)
}

/// Integer instance separable by the first coordinate with margin at least
/// 1; the second coordinate is noise.
pub fn margin_separable_instance(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let y: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let x1 = y as f64 * rng.gen_range(1..=2) as f64;
        let x2 = rng.gen_range(-2..=2) as f64;
        rows.push((vec![x1, x2], y));
    }
    Dataset::from_rows(
        vec!["x1".into(), "x2".into()],
        vec![FeatureKind::Real; 2],
        rows,
    )
    .unwrap()
}
