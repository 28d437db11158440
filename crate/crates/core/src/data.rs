//! Datasets, class weights, and binarization into threshold rules.
//!
//! Every example carries an intercept slot: `features[0] == 1.0` always, so
//! coefficient vectors have length P+1 and formulations never special-case
//! the intercept in loss terms.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("row {row}: cannot parse label {value:?}; labels must be -1/+1 (or 0/1, or values listed in an explicit mapping)")]
    BadLabel { row: usize, value: String },
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: binary feature has value {value} outside {{0,1}}")]
    NotBinary {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("feature {0:?}: real feature has a single distinct value; no thresholds exist")]
    DegenerateFeature(String),
    #[error("feature {0:?}: no thresholds supplied by the policy")]
    NoThresholds(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("explicit class weight {0} must lie strictly inside (0, 1)")]
    BadWeight(f64),
    #[error("column {0:?} is not a 0/1 column; rule-table formulations require binarized data")]
    NonBinaryColumn(String),
    #[error("transform has {got} entries for {want} features")]
    TransformLength { got: usize, want: usize },
}

/// Declared kind of a raw feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Categorical,
    Real,
}

/// One training example. `features[0]` is the intercept slot, fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: i8,
}

/// A loaded dataset: N examples over P named features plus the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    kinds: Vec<FeatureKind>,
    /// For categorical features: the sorted category labels; the numeric
    /// value stored in `features` is the index into this list.
    categories: Vec<Option<Vec<String>>>,
    examples: Vec<Example>,
}

impl Dataset {
    /// Builds a dataset from rows of raw (non-intercept) feature values.
    pub fn from_rows(
        feature_names: Vec<String>,
        kinds: Vec<FeatureKind>,
        rows: Vec<(Vec<f64>, i8)>,
    ) -> Result<Self, DataError> {
        assert_eq!(feature_names.len(), kinds.len());
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let p = feature_names.len();
        let categories = vec![None; p];
        let mut examples = Vec::with_capacity(rows.len());
        for (row_idx, (vals, label)) in rows.into_iter().enumerate() {
            assert_eq!(vals.len(), p, "row width mismatch");
            debug_assert!(label == 1 || label == -1);
            for (j, v) in vals.iter().enumerate() {
                if kinds[j] == FeatureKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(DataError::NotBinary {
                        row: row_idx + 1,
                        column: feature_names[j].clone(),
                        value: *v,
                    });
                }
            }
            let mut features = Vec::with_capacity(p + 1);
            features.push(1.0);
            features.extend(vals);
            examples.push(Example { features, label });
        }
        Ok(Dataset {
            feature_names,
            kinds,
            categories,
            examples,
        })
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    /// Number of features, excluding the intercept slot.
    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn categories(&self, j: usize) -> Option<&[String]> {
        self.categories[j].as_deref()
    }

    /// Index of a feature by name (0-based over non-intercept features).
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.examples[i].label > 0).collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.examples[i].label < 0).collect()
    }

    pub fn n_positive(&self) -> usize {
        self.examples.iter().filter(|e| e.label > 0).count()
    }

    pub fn n_negative(&self) -> usize {
        self.examples.iter().filter(|e| e.label < 0).count()
    }

    /// Raw column values (without intercept), j over 0..P.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.examples.iter().map(|e| e.features[j + 1]).collect()
    }

    /// True when every non-intercept value lies in {0, 1}.
    pub fn all_binary(&self) -> bool {
        self.examples
            .iter()
            .all(|e| e.features[1..].iter().all(|&v| v == 0.0 || v == 1.0))
    }

    /// Attaches category labels to a categorical feature. Stored values must
    /// already be indices into `cats`, which must be sorted so the coding
    /// matches what a CSV round trip produces.
    pub fn with_categories(mut self, feature: &str, cats: Vec<String>) -> Result<Self, DataError> {
        let j = self
            .feature_index(feature)
            .ok_or_else(|| DataError::UnknownFeature(feature.to_string()))?;
        assert_eq!(self.kinds[j], FeatureKind::Categorical);
        assert!(cats.windows(2).all(|w| w[0] < w[1]), "categories must be sorted");
        for ex in &self.examples {
            let v = ex.features[j + 1];
            assert!(
                v == v.trunc() && v >= 0.0 && (v as usize) < cats.len(),
                "value {v} is not a category index"
            );
        }
        self.categories[j] = Some(cats);
        Ok(self)
    }

    /// Sub-dataset with the given example indices (order preserved).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
            categories: self.categories.clone(),
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// How label strings map to {-1, +1}.
#[derive(Debug, Clone, Default)]
pub enum LabelMapping {
    /// Accept "1"/"+1" and "-1" only.
    #[default]
    PlusMinusOne,
    /// Accept "0" as -1 and "1" as +1.
    ZeroOne,
    /// Explicit value table.
    Explicit(BTreeMap<String, i8>),
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub mapping: LabelMapping,
    /// Declared feature kinds; unlisted columns default to `Real`.
    pub kinds: BTreeMap<String, FeatureKind>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        LoadOptions {
            label_column: label_column.into(),
            mapping: LabelMapping::default(),
            kinds: BTreeMap::new(),
        }
    }
}

fn parse_label(raw: &str, mapping: &LabelMapping, row: usize) -> Result<i8, DataError> {
    let t = raw.trim();
    let bad = || DataError::BadLabel {
        row,
        value: raw.to_string(),
    };
    match mapping {
        LabelMapping::PlusMinusOne => match t {
            "1" | "+1" => Ok(1),
            "-1" => Ok(-1),
            _ => Err(bad()),
        },
        LabelMapping::ZeroOne => match t {
            "1" => Ok(1),
            "0" => Ok(-1),
            _ => Err(bad()),
        },
        LabelMapping::Explicit(map) => map.get(t).copied().ok_or_else(bad),
    }
}

/// Loads a headered CSV file. The label column is mapped to {-1, +1}; every
/// other column becomes a feature in header order. Errors carry 1-based data
/// row numbers (the header is row 0).
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Csv(e.to_string()))?;
    load_dataset_from_reader(file, opts)
}

pub fn load_dataset_from_reader<R: Read>(
    reader: R,
    opts: &LoadOptions,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let label_pos = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| DataError::MissingLabelColumn(opts.label_column.clone()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_pos)
        .map(|(_, h)| h.clone())
        .collect();
    let kinds: Vec<FeatureKind> = feature_names
        .iter()
        .map(|n| opts.kinds.get(n).copied().unwrap_or(FeatureKind::Real))
        .collect();
    let p = feature_names.len();

    // Categorical columns are collected as strings first, then coded by the
    // sorted distinct values so the numeric view is deterministic.
    let mut raw_rows: Vec<(Vec<String>, i8)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let label = parse_label(&rec[label_pos], &opts.mapping, row)?;
        let mut vals = Vec::with_capacity(p);
        for (i, field) in rec.iter().enumerate() {
            if i != label_pos {
                vals.push(field.to_string());
            }
        }
        raw_rows.push((vals, label));
    }
    if raw_rows.is_empty() {
        return Err(DataError::Empty);
    }

    let mut categories: Vec<Option<Vec<String>>> = vec![None; p];
    for (j, kind) in kinds.iter().enumerate() {
        if *kind == FeatureKind::Categorical {
            let mut cats: Vec<String> =
                raw_rows.iter().map(|(vals, _)| vals[j].clone()).collect();
            cats.sort();
            cats.dedup();
            categories[j] = Some(cats);
        }
    }

    let mut examples = Vec::with_capacity(raw_rows.len());
    for (idx, (vals, label)) in raw_rows.iter().enumerate() {
        let row = idx + 1;
        let mut features = Vec::with_capacity(p + 1);
        features.push(1.0);
        for j in 0..p {
            let v = match &categories[j] {
                Some(cats) => cats.iter().position(|c| c == &vals[j]).unwrap() as f64,
                None => vals[j].parse::<f64>().map_err(|_| DataError::BadNumber {
                    row,
                    column: feature_names[j].clone(),
                    value: vals[j].clone(),
                })?,
            };
            if kinds[j] == FeatureKind::Binary && v != 0.0 && v != 1.0 {
                return Err(DataError::NotBinary {
                    row,
                    column: feature_names[j].clone(),
                    value: v,
                });
            }
            features.push(v);
        }
        examples.push(Example {
            features,
            label: *label,
        });
    }

    Ok(Dataset {
        feature_names,
        kinds,
        categories,
        examples,
    })
}

/// Writes a dataset as a headered CSV that [`load_dataset`] reads back to an
/// identical value (given the same kind declarations). Categorical features
/// with attached category labels are written as those labels; everything
/// else is numeric, labels as 1/-1.
pub fn write_dataset(ds: &Dataset, path: &Path, label_column: &str) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    let mut header: Vec<String> = ds.feature_names().to_vec();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(|e| DataError::Csv(e.to_string()))?;
    for ex in ds.examples() {
        let mut rec: Vec<String> = Vec::with_capacity(ds.p() + 1);
        for j in 0..ds.p() {
            let v = ex.features[j + 1];
            rec.push(match ds.categories(j) {
                Some(cats) => cats[v as usize].clone(),
                None if v == v.trunc() => format!("{}", v as i64),
                None => format!("{v}"),
            });
        }
        rec.push(if ex.label > 0 { "1".into() } else { "-1".into() });
        w.write_record(&rec).map_err(|e| DataError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(())
}

/// Class weights with `w_plus + w_minus = 1`.
///
/// The training loss multiplies per-example indicators by `2 * w`, so the
/// unweighted setting (1/2, 1/2) reproduces the plain average exactly and
/// the zero vector scores objective 1 under unweighted 0-1 loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_plus: f64,
    pub w_minus: f64,
}

impl ClassWeights {
    pub fn unweighted() -> Self {
        ClassWeights {
            w_plus: 0.5,
            w_minus: 0.5,
        }
    }

    /// Loss multipliers (positive class, negative class).
    pub fn multipliers(&self) -> (f64, f64) {
        (2.0 * self.w_plus, 2.0 * self.w_minus)
    }

    pub fn multiplier_for(&self, label: i8) -> f64 {
        if label > 0 {
            2.0 * self.w_plus
        } else {
            2.0 * self.w_minus
        }
    }
}

/// Weighting modes for imbalanced training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Unweighted,
    /// w+ proportional to N-, so each class contributes equally.
    Balanced,
    /// w+ strictly below 1/(1+N+): any model that misclassifies a negative
    /// is beaten by one that classifies all negatives correctly.
    AllNegativesCorrect,
    /// w+ strictly above N-/(1+N-): symmetric guarantee for positives.
    AllPositivesCorrect,
    Explicit(f64),
}

/// Builds class weights from a mode and the class counts.
pub fn make_weights(mode: WeightMode, n_pos: usize, n_neg: usize) -> Result<ClassWeights, DataError> {
    let w_plus = match mode {
        WeightMode::Unweighted => 0.5,
        WeightMode::Balanced => {
            let n = (n_pos + n_neg) as f64;
            n_neg as f64 / n
        }
        WeightMode::AllNegativesCorrect => {
            let bound = 1.0 / (1.0 + n_pos as f64);
            bound / 2.0
        }
        WeightMode::AllPositivesCorrect => {
            let bound = n_neg as f64 / (1.0 + n_neg as f64);
            bound + (1.0 - bound) / 2.0
        }
        WeightMode::Explicit(w) => {
            if !(w > 0.0 && w < 1.0) {
                return Err(DataError::BadWeight(w));
            }
            w
        }
    };
    Ok(ClassWeights {
        w_plus,
        w_minus: 1.0 - w_plus,
    })
}

/// Where a binary rule came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuleForm {
    /// The raw binary feature itself.
    Passthrough,
    /// Indicator of one category of a categorical feature.
    CategoryEquals(String),
    /// Indicator {x >= threshold} on a real feature.
    ThresholdGe(f64),
}

/// Metadata for one 0/1 rule column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleInfo {
    pub name: String,
    /// Index of the originating feature in the raw dataset.
    pub parent: usize,
    pub parent_name: String,
    pub form: RuleForm,
    /// True for the negated copy (1 - h).
    pub complemented: bool,
}

/// The full set of rules produced by binarization, grouped by parent feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRuleSet {
    pub rules: Vec<RuleInfo>,
}

impl BinaryRuleSet {
    /// Rule column indices grouped by parent feature, parents in order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut by_parent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (t, r) in self.rules.iter().enumerate() {
            by_parent.entry(r.parent).or_default().push(t);
        }
        by_parent.into_values().collect()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Threshold selection policy for real features.
#[derive(Debug, Clone, Default)]
pub enum ThresholdPolicy {
    /// Midpoints between adjacent distinct sorted values: at most N-1
    /// thresholds per feature. This is the complete set; any other
    /// threshold yields a duplicate rule column.
    #[default]
    AllAdjacentMidpoints,
    /// Caller-supplied thresholds per feature name. Domain-declared lists
    /// (e.g. from a schema sidecar) enter through this variant too.
    ExplicitThresholds(BTreeMap<String, Vec<f64>>),
}

/// Options for [`binarize`].
#[derive(Debug, Clone, Default)]
pub struct BinarizeOptions {
    pub policy: ThresholdPolicy,
    /// Also emit the negated copy 1-h of every rule.
    pub include_complements: bool,
}

fn format_threshold(v: f64) -> String {
    if v == v.trunc() {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Converts a raw dataset into a 0/1 rule dataset plus rule metadata.
pub fn binarize(ds: &Dataset, opts: &BinarizeOptions) -> Result<(Dataset, BinaryRuleSet), DataError> {
    let mut rules: Vec<RuleInfo> = Vec::new();
    for j in 0..ds.p() {
        let name = &ds.feature_names()[j];
        match ds.kinds()[j] {
            FeatureKind::Binary => {
                for v in ds.column(j) {
                    if v != 0.0 && v != 1.0 {
                        return Err(DataError::NotBinary {
                            row: 0,
                            column: name.clone(),
                            value: v,
                        });
                    }
                }
                rules.push(RuleInfo {
                    name: name.clone(),
                    parent: j,
                    parent_name: name.clone(),
                    form: RuleForm::Passthrough,
                    complemented: false,
                });
            }
            FeatureKind::Categorical => {
                let cats: Vec<String> = match ds.categories(j) {
                    Some(c) => c.to_vec(),
                    None => {
                        // Numeric-coded categorical: distinct values.
                        let mut vals = ds.column(j);
                        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        vals.dedup();
                        vals.iter().map(|v| format_threshold(*v)).collect()
                    }
                };
                for cat in &cats {
                    rules.push(RuleInfo {
                        name: format!("{name}={cat}"),
                        parent: j,
                        parent_name: name.clone(),
                        form: RuleForm::CategoryEquals(cat.clone()),
                        complemented: false,
                    });
                }
            }
            FeatureKind::Real => {
                let thresholds: Vec<f64> = match &opts.policy {
                    ThresholdPolicy::AllAdjacentMidpoints => {
                        let mut vals = ds.column(j);
                        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        vals.dedup();
                        if vals.len() < 2 {
                            return Err(DataError::DegenerateFeature(name.clone()));
                        }
                        vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
                    }
                    ThresholdPolicy::ExplicitThresholds(map) => {
                        let list = map
                            .get(name)
                            .ok_or_else(|| DataError::NoThresholds(name.clone()))?;
                        if list.is_empty() {
                            return Err(DataError::NoThresholds(name.clone()));
                        }
                        list.clone()
                    }
                };
                for v in thresholds {
                    rules.push(RuleInfo {
                        name: format!("{name}>={}", format_threshold(v)),
                        parent: j,
                        parent_name: name.clone(),
                        form: RuleForm::ThresholdGe(v),
                        complemented: false,
                    });
                }
            }
        }
    }

    if opts.include_complements {
        let base = rules.clone();
        for r in base {
            let name = match &r.form {
                RuleForm::Passthrough => format!("NOT {}", r.name),
                RuleForm::CategoryEquals(cat) => format!("{}!={cat}", r.parent_name),
                RuleForm::ThresholdGe(v) => {
                    format!("{}<{}", r.parent_name, format_threshold(*v))
                }
            };
            rules.push(RuleInfo {
                name,
                complemented: true,
                ..r
            });
        }
    }

    let rules = BinaryRuleSet { rules };
    let rule_ds = apply_rules(ds, &rules)?;
    Ok((rule_ds, rules))
}

/// Rescales selected columns via `x -> (x - lo) / (hi - lo)`. `transform`
/// holds one entry per feature; `None` leaves the column untouched. The
/// same transform applies train-fold scaling to held-out examples.
pub fn scale_columns(ds: &Dataset, transform: &[Option<(f64, f64)>]) -> Result<Dataset, DataError> {
    if transform.len() != ds.p() {
        return Err(DataError::TransformLength {
            got: transform.len(),
            want: ds.p(),
        });
    }
    if transform.iter().all(|t| t.is_none()) {
        return Ok(ds.clone());
    }
    let mut out = ds.clone();
    for ex in &mut out.examples {
        for (j, t) in transform.iter().enumerate() {
            if let Some((lo, hi)) = t {
                ex.features[j + 1] = (ex.features[j + 1] - lo) / (hi - lo);
            }
        }
    }
    Ok(out)
}

/// Evaluates a rule set against a raw dataset, producing the 0/1 rule
/// dataset. Works on any data with the same columns (and category coding)
/// as the data the rules were derived from, so held-out examples can be
/// scored under training-derived rules.
pub fn apply_rules(ds: &Dataset, rules: &BinaryRuleSet) -> Result<Dataset, DataError> {
    for r in &rules.rules {
        if r.parent >= ds.p() {
            return Err(DataError::UnknownFeature(r.parent_name.clone()));
        }
    }
    let rule_value = |r: &RuleInfo, ex: &Example| -> f64 {
        let raw = ex.features[r.parent + 1];
        let base = match &r.form {
            RuleForm::Passthrough => raw,
            RuleForm::CategoryEquals(cat) => {
                let hit = match ds.categories(r.parent) {
                    Some(cats) => cats.get(raw as usize).map(|c| c == cat).unwrap_or(false),
                    None => format_threshold(raw) == *cat,
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            RuleForm::ThresholdGe(v) => {
                if raw >= *v {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if r.complemented {
            1.0 - base
        } else {
            base
        }
    };

    let examples: Vec<Example> = ds
        .examples()
        .iter()
        .map(|ex| {
            let mut features = Vec::with_capacity(rules.len() + 1);
            features.push(1.0);
            for r in &rules.rules {
                features.push(rule_value(r, ex));
            }
            Example {
                features,
                label: ex.label,
            }
        })
        .collect();

    Ok(Dataset {
        feature_names: rules.rules.iter().map(|r| r.name.clone()).collect(),
        kinds: vec![FeatureKind::Binary; rules.len()],
        categories: vec![None; rules.len()],
        examples,
    })
}
