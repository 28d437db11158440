//! Run configuration: one TOML document describes a training job end to
//! end, with all randomness hanging off a single seed. Collections are
//! ordered maps so identical configs always resolve identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BinarizeOptions, FeatureKind, LabelMapping, ThresholdPolicy, WeightMode};
use crate::evaluate::CoefficientLevel;
use crate::formulation::{ModelFamily, OperationalConstraints, SlimPenalty, TilmPenalty};
use crate::interp::{InterpError, InterpretabilitySet, Sign};
use crate::loss_decomposition::LossKind;
use crate::milp::SolveOptions;
use crate::reduction::ProxyKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field} is required for family {family}")]
    MissingField {
        family: ModelFamily,
        field: &'static str,
    },
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error("config names unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("coefficient set for {0}: give min/max or values, not both")]
    AmbiguousSet(String),
    #[error("coefficient set for {0}: {1}")]
    BadSet(String, #[source] InterpError),
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        msg: msg.into(),
    }
}

/// Top-level run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub constraints: ConstraintsConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub binarize: Option<BinarizeConfig>,
    #[serde(default)]
    pub reduction: Option<DataReductionConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// Regularization-path settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Explicit use-cost values; empty means `points` values log-spaced
    /// across the meaningful range [1/(N P), 1 - 1/N].
    pub c0: Vec<f64>,
    pub points: usize,
    /// Stratified hold-out fraction for the test-error column; 0 trains on
    /// everything and leaves the column empty.
    pub holdout: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            c0: Vec::new(),
            points: 20,
            holdout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// Label column name; "label" when absent.
    pub label_column: Option<String>,
    pub label_mapping: LabelMappingConfig,
    /// Explicit label-string table; overrides `label_mapping`.
    pub label_values: BTreeMap<String, i8>,
    /// Feature kind declarations; undeclared columns are real-valued.
    pub kinds: BTreeMap<String, FeatureKind>,
    /// [0, 1] scaling of real features before training, so the margin
    /// stays meaningful on arbitrary scales. `auto` scales only features
    /// with non-integer values.
    pub normalize: NormalizeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeConfig {
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMappingConfig {
    #[default]
    PlusMinusOne,
    ZeroOne,
}

impl DataConfig {
    pub fn label_column(&self) -> &str {
        self.label_column.as_deref().unwrap_or("label")
    }

    pub fn to_mapping(&self) -> LabelMapping {
        if !self.label_values.is_empty() {
            return LabelMapping::Explicit(self.label_values.clone());
        }
        match self.label_mapping {
            LabelMappingConfig::PlusMinusOne => LabelMapping::PlusMinusOne,
            LabelMappingConfig::ZeroOne => LabelMapping::ZeroOne,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Margin override; defaults by data (0.5 all-binary, 0.1 otherwise).
    pub margin: Option<f64>,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsConfig {
    pub intercept: SetConfig,
    pub default: SetConfig,
    pub per_feature: BTreeMap<String, SetConfig>,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        CoefficientsConfig {
            intercept: SetConfig::range(-100, 100),
            default: SetConfig::range(-10, 10),
            per_feature: BTreeMap::new(),
        }
    }
}

impl CoefficientsConfig {
    /// Admissible sets in slot order: intercept, then one per feature.
    pub fn to_sets(&self, feature_names: &[String]) -> Result<Vec<InterpretabilitySet>, ConfigError> {
        for name in self.per_feature.keys() {
            if !feature_names.contains(name) {
                return Err(ConfigError::UnknownFeature(name.clone()));
            }
        }
        let mut sets = vec![self.intercept.to_set("intercept")?];
        for name in feature_names {
            let cfg = self.per_feature.get(name).unwrap_or(&self.default);
            sets.push(cfg.to_set(name)?);
        }
        Ok(sets)
    }
}

/// One coefficient set: a contiguous integer range or an explicit value
/// list (which must contain 0).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetConfig {
    pub min: Option<i64>,
    pub max: Option<i64>,
    pub values: Option<Vec<f64>>,
}

impl SetConfig {
    pub fn range(min: i64, max: i64) -> Self {
        SetConfig {
            min: Some(min),
            max: Some(max),
            values: None,
        }
    }

    pub fn to_set(&self, context: &str) -> Result<InterpretabilitySet, ConfigError> {
        let bad = |e| ConfigError::BadSet(context.to_string(), e);
        match (self.min, self.max, &self.values) {
            (None, None, Some(vals)) => InterpretabilitySet::from_values(vals.clone()).map_err(bad),
            (Some(lo), Some(hi), None) => InterpretabilitySet::integer_range(lo, hi).map_err(bad),
            (None, None, None) => Err(ConfigError::AmbiguousSet(context.to_string())),
            _ => Err(ConfigError::AmbiguousSet(context.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    /// Use cost per feature (scoring systems) or per rule (rule tables).
    pub c0: Option<f64>,
    pub per_feature_c0: BTreeMap<String, f64>,
    pub l1_tiebreak: Option<f64>,
    /// Threshold-rule models: cost per feature used.
    pub cf: Option<f64>,
    /// Threshold-rule models: cost per threshold beyond the first.
    pub ct: Option<f64>,
    pub max_thresholds: Option<usize>,
    /// Personalized level sets, cheapest interpretation first.
    pub levels: Vec<LevelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub cost: f64,
    pub values: Vec<f64>,
}

impl PenaltyConfig {
    pub fn slim(&self, family: ModelFamily, feature_names: &[String]) -> Result<SlimPenalty, ConfigError> {
        let c0 = self.c0.ok_or(ConfigError::MissingField {
            family,
            field: "penalty.c0",
        })?;
        let per_feature_c0 = if self.per_feature_c0.is_empty() {
            None
        } else {
            let mut v = vec![c0; feature_names.len()];
            for (name, &cost) in &self.per_feature_c0 {
                let j = feature_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| ConfigError::UnknownFeature(name.clone()))?;
                v[j] = cost;
            }
            Some(v)
        };
        Ok(SlimPenalty {
            c0,
            per_feature_c0,
            l1_tiebreak: self.l1_tiebreak,
        })
    }

    pub fn mofn_c0(&self) -> Result<f64, ConfigError> {
        self.c0.ok_or(ConfigError::MissingField {
            family: ModelFamily::Mofn,
            field: "penalty.c0",
        })
    }

    pub fn tilm(&self) -> Result<TilmPenalty, ConfigError> {
        let family = ModelFamily::Tilm;
        Ok(TilmPenalty {
            cf: self.cf.ok_or(ConfigError::MissingField {
                family,
                field: "penalty.cf",
            })?,
            ct: self.ct.ok_or(ConfigError::MissingField {
                family,
                field: "penalty.ct",
            })?,
            l1_tiebreak: self.l1_tiebreak,
            max_thresholds: self.max_thresholds.ok_or(ConfigError::MissingField {
                family,
                field: "penalty.max_thresholds",
            })?,
        })
    }

    pub fn pilm_levels(&self) -> Result<Vec<CoefficientLevel>, ConfigError> {
        if self.levels.is_empty() {
            return Err(ConfigError::MissingField {
                family: ModelFamily::Pilm,
                field: "penalty.levels",
            });
        }
        Ok(self
            .levels
            .iter()
            .map(|l| CoefficientLevel {
                cost: l.cost,
                values: l.values.clone(),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub mode: WeightModeConfig,
    /// Positive-class weight, required when mode = "explicit".
    pub w_pos: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightModeConfig {
    #[default]
    Unweighted,
    Balanced,
    AllNegativesCorrect,
    AllPositivesCorrect,
    Explicit,
}

impl WeightsConfig {
    pub fn to_mode(&self) -> Result<WeightMode, ConfigError> {
        Ok(match self.mode {
            WeightModeConfig::Unweighted => WeightMode::Unweighted,
            WeightModeConfig::Balanced => WeightMode::Balanced,
            WeightModeConfig::AllNegativesCorrect => WeightMode::AllNegativesCorrect,
            WeightModeConfig::AllPositivesCorrect => WeightMode::AllPositivesCorrect,
            WeightModeConfig::Explicit => {
                let w = self
                    .w_pos
                    .ok_or_else(|| invalid("weights.w_pos", "required when mode = \"explicit\""))?;
                WeightMode::Explicit(w)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsConfig {
    pub max_model_size: Option<usize>,
    pub max_fpr: Option<f64>,
    pub max_fnr: Option<f64>,
    pub prediction_budget: Option<f64>,
    /// Unit name -> sign restriction.
    pub signs: BTreeMap<String, Sign>,
    pub either_or: Vec<(String, String)>,
    pub if_then: Vec<IfThenConfig>,
    pub hierarchy: Vec<HierarchyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfThenConfig {
    pub when: Vec<String>,
    pub then: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub leaf: String,
    pub ancestor: String,
}

impl ConstraintsConfig {
    /// Resolves unit names to the program's 1-based unit ids. Pass the
    /// names the trained family constrains: feature names for scoring
    /// systems and threshold models, rule-column names for rule tables.
    pub fn resolve(&self, unit_names: &[String]) -> Result<OperationalConstraints, ConfigError> {
        let id = |name: &String| -> Result<usize, ConfigError> {
            unit_names
                .iter()
                .position(|n| n == name)
                .map(|i| i + 1)
                .ok_or_else(|| ConfigError::UnknownFeature(name.clone()))
        };
        Ok(OperationalConstraints {
            max_model_size: self.max_model_size,
            max_fpr: self.max_fpr,
            max_fnr: self.max_fnr,
            prediction_budget: self.prediction_budget,
            signs: self
                .signs
                .iter()
                .map(|(n, &s)| Ok((id(n)?, s)))
                .collect::<Result<_, ConfigError>>()?,
            either_or: self
                .either_or
                .iter()
                .map(|(a, b)| Ok((id(a)?, id(b)?)))
                .collect::<Result<_, ConfigError>>()?,
            if_then: self
                .if_then
                .iter()
                .map(|c| {
                    Ok((
                        c.when.iter().map(&id).collect::<Result<Vec<_>, _>>()?,
                        id(&c.then)?,
                    ))
                })
                .collect::<Result<_, ConfigError>>()?,
            hierarchy: self
                .hierarchy
                .iter()
                .map(|c| Ok((id(&c.leaf)?, id(&c.ancestor)?)))
                .collect::<Result<_, ConfigError>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub time_limit_secs: Option<f64>,
    pub node_limit: Option<usize>,
    pub gap_tolerance: f64,
    pub pool_size: usize,
    pub seed: u64,
    /// Seed the exact search with a coordinate-descent incumbent.
    pub warm_start: bool,
    pub benders: Option<BendersConfig>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            time_limit_secs: None,
            node_limit: None,
            gap_tolerance: 0.0,
            pool_size: 10,
            seed: 0,
            warm_start: true,
            benders: None,
        }
    }
}

impl SolveConfig {
    /// Solver options without a warm-start incumbent; the training pipeline
    /// attaches one when `warm_start` is set.
    pub fn to_options(&self) -> SolveOptions {
        SolveOptions {
            time_limit: self.time_limit_secs,
            node_limit: self.node_limit,
            gap_tolerance: self.gap_tolerance,
            pool_size: self.pool_size,
            deterministic_seed: self.seed,
            initial_incumbent: None,
            record_history: false,
        }
    }
}

/// Loss decomposition settings; presence selects the decomposition solver,
/// which trains scoring systems under a convex loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BendersConfig {
    pub loss: LossKind,
    pub gap_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            loss: LossKind::Logistic,
            gap_tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinarizeConfig {
    /// Explicit thresholds per feature; empty means all adjacent midpoints.
    pub thresholds: BTreeMap<String, Vec<f64>>,
    pub complements: bool,
}

impl BinarizeConfig {
    pub fn to_options(&self) -> BinarizeOptions {
        BinarizeOptions {
            policy: if self.thresholds.is_empty() {
                ThresholdPolicy::AllAdjacentMidpoints
            } else {
                ThresholdPolicy::ExplicitThresholds(self.thresholds.clone())
            },
            include_complements: self.complements,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataReductionConfig {
    pub proxy: ProxyKindConfig,
    /// Level-set width; absent means the widest sound setting, computed
    /// from the zero model.
    pub width: Option<f64>,
    /// Grid points for width-sweep reports.
    pub grid: usize,
}

impl Default for DataReductionConfig {
    fn default() -> Self {
        DataReductionConfig {
            proxy: ProxyKindConfig::IpRelaxation,
            width: None,
            grid: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyKindConfig {
    #[default]
    IpRelaxation,
    Hinge,
}

impl ProxyKindConfig {
    pub fn to_kind(self) -> ProxyKind {
        match self {
            ProxyKindConfig::IpRelaxation => ProxyKind::IpRelaxation,
            ProxyKindConfig::Hinge => ProxyKind::HingeLoss,
        }
    }
}

/// Sidecar schema: feature kinds and domain threshold lists kept next to
/// the data rather than the run document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemaFile {
    pub kinds: BTreeMap<String, FeatureKind>,
    pub thresholds: BTreeMap<String, Vec<f64>>,
}

impl RunConfig {
    /// Fills in declarations the run document leaves out; explicit config
    /// entries win over the schema.
    pub fn apply_schema(&mut self, schema: &SchemaFile) {
        for (name, kind) in &schema.kinds {
            self.data.kinds.entry(name.clone()).or_insert(*kind);
        }
        if !schema.thresholds.is_empty() {
            let bin = self.binarize.get_or_insert_with(BinarizeConfig::default);
            for (name, list) in &schema.thresholds {
                bin.thresholds.entry(name.clone()).or_insert_with(|| list.clone());
            }
        }
    }

    /// Cross-field checks that need no dataset. Family-specific penalty
    /// fields are checked here so misconfigurations fail before data loads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(m) = self.model.margin {
            if !(m > 0.0) {
                return Err(invalid("model.margin", format!("must be positive, got {m}")));
            }
        }
        if let Some(t) = self.solve.time_limit_secs {
            if !(t > 0.0) {
                return Err(invalid(
                    "solve.time_limit_secs",
                    format!("must be positive, got {t}"),
                ));
            }
        }
        if self.solve.gap_tolerance < 0.0 {
            return Err(invalid("solve.gap_tolerance", "must be nonnegative"));
        }
        if let Some(w) = self.weights.w_pos {
            if !(0.0 < w && w < 1.0) {
                return Err(invalid(
                    "weights.w_pos",
                    format!("must lie strictly inside (0, 1), got {w}"),
                ));
            }
        }
        self.weights.to_mode()?;
        for (f, caps) in [
            ("constraints.max_fpr", self.constraints.max_fpr),
            ("constraints.max_fnr", self.constraints.max_fnr),
            ("constraints.prediction_budget", self.constraints.prediction_budget),
        ] {
            if let Some(v) = caps {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(f, format!("must lie in [0, 1], got {v}")));
                }
            }
        }
        if let Some(bin) = &self.binarize {
            for (name, list) in &bin.thresholds {
                if list.is_empty() {
                    return Err(invalid(
                        "binarize.thresholds",
                        format!("threshold list for {name:?} is empty"),
                    ));
                }
            }
        }
        if let Some(red) = &self.reduction {
            if let Some(w) = red.width {
                if w < 0.0 {
                    return Err(invalid("reduction.width", "must be nonnegative"));
                }
            }
            if red.grid < 2 {
                return Err(invalid("reduction.grid", "needs at least 2 points"));
            }
            if self.model.family != ModelFamily::Slim {
                return Err(invalid(
                    "reduction",
                    "data reduction applies to scoring systems only",
                ));
            }
            if self.solve.benders.is_some() {
                return Err(invalid(
                    "reduction",
                    "pick one scalability path per run: reduction certifies the exact margin-loss objective, not a decomposition surrogate",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if !(0.0..1.0).contains(&sw.holdout) {
                return Err(invalid("sweep.holdout", "must lie in [0, 1)"));
            }
            if sw.c0.is_empty() && sw.points < 2 {
                return Err(invalid("sweep.points", "needs at least 2 values"));
            }
            if sw.c0.iter().any(|&v| v <= 0.0) {
                return Err(invalid("sweep.c0", "values must be positive"));
            }
        }
        if self.solve.benders.is_some() && self.model.family != ModelFamily::Slim {
            return Err(invalid(
                "solve.benders",
                "loss decomposition trains scoring systems only",
            ));
        }
        match self.model.family {
            ModelFamily::Slim | ModelFamily::Mofn => {
                if self.penalty.c0.is_none() {
                    return Err(ConfigError::MissingField {
                        family: self.model.family,
                        field: "penalty.c0",
                    });
                }
            }
            ModelFamily::Tilm => {
                self.penalty.tilm().map(|_| ())?;
            }
            ModelFamily::Pilm => {
                self.penalty.pilm_levels().map(|_| ())?;
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn load_schema(path: &Path) -> Result<SchemaFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(toml::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config(
            r#"
            [model]
            family = "slim"
            [penalty]
            c0 = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model.family, ModelFamily::Slim);
        assert_eq!(cfg.data.label_column(), "label");
        let sets = cfg
            .model
            .coefficients
            .to_sets(&["a".into(), "b".into()])
            .unwrap();
        assert_eq!(sets.len(), 3);
        assert_eq!(sets[0].min(), -100.0);
        assert_eq!(sets[0].max(), 100.0);
        assert_eq!(sets[1].min(), -10.0);
        assert_eq!(sets[2].max(), 10.0);
        assert_eq!(cfg.solve.seed, 0);
        assert!(cfg.solve.warm_start);
        assert_eq!(cfg.weights.to_mode().unwrap(), WeightMode::Unweighted);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(
            r#"
            [model]
            family = "slim"
            marginn = 0.1
            [penalty]
            c0 = 0.05
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"
            [data]
            path = "data/biopsies.csv"
            label_column = "Diagnosis"
            [data.kinds]
            Competitiveness = "categorical"

            [model]
            family = "slim"
            margin = 0.1
            [model.coefficients.intercept]
            min = -100
            max = 100
            [model.coefficients.default]
            min = -10
            max = 10
            [model.coefficients.per_feature.Mitoses]
            values = [0, 1, 5]

            [penalty]
            c0 = 0.025
            [penalty.per_feature_c0]
            Mitoses = 0.5

            [weights]
            mode = "explicit"
            w_pos = 0.75

            [constraints]
            max_model_size = 5
            max_fpr = 0.2
            [constraints.signs]
            BareNuclei = "nonneg"

            [solve]
            time_limit_secs = 60.0
            seed = 7

            [solve.benders]
            loss = "logistic"
            "#;
        let cfg = parse_config(text).unwrap();
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.weights.to_mode().unwrap(), WeightMode::Explicit(0.75));
        assert_eq!(cfg.solve.benders.as_ref().unwrap().loss, LossKind::Logistic);
        assert_eq!(cfg.solve.benders.as_ref().unwrap().max_iterations, 200);
        let opts = cfg.solve.to_options();
        assert_eq!(opts.time_limit, Some(60.0));
        assert_eq!(opts.deterministic_seed, 7);
        assert!(opts.initial_incumbent.is_none());
    }

    #[test]
    fn set_config_shapes() {
        let names = vec!["a".to_string()];
        let mut cc = CoefficientsConfig::default();
        cc.per_feature.insert(
            "a".into(),
            SetConfig {
                min: Some(-2),
                max: Some(2),
                values: Some(vec![0.0, 1.0]),
            },
        );
        assert!(matches!(
            cc.to_sets(&names).unwrap_err(),
            ConfigError::AmbiguousSet(_)
        ));

        cc.per_feature.insert("a".into(), SetConfig::default());
        assert!(matches!(
            cc.to_sets(&names).unwrap_err(),
            ConfigError::AmbiguousSet(_)
        ));

        cc.per_feature.insert(
            "a".into(),
            SetConfig {
                min: None,
                max: None,
                values: Some(vec![0.0, 2.0, 4.0]),
            },
        );
        let sets = cc.to_sets(&names).unwrap();
        assert_eq!(sets[1].values(), &[0.0, 2.0, 4.0]);

        cc.per_feature.insert(
            "a".into(),
            SetConfig {
                min: None,
                max: None,
                values: Some(vec![1.0, 2.0]),
            },
        );
        assert!(matches!(
            cc.to_sets(&names).unwrap_err(),
            ConfigError::BadSet(_, InterpError::MissingZero)
        ));

        cc.per_feature.insert("b".into(), SetConfig::range(0, 1));
        assert!(matches!(
            cc.to_sets(&names).unwrap_err(),
            ConfigError::UnknownFeature(_)
        ));
    }

    #[test]
    fn constraint_names_resolve_to_unit_ids() {
        let names: Vec<String> = ["alpha", "beta", "gamma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut cc = ConstraintsConfig::default();
        cc.max_model_size = Some(2);
        cc.signs.insert("gamma".into(), Sign::NonNeg);
        cc.either_or.push(("alpha".into(), "beta".into()));
        cc.if_then.push(IfThenConfig {
            when: vec!["alpha".into(), "gamma".into()],
            then: "beta".into(),
        });
        cc.hierarchy.push(HierarchyConfig {
            leaf: "beta".into(),
            ancestor: "gamma".into(),
        });
        let ops = cc.resolve(&names).unwrap();
        assert_eq!(ops.max_model_size, Some(2));
        assert_eq!(ops.signs, vec![(3, Sign::NonNeg)]);
        assert_eq!(ops.either_or, vec![(1, 2)]);
        assert_eq!(ops.if_then, vec![(vec![1, 3], 2)]);
        assert_eq!(ops.hierarchy, vec![(2, 3)]);

        cc.signs.insert("delta".into(), Sign::Free);
        assert!(matches!(
            cc.resolve(&names).unwrap_err(),
            ConfigError::UnknownFeature(_)
        ));
    }

    #[test]
    fn family_penalty_requirements() {
        let base = r#"
            [model]
            family = "FAM"
            "#;
        for (fam, ok_extra) in [
            ("slim", "[penalty]\nc0 = 0.1"),
            ("mofn", "[penalty]\nc0 = 0.1"),
            ("tilm", "[penalty]\ncf = 0.1\nct = 0.02\nmax_thresholds = 3"),
            ("pilm", "[penalty]\n[[penalty.levels]]\ncost = 0.1\nvalues = [0, 1, 2]"),
        ] {
            let missing = base.replace("FAM", fam);
            assert!(
                matches!(parse_config(&missing), Err(ConfigError::MissingField { .. })),
                "family {fam} accepted an empty penalty table"
            );
            let full = format!("{}\n{}", missing, ok_extra);
            parse_config(&full).unwrap_or_else(|e| panic!("family {fam}: {e}"));
        }
    }

    #[test]
    fn validation_catches_bad_scalars() {
        for (snippet, field) in [
            ("[model]\nfamily = \"slim\"\nmargin = 0.0\n[penalty]\nc0 = 0.1", "model.margin"),
            (
                "[model]\nfamily = \"slim\"\n[penalty]\nc0 = 0.1\n[solve]\ntime_limit_secs = -1.0",
                "solve.time_limit_secs",
            ),
            (
                "[model]\nfamily = \"slim\"\n[penalty]\nc0 = 0.1\n[weights]\nmode = \"explicit\"\nw_pos = 1.5",
                "weights.w_pos",
            ),
            (
                "[model]\nfamily = \"slim\"\n[penalty]\nc0 = 0.1\n[constraints]\nmax_fpr = 1.2",
                "constraints.max_fpr",
            ),
        ] {
            match parse_config(snippet) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: expected Invalid, got {other:?}"),
            }
        }
    }

    #[test]
    fn schema_fills_missing_declarations() {
        let mut cfg = parse_config(
            r#"
            [model]
            family = "mofn"
            [penalty]
            c0 = 0.01
            [data.kinds]
            age = "real"
            "#,
        )
        .unwrap();
        let mut schema = SchemaFile::default();
        schema.kinds.insert("age".into(), FeatureKind::Categorical);
        schema.kinds.insert("sex".into(), FeatureKind::Binary);
        schema.thresholds.insert("age".into(), vec![30.0, 50.0]);
        cfg.apply_schema(&schema);
        // Explicit config entry wins; schema fills the rest.
        assert_eq!(cfg.data.kinds["age"], FeatureKind::Real);
        assert_eq!(cfg.data.kinds["sex"], FeatureKind::Binary);
        assert_eq!(
            cfg.binarize.as_ref().unwrap().thresholds["age"],
            vec![30.0, 50.0]
        );
    }

    #[test]
    fn reduction_and_binarize_validation() {
        let err = parse_config(
            r#"
            [model]
            family = "slim"
            [penalty]
            c0 = 0.1
            [reduction]
            grid = 1
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));

        let cfg = parse_config(
            r#"
            [model]
            family = "mofn"
            [penalty]
            c0 = 0.1
            [binarize]
            complements = true
            [binarize.thresholds]
            age = [3.0]
            "#,
        )
        .unwrap();
        let opts = cfg.binarize.unwrap().to_options();
        assert!(opts.include_complements);
        assert!(matches!(
            opts.policy,
            ThresholdPolicy::ExplicitThresholds(_)
        ));
    }
}
