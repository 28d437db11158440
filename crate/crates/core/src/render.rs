//! Human-readable views of trained models: scoring tables, rule tables,
//! score functions, and the machine-readable document they all derive from.
//!
//! The machine document is the authority; the text forms are presentation.
//! Tie handling is stated explicitly wherever a threshold appears, because
//! the decision rule calls a score of exactly zero positive.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::RuleForm;
use crate::formulation::ModelFamily;
use crate::pipeline::{PipelineError, TrainedModel};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{format} rendering applies to {expected} models, not {family}")]
    WrongFamily {
        format: RenderFormat,
        expected: &'static str,
        family: ModelFamily,
    },
    #[error("unknown render format {0:?}; expected scoring-table, mofn-table, score-function, or machine")]
    UnknownFormat(String),
    #[error(transparent)]
    Document(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    ScoringTable,
    MofnTable,
    ScoreFunction,
    Machine,
}

impl fmt::Display for RenderFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RenderFormat::ScoringTable => "scoring-table",
            RenderFormat::MofnTable => "mofn-table",
            RenderFormat::ScoreFunction => "score-function",
            RenderFormat::Machine => "machine",
        };
        f.write_str(s)
    }
}

impl FromStr for RenderFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, RenderError> {
        match s {
            "scoring-table" => Ok(RenderFormat::ScoringTable),
            "mofn-table" => Ok(RenderFormat::MofnTable),
            "score-function" => Ok(RenderFormat::ScoreFunction),
            "machine" | "machine-readable" => Ok(RenderFormat::Machine),
            other => Err(RenderError::UnknownFormat(other.to_string())),
        }
    }
}

/// The natural text form for each family.
pub fn default_format(family: ModelFamily) -> RenderFormat {
    match family {
        ModelFamily::Mofn => RenderFormat::MofnTable,
        _ => RenderFormat::ScoringTable,
    }
}

pub fn render(model: &TrainedModel, format: RenderFormat) -> Result<String, RenderError> {
    match format {
        RenderFormat::Machine => Ok(model.to_json()?),
        RenderFormat::ScoringTable => Ok(scoring_table(model)),
        RenderFormat::ScoreFunction => Ok(score_function(model)),
        RenderFormat::MofnTable => {
            if model.family != ModelFamily::Mofn {
                return Err(RenderError::WrongFamily {
                    format,
                    expected: "rule-table",
                    family: model.family,
                });
            }
            Ok(mofn_table(model))
        }
    }
}

/// Trims integral floats so coefficients read as the integers they are.
fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Display rows for the nonzero non-intercept coefficients. Indicator
/// rules for single categories of one parent that carry the same
/// coefficient merge into one set-membership row. Rows sort by descending
/// coefficient magnitude, first appearance breaking ties.
fn display_rows(model: &TrainedModel) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    let coefs = &model.coefficients[1..];
    match &model.rules {
        Some(rules) => {
            let mut merged = vec![false; rules.rules.len()];
            for (t, rule) in rules.rules.iter().enumerate() {
                if merged[t] || coefs[t] == 0.0 {
                    continue;
                }
                if let (RuleForm::CategoryEquals(cat), false) = (&rule.form, rule.complemented) {
                    let mut cats = vec![cat.clone()];
                    for (u, other) in rules.rules.iter().enumerate().skip(t + 1) {
                        if other.parent == rule.parent
                            && !other.complemented
                            && coefs[u] == coefs[t]
                        {
                            if let RuleForm::CategoryEquals(c) = &other.form {
                                cats.push(c.clone());
                                merged[u] = true;
                            }
                        }
                    }
                    let label = if cats.len() > 1 {
                        format!("{} in {{{}}}", rule.parent_name, cats.join(", "))
                    } else {
                        rule.name.clone()
                    };
                    rows.push((label, coefs[t]));
                } else {
                    rows.push((rule.name.clone(), coefs[t]));
                }
            }
        }
        None => {
            for (j, &c) in coefs.iter().enumerate() {
                if c != 0.0 {
                    rows.push((model.feature_names[j].clone(), c));
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .expect("finite coefficients")
    });
    rows
}

/// Footnotes for rescaled inputs: the table's multipliers apply to the
/// rescaled value, so state the rescaling in original units.
fn transform_notes(model: &TrainedModel) -> Vec<String> {
    let mut notes = Vec::new();
    if model.rules.is_some() {
        return notes;
    }
    for (j, t) in model.transform.iter().enumerate() {
        if let Some((lo, hi)) = t {
            if model.coefficients[j + 1] != 0.0 {
                notes.push(format!(
                    "{} enters rescaled: ({} - {}) / {}",
                    model.feature_names[j],
                    model.feature_names[j],
                    num(*lo),
                    num(hi - lo)
                ));
            }
        }
    }
    notes
}

fn constant_model(model: &TrainedModel) -> String {
    let intercept = model.coefficients[0];
    let sign = if intercept >= 0.0 { "+1" } else { "-1" };
    format!(
        "SCORE = {} FOR EVERY EXAMPLE\nPREDICT {} ALWAYS\n\nSign convention: a score of 0 or more predicts +1.\n",
        num(intercept),
        sign
    )
}

fn scoring_table(model: &TrainedModel) -> String {
    if model.model_size == 0 {
        return constant_model(model);
    }
    let threshold = -model.coefficients[0];
    let rows = display_rows(model);
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let mut out = format!("PREDICT +1 IF SCORE > {}\n\n", num(threshold));
    for (name, coef) in &rows {
        out.push_str(&format!("  {name:<width$}  x {:>4}\n", num(*coef)));
    }
    out.push_str("\nA score exactly equal to the threshold also predicts +1.\n");
    let notes = transform_notes(model);
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&format!("{n}\n"));
        }
    }
    out
}

fn mofn_table(model: &TrainedModel) -> String {
    if model.model_size == 0 {
        return constant_model(model);
    }
    let m = -model.coefficients[0];
    let rows = display_rows(model);
    let mut out = format!(
        "PREDICT +1 IF AT LEAST {} OF THE FOLLOWING {} RULES ARE TRUE\n\n",
        num(m),
        rows.len()
    );
    for (name, _) in &rows {
        out.push_str(&format!("  {name}\n"));
    }
    out
}

fn score_function(model: &TrainedModel) -> String {
    let rows = display_rows(model);
    let mut expr = String::new();
    for (name, coef) in &rows {
        if expr.is_empty() {
            expr.push_str(&format!("{}*{}", num(*coef), name));
        } else if *coef < 0.0 {
            expr.push_str(&format!(" - {}*{}", num(-coef), name));
        } else {
            expr.push_str(&format!(" + {}*{}", num(*coef), name));
        }
    }
    let intercept = model.coefficients[0];
    if expr.is_empty() {
        expr = num(intercept);
    } else if intercept < 0.0 {
        expr.push_str(&format!(" - {}", num(-intercept)));
    } else if intercept > 0.0 {
        expr.push_str(&format!(" + {}", num(intercept)));
    }
    let mut out = format!("score(x) = {expr}\npredict +1 when score(x) >= 0, -1 otherwise\n");
    let notes = transform_notes(model);
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&format!("{n}\n"));
        }
    }
    out
}
