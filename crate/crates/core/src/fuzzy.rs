//! Two-input fuzzy system mapping teacher confidence and uncertainty to a
//! weight for the distillation term.
//!
//! Inputs are graded by fixed piecewise-linear membership functions into
//! Low/Medium/High. Two defuzzification routes are offered: a Mamdani
//! controller (min/max inference with centroid defuzzification) and a
//! confidence-only weighted sum of per-level weights.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::ProbVector;

/// Number of uniform midpoint samples used for centroid integration on [0, 1].
/// The quadrature error is below 1e-3 for the triangular output sets.
pub const CENTROID_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    fn index(self) -> usize {
        match self {
            Level::Low => 0,
            Level::Medium => 1,
            Level::High => 2,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        })
    }
}

/// Membership grades of one crisp value in the three linguistic sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipTriple {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl MembershipTriple {
    /// Rounding in the ramps can overshoot 1 by an ulp at the endpoints.
    fn clamped(low: f64, medium: f64, high: f64) -> Self {
        Self {
            low: low.clamp(0.0, 1.0),
            medium: medium.clamp(0.0, 1.0),
            high: high.clamp(0.0, 1.0),
        }
    }

    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::Low => self.low,
            Level::Medium => self.medium,
            Level::High => self.high,
        }
    }

    pub fn max(&self) -> f64 {
        self.low.max(self.medium).max(self.high)
    }

    pub fn sum(&self) -> f64 {
        self.low + self.medium + self.high
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {x}")))
    }
}

/// Grades a teacher confidence value.
///
/// Low falls from 1 to 0 over (0.2, 0.5], Medium rises over (0.2, 0.5] and
/// falls over (0.5, 0.8], High rises linearly from 0.5 to 1.
pub fn confidence_memberships(c: f64) -> Result<MembershipTriple> {
    check_unit("confidence", c)?;
    let low = if c <= 0.2 {
        1.0
    } else if c <= 0.5 {
        (0.5 - c) / 0.3
    } else {
        0.0
    };
    let medium = if c <= 0.2 {
        0.0
    } else if c <= 0.5 {
        (c - 0.2) / 0.3
    } else if c <= 0.8 {
        (0.8 - c) / 0.3
    } else {
        0.0
    };
    let high = if c < 0.5 { 0.0 } else { (c - 0.5) / 0.5 };
    Ok(MembershipTriple::clamped(low, medium, high))
}

/// Grades an uncertainty value.
///
/// Low falls over (0.2, 0.4], Medium is a triangle on 0.3/0.6/0.9, High rises
/// from 0.7 to 1.
pub fn uncertainty_memberships(u: f64) -> Result<MembershipTriple> {
    check_unit("uncertainty", u)?;
    let low = if u <= 0.2 {
        1.0
    } else if u <= 0.4 {
        (0.4 - u) / 0.2
    } else {
        0.0
    };
    let medium = if u <= 0.3 {
        0.0
    } else if u <= 0.6 {
        (u - 0.3) / 0.3
    } else if u <= 0.9 {
        (0.9 - u) / 0.3
    } else {
        0.0
    };
    let high = if u < 0.7 { 0.0 } else { (u - 0.7) / 0.3 };
    Ok(MembershipTriple::clamped(low, medium, high))
}

/// Crisp weights attached to each output level for the weighted-sum route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelWeights {
    pub w_low: f64,
    pub w_medium: f64,
    pub w_high: f64,
}

impl Default for LevelWeights {
    fn default() -> Self {
        Self {
            w_low: 0.2,
            w_medium: 0.5,
            w_high: 0.8,
        }
    }
}

impl LevelWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.w_low
            && self.w_low < self.w_medium
            && self.w_medium < self.w_high
            && self.w_high <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "level weights must satisfy 0 <= low < medium < high <= 1, got ({}, {}, {})",
                self.w_low, self.w_medium, self.w_high
            )))
        }
    }

    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::Low => self.w_low,
            Level::Medium => self.w_medium,
            Level::High => self.w_high,
        }
    }
}

/// Output level for every (confidence level, uncertainty level) pair.
///
/// Serialized as one row per confidence level, each listing the outputs for
/// uncertainty low, medium and high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleTable {
    pub low: [Level; 3],
    pub medium: [Level; 3],
    pub high: [Level; 3],
}

impl Default for RuleTable {
    fn default() -> Self {
        use Level::*;
        Self {
            low: [Low, Low, Low],
            medium: [Medium, Medium, Low],
            high: [High, Medium, Low],
        }
    }
}

impl RuleTable {
    /// A table whose every cell yields `level`.
    pub fn constant(level: Level) -> Self {
        Self {
            low: [level; 3],
            medium: [level; 3],
            high: [level; 3],
        }
    }

    pub fn output(&self, confidence: Level, uncertainty: Level) -> Level {
        let row = match confidence {
            Level::Low => &self.low,
            Level::Medium => &self.medium,
            Level::High => &self.high,
        };
        row[uncertainty.index()]
    }

    pub fn set(&mut self, confidence: Level, uncertainty: Level, out: Level) {
        let row = match confidence {
            Level::Low => &mut self.low,
            Level::Medium => &mut self.medium,
            Level::High => &mut self.high,
        };
        row[uncertainty.index()] = out;
    }
}

/// Triangle (a, b, c) with peak at b; a == b or b == c gives a shoulder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Triangle {
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.a || x > self.c {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else if x > self.b {
            (self.c - x) / (self.c - self.b)
        } else {
            1.0
        }
    }
}

/// Output sets covering the printed weight ranges [0, 0.4], (0.3, 0.7], (0.6, 1].
pub fn output_set(level: Level) -> Triangle {
    match level {
        Level::Low => Triangle {
            a: 0.0,
            b: 0.0,
            c: 0.4,
        },
        Level::Medium => Triangle {
            a: 0.3,
            b: 0.5,
            c: 0.7,
        },
        Level::High => Triangle {
            a: 0.6,
            b: 1.0,
            c: 1.0,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Mamdani,
    WeightedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    /// Normalized Shannon entropy of the teacher distribution.
    #[default]
    Entropy,
    /// One minus the confidence.
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyAssessment {
    pub confidence: f64,
    pub uncertainty: f64,
    pub conf_grades: MembershipTriple,
    pub unc_grades: MembershipTriple,
    pub weight: f64,
    pub method: Method,
}

/// Mamdani inference over the full rule table.
///
/// Each rule fires at the minimum of its antecedent grades; firings are
/// max-aggregated per output level, the output triangles are clipped at those
/// levels and the union is defuzzified by its centroid.
pub fn weight_mamdani(
    c: f64,
    u: f64,
    rules: &RuleTable,
    levels: &LevelWeights,
) -> Result<FuzzyAssessment> {
    let conf_grades = confidence_memberships(c)?;
    let unc_grades = uncertainty_memberships(u)?;
    let activation = rule_activations(&conf_grades, &unc_grades, rules);
    let weight = match centroid(&activation) {
        Some(w) => w,
        None => {
            log::warn!(
                "no fuzzy rule fired for confidence {c}, uncertainty {u}; using medium weight"
            );
            levels.w_medium
        }
    };
    Ok(FuzzyAssessment {
        confidence: c,
        uncertainty: u,
        conf_grades,
        unc_grades,
        weight: weight.clamp(0.0, 1.0),
        method: Method::Mamdani,
    })
}

/// Aggregated firing strength per output level (indexed low, medium, high).
pub fn rule_activations(
    conf: &MembershipTriple,
    unc: &MembershipTriple,
    rules: &RuleTable,
) -> [f64; 3] {
    let mut agg = [0.0f64; 3];
    for cl in Level::ALL {
        for ul in Level::ALL {
            let strength = conf.get(cl).min(unc.get(ul));
            let out = rules.output(cl, ul).index();
            agg[out] = agg[out].max(strength);
        }
    }
    agg
}

/// Centroid of the clipped output sets, or `None` when the aggregate is empty.
fn centroid(activation: &[f64; 3]) -> Option<f64> {
    let step = 1.0 / CENTROID_SAMPLES as f64;
    let sets = Level::ALL.map(output_set);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..CENTROID_SAMPLES {
        let x = (i as f64 + 0.5) * step;
        let mu = sets
            .iter()
            .zip(activation)
            .map(|(set, &a)| set.eval(x).min(a))
            .fold(0.0, f64::max);
        num += x * mu;
        den += mu;
    }
    (den > 0.0).then(|| num / den)
}

/// Confidence-only weighted sum of the level weights.
///
/// With `normalize` the sum is divided by the total membership, giving a
/// weighted mean; otherwise the raw sum is returned (clamped to [0, 1]).
pub fn weight_weighted_sum(
    c: f64,
    levels: &LevelWeights,
    normalize: bool,
) -> Result<FuzzyAssessment> {
    let conf_grades = confidence_memberships(c)?;
    let raw = conf_grades.low * levels.w_low
        + conf_grades.medium * levels.w_medium
        + conf_grades.high * levels.w_high;
    let weight = if normalize {
        let total = conf_grades.sum();
        assert!(total > 0.0, "confidence memberships cover [0, 1]");
        raw / total
    } else {
        raw
    };
    let u = 1.0 - c;
    Ok(FuzzyAssessment {
        confidence: c,
        uncertainty: u,
        conf_grades,
        unc_grades: uncertainty_memberships(u)?,
        weight: weight.clamp(0.0, 1.0),
        method: Method::WeightedSum,
    })
}

/// Reads (confidence, uncertainty) off a teacher distribution.
///
/// Confidence is the largest class probability.
pub fn assess_from_distribution(p: &ProbVector, mode: UncertaintyMode) -> Result<(f64, f64)> {
    let k = p.len();
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 classes, got {k}")));
    }
    let confidence = p
        .probs()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0);
    let uncertainty = match mode {
        UncertaintyMode::Complement => 1.0 - confidence,
        UncertaintyMode::Entropy => {
            let h: f64 = p
                .probs()
                .iter()
                .filter(|&&pi| pi > 0.0)
                .map(|&pi| -pi * pi.ln())
                .sum();
            (h / (k as f64).ln()).clamp(0.0, 1.0)
        }
    };
    Ok((confidence, uncertainty))
}

/// A configured fuzzy system: rule table, level weights and method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzyEngine {
    pub rules: RuleTable,
    pub level_weights: LevelWeights,
    pub method: Method,
    pub uncertainty_mode: UncertaintyMode,
    /// Use the raw (unnormalized) weighted sum.
    pub raw_sum: bool,
}

impl FuzzyEngine {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.level_weights.validate()
    }

    pub fn assess(&self, c: f64, u: f64) -> Result<FuzzyAssessment> {
        match self.method {
            Method::Mamdani => weight_mamdani(c, u, &self.rules, &self.level_weights),
            Method::WeightedSum => weight_weighted_sum(c, &self.level_weights, !self.raw_sum),
        }
    }

    /// Weight for one teacher distribution (taken at temperature 1).
    pub fn weight_for(&self, teacher: &ProbVector) -> Result<FuzzyAssessment> {
        let (c, u) = assess_from_distribution(teacher, self.uncertainty_mode)?;
        self.assess(c, u)
    }
}
