//! Temperature-softened distillation losses and their gradients with respect
//! to the student logits.
//!
//! Two objectives are provided:
//!
//! ```text
//! static: L = w * CE(y, softmax(s)) + (1 - w) * T^2 * KL(softmax(t/T) || softmax(s/T))
//! fuzzy:  L = v * (f * L_KD) + (1 - v) * CE,   L_KD = T^2 * KL(...)
//! ```
//!
//! where `f` is a per-sample weight from the fuzzy engine, computed on the
//! teacher's temperature-1 distribution. Batch losses are arithmetic means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyEngine, Method};
use crate::tensor::{mean, Matrix};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// A probability distribution over classes, tagged with the softmax
/// temperature that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    probs: Vec<f64>,
    temperature: f64,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if probs.is_empty() {
            return Err(Error::domain("empty distribution"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain(
                "probabilities must be finite and non-negative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs, temperature })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "temperature must be positive and finite, got {t}"
        )))
    }
}

/// Max-shifted softmax of `logits / t` written into `out`.
fn softmax_into(logits: &[f64], t: f64, out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = ((z - max) / t).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax_t(logits: &[f64], t: f64) -> Result<ProbVector> {
    check_temperature(t)?;
    if logits.is_empty() {
        return Err(Error::domain("empty logit vector"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::domain("logits must be finite"));
    }
    let mut probs = vec![0.0; logits.len()];
    softmax_into(logits, t, &mut probs);
    Ok(ProbVector {
        probs,
        temperature: t,
    })
}

/// Row-wise softmax of a logit batch.
pub fn softmax_rows(logits: &Matrix, t: f64) -> Result<Matrix> {
    check_temperature(t)?;
    if !logits.is_finite() {
        return Err(Error::domain("logits must be finite"));
    }
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        softmax_into(logits.row(i), t, out.row_mut(i));
    }
    Ok(out)
}

fn sample_ce(p: &[f64], label: usize) -> f64 {
    -p[label].max(PROB_FLOOR).ln()
}

fn sample_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(PROB_FLOOR)).ln())
        .sum()
}

/// Mean negative log-likelihood of the true classes.
pub fn cross_entropy(labels: &[usize], batch: &[ProbVector]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    if labels.len() != batch.len() {
        return Err(Error::domain(format!(
            "{} labels for {} predictions",
            labels.len(),
            batch.len()
        )));
    }
    let mut terms = Vec::with_capacity(batch.len());
    for (&y, p) in labels.iter().zip(batch) {
        if y >= p.len() {
            return Err(Error::domain(format!(
                "label {y} out of range for {} classes",
                p.len()
            )));
        }
        terms.push(sample_ce(&p.probs, y));
    }
    Ok(mean(&terms))
}

/// KL(p || q). Terms with p_i = 0 contribute nothing; q is floored.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.temperature != q.temperature {
        return Err(Error::domain(format!(
            "temperature mismatch: {} vs {}",
            p.temperature, q.temperature
        )));
    }
    Ok(sample_kl(&p.probs, &q.probs).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Fixed weight on the hard-label term.
    #[default]
    Static,
    FuzzyMamdani,
    FuzzyWeightedSum,
}

impl WeightMode {
    pub fn fuzzy_method(self) -> Option<Method> {
        match self {
            WeightMode::Static => None,
            WeightMode::FuzzyMamdani => Some(Method::Mamdani),
            WeightMode::FuzzyWeightedSum => Some(Method::WeightedSum),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    /// Weight on the cross-entropy term in the static objective.
    pub fixed_weight: f64,
    pub temperature: f64,
    /// Balance between the weighted KD term and cross-entropy in fuzzy modes.
    pub balance_v: f64,
    pub weight_mode: WeightMode,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            fixed_weight: 0.1,
            temperature: 2.0,
            balance_v: 0.5,
            weight_mode: WeightMode::Static,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.fixed_weight) {
            errs.push(format!(
                "loss.fixed_weight must lie in [0, 1], got {}",
                self.fixed_weight
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            errs.push(format!(
                "loss.temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.balance_v) {
            errs.push(format!(
                "loss.balance_v must lie in [0, 1], got {}",
                self.balance_v
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Batch loss with its constituent terms.
///
/// `total == ce_coef * ce_term + kd_coef * weighted_kd_term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean hard-label cross-entropy at temperature 1.
    pub ce_term: f64,
    /// Mean `T^2 * KL(teacher_T || student_T)`.
    pub kd_term: f64,
    /// Mean of the per-sample weight times the per-sample KD term. Equal to
    /// `kd_term` in static mode.
    pub weighted_kd_term: f64,
    pub ce_coef: f64,
    pub kd_coef: f64,
    /// Mean per-sample fuzzy weight; 1 in static mode.
    pub fuzzy_weight: f64,
    /// Per-sample fuzzy weights; empty in static mode.
    pub per_sample_weights: Vec<f64>,
}

impl LossBreakdown {
    pub fn recompose(&self) -> f64 {
        self.ce_coef * self.ce_term + self.kd_coef * self.weighted_kd_term
    }
}

struct Terms {
    ce: Vec<f64>,
    kd: Vec<f64>,
}

fn check_batch(student: &Matrix, teacher: &Matrix, labels: &[usize]) -> Result<()> {
    if student.rows() == 0 {
        return Err(Error::domain("empty batch"));
    }
    if student.shape() != teacher.shape() {
        return Err(Error::domain(format!(
            "student logits {:?} and teacher logits {:?} differ in shape",
            student.shape(),
            teacher.shape()
        )));
    }
    if labels.len() != student.rows() {
        return Err(Error::domain(format!(
            "{} labels for a batch of {}",
            labels.len(),
            student.rows()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= student.cols()) {
        return Err(Error::domain(format!(
            "label {y} out of range for {} classes",
            student.cols()
        )));
    }
    if !student.is_finite() || !teacher.is_finite() {
        return Err(Error::domain("logits must be finite"));
    }
    Ok(())
}

fn per_sample_terms(student: &Matrix, teacher: &Matrix, labels: &[usize], t: f64) -> Terms {
    let k = student.cols();
    let (mut p1, mut ps, mut pt) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut ce = Vec::with_capacity(labels.len());
    let mut kd = Vec::with_capacity(labels.len());
    for (i, &y) in labels.iter().enumerate() {
        softmax_into(student.row(i), 1.0, &mut p1);
        softmax_into(student.row(i), t, &mut ps);
        softmax_into(teacher.row(i), t, &mut pt);
        ce.push(sample_ce(&p1, y));
        kd.push(t * t * sample_kl(&pt, &ps).max(0.0));
    }
    Terms { ce, kd }
}

/// Fixed-weight distillation loss.
pub fn kd_loss_static(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    check_batch(student, teacher, labels)?;
    let terms = per_sample_terms(student, teacher, labels, cfg.temperature);
    let ce_term = mean(&terms.ce);
    let kd_term = mean(&terms.kd);
    let (ce_coef, kd_coef) = (cfg.fixed_weight, 1.0 - cfg.fixed_weight);
    Ok(LossBreakdown {
        total: ce_coef * ce_term + kd_coef * kd_term,
        ce_term,
        kd_term,
        weighted_kd_term: kd_term,
        ce_coef,
        kd_coef,
        fuzzy_weight: 1.0,
        per_sample_weights: Vec::new(),
    })
}

/// Fuzzy-form loss with explicit per-sample weights.
pub fn kd_loss_weighted(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
    weights: &[f64],
) -> Result<LossBreakdown> {
    cfg.validate()?;
    check_batch(student, teacher, labels)?;
    check_weights(weights, labels.len())?;
    let terms = per_sample_terms(student, teacher, labels, cfg.temperature);
    let weighted: Vec<f64> = terms.kd.iter().zip(weights).map(|(kd, w)| kd * w).collect();
    let ce_term = mean(&terms.ce);
    let weighted_kd_term = mean(&weighted);
    let v = cfg.balance_v;
    Ok(LossBreakdown {
        total: v * weighted_kd_term + (1.0 - v) * ce_term,
        ce_term,
        kd_term: mean(&terms.kd),
        weighted_kd_term,
        ce_coef: 1.0 - v,
        kd_coef: v,
        fuzzy_weight: mean(weights),
        per_sample_weights: weights.to_vec(),
    })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::domain(format!(
            "{} weights for a batch of {n}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::domain("per-sample weights must lie in [0, 1]"));
    }
    Ok(())
}

/// Per-sample fuzzy weights read off the teacher's temperature-1 outputs.
pub fn fuzzy_weights(teacher: &Matrix, engine: &FuzzyEngine) -> Result<Vec<f64>> {
    let probs = softmax_rows(teacher, 1.0)?;
    probs
        .iter_rows()
        .map(|row| {
            let p = ProbVector {
                probs: row.to_vec(),
                temperature: 1.0,
            };
            engine.weight_for(&p).map(|a| a.weight)
        })
        .collect()
}

/// Fuzzy-scaled loss. The fuzzy method is taken from `cfg.weight_mode`; the
/// engine supplies rules, level weights and the uncertainty measure.
pub fn kd_loss_fuzzy(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
    engine: &FuzzyEngine,
) -> Result<LossBreakdown> {
    let method = cfg
        .weight_mode
        .fuzzy_method()
        .ok_or_else(|| Error::domain("kd_loss_fuzzy requires a fuzzy weight mode"))?;
    check_batch(student, teacher, labels)?;
    let engine = FuzzyEngine { method, ..*engine };
    let weights = fuzzy_weights(teacher, &engine)?;
    kd_loss_weighted(student, teacher, labels, cfg, &weights)
}

/// Loss for whichever mode `cfg` selects.
pub fn kd_loss(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
    engine: &FuzzyEngine,
) -> Result<LossBreakdown> {
    match cfg.weight_mode {
        WeightMode::Static => kd_loss_static(student, teacher, labels, cfg),
        _ => kd_loss_fuzzy(student, teacher, labels, cfg, engine),
    }
}

/// Gradient of the fuzzy-form loss with fixed per-sample weights.
pub fn loss_gradients_weighted(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
    weights: &[f64],
) -> Result<Matrix> {
    cfg.validate()?;
    check_batch(student, teacher, labels)?;
    check_weights(weights, labels.len())?;
    let v = cfg.balance_v;
    Ok(gradient(student, teacher, labels, cfg.temperature, |i| {
        (1.0 - v, v * weights[i])
    }))
}

/// Gradient of the active loss with respect to the student logits.
///
/// Fuzzy weights depend only on the teacher and are held constant.
pub fn loss_gradients(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    cfg: &DistillConfig,
    engine: &FuzzyEngine,
) -> Result<Matrix> {
    cfg.validate()?;
    check_batch(student, teacher, labels)?;
    match cfg.weight_mode.fuzzy_method() {
        None => {
            let w = cfg.fixed_weight;
            Ok(gradient(student, teacher, labels, cfg.temperature, |_| {
                (w, 1.0 - w)
            }))
        }
        Some(method) => {
            let engine = FuzzyEngine { method, ..*engine };
            let weights = fuzzy_weights(teacher, &engine)?;
            loss_gradients_weighted(student, teacher, labels, cfg, &weights)
        }
    }
}

/// `coefs(i)` returns the (CE, KD) multipliers for sample `i`.
///
/// d CE / dz = softmax(z) - onehot(y)
/// d T^2 KL(q || softmax(z/T)) / dz = T * (softmax(z/T) - q)
fn gradient(
    student: &Matrix,
    teacher: &Matrix,
    labels: &[usize],
    t: f64,
    coefs: impl Fn(usize) -> (f64, f64),
) -> Matrix {
    let (n, k) = student.shape();
    let scale = 1.0 / n as f64;
    let (mut p1, mut ps, mut pt) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut grad = Matrix::zeros(n, k);
    for (i, &y) in labels.iter().enumerate() {
        softmax_into(student.row(i), 1.0, &mut p1);
        softmax_into(student.row(i), t, &mut ps);
        softmax_into(teacher.row(i), t, &mut pt);
        let (a, b) = coefs(i);
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            let ce = p1[j] - if j == y { 1.0 } else { 0.0 };
            let kd = t * (ps[j] - pt[j]);
            *g = scale * (a * ce + b * kd);
        }
    }
    grad
}
