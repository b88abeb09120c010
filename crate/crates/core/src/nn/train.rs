//! Seeded mini-batch distillation training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMetadata};
use super::data::{Dataset, Splits};
use super::network::{Network, NetworkSpec, Scalar};
use super::optimizer::{Optimizer, OptimizerKind};
use super::teacher::Teacher;
use crate::dataset::Ratios;
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyEngine;
use crate::loss::{
    argmax, fuzzy_weights, kd_loss_static, kd_loss_weighted, loss_gradients_weighted,
    DistillConfig, LossBreakdown, WeightMode,
};
use crate::rng::{substream, Stream};
use crate::tensor::Matrix;

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub split: Ratios,
    pub distill: DistillConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.001,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            split: Ratios::default(),
            distill: DistillConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.epochs == 0 {
            errs.push("train.epochs must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            errs.push(format!(
                "train.learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            errs.push("train.batch_size must be positive".to_string());
        }
        for r in [self.split.validate(), self.distill.validate()] {
            if let Err(Error::Config(e)) = r {
                errs.extend(e);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// One optimizer at a time over a single network.
#[derive(Debug, Clone)]
pub struct Trainer<F: Scalar = f32> {
    net: Network<F>,
    opt: Optimizer,
    distill: DistillConfig,
    engine: FuzzyEngine,
    epoch: usize,
    batch: usize,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(net: Network<F>, cfg: &TrainConfig, engine: &FuzzyEngine) -> Result<Self> {
        cfg.validate()?;
        engine.validate()?;
        let engine = match cfg.distill.weight_mode.fuzzy_method() {
            Some(method) => FuzzyEngine { method, ..*engine },
            None => *engine,
        };
        Ok(Self {
            net,
            opt: Optimizer::new(cfg.optimizer, cfg.learning_rate),
            distill: cfg.distill,
            engine,
            epoch: 0,
            batch: 0,
        })
    }

    pub fn network(&self) -> &Network<F> {
        &self.net
    }

    pub fn into_network(self) -> Network<F> {
        self.net
    }

    /// Marks the start of a new epoch for diagnostics.
    pub fn begin_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
        self.batch = 0;
    }

    fn weights(&self, teacher: &Matrix) -> Result<Option<Vec<f64>>> {
        match self.distill.weight_mode {
            WeightMode::Static => Ok(None),
            _ => fuzzy_weights(teacher, &self.engine).map(Some),
        }
    }

    fn loss_of(
        &self,
        student: &Matrix,
        teacher: &Matrix,
        labels: &[usize],
        w: Option<&[f64]>,
    ) -> Result<LossBreakdown> {
        match w {
            None => kd_loss_static(student, teacher, labels, &self.distill),
            Some(w) => kd_loss_weighted(student, teacher, labels, &self.distill, w),
        }
    }

    /// Loss of the current network without updating it.
    pub fn loss(&self, x: &Matrix, labels: &[usize], teacher: &Matrix) -> Result<LossBreakdown> {
        let student = self.net.forward(x)?;
        let w = self.weights(teacher)?;
        self.loss_of(&student, teacher, labels, w.as_deref())
    }

    /// One optimizer step on a batch. Fuzzy weights are recomputed from the
    /// teacher logits every call.
    pub fn step(&mut self, x: &Matrix, labels: &[usize], teacher: &Matrix) -> Result<StepResult> {
        self.step_with_weights(x, labels, teacher, None)
    }

    /// Like [`Trainer::step`] but with explicit per-sample weights in fuzzy modes.
    pub fn step_with_weights(
        &mut self,
        x: &Matrix,
        labels: &[usize],
        teacher: &Matrix,
        weights: Option<&[f64]>,
    ) -> Result<StepResult> {
        self.batch += 1;
        let cache = self.net.forward_cached(x)?;
        let student = cache.logits();
        if !student.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: self.batch,
                loss: f64::NAN,
            });
        }
        let computed;
        let w = match (weights, self.distill.weight_mode) {
            (_, WeightMode::Static) => None,
            (Some(w), _) => Some(w),
            (None, _) => {
                computed = self.weights(teacher)?;
                computed.as_deref()
            }
        };
        let breakdown = self.loss_of(student, teacher, labels, w)?;
        if !breakdown.total.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: self.batch,
                loss: breakdown.total,
            });
        }
        let grad = match w {
            None => {
                let ones = vec![1.0; labels.len()];
                // static loss is the weighted form with unit weights and v = 1 - omega
                let cfg = DistillConfig {
                    balance_v: 1.0 - self.distill.fixed_weight,
                    ..self.distill
                };
                loss_gradients_weighted(student, teacher, labels, &cfg, &ones)?
            }
            Some(w) => loss_gradients_weighted(student, teacher, labels, &self.distill, w)?,
        };
        let correct = student
            .iter_rows()
            .zip(labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        let grads = self.net.backward(&cache, &grad)?;
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: self.batch,
                loss: f64::NAN,
            });
        }
        self.opt.step(self.net.tensors_mut(), &grads)?;
        Ok(StepResult { breakdown, correct })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub breakdown: LossBreakdown,
    /// Samples classified correctly before the update.
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Mean per-sample fuzzy weight over the epoch; absent in static mode.
    pub mean_fuzzy_weight: Option<f64>,
    /// Counts of per-sample weights in ten equal bins over [0, 1].
    pub weight_histogram: [usize; HISTOGRAM_BINS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub weight_mode: WeightMode,
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the retained checkpoint; 0 means the untrained network.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

impl History {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Network with the best validation accuracy.
    pub best: Network<f32>,
    pub last: Network<f32>,
    pub history: History,
    pub checkpoint: Checkpoint,
}

pub fn histogram_bin(w: f64) -> usize {
    ((w * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Accuracy of `net` on `data`.
pub fn accuracy<F: Scalar>(net: &Network<F>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let pred = net.predict(&data.features)?;
    Ok(pred
        .iter()
        .zip(&data.labels)
        .filter(|(p, y)| p == y)
        .count() as f64
        / data.len() as f64)
}

struct Eval {
    loss: f64,
    accuracy: f64,
}

fn evaluate(trainer: &Trainer, data: &Dataset, teacher: &Matrix) -> Result<Eval> {
    Ok(Eval {
        loss: trainer.loss(&data.features, &data.labels, teacher)?.total,
        accuracy: accuracy(trainer.network(), data)?,
    })
}

fn check_inputs(spec: &NetworkSpec, data: &Splits) -> Result<()> {
    spec.validate()?;
    if data.train.is_empty() || data.valid.is_empty() {
        return Err(Error::Dataset(
            "training and validation splits must be non-empty".into(),
        ));
    }
    if spec.input != data.train.shape {
        return Err(Error::domain(format!(
            "student input {:?} does not match data shape {:?}",
            spec.input, data.train.shape
        )));
    }
    if spec.classes != data.train.classes {
        return Err(Error::domain(format!(
            "student has {} outputs for {} classes",
            spec.classes, data.train.classes
        )));
    }
    Ok(())
}

fn fit(
    spec: &NetworkSpec,
    data: &Splits,
    cfg: &TrainConfig,
    engine: &FuzzyEngine,
    teacher_train: &Matrix,
    teacher_valid: &Matrix,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_inputs(spec, data)?;
    let init = Network::<f32>::new(spec, &mut substream(cfg.seed, Stream::Init))?;
    let mut trainer = Trainer::new(init, cfg, engine)?;
    let mut order_rng = substream(cfg.seed, Stream::Train);
    let first = evaluate(&trainer, &data.valid, teacher_valid)?;
    let mut best = (
        trainer.network().clone(),
        0usize,
        first.accuracy,
        first.loss,
    );
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let n = data.train.len();
    for epoch in 1..=cfg.epochs {
        trainer.begin_epoch(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut order_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        let mut weights = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.train.features.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let t = teacher_train.select_rows(chunk);
            let step = trainer.step(&x, &y, &t)?;
            loss_sum += step.breakdown.total * chunk.len() as f64;
            correct += step.correct;
            weights.extend(step.breakdown.per_sample_weights);
        }
        let val = evaluate(&trainer, &data.valid, teacher_valid)?;
        let mut hist = [0usize; HISTOGRAM_BINS];
        for &w in &weights {
            hist[histogram_bin(w)] += 1;
        }
        let fuzzy = cfg.distill.weight_mode != WeightMode::Static;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
            mean_fuzzy_weight: fuzzy.then(|| crate::tensor::mean(&weights)),
            weight_histogram: hist,
        };
        log::info!(
            "epoch {epoch}: train_loss {:.6} train_acc {:.4} val_loss {:.6} val_acc {:.4}",
            record.train_loss,
            record.train_accuracy,
            record.val_loss,
            record.val_accuracy
        );
        if val.accuracy > best.2 || (val.accuracy == best.2 && val.loss < best.3) {
            best = (trainer.network().clone(), epoch, val.accuracy, val.loss);
        }
        epochs.push(record);
    }
    let (best_net, best_epoch, best_val, _) = best;
    let test_accuracy = if data.test.is_empty() {
        None
    } else {
        Some(accuracy(&best_net, &data.test)?)
    };
    let history = History {
        weight_mode: cfg.distill.weight_mode,
        epochs,
        best_epoch,
        best_val_accuracy: best_val,
        test_accuracy,
    };
    let checkpoint = Checkpoint::from_network(
        &best_net,
        CheckpointMetadata {
            spec: spec.clone(),
            class_names: Vec::new(),
            epoch: Some(best_epoch),
            val_accuracy: Some(best_val),
            seed: Some(cfg.seed),
        },
    );
    Ok(TrainOutcome {
        best: best_net,
        last: trainer.into_network(),
        history,
        checkpoint,
    })
}

/// Trains `student` against `teacher` on the train split, keeping the
/// checkpoint with the best validation accuracy.
pub fn train_distill(
    teacher: &Teacher,
    student: &NetworkSpec,
    data: &Splits,
    cfg: &TrainConfig,
    engine: &FuzzyEngine,
) -> Result<TrainOutcome> {
    check_inputs(student, data)?;
    let t_train = teacher.logits(&data.train.features)?;
    let t_valid = teacher.logits(&data.valid.features)?;
    if t_train.cols() != student.classes {
        return Err(Error::domain(format!(
            "teacher emits {} classes, student {}",
            t_train.cols(),
            student.classes
        )));
    }
    fit(student, data, cfg, engine, &t_train, &t_valid)
}

/// Trains a network on hard labels only, for use as a teacher.
pub fn train_teacher(spec: &NetworkSpec, data: &Splits, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        distill: DistillConfig {
            fixed_weight: 1.0,
            weight_mode: WeightMode::Static,
            ..cfg.distill
        },
        ..*cfg
    };
    let zeros_train = Matrix::zeros(data.train.len(), spec.classes);
    let zeros_valid = Matrix::zeros(data.valid.len(), spec.classes);
    fit(
        spec,
        data,
        &cfg,
        &FuzzyEngine::default(),
        &zeros_train,
        &zeros_valid,
    )
}
