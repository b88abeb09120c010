//! TOML experiment configuration.
//!
//! Every section is optional and falls back to defaults; unknown keys are
//! rejected. [`ExperimentConfig::validate`] reports every problem at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Ratios;
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyEngine;
use crate::ga::{GaConfig, StoppingCriteria};
use crate::imaging::GammaParams;
use crate::loss::DistillConfig;
use crate::nn::{BlobSpec, ConvSpec, NetKind, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    #[default]
    Onemax,
    Sphere,
    ProxyDistill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub max_generations: usize,
    pub min_delta: f64,
    pub fitness_threshold: Option<f64>,
    pub fitness: FitnessKind,
    /// Genome length and gene range for the builtin fitness functions.
    pub genome_length: usize,
    pub gene_min: i64,
    pub gene_max: i64,
    /// Training epochs per proxy-distill evaluation.
    pub budget_epochs: usize,
}

impl Default for GaSection {
    fn default() -> Self {
        let ga = GaConfig::default();
        let stop = StoppingCriteria::default();
        Self {
            population: ga.population,
            crossover_rate: ga.crossover_rate,
            mutation_rate: ga.mutation_rate,
            elitism: ga.elitism,
            max_generations: stop.max_generations,
            min_delta: stop.min_delta,
            fitness_threshold: stop.fitness_threshold,
            fitness: FitnessKind::Onemax,
            genome_length: 20,
            gene_min: 0,
            gene_max: 1,
            budget_epochs: 5,
        }
    }
}

impl GaSection {
    pub fn ga_config(&self, seed: u64) -> GaConfig {
        GaConfig {
            population: self.population,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            elitism: self.elitism,
            seed,
        }
    }

    pub fn stopping(&self) -> StoppingCriteria {
        StoppingCriteria {
            max_generations: self.max_generations,
            min_delta: self.min_delta,
            fitness_threshold: self.fitness_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    /// A wide mlp trained on hard labels first.
    #[default]
    Network,
    /// Nearest-class-center oracle with a fixed confidence.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub student_kind: NetKind,
    pub student_hidden: Vec<usize>,
    pub conv: Option<ConvSpec>,
    pub teacher: TeacherKind,
    pub teacher_hidden: Vec<usize>,
    pub teacher_confidence: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            student_kind: NetKind::Mlp,
            student_hidden: vec![16],
            conv: None,
            teacher: TeacherKind::Network,
            teacher_hidden: vec![64, 64],
            teacher_confidence: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingSection {
    pub gamma: f64,
    pub scale: f64,
    pub histeq: bool,
    pub levels: usize,
    pub size: usize,
}

impl Default for ImagingSection {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            scale: 1.0,
            histeq: false,
            levels: 2,
            size: crate::imaging::STANDARD_SIZE,
        }
    }
}

impl ImagingSection {
    pub fn gamma_params(&self) -> GammaParams {
        GammaParams {
            gamma: self.gamma,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Synthetic Gaussian blobs described by `data.blobs`.
    #[default]
    Blobs,
    /// Class-per-directory images under `data.root`.
    Images,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub root: Option<PathBuf>,
    pub ratios: Ratios,
    /// Side length images are resized to before training.
    pub image_size: usize,
    pub balance: bool,
    pub blobs: BlobSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: DataSource::Blobs,
            root: None,
            ratios: Ratios::default(),
            image_size: 32,
            balance: false,
            blobs: BlobSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub fuzzy: FuzzyEngine,
    pub loss: DistillConfig,
    pub ga: GaSection,
    pub train: TrainSection,
    pub imaging: ImagingSection,
    pub data: DataSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            what: "config",
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            optimizer: self.train.optimizer,
            seed: self.seed,
            split: self.data.ratios,
            distill: self.loss,
        }
    }

    /// Checks every section and returns all failures together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut take = |prefix: &str, r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Config(list)) => errs.extend(list),
            Err(e) => errs.push(format!("{prefix}: {e}")),
        };
        take("fuzzy", self.fuzzy.validate());
        take("train", self.train_config().validate());
        take("ga", self.ga.ga_config(self.seed).validate());
        take("ga", self.ga.stopping().validate());
        take("imaging", self.imaging.gamma_params().validate());
        let mut extra = Vec::new();
        if self.ga.gene_min > self.ga.gene_max {
            extra.push(format!(
                "ga.gene_min {} exceeds ga.gene_max {}",
                self.ga.gene_min, self.ga.gene_max
            ));
        }
        if self.ga.genome_length == 0 {
            extra.push("ga.genome_length must be positive".to_string());
        }
        if self.imaging.levels == 0 {
            extra.push("imaging.levels must be positive".to_string());
        }
        if self.imaging.size < (1usize << self.imaging.levels.min(30)) {
            extra.push(format!(
                "imaging.size {} is too small for {} wavelet levels",
                self.imaging.size, self.imaging.levels
            ));
        }
        if self.data.image_size == 0 {
            extra.push("data.image_size must be positive".to_string());
        }
        if self.train.student_hidden.is_empty() || self.train.student_hidden.contains(&0) {
            extra.push(format!(
                "train.student_hidden must be non-empty and positive, got {:?}",
                self.train.student_hidden
            ));
        }
        if self.train.teacher_hidden.is_empty() || self.train.teacher_hidden.contains(&0) {
            extra.push(format!(
                "train.teacher_hidden must be non-empty and positive, got {:?}",
                self.train.teacher_hidden
            ));
        }
        if (self.train.student_kind == NetKind::MicroCnn) != self.train.conv.is_some() {
            extra.push(
                "train.conv must be set exactly when train.student_kind is micro_cnn".to_string(),
            );
        }
        let classes = self.data.blobs.classes.max(2) as f64;
        if !(1.0 / classes..=1.0).contains(&self.train.teacher_confidence) {
            extra.push(format!(
                "train.teacher_confidence must lie in [1/K, 1], got {}",
                self.train.teacher_confidence
            ));
        }
        if self.data.source == DataSource::Images && self.data.root.is_none() {
            extra.push("data.root is required when data.source = \"images\"".to_string());
        }
        if self.data.blobs.classes < 2 || self.data.blobs.samples == 0 || self.data.blobs.dims == 0
        {
            extra.push(format!("data.blobs is degenerate: {:?}", self.data.blobs));
        }
        errs.extend(extra);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
