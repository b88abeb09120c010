//! Short-budget training as a fitness signal for architecture search.

use super::data::Splits;
use super::network::{ConvSpec, InputShape, Network, NetworkSpec};
use super::teacher::Teacher;
use super::train::{accuracy, train_distill, TrainConfig};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyEngine;
use crate::ga::{Fitness, GeneBound, GenomeSpec};
use crate::rng::{substream, Stream};

/// Learning rates selectable by the second gene.
pub const LEARNING_RATES: [f64; 4] = [1e-3, 3e-3, 1e-2, 3e-2];

/// Weight of the normalized parameter count in the fitness.
pub const SIZE_PENALTY: f64 = 0.1;

const MLP_HIDDEN: [&[usize]; 8] = [&[2], &[4], &[8], &[16], &[32], &[64], &[32, 16], &[64, 32]];
const CNN_BLOCKS: [(ConvSpec, &[usize]); 4] = [
    (
        ConvSpec {
            kernel: 3,
            multiplier: 1,
            pointwise: 4,
        },
        &[8],
    ),
    (
        ConvSpec {
            kernel: 3,
            multiplier: 2,
            pointwise: 8,
        },
        &[8],
    ),
    (
        ConvSpec {
            kernel: 3,
            multiplier: 1,
            pointwise: 8,
        },
        &[16],
    ),
    (
        ConvSpec {
            kernel: 3,
            multiplier: 2,
            pointwise: 16,
        },
        &[16],
    ),
];

/// The twelve candidate students: eight mlps then four micro_cnns.
/// Specs are not validated; micro_cnn entries are only usable on image input.
pub fn candidate_pool(input: InputShape, classes: usize) -> Vec<NetworkSpec> {
    let mut pool: Vec<NetworkSpec> = MLP_HIDDEN
        .iter()
        .map(|h| NetworkSpec {
            input,
            ..NetworkSpec::mlp(input.features(), h, classes)
        })
        .collect();
    pool.extend(
        CNN_BLOCKS
            .iter()
            .map(|(c, h)| NetworkSpec::micro_cnn(input, *c, h, classes)),
    );
    pool
}

/// Genes: candidate index, learning-rate index.
pub fn genome_spec() -> GenomeSpec {
    GenomeSpec::new(vec![
        GeneBound {
            min: 0,
            max: (MLP_HIDDEN.len() + CNN_BLOCKS.len()) as i64 - 1,
        },
        GeneBound {
            min: 0,
            max: LEARNING_RATES.len() as i64 - 1,
        },
    ])
    .expect("bounds are non-empty")
}

pub fn decode_genome(
    genes: &[i64],
    input: InputShape,
    classes: usize,
) -> Result<(NetworkSpec, f64)> {
    if !genome_spec().contains(genes) {
        return Err(Error::domain(format!(
            "genome {genes:?} outside the candidate space"
        )));
    }
    let spec = candidate_pool(input, classes).swap_remove(genes[0] as usize);
    spec.validate()?;
    Ok((spec, LEARNING_RATES[genes[1] as usize]))
}

/// Largest parameter count among candidates usable on this input.
pub fn max_candidate_params(input: InputShape, classes: usize) -> usize {
    candidate_pool(input, classes)
        .iter()
        .filter(|s| s.validate().is_ok())
        .map(NetworkSpec::param_count)
        .max()
        .unwrap_or(1)
}

pub struct ProxyDistill<'a> {
    pub data: &'a Splits,
    pub teacher: &'a Teacher,
    pub engine: FuzzyEngine,
    pub base: TrainConfig,
    pub budget_epochs: usize,
}

impl ProxyDistill<'_> {
    /// Validation accuracy after `budget_epochs` minus the size penalty.
    pub fn quick_fitness(&self, genes: &[i64]) -> Result<f64> {
        let input = self.data.train.shape;
        let classes = self.data.train.classes;
        let (spec, lr) = decode_genome(genes, input, classes)?;
        let val_acc = if self.budget_epochs == 0 {
            let net = Network::<f32>::new(&spec, &mut substream(self.base.seed, Stream::Init))?;
            accuracy(&net, &self.data.valid)?
        } else {
            let cfg = TrainConfig {
                epochs: self.budget_epochs,
                learning_rate: lr,
                ..self.base
            };
            train_distill(self.teacher, &spec, self.data, &cfg, &self.engine)?
                .history
                .best_val_accuracy
        };
        let size = spec.param_count() as f64 / max_candidate_params(input, classes) as f64;
        Ok(val_acc - SIZE_PENALTY * size)
    }
}

impl Fitness for ProxyDistill<'_> {
    fn evaluate(&self, genes: &[i64]) -> std::result::Result<f64, String> {
        self.quick_fitness(genes).map_err(|e| e.to_string())
    }
}
