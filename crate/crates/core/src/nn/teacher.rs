use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};
use crate::loss::PROB_FLOOR;
use crate::tensor::Matrix;

/// One region of a synthetic teacher: inputs nearest `center` are assigned
/// `class` with probability `confidence`; the rest is shared evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: Vec<f64>,
    pub class: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTeacher {
    pub classes: usize,
    pub regions: Vec<Region>,
}

impl SyntheticTeacher {
    pub fn new(classes: usize, regions: Vec<Region>) -> Result<Self> {
        if classes < 2 || regions.is_empty() {
            return Err(Error::domain(
                "synthetic teacher needs 2+ classes and at least one region",
            ));
        }
        let dim = regions[0].center.len();
        for r in &regions {
            if r.center.len() != dim || r.class >= classes {
                return Err(Error::domain(format!("bad region {r:?}")));
            }
            if !(1.0 / classes as f64..=1.0).contains(&r.confidence) {
                return Err(Error::domain(format!(
                    "region confidence {} outside [1/{classes}, 1]",
                    r.confidence
                )));
            }
        }
        Ok(Self { classes, regions })
    }

    /// Teacher log-probabilities, floored.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let dim = self.regions[0].center.len();
        if x.cols() != dim {
            return Err(Error::domain(format!(
                "teacher expects {dim} features, got {}",
                x.cols()
            )));
        }
        let k = self.classes;
        let mut out = Matrix::zeros(x.rows(), k);
        for i in 0..x.rows() {
            let row = x.row(i);
            let region = self
                .regions
                .iter()
                .min_by(|a, b| dist2(&a.center, row).total_cmp(&dist2(&b.center, row)))
                .expect("non-empty");
            let rest = (1.0 - region.confidence) / (k - 1) as f64;
            for (c, v) in out.row_mut(i).iter_mut().enumerate() {
                let p = if c == region.class {
                    region.confidence
                } else {
                    rest
                };
                *v = p.max(PROB_FLOOR).ln();
            }
        }
        Ok(out)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Teacher {
    Synthetic(SyntheticTeacher),
    Network(Network<f32>),
}

impl Teacher {
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Teacher::Synthetic(t) => t.logits(x),
            Teacher::Network(n) => n.forward(x),
        }
    }
}
