use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::network::InputShape;
use crate::dataset::{load_sample, split_indices, DatasetManifest, Ratios, SplitName};
use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, to_byte};
use crate::rng::{substream, Stream};
use crate::tensor::Matrix;

/// Labeled samples, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub shape: InputShape,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        classes: usize,
        shape: InputShape,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() != shape.features() {
            return Err(Error::Dataset(format!(
                "{} columns for input shape {shape:?}",
                features.cols()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Dataset(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            classes,
            shape,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            shape: self.shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

/// Stratified split: each class is shuffled and cut separately.
pub fn split_dataset(data: &Dataset, ratios: &Ratios, seed: u64) -> Result<Splits> {
    ratios.validate()?;
    let mut rng = substream(seed, Stream::Split);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for class in 0..data.classes {
        let members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels[i] == class)
            .collect();
        for (part, idx) in parts
            .iter_mut()
            .zip(split_indices(members.len(), ratios, &mut rng))
        {
            part.extend(idx.into_iter().map(|i| members[i]));
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(Splits {
        train: data.subset(&parts[0]),
        valid: data.subset(&parts[1]),
        test: data.subset(&parts[2]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub samples: usize,
    pub classes: usize,
    pub dims: usize,
    /// Distance of every class center from the origin.
    pub radius: f64,
    /// Per-coordinate standard deviation.
    pub spread: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            classes: 3,
            dims: 2,
            radius: 4.0,
            spread: 1.0,
        }
    }
}

impl BlobSpec {
    /// Class centers spread evenly on a circle in the first two coordinates.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|c| {
                let angle = std::f64::consts::TAU * c as f64 / self.classes as f64;
                let mut v = vec![0.0; self.dims];
                v[0] = self.radius * angle.cos();
                if self.dims > 1 {
                    v[1] = self.radius * angle.sin();
                }
                v
            })
            .collect()
    }
}

/// Isotropic Gaussian blobs with equal class sizes (up to one sample).
/// Labels cycle `0, 1, .., K-1, 0, ..`.
pub fn gaussian_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
    if spec.classes < 2
        || spec.dims == 0
        || spec.samples == 0
        || spec.spread.is_nan()
        || spec.spread < 0.0
    {
        return Err(Error::domain(format!("invalid blob spec {spec:?}")));
    }
    let mut rng = substream(seed, Stream::Data);
    let centers = spec.centers();
    let mut data = Vec::with_capacity(spec.samples * spec.dims);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let c = i % spec.classes;
        for &m in &centers[c] {
            data.push(m + spec.spread * standard_normal(&mut rng));
        }
        labels.push(c);
    }
    Dataset::new(
        Matrix::new(spec.samples, spec.dims, data)?,
        labels,
        spec.classes,
        InputShape::vector(spec.dims),
    )
}

/// Box-Muller transform.
fn standard_normal(rng: &mut crate::rng::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Loads one manifest split as grayscale `size x size` images scaled to [0, 1].
pub fn load_image_split(
    root: &Path,
    manifest: &DatasetManifest,
    split: SplitName,
    size: usize,
) -> Result<Dataset> {
    let samples = manifest.split(split);
    let mut data = Vec::with_capacity(samples.len() * size * size);
    for s in samples {
        let img = to_byte(&resize_bilinear(
            &load_sample(root, s)?.to_gray(),
            size,
            size,
        )?);
        data.extend(img.pixels().iter().map(|v| v / 255.0));
    }
    Dataset::new(
        Matrix::new(samples.len(), size * size, data)?,
        samples.iter().map(|s| s.class).collect(),
        manifest.classes.len(),
        InputShape {
            channels: 1,
            height: size,
            width: size,
        },
    )
}
