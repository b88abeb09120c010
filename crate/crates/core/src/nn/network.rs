//! Small feed-forward classifiers with exact reverse-mode gradients.
//!
//! Parameters are stored in `F` (f32 or f64); every sum is accumulated in
//! f64.

use std::fmt::Debug;

use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix;

/// Parameter scalar type.
pub trait Scalar: Float + Debug + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn to_f64<F: Scalar>(v: F) -> f64 {
    v.to_f64().expect("float converts to f64")
}

pub(crate) fn from_f64<F: Scalar>(v: f64) -> F {
    F::from(v).expect("f64 converts to float")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Mlp,
    MicroCnn,
}

/// Per-sample input layout. Rows hold channel planes back to back, each
/// plane row-major. Plain feature vectors are `1 x 1 x n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn vector(n: usize) -> Self {
        Self {
            channels: 1,
            height: 1,
            width: n,
        }
    }

    pub fn features(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// One depthwise-separable block: depthwise `kernel x kernel` filters with
/// `multiplier` outputs per channel, then a 1x1 convolution to `pointwise`
/// channels. Both are followed by ReLU, then a global average pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub kernel: usize,
    pub multiplier: usize,
    pub pointwise: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub kind: NetKind,
    pub input: InputShape,
    /// Dense hidden widths, ReLU after each.
    pub hidden: Vec<usize>,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvSpec>,
}

impl NetworkSpec {
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize) -> Self {
        Self {
            kind: NetKind::Mlp,
            input: InputShape::vector(inputs),
            hidden: hidden.to_vec(),
            classes,
            conv: None,
        }
    }

    pub fn micro_cnn(input: InputShape, conv: ConvSpec, hidden: &[usize], classes: usize) -> Self {
        Self {
            kind: NetKind::MicroCnn,
            input,
            hidden: hidden.to_vec(),
            classes,
            conv: Some(conv),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.input.features() == 0 {
            errs.push("input must have at least one feature".to_string());
        }
        if self.hidden.is_empty() {
            errs.push("network needs at least one hidden layer".to_string());
        }
        if self.hidden.contains(&0) {
            errs.push(format!(
                "hidden widths must be positive, got {:?}",
                self.hidden
            ));
        }
        if self.classes < 2 {
            errs.push(format!("need at least 2 classes, got {}", self.classes));
        }
        match (self.kind, self.conv) {
            (NetKind::Mlp, Some(_)) => errs.push("mlp takes no conv block".to_string()),
            (NetKind::MicroCnn, None) => errs.push("micro_cnn needs a conv block".to_string()),
            (NetKind::MicroCnn, Some(c)) => {
                if c.kernel == 0 || c.multiplier == 0 || c.pointwise == 0 {
                    errs.push(format!("conv block sizes must be positive, got {c:?}"));
                }
                if c.kernel > self.input.height || c.kernel > self.input.width {
                    errs.push(format!(
                        "kernel {} does not fit a {}x{} input",
                        c.kernel, self.input.height, self.input.width
                    ));
                }
            }
            (NetKind::Mlp, None) => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "invalid network spec: {}",
                errs.join("; ")
            )))
        }
    }

    fn layers(&self) -> Vec<Layer> {
        let mut layers = Vec::new();
        let mut width = self.input.features();
        if let Some(c) = self.conv {
            let InputShape {
                channels,
                height,
                width: w,
            } = self.input;
            layers.push(Layer::Depthwise {
                channels,
                height,
                width: w,
                kernel: c.kernel,
                multiplier: c.multiplier,
            });
            let pixels = (height - c.kernel + 1) * (w - c.kernel + 1);
            layers.push(Layer::Pointwise {
                inputs: channels * c.multiplier,
                outputs: c.pointwise,
                pixels,
            });
            layers.push(Layer::AvgPool {
                channels: c.pointwise,
                pixels,
            });
            width = c.pointwise;
        }
        for &h in &self.hidden {
            layers.push(Layer::Dense {
                inputs: width,
                outputs: h,
                relu: true,
            });
            width = h;
        }
        layers.push(Layer::Dense {
            inputs: width,
            outputs: self.classes,
            relu: false,
        });
        layers
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Layer::param_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
        relu: bool,
    },
    Depthwise {
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        multiplier: usize,
    },
    Pointwise {
        inputs: usize,
        outputs: usize,
        pixels: usize,
    },
    AvgPool {
        channels: usize,
        pixels: usize,
    },
}

impl Layer {
    fn output_len(&self) -> usize {
        match *self {
            Layer::Dense { outputs, .. } => outputs,
            Layer::Depthwise {
                channels,
                height,
                width,
                kernel,
                multiplier,
            } => channels * multiplier * (height - kernel + 1) * (width - kernel + 1),
            Layer::Pointwise {
                outputs, pixels, ..
            } => outputs * pixels,
            Layer::AvgPool { channels, .. } => channels,
        }
    }

    /// Weight and bias shapes, if the layer has parameters.
    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            Layer::Dense {
                inputs, outputs, ..
            }
            | Layer::Pointwise {
                inputs, outputs, ..
            } => Some((vec![outputs, inputs], vec![outputs])),
            Layer::Depthwise {
                channels,
                kernel,
                multiplier,
                ..
            } => Some((
                vec![channels * multiplier, kernel, kernel],
                vec![channels * multiplier],
            )),
            Layer::AvgPool { .. } => None,
        }
    }

    fn param_count(&self) -> usize {
        self.param_shapes()
            .map_or(0, |(w, b)| w.iter().product::<usize>() + b[0])
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Dense { inputs, .. } | Layer::Pointwise { inputs, .. } => inputs,
            Layer::Depthwise { kernel, .. } => kernel * kernel,
            Layer::AvgPool { .. } => 1,
        }
    }

    fn forward(&self, w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
        match *self {
            Layer::Dense {
                inputs,
                outputs,
                relu,
            } => {
                for o in 0..outputs {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    let s = b[o] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
                    out[o] = if relu { s.max(0.0) } else { s };
                }
            }
            Layer::Depthwise {
                channels,
                height,
                width,
                kernel,
                multiplier,
            } => {
                let (oh, ow) = (height - kernel + 1, width - kernel + 1);
                for c in 0..channels {
                    let plane = &x[c * height * width..(c + 1) * height * width];
                    for r in 0..multiplier {
                        let j = c * multiplier + r;
                        let filt = &w[j * kernel * kernel..(j + 1) * kernel * kernel];
                        for y in 0..oh {
                            for xx in 0..ow {
                                let mut s = b[j];
                                for dy in 0..kernel {
                                    let src = &plane
                                        [(y + dy) * width + xx..(y + dy) * width + xx + kernel];
                                    s += filt[dy * kernel..(dy + 1) * kernel]
                                        .iter()
                                        .zip(src)
                                        .map(|(a, v)| a * v)
                                        .sum::<f64>();
                                }
                                out[j * oh * ow + y * ow + xx] = s.max(0.0);
                            }
                        }
                    }
                }
            }
            Layer::Pointwise {
                inputs,
                outputs,
                pixels,
            } => {
                for o in 0..outputs {
                    for p in 0..pixels {
                        let s = b[o]
                            + (0..inputs)
                                .map(|i| w[o * inputs + i] * x[i * pixels + p])
                                .sum::<f64>();
                        out[o * pixels + p] = s.max(0.0);
                    }
                }
            }
            Layer::AvgPool { channels, pixels } => {
                for c in 0..channels {
                    out[c] = x[c * pixels..(c + 1) * pixels].iter().sum::<f64>() / pixels as f64;
                }
            }
        }
    }

    /// Accumulates parameter gradients and writes the input gradient.
    /// `dy` is the gradient with respect to the (post-activation) output `y`.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        w: &[f64],
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
        dx: &mut [f64],
    ) {
        let relu = |o: usize| if y[o] > 0.0 { dy[o] } else { 0.0 };
        dx.iter_mut().for_each(|v| *v = 0.0);
        match *self {
            Layer::Dense {
                inputs,
                outputs,
                relu: has_relu,
            } => {
                for o in 0..outputs {
                    let g = if has_relu { relu(o) } else { dy[o] };
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    for i in 0..inputs {
                        dw[o * inputs + i] += g * x[i];
                        dx[i] += g * w[o * inputs + i];
                    }
                }
            }
            Layer::Depthwise {
                channels,
                height,
                width,
                kernel,
                multiplier,
            } => {
                let (oh, ow) = (height - kernel + 1, width - kernel + 1);
                for c in 0..channels {
                    let base = c * height * width;
                    for r in 0..multiplier {
                        let j = c * multiplier + r;
                        for yy in 0..oh {
                            for xx in 0..ow {
                                let g = relu(j * oh * ow + yy * ow + xx);
                                if g == 0.0 {
                                    continue;
                                }
                                db[j] += g;
                                for dyy in 0..kernel {
                                    for dxx in 0..kernel {
                                        let src = base + (yy + dyy) * width + xx + dxx;
                                        let wi = j * kernel * kernel + dyy * kernel + dxx;
                                        dw[wi] += g * x[src];
                                        dx[src] += g * w[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Layer::Pointwise {
                inputs,
                outputs,
                pixels,
            } => {
                for o in 0..outputs {
                    for p in 0..pixels {
                        let g = relu(o * pixels + p);
                        if g == 0.0 {
                            continue;
                        }
                        db[o] += g;
                        for i in 0..inputs {
                            dw[o * inputs + i] += g * x[i * pixels + p];
                            dx[i * pixels + p] += g * w[o * inputs + i];
                        }
                    }
                }
            }
            Layer::AvgPool { channels, pixels } => {
                for c in 0..channels {
                    let g = dy[c] / pixels as f64;
                    dx[c * pixels..(c + 1) * pixels]
                        .iter_mut()
                        .for_each(|v| *v = g);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<F>,
}

/// Activations recorded by [`Network::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer followed by the final logits.
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F: Scalar = f32> {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    /// `layer_params[l]` indexes the weight tensor of layer `l`; the bias follows it.
    layer_params: Vec<Option<usize>>,
    params: Vec<Tensor<F>>,
}

fn layer_names(layers: &[Layer]) -> Vec<Option<String>> {
    let mut dense = 0;
    layers
        .iter()
        .map(|l| match l {
            Layer::Dense { .. } => {
                dense += 1;
                Some(format!("dense{}", dense - 1))
            }
            Layer::Depthwise { .. } => Some("depthwise".to_string()),
            Layer::Pointwise { .. } => Some("pointwise".to_string()),
            Layer::AvgPool { .. } => None,
        })
        .collect()
}

/// Expected `(name, shape)` of every parameter tensor, in storage order.
pub fn tensor_layout(spec: &NetworkSpec) -> Result<Vec<(String, Vec<usize>)>> {
    spec.validate()?;
    let layers = spec.layers();
    let mut out = Vec::new();
    for (layer, name) in layers.iter().zip(layer_names(&layers)) {
        if let (Some((ws, bs)), Some(name)) = (layer.param_shapes(), name) {
            out.push((format!("{name}.weight"), ws));
            out.push((format!("{name}.bias"), bs));
        }
    }
    Ok(out)
}

impl<F: Scalar> Network<F> {
    fn assemble(spec: NetworkSpec, params: Vec<Tensor<F>>) -> Self {
        let layers = spec.layers();
        let mut next = 0;
        let layer_params = layers
            .iter()
            .map(|l| {
                l.param_shapes().map(|_| {
                    next += 2;
                    next - 2
                })
            })
            .collect();
        Self {
            spec,
            layers,
            layer_params,
            params,
        }
    }

    /// All parameters zero.
    pub fn zeroed(spec: &NetworkSpec) -> Result<Self> {
        let params = tensor_layout(spec)?
            .into_iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                Tensor {
                    name,
                    shape,
                    values: vec![F::zero(); n],
                }
            })
            .collect();
        Ok(Self::assemble(spec.clone(), params))
    }

    /// He-uniform hidden weights, zero output weights, zero biases.
    ///
    /// With a zero output layer every untrained network predicts class 0.
    pub fn new(spec: &NetworkSpec, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter().enumerate() {
            let (Some(wi), true) = (net.layer_params[l], l != last) else {
                continue;
            };
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            for v in &mut net.params[wi].values {
                *v = from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(net)
    }

    /// Builds a network from named tensors, checking every name and shape.
    pub fn from_tensors(spec: &NetworkSpec, tensors: Vec<Tensor<F>>) -> Result<Self> {
        let layout = tensor_layout(spec)?;
        let mut by_name: std::collections::HashMap<String, Tensor<F>> =
            tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        let mut params = Vec::with_capacity(layout.len());
        for (name, shape) in layout {
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))?;
            if t.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            if t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' value count does not match its shape"
                )));
            }
            params.push(t);
        }
        if let Some(extra) = by_name.keys().min() {
            return Err(Error::Checkpoint(format!("unexpected tensor '{extra}'")));
        }
        Ok(Self::assemble(spec.clone(), params))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|t| t.values.len()).sum()
    }

    pub fn cast<G: Scalar>(&self) -> Network<G> {
        let params = self
            .params
            .iter()
            .map(|t| Tensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: t.values.iter().map(|&v| from_f64(to_f64(v))).collect(),
            })
            .collect();
        Network::<G>::assemble(self.spec.clone(), params)
    }

    fn params_f64(&self) -> Vec<Vec<f64>> {
        self.params
            .iter()
            .map(|t| t.values.iter().map(|&v| to_f64(v)).collect())
            .collect()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self
            .forward_cached(batch)?
            .activations
            .pop()
            .expect("cache holds logits"))
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        let features = self.spec.input.features();
        if batch.cols() != features {
            return Err(Error::domain(format!(
                "input has {} features, network expects {features}",
                batch.cols()
            )));
        }
        let params = self.params_f64();
        let mut activations = vec![batch.clone()];
        for (l, layer) in self.layers.iter().enumerate() {
            let x = activations.last().expect("non-empty");
            let mut out = Matrix::zeros(x.rows(), layer.output_len());
            let (w, b): (&[f64], &[f64]) = match self.layer_params[l] {
                Some(i) => (&params[i], &params[i + 1]),
                None => (&[], &[]),
            };
            for r in 0..x.rows() {
                layer.forward(w, b, x.row(r), out.row_mut(r));
            }
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Gradients of `sum_i <grad_logits_i, logits_i>` with respect to every
    /// parameter tensor, in [`Network::tensors`] order.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix) -> Result<Vec<Vec<f64>>> {
        if grad_logits.shape() != cache.logits().shape() {
            return Err(Error::domain(format!(
                "logit gradient {:?} does not match logits {:?}",
                grad_logits.shape(),
                cache.logits().shape()
            )));
        }
        let params = self.params_f64();
        let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut upstream = grad_logits.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let mut dx = Matrix::zeros(x.rows(), x.cols());
            let mut none_w: Vec<f64> = Vec::new();
            let mut none_b: Vec<f64> = Vec::new();
            let (w, dw, db): (&[f64], &mut Vec<f64>, &mut Vec<f64>) = match self.layer_params[l] {
                Some(i) => {
                    let (head, tail) = grads.split_at_mut(i + 1);
                    (&params[i], &mut head[i], &mut tail[0])
                }
                None => (&[], &mut none_w, &mut none_b),
            };
            for r in 0..x.rows() {
                layer.backward(
                    w,
                    x.row(r),
                    y.row(r),
                    upstream.row(r),
                    dw,
                    db,
                    dx.row_mut(r),
                );
            }
            upstream = dx;
        }
        Ok(grads)
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?;
        Ok(logits.iter_rows().map(crate::loss::argmax).collect())
    }
}
