use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3};
use rand_distr::{Distribution, StandardNormal};

use super::layers::{self, Conv2d, Dense};
use super::loss::{smoothed_ce, softmax2};
use super::tensor::Tensor;
use super::Real;
use crate::dsp::LogMelPatch;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    /// 3x3 conv followed by ReLU.
    Conv { channels: usize, stride: usize },
    MaxPool,
    GlobalAvgPool,
    /// Fully connected; followed by ReLU unless it is the output layer.
    Dense { width: usize },
    Dropout { rate: f64 },
}

/// Architecture description, written as dash-separated tokens:
/// `conv16`, `conv32s2` (stride 2), `pool`, `gap`, `dense64`, `dropout0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetSpec {
    pub layers: Vec<LayerSpec>,
}

impl Default for ConvNetSpec {
    fn default() -> Self {
        "conv16-pool-conv32-pool-conv64-gap-dense64-dropout0.5-dense2".parse().unwrap()
    }
}

impl fmt::Display for ConvNetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv { channels, stride: 1 } => format!("conv{channels}"),
                LayerSpec::Conv { channels, stride } => format!("conv{channels}s{stride}"),
                LayerSpec::MaxPool => "pool".into(),
                LayerSpec::GlobalAvgPool => "gap".into(),
                LayerSpec::Dense { width } => format!("dense{width}"),
                LayerSpec::Dropout { rate } => format!("dropout{rate}"),
            })
            .collect();
        f.write_str(&tokens.join("-"))
    }
}

impl FromStr for ConvNetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |t: &str| Error::InvalidConfig(format!("bad layer token {t:?} in network spec {s:?}"));
        let mut layers = Vec::new();
        for tok in s.split('-').map(str::trim) {
            let layer = if tok == "pool" {
                LayerSpec::MaxPool
            } else if tok == "gap" {
                LayerSpec::GlobalAvgPool
            } else if let Some(rest) = tok.strip_prefix("conv") {
                let (ch, stride) = match rest.split_once('s') {
                    Some((c, st)) => (c, st.parse().map_err(|_| bad(tok))?),
                    None => (rest, 1),
                };
                LayerSpec::Conv { channels: ch.parse().map_err(|_| bad(tok))?, stride }
            } else if let Some(rest) = tok.strip_prefix("dense") {
                LayerSpec::Dense { width: rest.parse().map_err(|_| bad(tok))? }
            } else if let Some(rest) = tok.strip_prefix("dropout") {
                LayerSpec::Dropout { rate: rest.parse().map_err(|_| bad(tok))? }
            } else {
                return Err(bad(tok));
            };
            layers.push(layer);
        }
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }
}

impl ConvNetSpec {
    pub fn validate(&self) -> Result<()> {
        match self.layers.last() {
            Some(LayerSpec::Dense { width: 2 }) => {}
            _ => return Err(Error::InvalidConfig(format!("network {self} must end in dense2"))),
        }
        for l in &self.layers {
            match *l {
                LayerSpec::Conv { channels: 0, .. } | LayerSpec::Conv { stride: 0, .. } | LayerSpec::Dense { width: 0 } => {
                    return Err(Error::InvalidConfig(format!("zero-sized layer in {self}")))
                }
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(Error::InvalidConfig(format!("dropout rate {rate} outside [0, 1)")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> u64 {
        crate::rng::tag_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Relu,
    MaxPool,
    GlobalAvgPool,
    Dense(Dense<T>),
    Dropout(f64),
}

#[derive(Debug)]
enum Cache<T> {
    Conv { cols: Array2<T>, in_shape: (usize, usize, usize) },
    Relu { out: Array3<T> },
    MaxPool { argmax: Vec<usize>, in_shape: (usize, usize, usize) },
    Gap { in_shape: (usize, usize, usize) },
    Dense { input: Array1<T>, in_shape: (usize, usize, usize) },
    Dropout { mask: Vec<T> },
}

/// Per-parameter gradient buffers, aligned with [`ConvNet::params`].
pub type Grads<T> = Vec<Vec<T>>;

/// Sequential convolutional classifier with a two-way softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet<T> {
    pub spec: ConvNetSpec,
    /// Expected input `(channels, mel bins, frames)`.
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> ConvNet<T> {
    /// Builds the network with all parameters zero.
    pub fn zeros(spec: &ConvNetSpec, input_shape: (usize, usize, usize)) -> Result<Self> {
        spec.validate()?;
        let (mut c, mut h, mut w) = input_shape;
        let mut layers = Vec::new();
        let last = spec.layers.len() - 1;
        for (i, l) in spec.layers.iter().enumerate() {
            match *l {
                LayerSpec::Conv { channels, stride } => {
                    let conv = Conv2d::new(c, channels, stride);
                    (h, w) = conv.out_hw(h, w);
                    c = channels;
                    layers.push(Layer::Conv(conv));
                    layers.push(Layer::Relu);
                }
                LayerSpec::MaxPool => {
                    if h < 2 || w < 2 {
                        return Err(Error::InvalidConfig(format!("pooling a {h}x{w} map in {spec}")));
                    }
                    (h, w) = (h / 2, w / 2);
                    layers.push(Layer::MaxPool);
                }
                LayerSpec::GlobalAvgPool => {
                    (h, w) = (1, 1);
                    layers.push(Layer::GlobalAvgPool);
                }
                LayerSpec::Dense { width } => {
                    layers.push(Layer::Dense(Dense::new(c * h * w, width)));
                    (c, h, w) = (width, 1, 1);
                    if i != last {
                        layers.push(Layer::Relu);
                    }
                }
                LayerSpec::Dropout { rate } => layers.push(Layer::Dropout(rate)),
            }
        }
        Ok(Self { spec: spec.clone(), input_shape, layers })
    }

    /// He-normal weights for hidden layers, `1/sqrt(fan_in)` for the output
    /// layer, zero biases.
    pub fn new(spec: &ConvNetSpec, input_shape: (usize, usize, usize), rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(spec, input_shape)?;
        let n_layers = net.layers.len();
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (weight, fan_in, gain) = match layer {
                Layer::Conv(c) => {
                    let fan = c.in_channels() * 9;
                    (&mut c.weight, fan, 2.0)
                }
                Layer::Dense(d) => {
                    let fan = d.n_in();
                    (&mut d.weight, fan, if i == n_layers - 1 { 1.0 } else { 2.0 })
                }
                _ => continue,
            };
            let std = (gain / fan_in as f64).sqrt();
            for v in weight.values.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = T::lit(z * std);
            }
            if i == 0 {
                // Inputs sit far from zero on average, so the first layer
                // starts out blind to the mean level of each patch.
                for kernel in weight.values.chunks_mut(fan_in) {
                    let mean = kernel.iter().map(|v| v.as_f64()).sum::<f64>() / fan_in as f64;
                    kernel.iter_mut().for_each(|v| *v = *v - T::lit(mean));
                }
            }
        }
        Ok(net)
    }

    /// Named parameters in a fixed order.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let (mut nc, mut nd) = (0, 0);
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv(c) => {
                    out.push((format!("conv{nc}.weight"), &c.weight));
                    out.push((format!("conv{nc}.bias"), &c.bias));
                    nc += 1;
                }
                Layer::Dense(d) => {
                    out.push((format!("dense{nd}.weight"), &d.weight));
                    out.push((format!("dense{nd}.bias"), &d.bias));
                    nd += 1;
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv(c) => {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weight);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.params().iter().map(|(_, t)| vec![T::zero(); t.len()]).collect()
    }

    /// Converts a patch to a `(1, rows, cols)` input, checking its geometry.
    pub fn input_from_patch(&self, patch: &LogMelPatch) -> Result<Array3<T>> {
        let (rows, cols) = patch.dim();
        let (c, h, w) = self.input_shape;
        if c != 1 || (rows, cols) != (h, w) {
            return Err(Error::ShapeMismatch { expected: format!("{c}x{h}x{w}"), got: format!("1x{rows}x{cols}") });
        }
        Ok(Array3::from_shape_fn((1, rows, cols), |(_, i, j)| T::lit(patch.values[[i, j]] as f64)))
    }

    fn check_input(&self, x: &Array3<T>) -> Result<()> {
        if x.dim() != self.input_shape {
            let (c, h, w) = self.input_shape;
            let (a, b, d) = x.dim();
            return Err(Error::ShapeMismatch { expected: format!("{c}x{h}x{w}"), got: format!("{a}x{b}x{d}") });
        }
        Ok(())
    }

    /// Runs the network. Dropout is active only when `dropout_rng` is given.
    fn forward_cached(&self, x: &Array3<T>, mut dropout_rng: Option<&mut Rng>, keep_cache: bool) -> (Array3<T>, Vec<Cache<T>>) {
        let mut caches = Vec::with_capacity(if keep_cache { self.layers.len() } else { 0 });
        let mut a = x.as_standard_layout().into_owned();
        for layer in &self.layers {
            let in_shape = a.dim();
            let (next, cache) = match layer {
                Layer::Conv(c) => {
                    let (out, cols) = c.forward(&a);
                    (out, Cache::Conv { cols, in_shape })
                }
                Layer::Relu => {
                    let out = layers::relu_forward(&a);
                    let cache = if keep_cache { Cache::Relu { out: out.clone() } } else { Cache::Gap { in_shape } };
                    (out, cache)
                }
                Layer::MaxPool => {
                    let (out, argmax) = layers::maxpool_forward(&a);
                    (out, Cache::MaxPool { argmax, in_shape })
                }
                Layer::GlobalAvgPool => (layers::gap_forward(&a), Cache::Gap { in_shape }),
                Layer::Dense(d) => {
                    let flat = Array1::from_iter(a.iter().copied());
                    let out = d.forward(flat.view());
                    let n = out.len();
                    (out.into_shape_with_order((n, 1, 1)).unwrap(), Cache::Dense { input: flat, in_shape })
                }
                Layer::Dropout(rate) => match dropout_rng.as_deref_mut() {
                    Some(rng) => {
                        let mask: Vec<T> = layers::dropout_mask(a.len(), *rate, rng);
                        let mut out = a.clone();
                        out.iter_mut().zip(&mask).for_each(|(v, &m)| *v = *v * m);
                        (out, Cache::Dropout { mask })
                    }
                    None => (a.clone(), Cache::Dropout { mask: vec![T::one(); a.len()] }),
                },
            };
            debug_assert!(next.iter().all(|v| v.is_finite()), "non-finite activation after {layer:?}");
            if keep_cache {
                caches.push(cache);
            }
            a = next;
        }
        (a, caches)
    }

    pub fn logits(&self, x: &Array3<T>) -> Result<[f64; 2]> {
        self.check_input(x)?;
        let (out, _) = self.forward_cached(x, None, false);
        Ok([out[[0, 0, 0]].as_f64(), out[[1, 0, 0]].as_f64()])
    }

    /// Eval-mode class probabilities `(p_neg, p_pos)`.
    pub fn forward(&self, patch: &LogMelPatch) -> Result<[f64; 2]> {
        Ok(softmax2(self.logits(&self.input_from_patch(patch)?)?))
    }

    pub fn predict_pos(&self, patch: &LogMelPatch) -> Result<f64> {
        Ok(self.forward(patch)?[1])
    }

    /// Smoothed cross-entropy of one example and its parameter gradients.
    /// Pass `dropout_rng` for training-mode dropout.
    pub fn loss_and_grads(&self, x: &Array3<T>, label: bool, eps: f64, dropout_rng: Option<&mut Rng>) -> Result<(f64, Grads<T>)> {
        self.check_input(x)?;
        let (out, caches) = self.forward_cached(x, dropout_rng, true);
        let logits = [out[[0, 0, 0]].as_f64(), out[[1, 0, 0]].as_f64()];
        let (loss, dlogits) = smoothed_ce(softmax2(logits), label, eps);
        let mut grads = self.zero_grads();
        let mut g = Array3::from_shape_fn((2, 1, 1), |(k, _, _)| T::lit(dlogits[k]));
        let mut slot = grads.len();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            g = match (layer, cache) {
                (Layer::Conv(c), Cache::Conv { cols, in_shape }) => {
                    slot -= 2;
                    let (gw, rest) = grads[slot..].split_at_mut(1);
                    match c.backward(&g, &cols, in_shape, &mut gw[0], &mut rest[0], i > 0) {
                        Some(gx) => gx,
                        None => break,
                    }
                }
                (Layer::Dense(d), Cache::Dense { input, in_shape }) => {
                    slot -= 2;
                    let (gw, rest) = grads[slot..].split_at_mut(1);
                    let flat_g = Array1::from_iter(g.iter().copied());
                    let gx = d.backward(flat_g.view(), input.view(), &mut gw[0], &mut rest[0]);
                    gx.into_shape_with_order(in_shape).unwrap()
                }
                (Layer::Relu, Cache::Relu { out }) => layers::relu_backward(&g, &out),
                (Layer::MaxPool, Cache::MaxPool { argmax, in_shape }) => layers::maxpool_backward(&g, &argmax, in_shape),
                (Layer::GlobalAvgPool, Cache::Gap { in_shape }) => layers::gap_backward(&g, in_shape),
                (Layer::Dropout(_), Cache::Dropout { mask }) => {
                    let mut gx = g;
                    gx.iter_mut().zip(&mask).for_each(|(v, &m)| *v = *v * m);
                    gx
                }
                _ => unreachable!("cache does not match layer"),
            };
        }
        Ok((loss, grads))
    }
}
