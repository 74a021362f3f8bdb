//! Feedforward networks with hand-written backpropagation.
//!
//! A network is a flat list of [`Layer`]s applied in order. Besides the usual
//! affine, batch-norm and PReLU layers there is a [`Layer::Concat`] that
//! appends a side input to the activations, which is how the critic fuses the
//! action before its last hidden block.
//!
//! Forward passes are pure. Training-mode batch statistics are folded into the
//! running estimates only when [`MlpParams::absorb_batch_statistics`] is
//! called, so a network can be evaluated in training mode without disturbing
//! them.

mod checkpoint;
pub mod gradcheck;

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use ndarray::{concatenate, s, Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SimRng;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;
pub const PRELU_INIT_SLOPE: f64 = 0.25;
/// Half-width of the uniform init of the actor's output layer.
pub const ACTOR_OUTPUT_INIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// `y = x W + b` with `W` stored `in × out`.
    Affine { weight: Array2<f64>, bias: Array1<f64> },
    BatchNorm {
        gamma: Array1<f64>,
        beta: Array1<f64>,
        running_mean: Array1<f64>,
        running_var: Array1<f64>,
        momentum: f64,
        eps: f64,
    },
    Prelu { slope: Array1<f64> },
    /// `y = a_max · tanh(x)`.
    ScaledTanh { a_max: f64 },
    /// Appends `scale · side` to the activations.
    Concat { width: usize, scale: f64 },
}

impl Layer {
    fn kind(&self) -> &'static str {
        match self {
            Layer::Affine { .. } => "affine",
            Layer::BatchNorm { .. } => "batch_norm",
            Layer::Prelu { .. } => "prelu",
            Layer::ScaledTanh { .. } => "scaled_tanh",
            Layer::Concat { .. } => "concat",
        }
    }

    /// Output width given the input width, or `None` if they do not chain.
    fn output_dim(&self, input: usize) -> Option<usize> {
        match self {
            Layer::Affine { weight, bias } => {
                (weight.nrows() == input && bias.len() == weight.ncols()).then_some(weight.ncols())
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } => (gamma.len() == input
                && beta.len() == input
                && running_mean.len() == input
                && running_var.len() == input)
                .then_some(input),
            Layer::Prelu { slope } => (slope.len() == input).then_some(input),
            Layer::ScaledTanh { .. } => Some(input),
            Layer::Concat { width, .. } => Some(input + width),
        }
    }

    fn same_shape(&self, other: &Layer) -> bool {
        match (self, other) {
            (Layer::Affine { weight: a, .. }, Layer::Affine { weight: b, .. }) => a.dim() == b.dim(),
            (Layer::BatchNorm { gamma: a, .. }, Layer::BatchNorm { gamma: b, .. }) => a.len() == b.len(),
            (Layer::Prelu { slope: a }, Layer::Prelu { slope: b }) => a.len() == b.len(),
            (Layer::ScaledTanh { .. }, Layer::ScaledTanh { .. }) => true,
            (Layer::Concat { width: a, .. }, Layer::Concat { width: b, .. }) => a == b,
            _ => false,
        }
    }
}

fn uniform_matrix(rng: &mut SimRng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || (2.0 * rng.uniform() - 1.0) * bound)
}

fn uniform_vector(rng: &mut SimRng, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || (2.0 * rng.uniform() - 1.0) * bound)
}

fn affine(rng: &mut SimRng, fan_in: usize, fan_out: usize, bound: Option<f64>) -> Layer {
    let b = bound.unwrap_or(1.0 / (fan_in as f64).sqrt());
    Layer::Affine {
        weight: uniform_matrix(rng, fan_in, fan_out, b),
        bias: uniform_vector(rng, fan_out, b),
    }
}

fn batch_norm(width: usize) -> Layer {
    Layer::BatchNorm {
        gamma: Array1::ones(width),
        beta: Array1::zeros(width),
        running_mean: Array1::zeros(width),
        running_var: Array1::ones(width),
        momentum: BN_MOMENTUM,
        eps: BN_EPSILON,
    }
}

fn prelu(width: usize) -> Layer {
    Layer::Prelu {
        slope: Array1::from_elem(width, PRELU_INIT_SLOPE),
    }
}

/// Ordered layer stack plus the widths it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
    input_dim: usize,
    side_dim: usize,
    output_dim: usize,
    /// Bumped whenever trainable parameters change; caches remember it.
    #[serde(skip)]
    generation: u64,
}

impl MlpParams {
    /// Validates that the layers chain and builds the network.
    pub fn new(layers: Vec<Layer>, input_dim: usize) -> Result<Self> {
        let mut width = input_dim;
        let mut side_dim = 0;
        for (i, layer) in layers.iter().enumerate() {
            width = layer.output_dim(width).ok_or_else(|| {
                Error::Network(format!(
                    "layer {i} ({}) does not accept {width} inputs",
                    layer.kind()
                ))
            })?;
            match layer {
                Layer::Concat { width: w, .. } if side_dim > 0 => {
                    return Err(Error::Network(format!(
                        "layer {i}: only one concat layer is supported (side width {side_dim} already set, got {w})"
                    )))
                }
                Layer::Concat { width: w, .. } => side_dim = *w,
                Layer::BatchNorm { eps, running_var, .. }
                    if !(*eps > 0.0) || running_var.iter().any(|v| *v < 0.0) =>
                {
                    return Err(Error::Network(format!(
                        "layer {i}: batch norm needs eps > 0 and non-negative running variance"
                    )));
                }
                _ => {}
            }
        }
        Ok(Self {
            layers,
            input_dim,
            side_dim,
            output_dim: width,
            generation: 0,
        })
    }

    /// `[affine → BN → PReLU] × hidden → affine → a_max·tanh`.
    pub fn actor(state_dim: usize, hidden: &[usize], action_dim: usize, a_max: f64, rng: &mut SimRng) -> Self {
        let mut layers = Vec::new();
        let mut width = state_dim;
        for &h in hidden {
            layers.push(affine(rng, width, h, None));
            layers.push(batch_norm(h));
            layers.push(prelu(h));
            width = h;
        }
        layers.push(affine(rng, width, action_dim, Some(ACTOR_OUTPUT_INIT)));
        layers.push(Layer::ScaledTanh { a_max });
        Self::new(layers, state_dim).expect("actor layers chain by construction")
    }

    /// State through the hidden blocks, with `action_scale · action`
    /// concatenated ahead of the last one; scalar linear output. With two
    /// hidden layers the action joins after the first block.
    pub fn critic(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        action_scale: f64,
        rng: &mut SimRng,
    ) -> Self {
        assert!(!hidden.is_empty(), "critic needs at least one hidden layer");
        // The action joins before the last hidden block, so Q stays
        // nonlinear in the action for any depth.
        let join = hidden.len() - 1;
        let mut layers = Vec::new();
        let mut width = state_dim;
        for (i, &h) in hidden.iter().enumerate() {
            if i == join {
                layers.push(Layer::Concat {
                    width: action_dim,
                    scale: action_scale,
                });
                width += action_dim;
            }
            layers.push(affine(rng, width, h, None));
            layers.push(batch_norm(h));
            layers.push(prelu(h));
            width = h;
        }
        layers.push(affine(rng, width, 1, None));
        Self::new(layers, state_dim).expect("critic layers chain by construction")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for tests and tools; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn side_dim(&self) -> usize {
        self.side_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn same_architecture(&self, other: &MlpParams) -> bool {
        self.input_dim == other.input_dim
            && self.side_dim == other.side_dim
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn forward(
        &self,
        input: &Array2<f64>,
        side: Option<&Array2<f64>>,
        mode: Mode,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let batch = input.nrows();
        if input.ncols() != self.input_dim {
            return Err(Error::dim(
                "forward",
                format!("input has {} features, network expects {}", input.ncols(), self.input_dim),
            ));
        }
        match (self.side_dim, side) {
            (0, None) => {}
            (w, Some(s)) if w > 0 && s.ncols() == w && s.nrows() == batch => {}
            (w, s) => {
                return Err(Error::dim(
                    "forward",
                    format!(
                        "side input {:?} for a network expecting width {w}",
                        s.map(|a| a.dim())
                    ),
                ))
            }
        }
        if mode == Mode::Training && batch < 2 {
            return Err(Error::InvalidArgument(
                "training-mode batch norm needs a batch of at least 2".into(),
            ));
        }

        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = match layer {
                Layer::Affine { weight, bias } => {
                    let y = x.dot(weight) + bias;
                    (y, LayerCache::Affine { input: x })
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    eps,
                    ..
                } => {
                    let (mean, var) = match mode {
                        Mode::Training => {
                            let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
                            let var = x.var_axis(Axis(0), 0.0);
                            (mean, var)
                        }
                        Mode::Inference => (running_mean.clone(), running_var.clone()),
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
                    let x_hat = (&x - &mean) * &inv_std;
                    let y = &x_hat * gamma + beta;
                    (
                        y,
                        LayerCache::BatchNorm {
                            x_hat,
                            inv_std,
                            batch_mean: mean,
                            batch_var: var,
                        },
                    )
                }
                Layer::Prelu { slope } => {
                    let mut y = x.clone();
                    Zip::from(y.rows_mut()).for_each(|mut row| {
                        Zip::from(&mut row).and(slope).for_each(|v, &a| {
                            if *v < 0.0 {
                                *v *= a;
                            }
                        })
                    });
                    (y, LayerCache::Prelu { input: x })
                }
                Layer::ScaledTanh { a_max } => {
                    let t = x.mapv(f64::tanh);
                    let y = &t * *a_max;
                    (y, LayerCache::ScaledTanh { tanh: t })
                }
                Layer::Concat { scale, .. } => {
                    let side = side.expect("side input checked above");
                    let scaled = side * *scale;
                    let y = concatenate![Axis(1), x, scaled];
                    (y, LayerCache::Concat { split: x.ncols() })
                }
            };
            caches.push(cache);
            x = y;
        }
        Ok((
            x,
            ForwardCache {
                layers: caches,
                mode,
                generation: self.generation,
                batch,
            },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: &Array2<f64>, side: Option<&Array2<f64>>, mode: Mode) -> Result<Array2<f64>> {
        self.forward(input, side, mode).map(|(y, _)| y)
    }

    /// Gradients of `Σ output ⊙ grad_output` with respect to every trainable
    /// parameter, the input and the side input.
    pub fn backward(&self, cache: ForwardCache, grad_output: &Array2<f64>) -> Result<Backward> {
        if cache.generation != self.generation || cache.layers.len() != self.layers.len() {
            return Err(Error::Network(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        if grad_output.dim() != (cache.batch, self.output_dim) {
            return Err(Error::dim(
                "backward",
                format!(
                    "gradient {:?} against output ({}, {})",
                    grad_output.dim(),
                    cache.batch,
                    self.output_dim
                ),
            ));
        }
        let batch = cache.batch as f64;
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut grad_side = None;
        let mut g = grad_output.clone();
        for (layer, lc) in self.layers.iter().zip(cache.layers).rev() {
            match (layer, lc) {
                (Layer::Affine { weight, .. }, LayerCache::Affine { input }) => {
                    let dw = input.t().dot(&g);
                    let db = g.sum_axis(Axis(0));
                    g = g.dot(&weight.t());
                    grads.push(LayerGrad::Affine { weight: dw, bias: db });
                }
                (
                    Layer::BatchNorm { gamma, .. },
                    LayerCache::BatchNorm { x_hat, inv_std, .. },
                ) => {
                    let dgamma = (&g * &x_hat).sum_axis(Axis(0));
                    let dbeta = g.sum_axis(Axis(0));
                    let dx_hat = &g * gamma;
                    g = match cache.mode {
                        Mode::Inference => dx_hat * &inv_std,
                        Mode::Training => {
                            let sum_dx_hat = dx_hat.sum_axis(Axis(0));
                            let sum_dx_hat_x = (&dx_hat * &x_hat).sum_axis(Axis(0));
                            let mut dx = &dx_hat * batch - &sum_dx_hat - &x_hat * &sum_dx_hat_x;
                            dx *= &(&inv_std / batch);
                            dx
                        }
                    };
                    grads.push(LayerGrad::BatchNorm {
                        gamma: dgamma,
                        beta: dbeta,
                    });
                }
                (Layer::Prelu { slope }, LayerCache::Prelu { input }) => {
                    let mut dslope = Array1::zeros(slope.len());
                    Zip::from(g.rows_mut()).and(input.rows()).for_each(|mut grow, xrow| {
                        Zip::from(&mut grow)
                            .and(&xrow)
                            .and(slope)
                            .and(&mut dslope)
                            .for_each(|gv, &xv, &a, ds| {
                                if xv < 0.0 {
                                    *ds += *gv * xv;
                                    *gv *= a;
                                }
                            })
                    });
                    grads.push(LayerGrad::Prelu { slope: dslope });
                }
                (Layer::ScaledTanh { a_max }, LayerCache::ScaledTanh { tanh }) => {
                    Zip::from(&mut g).and(&tanh).for_each(|gv, &t| *gv *= a_max * (1.0 - t * t));
                    grads.push(LayerGrad::None);
                }
                (Layer::Concat { scale, .. }, LayerCache::Concat { split }) => {
                    grad_side = Some(g.slice(s![.., split..]).to_owned() * *scale);
                    g = g.slice(s![.., ..split]).to_owned();
                    grads.push(LayerGrad::None);
                }
                (layer, _) => {
                    return Err(Error::Network(format!(
                        "cache entry does not match {} layer",
                        layer.kind()
                    )))
                }
            }
        }
        grads.reverse();
        Ok(Backward {
            grads: MlpGrads { layers: grads },
            grad_input: g,
            grad_side,
        })
    }

    /// Folds a training-mode cache's batch statistics into the running
    /// estimates (unbiased variance, exponential moving average).
    pub fn absorb_batch_statistics(&mut self, cache: &ForwardCache) -> Result<()> {
        if cache.mode != Mode::Training || cache.layers.len() != self.layers.len() {
            return Err(Error::Network("batch statistics need a training-mode cache of this network".into()));
        }
        let n = cache.batch as f64;
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (
                Layer::BatchNorm {
                    running_mean,
                    running_var,
                    momentum,
                    ..
                },
                LayerCache::BatchNorm {
                    batch_mean,
                    batch_var,
                    ..
                },
            ) = (layer, lc)
            {
                let m = *momentum;
                Zip::from(running_mean).and(batch_mean).for_each(|r, &b| *r = (1.0 - m) * *r + m * b);
                Zip::from(running_var)
                    .and(batch_var)
                    .for_each(|r, &b| *r = (1.0 - m) * *r + m * b * n / (n - 1.0));
            }
        }
        Ok(())
    }

    /// `θ ← θ − lr (∇ + weight_decay · θ)`; decay touches affine weights only.
    pub fn optimizer_step(&mut self, grads: &MlpGrads, learning_rate: f64, weight_decay: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Network("gradient record does not match the network".into()));
        }
        for (i, (layer, grad)) in self.layers.iter().zip(&grads.layers).enumerate() {
            if !grad.matches(layer) {
                return Err(Error::Network(format!("gradient for layer {i} has the wrong shape")));
            }
            if !grad.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("gradient of layer {i} ({})", layer.kind()),
                });
            }
        }
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            match (layer, grad) {
                (Layer::Affine { weight, bias }, LayerGrad::Affine { weight: dw, bias: db }) => {
                    Zip::from(weight)
                        .and(dw)
                        .for_each(|w, &g| *w -= learning_rate * (g + weight_decay * *w));
                    bias.scaled_add(-learning_rate, db);
                }
                (Layer::BatchNorm { gamma, beta, .. }, LayerGrad::BatchNorm { gamma: dg, beta: db }) => {
                    gamma.scaled_add(-learning_rate, dg);
                    beta.scaled_add(-learning_rate, db);
                }
                (Layer::Prelu { slope }, LayerGrad::Prelu { slope: ds }) => {
                    slope.scaled_add(-learning_rate, ds);
                }
                _ => {}
            }
        }
        self.generation += 1;
        Ok(())
    }

    /// `self ← (1 − blend) · self + blend · source` over every stored value,
    /// running statistics included. `blend = 1` copies exactly.
    pub fn blend_from(&mut self, source: &MlpParams, blend: f64) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(Error::Network("cannot blend networks with different architectures".into()));
        }
        if !(0.0..=1.0).contains(&blend) {
            return Err(Error::InvalidArgument(format!("blend fraction {blend} outside [0, 1]")));
        }
        if blend == 0.0 {
            return Ok(());
        }
        if blend == 1.0 {
            let generation = self.generation + 1;
            *self = source.clone();
            self.generation = generation;
            return Ok(());
        }
        let mix = |t: &mut Array1<f64>, s: &Array1<f64>| {
            Zip::from(t).and(s).for_each(|a, &b| *a = (1.0 - blend) * *a + blend * b)
        };
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            match (t, s) {
                (Layer::Affine { weight, bias }, Layer::Affine { weight: sw, bias: sb }) => {
                    Zip::from(weight).and(sw).for_each(|a, &b| *a = (1.0 - blend) * *a + blend * b);
                    mix(bias, sb);
                }
                (
                    Layer::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                        ..
                    },
                    Layer::BatchNorm {
                        gamma: sg,
                        beta: sb,
                        running_mean: sm,
                        running_var: sv,
                        ..
                    },
                ) => {
                    mix(gamma, sg);
                    mix(beta, sb);
                    mix(running_mean, sm);
                    mix(running_var, sv);
                }
                (Layer::Prelu { slope }, Layer::Prelu { slope: ss }) => mix(slope, ss),
                _ => {}
            }
        }
        self.generation += 1;
        Ok(())
    }

    pub fn copy_from(&mut self, source: &MlpParams) -> Result<()> {
        self.blend_from(source, 1.0)
    }

    /// Number of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| trainable_slices(l).iter().map(|s| s.len()).sum::<usize>()).sum()
    }

    /// Trainable scalars in a fixed order shared with [`MlpGrads::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            for s in trainable_slices(l) {
                out.extend_from_slice(s);
            }
        }
        out
    }

    /// Overwrites the trainable scalar at flat index `idx`.
    pub fn set_flat(&mut self, mut idx: usize, value: f64) {
        self.generation += 1;
        for l in &mut self.layers {
            for s in trainable_slices_mut(l) {
                if idx < s.len() {
                    s[idx] = value;
                    return;
                }
                idx -= s.len();
            }
        }
        panic!("flat parameter index out of range");
    }

    /// Euclidean distance between the trainable parameters of two networks.
    pub fn distance(&self, other: &MlpParams) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

fn trainable_slices(l: &Layer) -> Vec<&[f64]> {
    match l {
        Layer::Affine { weight, bias } => vec![
            weight.as_slice().expect("standard layout"),
            bias.as_slice().expect("standard layout"),
        ],
        Layer::BatchNorm { gamma, beta, .. } => vec![
            gamma.as_slice().expect("standard layout"),
            beta.as_slice().expect("standard layout"),
        ],
        Layer::Prelu { slope } => vec![slope.as_slice().expect("standard layout")],
        _ => vec![],
    }
}

fn trainable_slices_mut(l: &mut Layer) -> Vec<&mut [f64]> {
    match l {
        Layer::Affine { weight, bias } => vec![
            weight.as_slice_mut().expect("standard layout"),
            bias.as_slice_mut().expect("standard layout"),
        ],
        Layer::BatchNorm { gamma, beta, .. } => vec![
            gamma.as_slice_mut().expect("standard layout"),
            beta.as_slice_mut().expect("standard layout"),
        ],
        Layer::Prelu { slope } => vec![slope.as_slice_mut().expect("standard layout")],
        _ => vec![],
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Affine {
        input: Array2<f64>,
    },
    BatchNorm {
        x_hat: Array2<f64>,
        inv_std: Array1<f64>,
        batch_mean: Array1<f64>,
        batch_var: Array1<f64>,
    },
    Prelu {
        input: Array2<f64>,
    },
    ScaledTanh {
        tanh: Array2<f64>,
    },
    Concat {
        split: usize,
    },
}

/// Intermediates of one forward pass; [`MlpParams::backward`] consumes it.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    mode: Mode,
    generation: u64,
    batch: usize,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    Affine { weight: Array2<f64>, bias: Array1<f64> },
    BatchNorm { gamma: Array1<f64>, beta: Array1<f64> },
    Prelu { slope: Array1<f64> },
    None,
}

impl LayerGrad {
    fn matches(&self, layer: &Layer) -> bool {
        match (self, layer) {
            (LayerGrad::Affine { weight: g, bias: gb }, Layer::Affine { weight, bias }) => {
                g.dim() == weight.dim() && gb.len() == bias.len()
            }
            (LayerGrad::BatchNorm { gamma: g, beta: b }, Layer::BatchNorm { gamma, .. }) => {
                g.len() == gamma.len() && b.len() == gamma.len()
            }
            (LayerGrad::Prelu { slope: g }, Layer::Prelu { slope }) => g.len() == slope.len(),
            (LayerGrad::None, Layer::ScaledTanh { .. } | Layer::Concat { .. }) => true,
            _ => false,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            LayerGrad::Affine { weight, bias } => {
                weight.iter().chain(bias.iter()).all(|v| v.is_finite())
            }
            LayerGrad::BatchNorm { gamma, beta } => gamma.iter().chain(beta.iter()).all(|v| v.is_finite()),
            LayerGrad::Prelu { slope } => slope.iter().all(|v| v.is_finite()),
            LayerGrad::None => true,
        }
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrad>,
}

impl MlpGrads {
    /// Same order as [`MlpParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Affine { weight, bias } => {
                    out.extend(weight.iter());
                    out.extend(bias.iter());
                }
                LayerGrad::BatchNorm { gamma, beta } => {
                    out.extend(gamma.iter());
                    out.extend(beta.iter());
                }
                LayerGrad::Prelu { slope } => out.extend(slope.iter()),
                LayerGrad::None => {}
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            match g {
                LayerGrad::Affine { weight, bias } => {
                    *weight *= s;
                    *bias *= s;
                }
                LayerGrad::BatchNorm { gamma, beta } => {
                    *gamma *= s;
                    *beta *= s;
                }
                LayerGrad::Prelu { slope } => *slope *= s,
                LayerGrad::None => {}
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: MlpGrads,
    pub grad_input: Array2<f64>,
    pub grad_side: Option<Array2<f64>>,
}
