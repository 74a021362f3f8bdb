//! Central-difference gradient checks for random small networks.

use ndarray::Array2;
use serde::Serialize;

use super::{Layer, LayerCache, MlpParams, Mode};
use crate::error::Result;
use crate::numerics::SimRng;

#[derive(Debug, Clone)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so near-zero gradients are
    /// compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            instances: 50,
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceResult {
    pub kind: &'static str,
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub instances: Vec<InstanceResult>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn loss(out: &Array2<f64>, g: &Array2<f64>) -> f64 {
    (out * g).sum()
}

/// Smallest |x| fed to any PReLU; finite differences are meaningless if a
/// perturbation can push an input across the kink.
fn kink_margin(cache: &super::ForwardCache) -> f64 {
    cache
        .layers
        .iter()
        .filter_map(|c| match c {
            LayerCache::Prelu { input } => Some(input.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min)
}

/// Compares every analytic parameter, input and side-input gradient of
/// `Σ output ⊙ g` against central differences.
pub fn check_network(
    params: &MlpParams,
    input: &Array2<f64>,
    side: Option<&Array2<f64>>,
    g: &Array2<f64>,
    mode: Mode,
    cfg: &GradcheckConfig,
) -> Result<(usize, f64, String)> {
    let (_, cache) = params.forward(input, side, mode)?;
    let back = params.backward(cache, g)?;
    let h = cfg.step;
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    let mut record = |a: f64, n: f64, label: &dyn Fn() -> String| {
        checked += 1;
        let e = relative_error(a, n, cfg.floor);
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, format!("{} (analytic {a:.6e}, numeric {n:.6e})", label()));
        }
    };

    let analytic = back.grads.flatten();
    let theta = params.flatten();
    let mut probe = params.clone();
    for (i, (&t, &a)) in theta.iter().zip(&analytic).enumerate() {
        probe.set_flat(i, t + h);
        let up = loss(&probe.predict(input, side, mode)?, g);
        probe.set_flat(i, t - h);
        let down = loss(&probe.predict(input, side, mode)?, g);
        probe.set_flat(i, t);
        record(a, (up - down) / (2.0 * h), &|| format!("parameter {i}"));
    }

    let mut x = input.clone();
    for idx in ndarray::indices(input.dim()) {
        let t = x[idx];
        x[idx] = t + h;
        let up = loss(&params.predict(&x, side, mode)?, g);
        x[idx] = t - h;
        let down = loss(&params.predict(&x, side, mode)?, g);
        x[idx] = t;
        record(back.grad_input[idx], (up - down) / (2.0 * h), &|| format!("input {idx:?}"));
    }

    if let (Some(side), Some(gs)) = (side, back.grad_side.as_ref()) {
        let mut s = side.clone();
        for idx in ndarray::indices(side.dim()) {
            let t = s[idx];
            s[idx] = t + h;
            let up = loss(&params.predict(input, Some(&s), mode)?, g);
            s[idx] = t - h;
            let down = loss(&params.predict(input, Some(&s), mode)?, g);
            s[idx] = t;
            record(gs[idx], (up - down) / (2.0 * h), &|| format!("side input {idx:?}"));
        }
    }
    Ok((checked, worst.0, worst.1))
}

/// Moves every trainable value away from its init so batch-norm scales and
/// PReLU slopes are exercised at generic points.
fn randomize(params: &mut MlpParams, rng: &mut SimRng) {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
    for layer in params.layers_mut() {
        match layer {
            Layer::Affine { weight, bias } => {
                let b = 1.0 / (weight.nrows() as f64).sqrt();
                weight.mapv_inplace(|_| u(-b, b));
                bias.mapv_inplace(|_| u(-b, b));
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } => {
                gamma.mapv_inplace(|_| u(0.5, 1.5));
                beta.mapv_inplace(|_| u(-0.5, 0.5));
                running_mean.mapv_inplace(|_| u(-0.5, 0.5));
                running_var.mapv_inplace(|_| u(0.5, 2.0));
            }
            Layer::Prelu { slope } => slope.mapv_inplace(|_| u(0.05, 0.5)),
            _ => {}
        }
    }
}

/// Draws `cfg.instances` random actors and critics (alternating) and checks
/// each in training mode.
pub fn run_suite(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = SimRng::new(cfg.seed, 0);
    let mut instances = Vec::with_capacity(cfg.instances);
    for i in 0..cfg.instances {
        let critic = i % 2 == 1;
        let depth = 1 + (rng.uniform() * 2.0) as usize;
        let hidden: Vec<usize> = (0..depth).map(|_| 2 + (rng.uniform() * 5.0) as usize).collect();
        let state = 2 + (rng.uniform() * 5.0) as usize;
        let action = 1 + (rng.uniform() * 4.0) as usize;
        let batch = 3 + (rng.uniform() * 5.0) as usize;
        let a_max = 0.5 + 1.5 * rng.uniform();
        let mut net = if critic {
            MlpParams::critic(state, action, &hidden, 1.0 / a_max, &mut rng)
        } else {
            MlpParams::actor(state, &hidden, action, a_max, &mut rng)
        };
        randomize(&mut net, &mut rng);

        let (x, side) = loop {
            let x = Array2::from_shape_simple_fn((batch, state), || rng.standard_normal());
            let side = critic.then(|| Array2::from_shape_simple_fn((batch, action), || a_max * rng.standard_normal()));
            let (_, cache) = net.forward(&x, side.as_ref(), Mode::Training)?;
            if kink_margin(&cache) > 1e-3 {
                break (x, side);
            }
        };
        let g = Array2::from_shape_simple_fn((batch, net.output_dim()), || rng.standard_normal());
        let (checked, max_rel_error, worst) = check_network(&net, &x, side.as_ref(), &g, Mode::Training, cfg)?;
        instances.push(InstanceResult {
            kind: if critic { "critic" } else { "actor" },
            hidden,
            batch,
            checked,
            max_rel_error,
            worst,
        });
    }
    let max_rel_error = instances.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        passed: max_rel_error <= cfg.tolerance,
        max_rel_error,
        tolerance: cfg.tolerance,
        instances,
    })
}
