//! Real-valued packing of channels and beamformers, and the reward.

use num_complex::Complex64;

use crate::beamforming::{compute_sinr, project_power, BeamformingMatrix, SinrReport};
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::scenario::GeometryConfig;

/// Floor applied to SINRs inside the violation penalty.
pub const SINR_FLOOR: f64 = 1e-12;

fn pack(m: &ComplexMatrix) -> Vec<f64> {
    let data = m.as_slice();
    data.iter().map(|z| z.re).chain(data.iter().map(|z| z.im)).collect()
}

fn unpack(v: &[f64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    let n = rows * cols;
    if v.len() != 2 * n {
        return Err(Error::dim(
            "unpack",
            format!("vector of length {} for a {rows}x{cols} complex matrix", v.len()),
        ));
    }
    ComplexMatrix::from_vec(rows, cols, (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect())
}

/// Real parts in row-major order, then imaginary parts.
pub fn encode_state(h: &ComplexMatrix) -> Vec<f64> {
    pack(h)
}

pub fn decode_state(v: &[f64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    unpack(v, rows, cols)
}

/// Same packing applied to the `N × K` beamformer.
pub fn encode_action(w: &BeamformingMatrix) -> Vec<f64> {
    pack(w.matrix())
}

pub fn action_dim(cfg: &GeometryConfig) -> usize {
    2 * cfg.n_antennas * cfg.streams()
}

/// Unpacks an action into `W` and projects it onto the power budget.
pub fn decode_action(a: &[f64], cfg: &GeometryConfig) -> Result<BeamformingMatrix> {
    let w = unpack(a, cfg.n_antennas, cfg.streams())?;
    Ok(project_power(&BeamformingMatrix::new(w), cfg.p_t_watts()))
}

/// Default per-coordinate action bound: every coordinate at the bound puts
/// the raw action exactly at the power budget.
pub fn default_action_bound(cfg: &GeometryConfig) -> f64 {
    (cfg.p_t_watts() / action_dim(cfg) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub power: f64,
    pub violation: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            power: 0.1,
            violation: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub rate_term: f64,
    pub power_term: f64,
    pub violation_term: f64,
    pub total_power: f64,
    pub sinr: SinrReport,
}

impl RewardBreakdown {
    pub fn user_sinr(&self, k_sat: usize) -> &[f64] {
        self.sinr.user_sinr(k_sat)
    }

    /// Smallest ground-user SINR.
    pub fn min_user_sinr(&self, k_sat: usize) -> f64 {
        self.user_sinr(k_sat).iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `Σ log₂(1+γ_k) − λ_p P/P_t − λ_v Σ max(0, log₁₀(γ_min/γ_k))` over ground
/// users.
pub fn compute_reward(
    h: &ComplexMatrix,
    w: &BeamformingMatrix,
    sigma2: f64,
    cfg: &GeometryConfig,
    weights: &RewardWeights,
) -> Result<RewardBreakdown> {
    let sinr = compute_sinr(h, w, sigma2)?;
    let gamma_min = cfg.gamma_min();
    let users = sinr.user_sinr(cfg.k_sat);
    let rate_term: f64 = users.iter().map(|g| (1.0 + g).log2()).sum();
    let violation_term: f64 = users
        .iter()
        .map(|g| (gamma_min / g.max(SINR_FLOOR)).log10().max(0.0))
        .sum();
    let total_power = w.total_power();
    let power_term = total_power / cfg.p_t_watts();
    Ok(RewardBreakdown {
        reward: rate_term - weights.power * power_term - weights.violation * violation_term,
        rate_term,
        power_term,
        violation_term,
        total_power,
        sinr,
    })
}
