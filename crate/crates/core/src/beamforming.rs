//! Closed-form minimum-power zero-forcing and SINR evaluation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::numerics::{dot, ComplexMatrix};

/// `N × (K_sat + K_UE)` beamformer; column `i` serves stream `i`,
/// satellites first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingMatrix {
    w: ComplexMatrix,
}

impl BeamformingMatrix {
    pub fn new(w: ComplexMatrix) -> Self {
        Self { w }
    }

    pub fn zeros(n_antennas: usize, streams: usize) -> Self {
        Self::new(ComplexMatrix::zeros(n_antennas, streams))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.w
    }

    pub fn n_antennas(&self) -> usize {
        self.w.rows()
    }

    pub fn streams(&self) -> usize {
        self.w.cols()
    }

    pub fn column(&self, i: usize) -> Vec<Complex64> {
        self.w.column(i)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.w.scale(s))
    }

    /// `Σᵢ ‖wᵢ‖²`.
    pub fn total_power(&self) -> f64 {
        self.w.frobenius_norm_sqr()
    }
}

pub fn total_power(w: &BeamformingMatrix) -> f64 {
    w.total_power()
}

/// Uniformly scales `w` down onto the power budget if it exceeds it.
pub fn project_power(w: &BeamformingMatrix, p_t: f64) -> BeamformingMatrix {
    let p = w.total_power();
    if p <= p_t {
        w.clone()
    } else {
        // Rounding can leave the result a hair above the budget; nudge it
        // under so projecting twice is a no-op.
        let mut s = (p_t / p).sqrt();
        let mut out = w.scale(s);
        while out.total_power() > p_t {
            s *= 1.0 - f64::EPSILON;
            out = w.scale(s);
        }
        out
    }
}

fn check_conformable(h: &ComplexMatrix, w: &BeamformingMatrix) -> Result<()> {
    if h.cols() != w.n_antennas() || h.rows() != w.streams() {
        return Err(Error::dim(
            "beamforming",
            format!(
                "channel {}x{} against beamformer {}x{}",
                h.rows(),
                h.cols(),
                w.n_antennas(),
                w.streams()
            ),
        ));
    }
    Ok(())
}

/// Unit-norm columns of the right pseudo-inverse of `h`: stream `k`'s beam
/// lies in the null space of every other row.
pub fn zf_directions(h: &ComplexMatrix) -> Result<BeamformingMatrix> {
    let (k, n) = h.shape();
    if k > n {
        return Err(Infeasibility::DegreesOfFreedom {
            streams: k,
            antennas: n,
        }
        .into());
    }
    let mut p = match h.pseudo_inverse() {
        Ok(p) => p,
        Err(Error::Singular { pivot_ratio }) => {
            return Err(Infeasibility::RankDeficient { pivot_ratio }.into())
        }
        Err(e) => return Err(e),
    };
    for c in 0..k {
        let col = p.column(c);
        let norm = col.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Infeasibility::ZeroGain { stream: c }.into());
        }
        let unit: Vec<Complex64> = col.iter().map(|z| z / norm).collect();
        p.set_column(c, &unit);
    }
    Ok(BeamformingMatrix::new(p))
}

/// Scales each zero-forcing column so its stream meets `targets[k]` with
/// equality. Interference is nulled, so this is the least power satisfying
/// every SINR constraint along these directions.
pub fn min_power_scaling_with_targets(
    dirs: &BeamformingMatrix,
    h: &ComplexMatrix,
    targets: &[f64],
    sigma2: f64,
) -> Result<BeamformingMatrix> {
    check_conformable(h, dirs)?;
    if targets.len() != dirs.streams() {
        return Err(Error::dim(
            "min_power_scaling",
            format!("{} targets for {} streams", targets.len(), dirs.streams()),
        ));
    }
    let mut w = dirs.matrix().clone();
    for (k, &gamma) in targets.iter().enumerate() {
        let col = dirs.column(k);
        let gain = dot(h.row(k), &col).norm();
        if gain == 0.0 || !gain.is_finite() {
            return Err(Infeasibility::ZeroGain { stream: k }.into());
        }
        let s = (gamma * sigma2).sqrt() / gain;
        let scaled: Vec<Complex64> = col.iter().map(|z| z * s).collect();
        w.set_column(k, &scaled);
    }
    Ok(BeamformingMatrix::new(w))
}

pub fn min_power_scaling(
    dirs: &BeamformingMatrix,
    h: &ComplexMatrix,
    gamma_min: f64,
    sigma2: f64,
) -> Result<BeamformingMatrix> {
    min_power_scaling_with_targets(dirs, h, &vec![gamma_min; dirs.streams()], sigma2)
}

/// Minimum-power zero-forcing solution, rejected if it exceeds `p_t`.
pub fn solve_zf(h: &ComplexMatrix, targets: &[f64], sigma2: f64, p_t: f64) -> Result<BeamformingMatrix> {
    let dirs = zf_directions(h)?;
    let w = min_power_scaling_with_targets(&dirs, h, targets, sigma2)?;
    let required = w.total_power();
    if required > p_t {
        return Err(Infeasibility::PowerBudget {
            required,
            budget: p_t,
        }
        .into());
    }
    Ok(w)
}

/// Largest leakage `|h(i)·w_k|` over `i ≠ k`.
pub fn max_cross_residual(h: &ComplexMatrix, w: &BeamformingMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..w.streams() {
        let col = w.column(k);
        for i in 0..h.rows() {
            if i != k {
                worst = worst.max(dot(h.row(i), &col).norm());
            }
        }
    }
    worst
}

/// Per-stream SINR breakdown with unit-energy symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub per_stream_sinr: Vec<f64>,
    pub per_stream_signal: Vec<f64>,
    pub per_stream_interference: Vec<f64>,
    pub noise: f64,
}

impl SinrReport {
    pub fn streams(&self) -> usize {
        self.per_stream_sinr.len()
    }

    /// SINRs of the ground users, skipping the first `k_sat` streams.
    pub fn user_sinr(&self, k_sat: usize) -> &[f64] {
        &self.per_stream_sinr[k_sat..]
    }
}

/// Signal `|h(k)·w_k|²` and interference `Σ_{i≠k} |h(k)·w_i|²` for every
/// stream, measured at stream `k`'s receiver.
pub fn compute_sinr(h: &ComplexMatrix, w: &BeamformingMatrix, sigma2: f64) -> Result<SinrReport> {
    check_conformable(h, w)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("noise power must be positive, got {sigma2}")));
    }
    let g = h.matmul(w.matrix())?;
    let k = h.rows();
    let mut signal = Vec::with_capacity(k);
    let mut interference = Vec::with_capacity(k);
    let mut sinr = Vec::with_capacity(k);
    for r in 0..k {
        let row = g.row(r);
        let s = row[r].norm_sqr();
        let i: f64 = row
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != r)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        signal.push(s);
        interference.push(i);
        sinr.push(s / (i + sigma2));
    }
    Ok(SinrReport {
        per_stream_sinr: sinr,
        per_stream_signal: signal,
        per_stream_interference: interference,
        noise: sigma2,
    })
}
