//! Array responses, RIS phase control and the composite HAPS channel.
//!
//! Every link is a line-of-sight array response. The HAPS array uses
//! half-wavelength spacing; the RIS uses `ris_spacing()` and is indexed
//! linearly along its y axis.
//!
//! Sign convention on the RIS: an impinging wave from angle `ω_in` arrives at
//! element `l` with phase `+κ l sin ω_in`, and element `l` reaches a receiver at
//! `ω_out` with phase `+κ l sin ω_out`, where `κ = 2π f d / c`. Under this
//! convention the linear phase law in [`ris_phase_profile`] cancels both
//! progressions and the cascade sums coherently.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm_sqr, sample_complex_gaussian, ComplexMatrix, SimRng};
use crate::scenario::{haps_angle, GeometryConfig, Position, UserLayout, SPEED_OF_LIGHT};

/// Angular offset between consecutive satellites when more than one is served.
pub const SATELLITE_ANGLE_STEP: f64 = 0.1;

const TWO_PI: f64 = 2.0 * PI;

/// `[e^{-jπ(n-1) sin θ}]` for `n = 1..=len`.
pub fn steering_vector(angle: f64, len: usize) -> Vec<Complex64> {
    let s = angle.sin();
    (0..len)
        .map(|n| Complex64::from_polar(1.0, -PI * n as f64 * s))
        .collect()
}

fn ris_wavenumber_spacing(cfg: &GeometryConfig) -> f64 {
    TWO_PI * cfg.carrier_freq_hz * cfg.ris_spacing() / SPEED_OF_LIGHT
}

/// RIS element response toward a receiver at `angle`: `e^{-jκ l sin θ}`.
/// Its conjugate is the per-element phase seen by that receiver.
pub fn ris_departure_response(angle: f64, cfg: &GeometryConfig) -> Vec<Complex64> {
    let k = ris_wavenumber_spacing(cfg);
    let s = angle.sin();
    (0..cfg.ris_elements())
        .map(|l| Complex64::from_polar(1.0, -k * l as f64 * s))
        .collect()
}

/// Phase of a plane wave from `angle` across the RIS: `e^{+jκ l sin θ}`.
pub fn ris_incident_response(angle: f64, cfg: &GeometryConfig) -> Vec<Complex64> {
    ris_departure_response(angle, cfg)
        .into_iter()
        .map(|z| z.conj())
        .collect()
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Per-element RIS phases in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPhaseProfile {
    phases: Vec<f64>,
}

impl RisPhaseProfile {
    /// Wraps arbitrary phases into `[0, 2π)`.
    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of the reflection matrix, `e^{j p_l}`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }
}

/// Phase law steering a wave incident from `omega_in` toward `omega_out`:
/// `p_l = -(2π f d l / c)(sin ω_in + sin ω_out)` for `l = 1..=L²`.
pub fn ris_phase_profile(omega_in: f64, omega_out: f64, cfg: &GeometryConfig) -> RisPhaseProfile {
    let k = ris_wavenumber_spacing(cfg);
    let s = omega_in.sin() + omega_out.sin();
    RisPhaseProfile::from_phases((1..=cfg.ris_elements()).map(|l| -k * l as f64 * s))
}

pub fn ris_reflection_matrix(profile: &RisPhaseProfile) -> ComplexMatrix {
    ComplexMatrix::diagonal(&profile.coefficients())
}

/// `gᴴ Θ b`: the cascaded RIS gain for a departure vector `g` and incident
/// vector `b`, applying the diagonal reflection without forming Θ.
pub fn cascaded_gain(g: &[Complex64], profile: &RisPhaseProfile, incident: &[Complex64]) -> Complex64 {
    g.iter()
        .zip(profile.coefficients())
        .zip(incident)
        .map(|((gl, t), b)| gl.conj() * t * b)
        .sum()
}

/// Angles that fix the RIS geometry for one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisGeometry {
    /// Incidence angle of the HAPS wave at the RIS.
    pub omega_in: f64,
    /// Departure angle from the RIS toward each user.
    pub omega_out: Vec<f64>,
    /// Angle of the RIS seen from the HAPS array.
    pub haps_to_ris: f64,
    /// Angle of each user seen from the HAPS array.
    pub haps_to_user: Vec<f64>,
    /// Satellite angles seen from the HAPS uplink array.
    pub satellites: Vec<f64>,
}

impl RisGeometry {
    pub fn new(cfg: &GeometryConfig, layout: &UserLayout) -> Self {
        let ris = cfg.ris_position();
        let hub = cfg.haps_ground_point();
        let to_haps = ((hub.x - ris.x).powi(2) + (hub.y - ris.y).powi(2) + cfg.haps_height_m.powi(2)).sqrt();
        let omega_in = ((hub.y - ris.y) / to_haps).asin();
        let omega_out = layout
            .positions
            .iter()
            .map(|p| {
                let d = (p.x - ris.x).hypot(p.y - ris.y);
                if d == 0.0 {
                    0.0
                } else {
                    ((p.y - ris.y) / d).asin()
                }
            })
            .collect();
        Self {
            omega_in,
            omega_out,
            haps_to_ris: haps_angle(cfg, ris),
            haps_to_user: layout.positions.iter().map(|&p| haps_angle(cfg, p)).collect(),
            satellites: (0..cfg.k_sat)
                .map(|i| cfg.sat_aoa_rad + SATELLITE_ANGLE_STEP * i as f64)
                .collect(),
        }
    }
}

/// All links of one realized scenario.
///
/// `h_direct` rows are the direct-path contributions `h_{h,k}ᴴ` exactly as
/// they enter the downlink rows of `h_composite`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub h_ul: ComplexMatrix,
    pub h_haps_ris: ComplexMatrix,
    pub g_users: Vec<Vec<Complex64>>,
    pub h_direct: ComplexMatrix,
    pub ris_profile: RisPhaseProfile,
    pub ris_target_user: usize,
    pub geometry: RisGeometry,
    pub h_composite: ComplexMatrix,
}

impl ChannelSet {
    pub fn k_sat(&self) -> usize {
        self.h_ul.rows()
    }

    pub fn k_ue(&self) -> usize {
        self.h_direct.rows()
    }

    pub fn n_antennas(&self) -> usize {
        self.h_composite.cols()
    }

    /// The RIS contribution `g_kᴴ Θ H_h` to user `k`'s downlink row.
    pub fn ris_term(&self, k: usize) -> Result<ComplexMatrix> {
        let g = ComplexMatrix::column_vector(&self.g_users[k]).hermitian();
        g.matmul(&ris_reflection_matrix(&self.ris_profile))?
            .matmul(&self.h_haps_ris)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Effective downlink row `gᴴ Θ H_h + h_directᴴ`, with `direct_row` already
/// conjugated.
pub fn downlink_row(
    g: &[Complex64],
    theta: &ComplexMatrix,
    h_haps_ris: &ComplexMatrix,
    direct_row: &[Complex64],
) -> Result<Vec<Complex64>> {
    if g.len() != theta.rows() || theta.cols() != h_haps_ris.rows() || direct_row.len() != h_haps_ris.cols() {
        return Err(Error::dim(
            "downlink_row",
            format!(
                "g {} / Θ {}x{} / H_h {}x{} / direct {}",
                g.len(),
                theta.rows(),
                theta.cols(),
                h_haps_ris.rows(),
                h_haps_ris.cols(),
                direct_row.len()
            ),
        ));
    }
    let ris = ComplexMatrix::column_vector(g)
        .hermitian()
        .matmul(theta)?
        .matmul(h_haps_ris)?;
    Ok(ris.row(0).iter().zip(direct_row).map(|(a, b)| a + b).collect())
}

fn free_space_amplitude(cfg: &GeometryConfig, distance: f64) -> f64 {
    if !cfg.free_space_path_loss {
        return 1.0;
    }
    let d = distance.max(1.0);
    SPEED_OF_LIGHT / (4.0 * PI * d * cfg.carrier_freq_hz)
}

fn distance_3d(a: Position, b: Position, dz: f64) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + dz * dz).sqrt()
}

fn perturb(v: &mut [Complex64], cfg: &GeometryConfig, rng: &mut SimRng) -> Result<()> {
    if cfg.fading_variance > 0.0 {
        let noise = sample_complex_gaussian(rng, v.len(), cfg.fading_variance)?;
        for (x, e) in v.iter_mut().zip(noise) {
            *x += e;
        }
    }
    Ok(())
}

/// Realizes every link for a layout, using `profile` on the RIS when given
/// and otherwise steering the RIS at the configured or weakest user.
pub fn build_channels(
    cfg: &GeometryConfig,
    layout: &UserLayout,
    profile: Option<&RisPhaseProfile>,
    rng: &mut SimRng,
) -> Result<ChannelSet> {
    if layout.len() != cfg.k_ue {
        return Err(Error::dim(
            "build_channels",
            format!("layout has {} users, config expects {}", layout.len(), cfg.k_ue),
        ));
    }
    let n = cfg.n_antennas;
    let l2 = cfg.ris_elements();
    if let Some(p) = profile {
        if p.len() != l2 {
            return Err(Error::dim(
                "build_channels",
                format!("RIS profile has {} phases, surface has {l2} elements", p.len()),
            ));
        }
    }
    let geo = RisGeometry::new(cfg, layout);
    let hub = cfg.haps_ground_point();
    let ris_pos = cfg.ris_position();

    let uplink_amp = free_space_amplitude(cfg, cfg.sat_height_m - cfg.haps_height_m);
    let mut ul_rows = Vec::with_capacity(cfg.k_sat);
    for &angle in &geo.satellites {
        let mut row: Vec<Complex64> = steering_vector(angle, n)
            .into_iter()
            .map(|z| z.conj() * uplink_amp)
            .collect();
        perturb(&mut row, cfg, rng)?;
        ul_rows.push(row);
    }
    let h_ul = ComplexMatrix::from_rows(&ul_rows)?;

    let hr_amp = free_space_amplitude(cfg, distance_3d(hub, ris_pos, cfg.haps_height_m));
    let incident = ris_incident_response(geo.omega_in, cfg);
    let haps_side = steering_vector(geo.haps_to_ris, n);
    let mut hr = ComplexMatrix::from_fn(l2, n, |l, m| incident[l] * haps_side[m].conj() * hr_amp);
    if cfg.fading_variance > 0.0 {
        let noise = sample_complex_gaussian(rng, l2 * n, cfg.fading_variance)?;
        hr = ComplexMatrix::from_fn(l2, n, |l, m| hr[(l, m)] + noise[l * n + m]);
    }

    let mut g_users = Vec::with_capacity(cfg.k_ue);
    let mut direct_rows = Vec::with_capacity(cfg.k_ue);
    let backlobe = cfg.backlobe_gain().sqrt();
    for (k, &p) in layout.positions.iter().enumerate() {
        let ru_amp = free_space_amplitude(cfg, (p.x - ris_pos.x).hypot(p.y - ris_pos.y));
        let mut g: Vec<Complex64> = ris_departure_response(geo.omega_out[k], cfg)
            .into_iter()
            .map(|z| z * ru_amp)
            .collect();
        perturb(&mut g, cfg, rng)?;
        g_users.push(g);

        let hu_amp = free_space_amplitude(cfg, distance_3d(hub, p, cfg.haps_height_m));
        let mut direct: Vec<Complex64> = steering_vector(geo.haps_to_user[k], n)
            .into_iter()
            .map(|z| z.conj() * backlobe * hu_amp)
            .collect();
        perturb(&mut direct, cfg, rng)?;
        direct_rows.push(direct);
    }
    let h_direct = ComplexMatrix::from_rows(&direct_rows)?;

    let ris_target_user = match cfg.ris_target_user {
        Some(u) => u,
        None => weakest_user(&direct_rows),
    };
    let profile = match profile {
        Some(p) => p.clone(),
        None => ris_phase_profile(geo.omega_in, geo.omega_out[ris_target_user], cfg),
    };
    let theta = ris_reflection_matrix(&profile);

    let mut rows: Vec<Vec<Complex64>> = ul_rows;
    for (g, direct) in g_users.iter().zip(&direct_rows) {
        rows.push(downlink_row(g, &theta, &hr, direct)?);
    }
    let h_composite = ComplexMatrix::from_rows(&rows)?;
    debug_assert_eq!(h_composite.shape(), (cfg.streams(), n));

    Ok(ChannelSet {
        h_ul,
        h_haps_ris: hr,
        g_users,
        h_direct,
        ris_profile: profile,
        ris_target_user,
        geometry: geo,
        h_composite,
    })
}

/// Index of the smallest direct-channel norm; ties go to the lowest index.
fn weakest_user(direct_rows: &[Vec<Complex64>]) -> usize {
    let mut best = 0;
    let mut best_norm = f64::INFINITY;
    for (k, row) in direct_rows.iter().enumerate() {
        let nrm = norm_sqr(row);
        if nrm < best_norm {
            best = k;
            best_norm = nrm;
        }
    }
    best
}

/// `|gᴴ Θ b|` summed element by element.
pub fn coherent_gain(g: &[Complex64], profile: &RisPhaseProfile, incident: &[Complex64]) -> f64 {
    cascaded_gain(g, profile, incident).norm()
}

/// Received amplitude of a row channel against a column beam.
pub fn beam_gain(row: &[Complex64], beam: &[Complex64]) -> f64 {
    dot(row, beam).norm()
}
