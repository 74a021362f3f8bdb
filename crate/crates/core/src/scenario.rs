//! Physical layout of one HAPS cell: geometry, link budget constants and user
//! placement.
//!
//! Coordinates are meters on the ground plane. The HAPS hovers above the
//! center of the service area; the RIS sits at `ris_position_m` with its
//! element axis along y.

use std::f64::consts::PI;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SimRng;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Attempts before giving up on a Poisson draw that keeps producing zero users.
pub const MAX_EMPTY_DRAWS: usize = 100;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Receiver noise: thermal density plus a noise figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub thermal_density_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            thermal_density_dbm_per_hz: -174.0,
            noise_figure_db: 7.0,
        }
    }
}

/// Noise power in watts over `bandwidth_hz`.
pub fn noise_power(nm: &NoiseModel, bandwidth_hz: f64) -> f64 {
    let dbm = nm.thermal_density_dbm_per_hz + 10.0 * bandwidth_hz.log10() + nm.noise_figure_db;
    dbm_to_watts(dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Everything needed to realize one system instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub sat_height_m: f64,
    pub haps_height_m: f64,
    pub ris_position_m: [f64; 2],
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub n_antennas: usize,
    pub ris_side: usize,
    /// `None` means half a wavelength at the carrier.
    pub ris_spacing_m: Option<f64>,
    pub sat_aoa_rad: f64,
    pub k_sat: usize,
    pub k_ue: usize,
    pub p_t_dbm: f64,
    pub gamma_min_db: f64,
    /// SINR target for the satellite uplink streams; `None` reuses `gamma_min_db`.
    pub gamma_min_uplink_db: Option<f64>,
    pub backlobe_gain_db: f64,
    /// Scale every HAPS-side link by free-space loss over the HAPS altitude.
    pub free_space_path_loss: bool,
    /// Variance of an additive 𝒞𝒩 perturbation on every channel entry.
    pub fading_variance: f64,
    /// User the RIS reflects toward; `None` picks the weakest direct channel.
    pub ris_target_user: Option<usize>,
    pub noise: NoiseModel,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            area_x_m: 100.0,
            area_y_m: 100.0,
            sat_height_m: 3.2e6,
            haps_height_m: 2.0e4,
            ris_position_m: [0.0, 50.0],
            carrier_freq_hz: 28e9,
            bandwidth_hz: 400e6,
            n_antennas: 50,
            ris_side: 4,
            ris_spacing_m: None,
            sat_aoa_rad: PI / 4.0,
            k_sat: 1,
            k_ue: 2,
            p_t_dbm: 30.0,
            gamma_min_db: 0.0,
            gamma_min_uplink_db: None,
            backlobe_gain_db: -30.0,
            free_space_path_loss: false,
            fading_variance: 0.0,
            ris_target_user: None,
            noise: NoiseModel::default(),
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_x_m", self.area_x_m),
            ("area_y_m", self.area_y_m),
            ("sat_height_m", self.sat_height_m),
            ("haps_height_m", self.haps_height_m),
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("ris_spacing_m", self.ris_spacing()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let counts = [
            ("n_antennas", self.n_antennas),
            ("ris_side", self.ris_side),
            ("k_sat", self.k_sat),
            ("k_ue", self.k_ue),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if !(self.fading_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fading_variance must be non-negative, got {}",
                self.fading_variance
            )));
        }
        if let Some(u) = self.ris_target_user {
            if u >= self.k_ue {
                return Err(Error::InvalidArgument(format!(
                    "ris_target_user {u} out of range for {} users",
                    self.k_ue
                )));
            }
        }
        Ok(())
    }

    /// Message when the array cannot null every other stream; `None` if it can.
    pub fn dof_warning(&self) -> Option<String> {
        let streams = self.streams();
        (streams > self.n_antennas).then(|| {
            format!(
                "{streams} streams exceed {} antennas; zero-forcing is infeasible",
                self.n_antennas
            )
        })
    }

    pub fn streams(&self) -> usize {
        self.k_sat + self.k_ue
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_side * self.ris_side
    }

    pub fn ris_spacing(&self) -> f64 {
        self.ris_spacing_m
            .unwrap_or(SPEED_OF_LIGHT / (2.0 * self.carrier_freq_hz))
    }

    pub fn p_t_watts(&self) -> f64 {
        dbm_to_watts(self.p_t_dbm)
    }

    pub fn gamma_min(&self) -> f64 {
        db_to_linear(self.gamma_min_db)
    }

    pub fn gamma_min_uplink(&self) -> f64 {
        db_to_linear(self.gamma_min_uplink_db.unwrap_or(self.gamma_min_db))
    }

    /// Per-stream SINR targets, satellites first.
    pub fn sinr_targets(&self) -> Vec<f64> {
        let mut t = vec![self.gamma_min_uplink(); self.k_sat];
        t.extend(std::iter::repeat_n(self.gamma_min(), self.k_ue));
        t
    }

    pub fn backlobe_gain(&self) -> f64 {
        db_to_linear(self.backlobe_gain_db)
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(&self.noise, self.bandwidth_hz)
    }

    pub fn haps_ground_point(&self) -> Position {
        Position::new(self.area_x_m / 2.0, self.area_y_m / 2.0)
    }

    pub fn ris_position(&self) -> Position {
        Position::new(self.ris_position_m[0], self.ris_position_m[1])
    }

    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.area_x_m).contains(&p.x) && (0.0..=self.area_y_m).contains(&p.y)
    }

    fn area_km2(&self) -> f64 {
        self.area_x_m * self.area_y_m / 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserDistribution {
    Poisson,
    Normal,
    Uniform,
}

impl UserDistribution {
    pub const ALL: [UserDistribution; 3] = [Self::Poisson, Self::Normal, Self::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Self::Poisson => "poisson",
            Self::Normal => "normal",
            Self::Uniform => "uniform",
        }
    }
}

/// How many users to place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserCount {
    Fixed(usize),
    /// Users per square kilometer; the count is Poisson distributed.
    DensityPerKm2(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLayout {
    pub positions: Vec<Position>,
    pub distribution: UserDistribution,
}

impl UserLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// One raw Poisson draw of the user count for a density, without the
/// empty-scenario retry.
pub fn draw_user_count(cfg: &GeometryConfig, density_per_km2: f64, rng: &mut SimRng) -> Result<usize> {
    let mean = density_per_km2 * cfg.area_km2();
    let poisson = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?;
    Ok(poisson.sample(rng) as usize)
}

pub fn place_users(
    cfg: &GeometryConfig,
    dist: UserDistribution,
    count: UserCount,
    rng: &mut SimRng,
) -> Result<UserLayout> {
    let n = match count {
        UserCount::Fixed(0) => {
            return Err(Error::InvalidArgument("fixed user count must be at least 1".into()))
        }
        UserCount::Fixed(n) => n,
        UserCount::DensityPerKm2(d) if !(d > 0.0) => {
            return Err(Error::InvalidArgument(format!("user density must be positive, got {d}")))
        }
        UserCount::DensityPerKm2(d) => {
            let mut drawn = 0;
            for _ in 0..MAX_EMPTY_DRAWS {
                drawn = draw_user_count(cfg, d, rng)?;
                if drawn > 0 {
                    break;
                }
            }
            if drawn == 0 {
                return Err(Error::EmptyScenario {
                    attempts: MAX_EMPTY_DRAWS,
                });
            }
            drawn
        }
    };
    let positions = (0..n).map(|_| sample_position(cfg, dist, rng)).collect();
    Ok(UserLayout {
        positions,
        distribution: dist,
    })
}

fn sample_position(cfg: &GeometryConfig, dist: UserDistribution, rng: &mut SimRng) -> Position {
    match dist {
        UserDistribution::Poisson | UserDistribution::Uniform => {
            Position::new(rng.uniform() * cfg.area_x_m, rng.uniform() * cfg.area_y_m)
        }
        UserDistribution::Normal => {
            let center = cfg.haps_ground_point();
            let (sx, sy) = (cfg.area_x_m / 6.0, cfg.area_y_m / 6.0);
            loop {
                let p = Position::new(
                    center.x + sx * rng.standard_normal(),
                    center.y + sy * rng.standard_normal(),
                );
                if cfg.contains(p) {
                    return p;
                }
            }
        }
    }
}

/// Signed elevation-plane angle of a ground point seen from the HAPS.
///
/// The magnitude is `atan(horizontal distance / altitude)`; the sign follows
/// the x offset (the y offset when x is zero).
pub fn haps_angle(cfg: &GeometryConfig, p: Position) -> f64 {
    let c = cfg.haps_ground_point();
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    let dist = dx.hypot(dy);
    let sign = if dx != 0.0 { dx.signum() } else { dy.signum() };
    if dist == 0.0 {
        0.0
    } else {
        sign * (dist / cfg.haps_height_m).atan()
    }
}

pub fn user_angles(cfg: &GeometryConfig, layout: &UserLayout) -> Vec<f64> {
    layout.positions.iter().map(|&p| haps_angle(cfg, p)).collect()
}
