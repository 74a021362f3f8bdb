//! Oracle checks of the zero-forcing solver and the RIS phase law.

use sagin_core::beamforming::{compute_sinr, max_cross_residual, solve_zf};
use sagin_core::channel::{coherent_gain, ris_departure_response, ris_incident_response, ris_phase_profile, RisGeometry, RisPhaseProfile};
use sagin_core::numerics::{Complex64, ComplexMatrix, SimRng};
use sagin_core::scenario::{place_users, GeometryConfig, UserCount, UserDistribution};
use sagin_core::Result;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_channel(rows: usize, cols: usize, rng: &mut SimRng) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(s * rng.standard_normal(), s * rng.standard_normal()))
}

/// Random full-rank channels: leakage must vanish and every stream must sit
/// exactly on its SINR target.
pub fn zf_check(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = SimRng::new(seed, 0);
    let sigma2 = 1e-3;
    let (mut worst_residual, mut worst_sinr) = (0.0_f64, 0.0_f64);
    for _ in 0..instances {
        let k = 2 + (rng.uniform() * 5.0) as usize;
        let n = k + (rng.uniform() * (k + 1) as f64) as usize;
        let h = random_channel(k, n, &mut rng);
        let targets: Vec<f64> = (0..k).map(|_| 0.5 + 2.0 * rng.uniform()).collect();
        let w = solve_zf(&h, &targets, sigma2, f64::INFINITY)?;
        worst_residual = worst_residual.max(max_cross_residual(&h, &w));
        let report = compute_sinr(&h, &w, sigma2)?;
        for (g, t) in report.per_stream_sinr.iter().zip(&targets) {
            worst_sinr = worst_sinr.max((g - t).abs() / t);
        }
    }
    Ok(Check {
        name: format!("zero-forcing nulling over {instances} channels"),
        passed: worst_residual <= 1e-9 && worst_sinr <= 1e-6,
        detail: format!("max leakage {worst_residual:.3e}, max relative SINR error {worst_sinr:.3e}"),
    })
}

/// The phase law must add every element in phase for each served user,
/// and rotating any single element by π/2 must lose gain.
pub fn ris_check(side: usize, seed: u64) -> Result<Check> {
    let cfg = GeometryConfig {
        ris_side: side,
        k_ue: 3,
        ..Default::default()
    };
    let layout = place_users(&cfg, UserDistribution::Uniform, UserCount::Fixed(3), &mut SimRng::new(seed, 0))?;
    let geo = RisGeometry::new(&cfg, &layout);
    let l2 = cfg.ris_elements() as f64;
    let incident = ris_incident_response(geo.omega_in, &cfg);
    let (mut worst, mut perturb_ok) = (0.0_f64, true);
    for &omega_out in &geo.omega_out {
        let g = ris_departure_response(omega_out, &cfg);
        let profile = ris_phase_profile(geo.omega_in, omega_out, &cfg);
        let gain = coherent_gain(&g, &profile, &incident);
        worst = worst.max((gain - l2).abs());
        for l in 0..profile.len() {
            let mut p = profile.phases().to_vec();
            p[l] += std::f64::consts::FRAC_PI_2;
            perturb_ok &= coherent_gain(&g, &RisPhaseProfile::from_phases(p), &incident) < gain;
        }
    }
    Ok(Check {
        name: format!("{side}x{side} RIS coherent gain"),
        passed: worst <= 1e-9 && perturb_ok,
        detail: format!("max |gain - L^2| {worst:.3e}, every perturbation loses gain: {perturb_ok}"),
    })
}

pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![zf_check(100, seed)?, ris_check(4, seed)?, ris_check(6, seed)?])
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all(42).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
