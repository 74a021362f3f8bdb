//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. The training criteria take several minutes
//! each in release-level test builds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use sagin_cli::config::{ExperimentConfig, Scheme};
use sagin_cli::experiment::{build_environment, compare_throughput, ddpg_scheme, run};
use sagin_core::beamforming::{compute_sinr, max_cross_residual, solve_zf, BeamformingMatrix};
use sagin_core::channel::{coherent_gain, ris_departure_response, ris_incident_response, ris_phase_profile, RisGeometry, RisPhaseProfile};
use sagin_core::ddpg::{Experience, ReplayBuffer, TrainingOutcome};
use sagin_core::neural::gradcheck::{run_suite, GradcheckConfig};
use sagin_core::numerics::{Complex64, ComplexMatrix, SimRng};
use sagin_core::scenario::{place_users, GeometryConfig, UserCount, UserDistribution};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn complex_gaussian(rows: usize, cols: usize, rng: &mut SimRng) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(s * rng.standard_normal(), s * rng.standard_normal()))
}

/// Scalar SINR of stream `k`: each entry of H·W is summed term by term.
fn scalar_sinr(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64, k: usize) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..w.cols() {
        let mut z = Complex64::new(0.0, 0.0);
        for n in 0..h.cols() {
            z += h.row(k)[n] * w.row(n)[i];
        }
        if i == k {
            signal = z.norm_sqr();
        } else {
            interference += z.norm_sqr();
        }
    }
    signal / (interference + sigma2)
}

fn criterion_1() -> Outcome {
    let mut rng = SimRng::new(1, 0);
    let sigma2 = 1e-3;
    let gamma_min = 10f64.powf(0.5);
    let (mut residual, mut sinr_err) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let k = 2 + (rng.uniform() * 5.0) as usize;
        let n = k + (rng.uniform() * (k + 1) as f64) as usize;
        let h = complex_gaussian(k, n, &mut rng);
        let w = match solve_zf(&h, &vec![gamma_min; k], sigma2, f64::INFINITY) {
            Ok(w) => w,
            Err(e) => return outcome(false, format!("solver failed on a {k}x{n} channel: {e}")),
        };
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let z: Complex64 = (0..n).map(|c| h.row(i)[c] * w.matrix().row(c)[j]).sum();
                    residual = residual.max(z.norm());
                }
            }
            let g = scalar_sinr(&h, w.matrix(), sigma2, i);
            sinr_err = sinr_err.max((g - gamma_min).abs() / gamma_min);
        }
        residual = residual.max(max_cross_residual(&h, &w));
    }
    outcome(
        residual <= 1e-9 && sinr_err <= 1e-6,
        format!("max residual {residual:.2e} (<= 1e-9), max SINR error {sinr_err:.2e} (<= 1e-6) over 100 channels"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0_f64;
    let mut perturb_ok = true;
    for side in [4usize, 6] {
        let cfg = GeometryConfig {
            ris_side: side,
            k_ue: 3,
            ..Default::default()
        };
        let layout = place_users(&cfg, UserDistribution::Uniform, UserCount::Fixed(3), &mut SimRng::new(7, 0)).unwrap();
        let geo = RisGeometry::new(&cfg, &layout);
        let l2 = (side * side) as f64;
        let b = ris_incident_response(geo.omega_in, &cfg);
        for &omega_out in &geo.omega_out {
            let g = ris_departure_response(omega_out, &cfg);
            let profile = ris_phase_profile(geo.omega_in, omega_out, &cfg);
            // Element-by-element sum of conj(g_l) e^{jφ_l} b_l.
            let mut brute = Complex64::new(0.0, 0.0);
            for (l, &phi) in profile.phases().iter().enumerate() {
                brute += g[l].conj() * Complex64::from_polar(1.0, phi) * b[l];
            }
            let gain = coherent_gain(&g, &profile, &b);
            worst = worst.max((brute.norm() - l2).abs()).max((gain - l2).abs());
            for l in 0..profile.len() {
                let mut p = profile.phases().to_vec();
                p[l] += std::f64::consts::FRAC_PI_2;
                perturb_ok &= coherent_gain(&g, &RisPhaseProfile::from_phases(p), &b) < gain;
            }
        }
    }
    outcome(
        worst <= 1e-9 && perturb_ok,
        format!("max |gain - L^2| {worst:.2e} (<= 1e-9) for 4x4 and 6x6, every pi/2 perturbation loses gain: {perturb_ok}"),
    )
}

fn criterion_3() -> Outcome {
    match run_suite(&GradcheckConfig::default()) {
        Ok(r) => outcome(
            r.passed && r.instances.len() == 50,
            format!("{} instances, max relative error {:.2e} (<= {:.0e})", r.instances.len(), r.max_rel_error, r.tolerance),
        ),
        Err(e) => outcome(false, format!("gradient check failed to run: {e}")),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = SimRng::new(6, 0);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let k = 1 + (rng.uniform() * 6.0) as usize;
        let n = k + (rng.uniform() * 6.0) as usize;
        let h = complex_gaussian(k, n, &mut rng);
        let w = complex_gaussian(n, k, &mut rng);
        let sigma2 = 10f64.powf(-3.0 + 4.0 * rng.uniform());
        let report = compute_sinr(&h, &BeamformingMatrix::new(w.clone()), sigma2).unwrap();
        for s in 0..k {
            let oracle = scalar_sinr(&h, &w, sigma2, s);
            worst = worst.max((report.per_stream_sinr[s] - oracle).abs() / oracle);
        }
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.2e} (<= 1e-12) over 1000 instances"))
}

fn criterion_7() -> Outcome {
    let exp = |i: usize| Experience::new(vec![i as f64], vec![0.0], i as f64, vec![0.0]).unwrap();
    let mut buf = ReplayBuffer::new(1000).unwrap();
    for i in 0..1001 {
        buf.push(exp(i));
    }
    let rewards: Vec<f64> = buf.iter().map(|e| e.reward).collect();
    let fifo = buf.len() == 1000 && rewards.first() == Some(&1.0) && rewards.last() == Some(&1000.0);

    let mut small = ReplayBuffer::new(10).unwrap();
    for i in 0..10 {
        small.push(exp(i));
    }
    let draws = 100_000;
    let mut counts = [0usize; 10];
    let mut rng = SimRng::new(7, 0);
    for _ in 0..draws {
        counts[small.sample_indices(1, &mut rng).unwrap()[0]] += 1;
    }
    let expected = draws as f64 / 10.0;
    let worst = counts.iter().map(|&c| (c as f64 - expected).abs() / expected).fold(0.0, f64::max);
    outcome(
        fifo && worst <= 0.05,
        format!("oldest evicted after 1001 pushes: {fifo}, max frequency deviation {:.2}% (<= 5%)", 100.0 * worst),
    )
}

fn final_window(rewards: &[f64]) -> (f64, f64) {
    let w = 1000.min(rewards.len());
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&rewards[..w]), mean(&rewards[rewards.len() - w..]))
}

fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn train_at(p_t_dbm: f64, hidden: Vec<usize>) -> Result<TrainingOutcome, String> {
    let mut cfg = benchmark_config();
    cfg.scenario.p_t_dbm = p_t_dbm;
    cfg.agent.hidden = hidden;
    let cfg = cfg.resolve().map_err(|e| e.to_string())?;
    let mut env = build_environment(&cfg, &cfg.scenario, cfg.seed).map_err(|e| e.to_string())?;
    let mut cfg = cfg;
    cfg.agent.action_bound = Some(sagin_core::ddpg::default_action_bound(env.config()));
    ddpg_scheme(&mut env, &cfg, cfg.metrics.alpha)
        .map(|(o, _)| o)
        .map_err(|e| e.to_string())
}

fn read_dir_bytes(dir: &Path, ext: &str) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let mut cfg = benchmark_config();
    cfg.agent.max_episodes = 2;
    cfg.agent.steps_per_episode = 150;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = run(&cfg, a.path()).and_then(|_| run(&cfg, b.path())) {
        return outcome(false, format!("run failed: {e}"));
    }
    let (x, y) = (read_dir_bytes(a.path(), "csv"), read_dir_bytes(b.path(), "csv"));
    let same = !x.is_empty() && x == y;
    outcome(same, format!("{} CSV files, byte-identical across two invocations: {same}", x.len()))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |n: u32, o: Outcome, t: Instant| {
        println!(
            "criterion {n}: {} ({:.1}s) {}",
            if o.passed { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        results.push((n, o));
    };

    let t = Instant::now();
    report(1, criterion_1(), t);
    let t = Instant::now();
    report(2, criterion_2(), t);
    let t = Instant::now();
    report(3, criterion_3(), t);
    let t = Instant::now();
    report(6, criterion_6(), t);
    let t = Instant::now();
    report(7, criterion_7(), t);
    let t = Instant::now();
    report(9, criterion_9(), t);

    // Criterion 5: the full table at the default power, plus a ZF-only
    // rerun for byte-identical output.
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let table = compare_throughput(&benchmark_config(), dir.path());
    let mut zf_cfg = benchmark_config();
    zf_cfg.scheme = Scheme::Zf;
    let (z1, z2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let zf_repeat = compare_throughput(&zf_cfg, z1.path())
        .and_then(|_| compare_throughput(&zf_cfg, z2.path()))
        .map(|_| {
            let a = read_dir_bytes(z1.path(), "csv");
            !a.is_empty() && a == read_dir_bytes(z2.path(), "csv")
        });
    let mut rewards_30 = None;
    let mut eval_two_layer = None;
    let c5 = match (&table, &zf_repeat) {
        (Ok(cmp), Ok(identical)) => {
            let cells = cmp.rows.iter().filter(|r| r.scheme == "ddpg" && r.improvement_pct_vs_zf.is_some()).count();
            let sum = |scheme: &str| {
                cmp.summary
                    .iter()
                    .find(|r| r.scheme == scheme && r.ris_side == 4)
                    .map(|r| r.sum_rate_bps)
                    .unwrap_or(f64::NAN)
            };
            let (zf, ddpg) = (sum("zf"), sum("ddpg"));
            if let Some((_, o)) = cmp.trained.iter().find(|(side, _)| *side == 4) {
                rewards_30 = Some(o.rewards());
                eval_two_layer = Some(o.final_eval.reward);
            }
            let ratio = ddpg / zf;
            outcome(
                cells == 4 && ratio >= 0.9 && *identical,
                format!("{cells}/4 DDPG cells with improvement, 4x4 DDPG/ZF sum rate {ratio:.3} (>= 0.9), ZF output byte-identical: {identical}"),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("compare failed: {e}")),
    };
    report(5, c5, t);

    // Criterion 4: learning trend at 30 dBm and ordering over power.
    let t = Instant::now();
    let mut finals = Vec::new();
    let mut trend = None;
    let mut errors = Vec::new();
    for p in [20.0, 25.0] {
        match train_at(p, benchmark_config().agent.hidden) {
            Ok(o) => finals.push((p, final_window(&o.rewards()).1)),
            Err(e) => errors.push(format!("{p} dBm: {e}")),
        }
    }
    match &rewards_30 {
        Some(r) => {
            let (first, last) = final_window(r);
            trend = Some((first, last));
            finals.push((30.0, last));
        }
        None => errors.push("30 dBm: no training outcome".into()),
    }
    let c4 = if errors.is_empty() {
        let (first, last) = trend.unwrap();
        let ordered = finals.windows(2).all(|w| w[1].1 >= w[0].1);
        let listing: Vec<String> = finals.iter().map(|(p, m)| format!("{p} dBm {m:.4}")).collect();
        outcome(
            last > first && ordered,
            format!(
                "30 dBm first/last 1000-step mean {first:.4}/{last:.4}; final-window means {} (non-decreasing: {ordered})",
                listing.join(", ")
            ),
        )
    } else {
        outcome(false, errors.join("; "))
    };
    report(4, c4, t);

    // Criterion 8: depth ablation against the two-layer run above.
    let t = Instant::now();
    let c8 = match (eval_two_layer, train_at(30.0, vec![256])) {
        (Some(two), Ok(one)) => outcome(
            two >= one.final_eval.reward,
            format!("final evaluation reward two-layer {two:.4} vs one-layer {:.4}", one.final_eval.reward),
        ),
        (None, _) => outcome(false, "two-layer run missing".into()),
        (_, Err(e)) => outcome(false, format!("one-layer run failed: {e}")),
    };
    report(8, c8, t);

    results.sort_by_key(|(n, _)| *n);
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.passed).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
