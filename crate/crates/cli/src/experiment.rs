//! The three experiment protocols: single run, user sweep and the
//! throughput comparison table.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sagin_core::beamforming::{compute_sinr, solve_zf, BeamformingMatrix, SinrReport};
use sagin_core::ddpg::{default_action_bound, moving_average, train, Environment, TrainingOutcome};
use sagin_core::metrics::{alpha_fair_throughput, improvement_percent, per_user_rates, sum_rate, RateReport};
use sagin_core::numerics::SimRng;
use sagin_core::scenario::{linear_to_db, place_users, GeometryConfig, UserCount, UserLayout};

use crate::config::{ExperimentConfig, Scheme, UsersConfig};
use crate::error::{CliError, CliResult};
use crate::svg;

/// Layouts draw from this stream of the experiment seed.
pub const LAYOUT_STREAM: u64 = 0;

/// Places users for `seed` and returns the scenario with `k_ue` set to the
/// number actually placed.
pub fn build_layout(
    scenario: &GeometryConfig,
    users: &UsersConfig,
    seed: u64,
) -> CliResult<(GeometryConfig, UserLayout)> {
    let count = match users.density_per_km2 {
        Some(d) => UserCount::DensityPerKm2(d),
        None => UserCount::Fixed(scenario.k_ue),
    };
    let mut rng = SimRng::new(seed, LAYOUT_STREAM);
    let layout = place_users(scenario, users.distribution, count, &mut rng)?;
    let mut cfg = scenario.clone();
    cfg.k_ue = layout.len();
    if let Some(w) = cfg.dof_warning() {
        log::warn!("{w}");
    }
    Ok((cfg, layout))
}

pub fn build_environment(cfg: &ExperimentConfig, scenario: &GeometryConfig, seed: u64) -> CliResult<Environment> {
    let (geo, layout) = build_layout(scenario, &cfg.users, seed)?;
    Ok(Environment::new(
        geo,
        layout,
        None,
        cfg.agent.reward,
        seed,
        cfg.agent.redraw_channel_each_step,
    )?)
}

/// Evaluation of one beamformer on one channel.
#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub scheme: &'static str,
    pub w: BeamformingMatrix,
    pub sinr: SinrReport,
    pub rates: RateReport,
    pub total_power: f64,
}

fn evaluate(scheme: &'static str, env: &Environment, w: BeamformingMatrix, alpha: f64) -> CliResult<SchemeResult> {
    let cfg = env.config();
    let sinr = compute_sinr(&env.channels().h_composite, &w, env.noise_power())?;
    let rates = RateReport::new(sinr.user_sinr(cfg.k_sat), cfg.bandwidth_hz, alpha)?;
    Ok(SchemeResult {
        scheme,
        total_power: w.total_power(),
        w,
        sinr,
        rates,
    })
}

/// Minimum-power zero-forcing on the environment's current channel.
pub fn zf_baseline(env: &Environment, alpha: f64) -> CliResult<SchemeResult> {
    let cfg = env.config();
    let w = solve_zf(&env.channels().h_composite, &cfg.sinr_targets(), env.noise_power(), cfg.p_t_watts())?;
    evaluate("zf", env, w, alpha)
}

/// Trains on `env` and scores the deterministic policy.
pub fn ddpg_scheme(env: &mut Environment, cfg: &ExperimentConfig, alpha: f64) -> CliResult<(TrainingOutcome, SchemeResult)> {
    let outcome = train(env, &cfg.agent)?;
    let w = sagin_core::ddpg::decode_action(&outcome.final_action, env.config())?;
    let result = evaluate("ddpg", env, w, alpha)?;
    Ok((outcome, result))
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SinrRow<'a> {
    scheme: &'a str,
    stream: usize,
    role: &'a str,
    sinr: f64,
    sinr_db: f64,
    target_db: f64,
    signal_watts: f64,
    interference_watts: f64,
    noise_watts: f64,
}

#[derive(Debug, Serialize)]
struct RateRow<'a> {
    scheme: &'a str,
    user: usize,
    sinr_db: f64,
    rate_bps: f64,
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    scheme: &'a str,
    sum_rate_bps: f64,
    alpha: f64,
    fair_throughput_bps: f64,
    total_power_watts: f64,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    step: usize,
    reward: f64,
    reward_moving_average: f64,
}

/// What a single run produced.
#[derive(Debug)]
pub struct RunArtifacts {
    pub zf: Option<SchemeResult>,
    pub ddpg: Option<(TrainingOutcome, SchemeResult)>,
    pub files: Vec<PathBuf>,
}

/// Builds the scenario, solves and/or trains, and writes every artifact
/// into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunArtifacts> {
    let mut cfg = cfg.clone().resolve()?;
    fs::create_dir_all(out)?;
    let mut env = build_environment(&cfg, &cfg.scenario, cfg.seed)?;
    if cfg.agent.action_bound.is_none() {
        cfg.agent.action_bound = Some(default_action_bound(env.config()));
    }
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = out.join(name);
        files.push(p.clone());
        p
    };

    let mut snapshot = cfg.clone();
    snapshot.scenario.k_ue = env.config().k_ue;
    fs::write(emit("resolved_config.toml"), snapshot.to_toml()?)?;
    let layout = toml::to_string(env.layout()).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(emit("layout.toml"), layout)?;

    let alpha = cfg.metrics.alpha;
    let zf = if cfg.scheme.zf() { Some(zf_baseline(&env, alpha)?) } else { None };
    let ddpg = if cfg.scheme.ddpg() {
        Some(ddpg_scheme(&mut env, &cfg, alpha)?)
    } else {
        None
    };

    if let Some((outcome, _)) = &ddpg {
        write_rows(&emit("training_log.csv"), &outcome.log)?;
        let rewards = outcome.rewards();
        let ma = moving_average(&rewards, cfg.metrics.moving_average_window);
        let curve: Vec<CurveRow> = outcome
            .log
            .iter()
            .zip(ma)
            .map(|(r, m)| CurveRow {
                step: r.step,
                reward: r.reward,
                reward_moving_average: m,
            })
            .collect();
        write_rows(&emit("reward_curve.csv"), &curve)?;
        if cfg.output.svg {
            let raw: Vec<(f64, f64)> = curve.iter().map(|c| (c.step as f64, c.reward)).collect();
            let smooth: Vec<(f64, f64)> = curve.iter().map(|c| (c.step as f64, c.reward_moving_average)).collect();
            let doc = svg::line_chart(
                "Reward per step",
                "step",
                "reward",
                &[("raw", raw), ("moving average", smooth)],
            );
            fs::write(emit("reward_curve.svg"), doc)?;
        }
        if cfg.output.checkpoints {
            let a = &outcome.agent;
            a.actor.save(emit("actor.json"))?;
            a.critic.save(emit("critic.json"))?;
            a.target_actor.save(emit("target_actor.json"))?;
            a.target_critic.save(emit("target_critic.json"))?;
        }
    }

    let schemes: Vec<&SchemeResult> = zf.iter().chain(ddpg.iter().map(|(_, r)| r)).collect();
    let k_sat = env.config().k_sat;
    let targets = env.config().sinr_targets();
    let mut sinr_rows = Vec::new();
    let mut rate_rows = Vec::new();
    let mut summary = Vec::new();
    for s in &schemes {
        for (k, &g) in s.sinr.per_stream_sinr.iter().enumerate() {
            sinr_rows.push(SinrRow {
                scheme: s.scheme,
                stream: k,
                role: if k < k_sat { "satellite" } else { "user" },
                sinr: g,
                sinr_db: linear_to_db(g),
                target_db: linear_to_db(targets[k]),
                signal_watts: s.sinr.per_stream_signal[k],
                interference_watts: s.sinr.per_stream_interference[k],
                noise_watts: s.sinr.noise,
            });
        }
        for (u, (&g, &r)) in s.sinr.user_sinr(k_sat).iter().zip(&s.rates.per_user_rate).enumerate() {
            rate_rows.push(RateRow {
                scheme: s.scheme,
                user: u,
                sinr_db: linear_to_db(g),
                rate_bps: r,
            });
        }
        summary.push(SummaryRow {
            scheme: s.scheme,
            sum_rate_bps: s.rates.sum_rate,
            alpha,
            fair_throughput_bps: s.rates.fair_throughput,
            total_power_watts: s.total_power,
        });
    }
    write_rows(&emit("sinr_report.csv"), &sinr_rows)?;
    write_rows(&emit("rates.csv"), &rate_rows)?;
    write_rows(&emit("summary.csv"), &summary)?;
    Ok(RunArtifacts { zf, ddpg, files })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub distribution: &'static str,
    pub n_users: usize,
    pub scheme: &'static str,
    /// Empty when no seed produced a feasible result.
    pub mean_sum_rate_bps: Option<f64>,
    pub std: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Sum rate against user count for each distribution, averaged over the
/// configured seeds. Cell `c` with seed `s` uses seed `s + c`.
pub fn sweep_users(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<SweepRow>> {
    let cfg = cfg.clone().resolve()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("resolved_config.toml"), cfg.to_toml()?)?;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &dist in &cfg.sweep.distributions {
        for &n in &cfg.sweep.counts {
            let mut zf_rates = Vec::new();
            let mut ddpg_rates = Vec::new();
            for &seed in &cfg.sweep.seeds {
                let cell_seed = seed.wrapping_add(cell);
                let scenario = GeometryConfig {
                    k_ue: n,
                    ..cfg.scenario.clone()
                };
                let users = UsersConfig {
                    distribution: dist,
                    density_per_km2: None,
                };
                let (geo, layout) = build_layout(&scenario, &users, cell_seed)?;
                let mut env = Environment::new(
                    geo,
                    layout,
                    None,
                    cfg.agent.reward,
                    cell_seed,
                    cfg.agent.redraw_channel_each_step,
                )?;
                if cfg.scheme.zf() {
                    match zf_baseline(&env, cfg.metrics.alpha) {
                        Ok(r) => zf_rates.push(r.rates.sum_rate),
                        Err(CliError::Core(sagin_core::Error::Infeasible(why))) => {
                            log::warn!("{} users, {}, seed {cell_seed}: zero forcing infeasible: {why}", n, dist.name())
                        }
                        Err(e) => return Err(e),
                    }
                }
                if cfg.scheme.ddpg() {
                    let agent = sagin_core::ddpg::AgentConfig {
                        seed: cell_seed,
                        ..cfg.agent.clone()
                    };
                    let run_cfg = ExperimentConfig {
                        agent,
                        ..cfg.clone()
                    };
                    let (_, r) = ddpg_scheme(&mut env, &run_cfg, cfg.metrics.alpha)?;
                    ddpg_rates.push(r.rates.sum_rate);
                }
            }
            for (scheme, rates, on) in [("zf", &zf_rates, cfg.scheme.zf()), ("ddpg", &ddpg_rates, cfg.scheme.ddpg())] {
                if on {
                    let (mean, std) = mean_std(rates);
                    rows.push(SweepRow {
                        distribution: dist.name(),
                        n_users: n,
                        scheme,
                        mean_sum_rate_bps: mean,
                        std,
                    });
                }
            }
            cell += 1;
        }
    }
    write_rows(&out.join("fig4_data.csv"), &rows)?;
    if cfg.output.svg {
        let mut series = Vec::new();
        for &dist in &cfg.sweep.distributions {
            for scheme in ["zf", "ddpg"] {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.distribution == dist.name() && r.scheme == scheme)
                    .filter_map(|r| r.mean_sum_rate_bps.map(|m| (r.n_users as f64, m)))
                    .collect();
                if !pts.is_empty() {
                    series.push((format!("{} {scheme}", dist.name()), pts));
                }
            }
        }
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
        fs::write(
            out.join("fig4.svg"),
            svg::line_chart("Sum rate versus users", "ground users", "sum rate (bit/s)", &refs),
        )?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub scheme: &'static str,
    pub ris_side: usize,
    pub alpha: f64,
    pub throughput_bps: f64,
    pub improvement_pct_vs_zf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummaryRow {
    pub scheme: &'static str,
    pub ris_side: usize,
    pub sum_rate_bps: f64,
    pub total_power_watts: f64,
}

#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<TableRow>,
    pub summary: Vec<CompareSummaryRow>,
    /// Training outcome per RIS side, when DDPG was part of the scheme.
    pub trained: Vec<(usize, TrainingOutcome)>,
}

/// Zero forcing against DDPG for every RIS size and fairness level. One
/// agent is trained per RIS size; α only changes how its rates are scored.
pub fn compare_throughput(cfg: &ExperimentConfig, out: &Path) -> CliResult<Comparison> {
    let cfg = cfg.clone().resolve()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("resolved_config.toml"), cfg.to_toml()?)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut trained = Vec::new();
    for &side in &cfg.compare.ris_sides {
        let scenario = GeometryConfig {
            ris_side: side,
            ..cfg.scenario.clone()
        };
        let mut env = build_environment(&cfg, &scenario, cfg.seed)?;
        let zf = if cfg.scheme.zf() { Some(zf_baseline(&env, 0.0)?) } else { None };
        let ddpg = if cfg.scheme.ddpg() {
            Some(ddpg_scheme(&mut env, &cfg, 0.0)?)
        } else {
            None
        };
        for s in zf.iter().chain(ddpg.iter().map(|(_, r)| r)) {
            summary.push(CompareSummaryRow {
                scheme: s.scheme,
                ris_side: side,
                sum_rate_bps: s.rates.sum_rate,
                total_power_watts: s.total_power,
            });
        }
        for &alpha in &cfg.compare.alphas {
            let zf_tp = match &zf {
                Some(z) => Some(alpha_fair_throughput(&z.rates.per_user_rate, alpha)?.fair_throughput),
                None => None,
            };
            if let Some(t) = zf_tp {
                rows.push(TableRow {
                    scheme: "zf",
                    ris_side: side,
                    alpha,
                    throughput_bps: t,
                    improvement_pct_vs_zf: Some(0.0),
                });
            }
            if let Some((_, d)) = &ddpg {
                let t = alpha_fair_throughput(&d.rates.per_user_rate, alpha)?.fair_throughput;
                rows.push(TableRow {
                    scheme: "ddpg",
                    ris_side: side,
                    alpha,
                    throughput_bps: t,
                    improvement_pct_vs_zf: zf_tp.filter(|z| *z > 0.0).map(|z| improvement_percent(t, z)),
                });
            }
        }
        if let Some((outcome, _)) = ddpg {
            trained.push((side, outcome));
        }
    }
    rows.sort_by(|a, b| {
        (a.scheme != "zf", a.ris_side)
            .cmp(&(b.scheme != "zf", b.ris_side))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    write_rows(&out.join("table2_replica.csv"), &rows)?;
    write_rows(&out.join("compare_summary.csv"), &summary)?;
    Ok(Comparison { rows, summary, trained })
}

/// Sum rate of a set of user SINRs.
pub fn user_sum_rate(user_sinr: &[f64], bandwidth_hz: f64) -> f64 {
    sum_rate(&per_user_rates(user_sinr, bandwidth_hz))
}

pub fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Zf => "zf",
        Scheme::Ddpg => "ddpg",
        Scheme::Both => "both",
    }
}
