use sagin_core::beamforming::{compute_sinr, max_cross_residual, solve_zf};
use sagin_core::ddpg::{decode_action, default_action_bound, encode_action, train, AgentConfig, Environment, RewardWeights};
use sagin_core::numerics::SimRng;
use sagin_core::scenario::{place_users, GeometryConfig, UserCount, UserDistribution};
use sagin_core::{build_channels, MlpParams};

fn benchmark() -> (GeometryConfig, sagin_core::UserLayout) {
    let cfg = GeometryConfig::default();
    let layout = place_users(&cfg, UserDistribution::Uniform, UserCount::Fixed(cfg.k_ue), &mut SimRng::new(42, 0)).unwrap();
    (cfg, layout)
}

#[test]
fn zero_forcing_on_the_benchmark_channel_meets_every_target() {
    let (cfg, layout) = benchmark();
    let ch = build_channels(&cfg, &layout, None, &mut SimRng::new(42, 1)).unwrap();
    let h = &ch.h_composite;
    let targets = cfg.sinr_targets();
    let w = solve_zf(h, &targets, cfg.noise_power(), cfg.p_t_watts()).unwrap();
    assert!(max_cross_residual(h, &w) < 1e-9);
    assert!(w.total_power() <= cfg.p_t_watts());
    let r = compute_sinr(h, &w, cfg.noise_power()).unwrap();
    for (g, t) in r.per_stream_sinr.iter().zip(&targets) {
        assert!((g - t).abs() / t < 1e-6, "{g} vs {t}");
    }
}

#[test]
fn feasible_actions_survive_encoding() {
    let (cfg, layout) = benchmark();
    let ch = build_channels(&cfg, &layout, None, &mut SimRng::new(42, 1)).unwrap();
    let w = solve_zf(&ch.h_composite, &cfg.sinr_targets(), cfg.noise_power(), cfg.p_t_watts()).unwrap();
    let back = decode_action(&encode_action(&w), &cfg).unwrap();
    assert!(back.matrix().max_abs_diff(w.matrix()) < 1e-15);
}

#[test]
fn short_training_is_reproducible_and_checkpoints_round_trip() {
    let (cfg, layout) = benchmark();
    let agent_cfg = AgentConfig {
        steps_per_episode: 120,
        max_episodes: 2,
        warmup_steps: 20,
        hidden: vec![32, 16],
        action_bound: Some(default_action_bound(&cfg)),
        ..Default::default()
    };
    let run = || {
        let mut env = Environment::new(cfg.clone(), layout.clone(), None, RewardWeights::default(), 42, false).unwrap();
        train(&mut env, &agent_cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.log.len(), 240);
    assert_eq!(a.rewards(), b.rewards());
    assert_eq!(a.final_action, b.final_action);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("actor.json");
    a.agent.actor.save(&path).unwrap();
    let loaded = MlpParams::load(&path).unwrap();
    assert_eq!(loaded.flatten(), a.agent.actor.flatten());
}
