use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sagin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sagin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn selftest_passes() {
    let out = sagin(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}

#[test]
fn zero_forcing_run_writes_targets_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = sagin(&["run", "--scheme", "zf", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let mut rdr = csv::Reader::from_path(out.join("sinr_report.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (db, target) = (col("sinr_db"), col("target_db"));
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let got: f64 = rec[db].parse().unwrap();
        let want: f64 = rec[target].parse().unwrap();
        assert!((got - want).abs() < 1e-6, "{got} dB vs {want} dB");
        rows += 1;
    }
    assert_eq!(rows, 3);
    assert!(out.join("summary.csv").exists());
    assert!(!out.join("training_log.csv").exists());
}

#[test]
fn single_user_sweep_matches_shannon_at_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scheme = \"zf\"\n[sweep]\ncounts = [1]\ndistributions = [\"uniform\"]\nseeds = [1, 2]\n",
    );
    let out = dir.path().join("sweep");
    let status = sagin(&["--config", &cfg, "sweep-users", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let mut rdr = csv::Reader::from_path(out.join("fig4_data.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let mean = headers.iter().position(|h| h == "mean_sum_rate_bps").unwrap();
    let rec = rdr.records().next().unwrap().unwrap();
    let rate: f64 = rec[mean].parse().unwrap();
    // 400 MHz at 0 dB: B log2(1 + 1).
    assert!((rate - 400e6).abs() / 400e6 < 1e-9, "{rate}");
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nnot_a_field = 1\n");
    let out = sagin(&["--config", &cfg, "run"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "[agent]\nlearning_rate = -1.0\n");
    assert_eq!(sagin(&["--config", &cfg, "run"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[agent]\nmax_episodes = 1\nsteps_per_episode = 80\nwarmup_steps = 20\nhidden = [16, 8]\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let s = sagin(&["--config", &cfg, "run", "--out", d.to_str().unwrap()]);
        assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    }
    for name in ["training_log.csv", "reward_curve.csv", "rates.csv", "summary.csv", "sinr_report.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}
