use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sagin_cli::config::{ExperimentConfig, Scheme};
use sagin_cli::{compare_throughput, run, selftest, sweep_users, CliError, CliResult};
use sagin_core::neural::gradcheck::{run_suite, GradcheckConfig};

#[derive(Parser)]
#[command(name = "sagin", version, about = "RIS-aided HAPS beamforming experiments")]
struct Args {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<Scheme>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and/or solve one scenario and write its artifacts.
    Run,
    /// Sum rate against the number of ground users.
    SweepUsers,
    /// Throughput table over RIS sizes and fairness levels.
    Compare,
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
    /// Zero-forcing and RIS oracle checks.
    Selftest,
}

fn load(args: &Args) -> CliResult<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.scheme {
        cfg.scheme = s;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    cfg.output_dir = out.clone();
    Ok((cfg, out))
}

fn execute(args: &Args) -> CliResult<()> {
    match &args.command {
        Command::Run => {
            let (cfg, out) = load(args)?;
            let artifacts = run(&cfg, &out)?;
            if let Some(z) = &artifacts.zf {
                println!("zf    sum rate {:.6e} bit/s, power {:.6e} W", z.rates.sum_rate, z.total_power);
            }
            if let Some((outcome, d)) = &artifacts.ddpg {
                println!(
                    "ddpg  sum rate {:.6e} bit/s, power {:.6e} W, final reward {:.4}",
                    d.rates.sum_rate, d.total_power, outcome.final_eval.reward
                );
            }
            println!("wrote {} files to {}", artifacts.files.len(), out.display());
        }
        Command::SweepUsers => {
            let (cfg, out) = load(args)?;
            let rows = sweep_users(&cfg, &out)?;
            for r in &rows {
                println!(
                    "{:<8} {:>4} {:<5} {}",
                    r.distribution,
                    r.n_users,
                    r.scheme,
                    r.mean_sum_rate_bps.map_or("infeasible".to_string(), |m| format!("{m:.6e}"))
                );
            }
        }
        Command::Compare => {
            let (cfg, out) = load(args)?;
            let cmp = compare_throughput(&cfg, &out)?;
            for r in &cmp.rows {
                println!(
                    "{:<5} {}x{} alpha={} {:.4e} bit/s {}",
                    r.scheme,
                    r.ris_side,
                    r.ris_side,
                    r.alpha,
                    r.throughput_bps,
                    r.improvement_pct_vs_zf.map_or(String::new(), |p| format!("({p:+.2}%)"))
                );
            }
        }
        Command::Gradcheck { instances } => {
            let (cfg, _) = load(args)?;
            let report = run_suite(&GradcheckConfig {
                instances: *instances,
                seed: cfg.seed,
                ..Default::default()
            })?;
            for (i, r) in report.instances.iter().enumerate() {
                println!("{i:>3} {:<6} hidden {:?} batch {} max rel err {:.3e}", r.kind, r.hidden, r.batch, r.max_rel_error);
            }
            println!("max relative error {:.3e} (tolerance {:.0e})", report.max_rel_error, report.tolerance);
            if !report.passed {
                return Err(CliError::CheckFailed("gradient check exceeded tolerance".into()));
            }
        }
        Command::Selftest => {
            let (cfg, _) = load(args)?;
            let checks = selftest::run_all(cfg.seed)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(c) = checks.iter().find(|c| !c.passed) {
                return Err(CliError::CheckFailed(c.name.clone()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
