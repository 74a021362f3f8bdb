//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sagin_core::ddpg::AgentConfig;
use sagin_core::scenario::{GeometryConfig, UserDistribution, SPEED_OF_LIGHT};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Zf,
    Ddpg,
    Both,
}

impl Scheme {
    pub fn zf(self) -> bool {
        matches!(self, Scheme::Zf | Scheme::Both)
    }

    pub fn ddpg(self) -> bool {
        matches!(self, Scheme::Ddpg | Scheme::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersConfig {
    pub distribution: UserDistribution,
    /// When set, the user count is Poisson with this density and
    /// `scenario.k_ue` is ignored.
    pub density_per_km2: Option<f64>,
}

impl Default for UsersConfig {
    fn default() -> Self {
        Self {
            distribution: UserDistribution::Poisson,
            density_per_km2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub alpha: f64,
    pub moving_average_window: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            moving_average_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub counts: Vec<usize>,
    pub distributions: Vec<UserDistribution>,
    /// One layout per seed and cell; results are averaged over seeds.
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            counts: vec![2, 4, 6, 8, 10],
            distributions: UserDistribution::ALL.to_vec(),
            seeds: vec![42, 43, 44],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub ris_sides: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            ris_sides: vec![4, 6],
            alphas: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub svg: bool,
    pub checkpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Overrides `agent.seed`; also seeds the user layout.
    pub seed: u64,
    pub scheme: Scheme,
    pub output_dir: PathBuf,
    pub scenario: GeometryConfig,
    pub users: UsersConfig,
    pub agent: AgentConfig,
    pub metrics: MetricsConfig,
    pub sweep: SweepConfig,
    pub compare: CompareConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            scheme: Scheme::Both,
            output_dir: PathBuf::from("out"),
            scenario: GeometryConfig::default(),
            users: UsersConfig::default(),
            agent: AgentConfig::default(),
            metrics: MetricsConfig::default(),
            sweep: SweepConfig::default(),
            compare: CompareConfig::default(),
            output: OutputConfig {
                svg: false,
                checkpoints: true,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Fills derived defaults, syncs the seed and validates every section.
    pub fn resolve(mut self) -> CliResult<Self> {
        self.agent.seed = self.seed;
        let s = &mut self.scenario;
        if s.ris_spacing_m.is_none() && s.carrier_freq_hz > 0.0 {
            s.ris_spacing_m = Some(SPEED_OF_LIGHT / (2.0 * s.carrier_freq_hz));
        }
        if s.gamma_min_uplink_db.is_none() {
            s.gamma_min_uplink_db = Some(s.gamma_min_db);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> CliResult<()> {
        let field = |name: &str, e: sagin_core::Error| CliError::Config(format!("{name}: {e}"));
        self.scenario.validate().map_err(|e| field("scenario", e))?;
        self.agent.validate().map_err(|e| field("agent", e))?;
        if let Some(d) = self.users.density_per_km2 {
            if !(d > 0.0) {
                return Err(CliError::Config(format!("users.density_per_km2 must be positive, got {d}")));
            }
        }
        if !(self.metrics.alpha >= 0.0) {
            return Err(CliError::Config(format!("metrics.alpha must be non-negative, got {}", self.metrics.alpha)));
        }
        if self.sweep.counts.contains(&0) {
            return Err(CliError::Config("sweep.counts entries must be at least 1".into()));
        }
        if self.sweep.seeds.is_empty() {
            return Err(CliError::Config("sweep.seeds must not be empty".into()));
        }
        if self.compare.ris_sides.contains(&0) {
            return Err(CliError::Config("compare.ris_sides entries must be positive".into()));
        }
        if let Some(a) = self.compare.alphas.iter().find(|a| !(**a > 0.0)) {
            return Err(CliError::Config(format!("compare.alphas must be positive, got {a}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default().resolve().unwrap();
        cfg.agent.max_grad_norm = Some(2.5);
        cfg.users.density_per_km2 = Some(150.0);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml("[scenario]\np_t_watts = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("p_t_watts"), "{err}");
        let err = ExperimentConfig::from_toml("[agent]\nlearning_rat = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rat"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 7\n[scenario]\np_t_dbm = 20.0\n").unwrap();
        assert_eq!(cfg.scenario.p_t_dbm, 20.0);
        assert_eq!(cfg.scenario.n_antennas, 50);
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.agent.seed, 7);
        assert_eq!(resolved.scenario.gamma_min_uplink_db, Some(0.0));
        assert!((resolved.scenario.ris_spacing_m.unwrap() - 3e8 / 56e9).abs() < 1e-15);
    }

    #[test]
    fn invalid_values_name_the_section() {
        let err = ExperimentConfig::from_toml("[agent]\ndiscount = 1.5\n").unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("agent"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
