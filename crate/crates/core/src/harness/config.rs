//! Experiment configuration in TOML.
//!
//! ```toml
//! format_version = 1
//! t_final = 60.0
//! dt = 0.001
//! seed = 1
//! estimator = true
//! wigner_snapshots = [25.0]
//!
//! [model]
//! n_particles = 100
//! interaction_u = 0.0
//! tunneling_k = 1.0
//! gamma_bar = 1.0
//! bias_epsilon = 0.01
//!
//! [initial_state]
//! kind = "fock"
//! m = 50.0
//! ```
//!
//! Times are in Rabi periods.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Integration, SseScheme, DEFAULT_DT, DEFAULT_SAMPLE_INTERVAL};
use crate::error::{Error, Result};
use crate::observables::GridSpec;
use crate::spinspace::{coherent_state, fock_state, maximally_uncertain_estimate, ModelParams, QuantumState};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Largest step (Rabi periods) accepted for measured runs.
pub const MAX_MEASURED_DT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Fock { m: f64 },
    Coherent { theta: f64, phi: f64 },
    /// Flat populations with random phases drawn from the run seed.
    UniformRandomPhase,
}

impl InitialState {
    pub fn north_pole(n_particles: usize) -> Self {
        InitialState::Fock {
            m: n_particles as f64 / 2.0,
        }
    }

    pub fn build(&self, n_particles: usize, seed: u64) -> Result<QuantumState> {
        match *self {
            InitialState::Fock { m } => fock_state(n_particles, m),
            InitialState::Coherent { theta, phi } => coherent_state(n_particles, theta, phi),
            InitialState::UniformRandomPhase => maximally_uncertain_estimate(n_particles, seed),
        }
    }

    /// `fock:M`, `coherent:THETA,PHI` or `random`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse initial state {text:?}"));
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        match text.split_once(':') {
            Some(("fock", m)) => Ok(InitialState::Fock { m: number(m)? }),
            Some(("coherent", rest)) => {
                let (theta, phi) = rest.split_once(',').ok_or_else(bad)?;
                Ok(InitialState::Coherent {
                    theta: number(theta)?,
                    phi: number(phi)?,
                })
            }
            None if text == "random" || text == "uniform-random-phase" => Ok(InitialState::UniformRandomPhase),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub model: ModelParams,
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub scheme: SseScheme,
    pub seed: u64,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    /// Explicit ensemble seeds; overrides `seed`/`seed_count` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    pub initial_state: InitialState,
    #[serde(default = "default_true")]
    pub estimator: bool,
    #[serde(default)]
    pub wigner_snapshots: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_sample_interval() -> f64 {
    DEFAULT_SAMPLE_INTERVAL
}

fn default_seed_count() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(model: ModelParams, t_final: f64, seed: u64) -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            model,
            t_final,
            dt: DEFAULT_DT,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            scheme: SseScheme::default(),
            seed,
            seed_count: 1,
            seeds: None,
            initial_state: InitialState::north_pole(model.n_particles),
            estimator: true,
            wigner_snapshots: Vec::new(),
            wigner_grid: None,
            output_dir: None,
        }
    }

    pub fn integration(&self) -> Integration {
        Integration {
            t_final: self.t_final,
            dt: self.dt,
            sample_interval: self.sample_interval,
            scheme: self.scheme,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.wigner_grid
            .unwrap_or_else(|| GridSpec::for_particles(self.model.n_particles))
    }

    /// Ensemble seeds in run order.
    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(list) => list.clone(),
            None => (0..self.seed_count as u64).map(|i| self.seed + i).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported format_version {}, expected {CONFIG_FORMAT_VERSION}",
                self.format_version
            )));
        }
        self.model.validate()?;
        if self.model.gamma_bar > 0.0 && !(self.dt < MAX_MEASURED_DT) {
            return Err(Error::Config(format!(
                "dt = {} t_R is too large for a measured run (must be below {MAX_MEASURED_DT})",
                self.dt
            )));
        }
        self.integration().validate()?;
        if self.seed_count == 0 {
            return Err(Error::Config("seed_count must be at least 1".into()));
        }
        if let Some(list) = &self.seeds {
            if list.is_empty() {
                return Err(Error::Config("seeds must not be empty".into()));
            }
            let distinct: BTreeSet<_> = list.iter().collect();
            if distinct.len() != list.len() {
                return Err(Error::Config("ensemble seeds must be distinct".into()));
            }
            if self.seed_count != 1 && self.seed_count != list.len() {
                return Err(Error::Config(format!(
                    "seed_count {} disagrees with {} explicit seeds",
                    self.seed_count,
                    list.len()
                )));
            }
        }
        for &t in &self.wigner_snapshots {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::Config(format!(
                    "Wigner snapshot at {t} outside [0, {}]",
                    self.t_final
                )));
            }
        }
        self.initial_state.build(self.model.n_particles, self.seed)?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(reason) => Error::format(path, reason),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Ready-made configurations for the two regimes.
pub mod presets {
    use super::*;

    /// `u = 0`: measurement without interaction.
    pub fn fig2() -> ExperimentConfig {
        let mut config = ExperimentConfig::new(ModelParams::new(100, 0.0, 1.0), 60.0, 1);
        config.wigner_snapshots = vec![25.0];
        config
    }

    /// `u = 1`: measurement with interaction.
    pub fn fig4() -> ExperimentConfig {
        let mut config = ExperimentConfig::new(ModelParams::new(100, 1.0, 1.0), 60.0, 1);
        config.wigner_snapshots = vec![48.0];
        config
    }

    pub fn by_name(name: &str) -> Result<ExperimentConfig> {
        match name {
            "fig2" => Ok(fig2()),
            "fig4" => Ok(fig4()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}
