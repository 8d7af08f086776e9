//! Single runs and seed ensembles written to run directories.
//!
//! A run directory holds
//!
//! ```text
//! config.toml         configuration snapshot
//! record.csv          measurement record, `t,dI`
//! record.bin          the same record in binary form
//! trajectory.csv      sampled observables
//! wigner/*.json|bin   Wigner grids at the snapshot times
//! manifest.json       versions, seeds and SHA-256 of every file above
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::io::{sha256_file, write_trajectory_csv};
use crate::dynamics::{DensityMatrix, RunOutput, Simulation, TrajectoryLog, RECORD_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::observables::{wigner_function, WIGNER_FORMAT_VERSION};
use crate::spinspace::maximally_uncertain_estimate;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
/// Variable naming the default root for run directories.
pub const OUTPUT_ENV: &str = "DOUBLEWELL_OUTPUT";
/// Fidelity level counted as converged.
pub const CONVERGED_FIDELITY: f64 = 0.99;
/// Largest particle number for which ensembles keep the averaged projector.
pub const MAX_AVERAGED_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub crate_version: String,
    pub record_format_version: u32,
    pub wigner_format_version: u32,
    pub params_digest: String,
    pub seeds: Vec<u64>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Err(Error::IncompleteRun(format!("{} has no manifest.json", dir.display())));
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }

    /// Files named in the manifest whose content no longer matches.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for entry in &self.files {
            let path = dir.join(&entry.path);
            if !path.exists() || sha256_file(&path)? != entry.sha256 {
                bad.push(entry.path.clone());
            }
        }
        Ok(bad)
    }

    fn new(config: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            record_format_version: RECORD_FORMAT_VERSION,
            wigner_format_version: WIGNER_FORMAT_VERSION,
            params_digest: config.model.digest(),
            seeds,
            files: Vec::new(),
        }
    }

    fn add(&mut self, dir: &Path, relative: &str) -> Result<()> {
        self.files.push(ManifestEntry {
            path: relative.to_string(),
            sha256: sha256_file(&dir.join(relative))?,
        });
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Output root: the config's `output_dir`, else `$DOUBLEWELL_OUTPUT`, else `runs`.
pub fn output_root(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Runs one seed of `config` without touching the filesystem.
pub fn simulate(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let sim = Simulation::new(config.model, config.integration())?;
    simulate_with(&sim, config, seed)
}

fn simulate_with(sim: &Simulation, config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let n = config.model.n_particles;
    let initial = config.initial_state.build(n, seed)?;
    let estimate = if config.estimator {
        Some(maximally_uncertain_estimate(n, seed)?)
    } else {
        None
    };
    sim.run(&initial, estimate.as_ref(), seed, &config.wigner_snapshots)
}

/// Name of the Wigner files for a snapshot, without extension.
pub fn wigner_stem(which: &str, time: f64) -> String {
    format!("wigner/{which}_t{time:.3}")
}

/// Runs `config` with its first seed and writes the artifacts into `dir`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let out = simulate(config, config.seed)?;
    write_run(config, &out, dir)?;
    let mut manifest = Manifest::new(config, vec![config.seed]);
    for f in artifact_names(&out) {
        manifest.add(dir, &f)?;
    }
    manifest.write(dir)?;
    Ok(manifest)
}

fn artifact_names(out: &RunOutput) -> Vec<String> {
    let mut names = vec![
        "config.toml".to_string(),
        "record.csv".to_string(),
        "record.bin".to_string(),
        "trajectory.csv".to_string(),
    ];
    for snap in &out.snapshots {
        let mut which = vec!["conditioned"];
        if snap.estimate.is_some() {
            which.push("estimate");
        }
        for w in which {
            let stem = wigner_stem(w, snap.time);
            names.push(format!("{stem}.json"));
            names.push(format!("{stem}.bin"));
        }
    }
    names
}

fn write_run(config: &ExperimentConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    config.save(&dir.join("config.toml"))?;
    out.record.write_csv(&dir.join("record.csv"))?;
    out.record.write_binary(&dir.join("record.bin"))?;
    write_trajectory_csv(&out.log, &dir.join("trajectory.csv"))?;
    if !out.snapshots.is_empty() {
        std::fs::create_dir_all(dir.join("wigner"))?;
    }
    let grid = config.grid();
    for snap in &out.snapshots {
        let mut states = vec![("conditioned", &snap.conditioned)];
        if let Some(e) = &snap.estimate {
            states.push(("estimate", e));
        }
        for (which, state) in states {
            let w = wigner_function(state, grid)?;
            let stem = wigner_stem(which, snap.time);
            w.write_binary(&dir.join(format!("{stem}.json")), &dir.join(format!("{stem}.bin")))?;
        }
    }
    Ok(())
}

/// Aggregates over seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seeds: Vec<u64>,
    /// Rabi periods.
    pub times: Vec<f64>,
    pub mean_jz: Vec<f64>,
    pub stderr_jz: Vec<f64>,
    /// First time per seed from which the fidelity stays above
    /// [`CONVERGED_FIDELITY`] to the end of the run.
    pub convergence_times: Vec<Option<f64>>,
    #[serde(skip)]
    pub averaged_state: Option<DensityMatrix>,
    #[serde(skip)]
    pub logs: Vec<TrajectoryLog>,
}

impl EnsembleSummary {
    /// Fraction of seeds whose fidelity first reaches the threshold by `t`.
    pub fn fraction_reaching(&self, threshold: f64, t: f64) -> f64 {
        let hits = self
            .logs
            .iter()
            .filter(|log| first_crossing(log, threshold).is_some_and(|tc| tc <= t))
            .count();
        hits as f64 / self.logs.len().max(1) as f64
    }
}

/// First sample time with fidelity at or above `threshold`.
pub fn first_crossing(log: &TrajectoryLog, threshold: f64) -> Option<f64> {
    let f = log.fidelity.as_ref()?;
    f.iter().position(|&x| x >= threshold).map(|i| log.times[i])
}

/// Start of the final stretch over which the fidelity stays at or above `threshold`.
pub fn settled_from(log: &TrajectoryLog, threshold: f64) -> Option<f64> {
    let f = log.fidelity.as_ref()?;
    let last_below = f.iter().rposition(|&x| x < threshold);
    match last_below {
        None => log.times.first().copied(),
        Some(i) if i + 1 < f.len() => Some(log.times[i + 1]),
        Some(_) => None,
    }
}

/// Runs every seed in parallel without writing files.
pub fn simulate_ensemble(config: &ExperimentConfig) -> Result<(EnsembleSummary, Vec<RunOutput>)> {
    config.validate()?;
    let seeds = config.seed_list();
    if seeds.len() < 2 {
        return Err(Error::Config("an ensemble needs at least two seeds".into()));
    }
    let sim = Simulation::new(config.model, config.integration())?;
    let runs: Vec<RunOutput> = seeds
        .par_iter()
        .map(|&s| simulate_with(&sim, config, s))
        .collect::<Result<_>>()?;
    let summary = summarize(config, &seeds, &runs)?;
    Ok((summary, runs))
}

fn summarize(config: &ExperimentConfig, seeds: &[u64], runs: &[RunOutput]) -> Result<EnsembleSummary> {
    let times = runs[0].log.times.clone();
    let m = runs.len() as f64;
    let mut mean_jz = vec![0.0; times.len()];
    let mut stderr_jz = vec![0.0; times.len()];
    for (i, (mean, se)) in mean_jz.iter_mut().zip(stderr_jz.iter_mut()).enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.log.conditioned.jz[i]).collect();
        *mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - *mean).powi(2)).sum::<f64>() / (m - 1.0);
        *se = (var / m).sqrt();
    }
    let convergence_times = runs
        .iter()
        .map(|r| settled_from(&r.log, CONVERGED_FIDELITY))
        .collect();
    let averaged_state = if config.model.dim() <= MAX_AVERAGED_DIM {
        let finals: Vec<_> = runs.iter().map(|r| r.final_conditioned.clone()).collect();
        Some(DensityMatrix::mixture(&finals)?)
    } else {
        None
    };
    Ok(EnsembleSummary {
        seeds: seeds.to_vec(),
        times,
        mean_jz,
        stderr_jz,
        convergence_times,
        averaged_state,
        logs: runs.iter().map(|r| r.log.clone()).collect(),
    })
}

/// Runs the ensemble and writes per-seed directories `seed_<s>/`, plus
/// `ensemble.csv` (`t,mean_jz,stderr_jz`) and `summary.json`.
pub fn run_ensemble(config: &ExperimentConfig, dir: &Path) -> Result<EnsembleSummary> {
    let (summary, runs) = simulate_ensemble(config)?;
    std::fs::create_dir_all(dir)?;
    config.save(&dir.join("config.toml"))?;
    let mut manifest = Manifest::new(config, summary.seeds.clone());
    manifest.add(dir, "config.toml")?;
    for (seed, out) in summary.seeds.iter().zip(&runs) {
        let sub = format!("seed_{seed}");
        let mut single = config.clone();
        single.seed = *seed;
        single.seed_count = 1;
        single.seeds = None;
        write_run(&single, out, &dir.join(&sub))?;
        for f in artifact_names(out) {
            manifest.add(dir, &format!("{sub}/{f}"))?;
        }
    }
    let mut csv = String::from("t,mean_jz,stderr_jz\n");
    for i in 0..summary.times.len() {
        csv.push_str(&format!(
            "{:?},{:?},{:?}\n",
            summary.times[i], summary.mean_jz[i], summary.stderr_jz[i]
        ));
    }
    std::fs::write(dir.join("ensemble.csv"), csv)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    manifest.add(dir, "ensemble.csv")?;
    manifest.add(dir, "summary.json")?;
    manifest.write(dir)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MeasurementRecord;
    use crate::harness::io::read_trajectory_csv;
    use crate::observables::WignerGrid;
    use crate::spinspace::ModelParams;

    fn small_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::new(ModelParams::new(10, 1.0, 1.0), 1.0, 5);
        config.wigner_snapshots = vec![0.5];
        config
    }

    #[test]
    fn run_directory_is_complete_and_reproducible() {
        let root = tempfile::tempdir().unwrap();
        let config = small_config();
        let a = run_experiment(&config, &root.path().join("a")).unwrap();
        let b = run_experiment(&config, &root.path().join("b")).unwrap();
        assert_eq!(a, b);
        assert!(a.verify(&root.path().join("a")).unwrap().is_empty());
        let bytes_a = std::fs::read(root.path().join("a/record.bin")).unwrap();
        let bytes_b = std::fs::read(root.path().join("b/record.bin")).unwrap();
        assert_eq!(bytes_a, bytes_b);

        let dir = root.path().join("a");
        let csv = MeasurementRecord::read_csv(&dir.join("record.csv")).unwrap();
        let bin = MeasurementRecord::read_binary(&dir.join("record.bin")).unwrap();
        assert_eq!(csv, bin);
        let log = read_trajectory_csv(&dir.join("trajectory.csv")).unwrap();
        assert_eq!(log.len(), 101);
        let w = WignerGrid::read_binary(&dir.join(format!("{}.json", wigner_stem("conditioned", 0.5)))).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-8);
        assert_eq!(ExperimentConfig::load(&dir.join("config.toml")).unwrap(), config);
    }

    #[test]
    fn tampering_is_detected() {
        let root = tempfile::tempdir().unwrap();
        let manifest = run_experiment(&small_config(), root.path()).unwrap();
        std::fs::write(root.path().join("record.csv"), "x").unwrap();
        assert_eq!(manifest.verify(root.path()).unwrap(), vec!["record.csv".to_string()]);
    }

    #[test]
    fn ensemble_needs_distinct_seeds() {
        let mut config = small_config();
        config.seeds = Some(vec![1, 1]);
        config.seed_count = 2;
        assert!(simulate_ensemble(&config).is_err());
        config.seeds = None;
        config.seed_count = 1;
        assert!(simulate_ensemble(&config).is_err());
    }

    #[test]
    fn ensemble_is_seed_ordered_and_deterministic() {
        let root = tempfile::tempdir().unwrap();
        let mut config = small_config();
        config.seed_count = 4;
        let summary = run_ensemble(&config, root.path()).unwrap();
        assert_eq!(summary.seeds, vec![5, 6, 7, 8]);
        let again = simulate_ensemble(&config).unwrap().0;
        assert_eq!(summary.mean_jz, again.mean_jz);
        let single = simulate(&config, 7).unwrap();
        assert_eq!(summary.logs[2], single.log);
        assert!(summary.averaged_state.is_some());
        assert!(root.path().join("seed_8/record.bin").exists());
        let manifest = Manifest::load(root.path()).unwrap();
        assert!(manifest.verify(root.path()).unwrap().is_empty());
    }

    #[test]
    fn settled_time_semantics() {
        let log = TrajectoryLog {
            n_particles: 1,
            times: vec![0.0, 1.0, 2.0, 3.0],
            conditioned: Default::default(),
            estimate: None,
            fidelity: Some(vec![0.5, 0.995, 0.98, 0.999]),
            norm_drift: vec![0.0; 4],
        };
        assert_eq!(first_crossing(&log, 0.99), Some(1.0));
        assert_eq!(settled_from(&log, 0.99), Some(3.0));
        let mut never = log.clone();
        never.fidelity = Some(vec![0.5, 0.995, 0.98, 0.9]);
        assert_eq!(settled_from(&never, 0.99), None);
    }
}
