//! Flat plot-ready files derived from a finished run directory.
//!
//! Everything goes to `<run>/plot/`:
//!
//! ```text
//! timeseries.csv          t,jz_c,jz_e,fidelity,purity,purity_e
//! bloch_conditioned.csv   t,sx,sy,sz
//! bloch_estimate.csv      t,sx,sy,sz
//! gpe_portrait.csv        trajectory,t,sx,sy,sz
//! wigner_*.csv            theta,phi,value
//! schema.json             column descriptions
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::ExperimentConfig;
use super::experiment::Manifest;
use super::io::read_trajectory_csv;
use crate::dynamics::{gpe_phase_portrait, sphere_lattice, ObservableSeries};
use crate::error::{Error, Result};
use crate::observables::WignerGrid;

/// Lattice of mean-field starting points: rings and points per ring.
pub const PORTRAIT_RINGS: usize = 6;
pub const PORTRAIT_PER_RING: usize = 8;
/// Duration (Rabi periods) and step of each mean-field orbit.
pub const PORTRAIT_T_FINAL: f64 = 2.0;
pub const PORTRAIT_DT: f64 = 1e-3;
pub const PORTRAIT_SAMPLE_EVERY: usize = 10;

pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::load(run_dir)?;
    let stale = manifest.verify(run_dir)?;
    if !stale.is_empty() {
        return Err(Error::IncompleteRun(format!(
            "{}: missing or modified {}",
            run_dir.display(),
            stale.join(", ")
        )));
    }
    let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let log = read_trajectory_csv(&run_dir.join("trajectory.csv"))?;
    let out_dir = run_dir.join("plot");
    std::fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    let half_n = log.n_particles as f64 / 2.0;

    let mut ts = String::from("t,jz_c,jz_e,fidelity,purity,purity_e\n");
    for i in 0..log.len() {
        let (jz_e, fid, p_e) = match (&log.estimate, &log.fidelity) {
            (Some(e), Some(f)) => (num(e.jz[i]), num(f[i]), num(e.purity[i])),
            _ => (String::new(), String::new(), String::new()),
        };
        writeln!(
            ts,
            "{:?},{:?},{jz_e},{fid},{:?},{p_e}",
            log.times[i], log.conditioned.jz[i], log.conditioned.purity[i]
        )
        .expect("write to string");
    }
    written.push(write(&out_dir, "timeseries.csv", &ts)?);

    let bloch = |series: &ObservableSeries| {
        let mut s = String::from("t,sx,sy,sz\n");
        for i in 0..log.len() {
            writeln!(
                s,
                "{:?},{:?},{:?},{:?}",
                log.times[i],
                series.jx[i] / half_n,
                series.jy[i] / half_n,
                series.jz[i] / half_n
            )
            .expect("write to string");
        }
        s
    };
    written.push(write(&out_dir, "bloch_conditioned.csv", &bloch(&log.conditioned))?);
    if let Some(e) = &log.estimate {
        written.push(write(&out_dir, "bloch_estimate.csv", &bloch(e))?);
    }

    let starts = sphere_lattice(PORTRAIT_RINGS, PORTRAIT_PER_RING);
    let portrait = gpe_phase_portrait(
        config.model.interaction_u,
        &starts,
        PORTRAIT_T_FINAL,
        PORTRAIT_DT,
        PORTRAIT_SAMPLE_EVERY,
    )?;
    let mut gpe = String::from("trajectory,t,sx,sy,sz\n");
    for (k, traj) in portrait.iter().enumerate() {
        for (t, s) in traj.times.iter().zip(&traj.points) {
            writeln!(gpe, "{k},{t:?},{:?},{:?},{:?}", s.sx, s.sy, s.sz).expect("write to string");
        }
    }
    written.push(write(&out_dir, "gpe_portrait.csv", &gpe)?);

    for entry in &manifest.files {
        if let Some(stem) = entry.path.strip_prefix("wigner/").and_then(|p| p.strip_suffix(".json")) {
            let grid = WignerGrid::read_binary(&run_dir.join(&entry.path))?;
            let path = out_dir.join(format!("wigner_{stem}.csv"));
            grid.write_csv(&path)?;
            written.push(path);
        }
    }

    let schema = json!({
        "time_unit": "Rabi periods 2*pi/K",
        "timeseries.csv": {
            "t": "time",
            "jz_c": "<J_z> of the conditioned state",
            "jz_e": "<J_z> of the estimate (empty without estimator)",
            "fidelity": "|<psi_c|psi_e>|^2 (empty without estimator)",
            "purity": "one-body purity of the conditioned state",
            "purity_e": "one-body purity of the estimate (empty without estimator)"
        },
        "bloch_conditioned.csv": {"t": "time", "sx": "2<J_x>/N", "sy": "2<J_y>/N", "sz": "2<J_z>/N"},
        "bloch_estimate.csv": {"t": "time", "sx": "2<J_x>/N", "sy": "2<J_y>/N", "sz": "2<J_z>/N"},
        "gpe_portrait.csv": {
            "trajectory": "orbit index",
            "t": "time",
            "sx": "mean-field Bloch vector",
            "sy": "mean-field Bloch vector",
            "sz": "mean-field Bloch vector",
            "u": config.model.interaction_u
        },
        "wigner_*.csv": {"theta": "polar angle (rad)", "phi": "azimuth (rad)", "value": "Wigner function, unit sphere integral"}
    });
    let text = serde_json::to_string_pretty(&schema).map_err(|e| Error::Config(e.to_string()))?;
    written.push(write(&out_dir, "schema.json", &(text + "\n"))?);
    Ok(written)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::run_experiment;
    use crate::spinspace::ModelParams;

    fn run(dir: &Path, snapshots: Vec<f64>, u: f64) {
        let mut config = ExperimentConfig::new(ModelParams::new(10, u, 1.0), 0.5, 2);
        config.wigner_snapshots = snapshots;
        run_experiment(&config, dir).unwrap();
    }

    #[test]
    fn timeseries_schema() {
        let dir = tempfile::tempdir().unwrap();
        run(dir.path(), vec![0.25], 0.0);
        let files = emit_plot_data(dir.path()).unwrap();
        let ts = std::fs::read_to_string(dir.path().join("plot/timeseries.csv")).unwrap();
        assert!(ts.starts_with("t,jz_c,jz_e,fidelity,purity,"));
        assert_eq!(ts.lines().count(), 52);
        assert!(files.iter().any(|f| f.ends_with("wigner_conditioned_t0.250.csv")));
        assert!(dir.path().join("plot/schema.json").exists());
    }

    #[test]
    fn linear_portrait_polylines_stay_on_sphere() {
        let dir = tempfile::tempdir().unwrap();
        run(dir.path(), vec![], 0.0);
        emit_plot_data(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("plot/gpe_portrait.csv")).unwrap();
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            let r = (v[2] * v[2] + v[3] * v[3] + v[4] * v[4]).sqrt();
            assert!((r - 1.0).abs() < 1e-8);
        }
        let wigner: Vec<_> = std::fs::read_dir(dir.path().join("plot"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("wigner"))
            .collect();
        assert!(wigner.is_empty());
    }

    #[test]
    fn incomplete_runs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plot_data(dir.path()), Err(Error::IncompleteRun(_))));
        run(dir.path(), vec![], 1.0);
        std::fs::remove_file(dir.path().join("trajectory.csv")).unwrap();
        assert!(matches!(emit_plot_data(dir.path()), Err(Error::IncompleteRun(_))));
    }
}
