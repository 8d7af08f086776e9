//! CSV form of trajectory logs and small file helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dynamics::{ObservableSeries, TrajectoryLog};
use crate::error::{Error, Result};

const SERIES_COLUMNS: [&str; 7] = ["jx", "jy", "jz", "var_jx", "var_jy", "var_jz", "purity"];

fn series_columns(series: &ObservableSeries) -> [&Vec<f64>; 7] {
    [
        &series.jx,
        &series.jy,
        &series.jz,
        &series.var_jx,
        &series.var_jy,
        &series.var_jz,
        &series.purity,
    ]
}

/// Header line for a log, estimator columns included when present.
pub fn trajectory_header(with_estimate: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(SERIES_COLUMNS.iter().map(|c| format!("{c}_c")));
    if with_estimate {
        cols.extend(SERIES_COLUMNS.iter().map(|c| format!("{c}_e")));
        cols.push("fidelity".into());
    }
    cols.push("norm_drift".into());
    cols
}

/// `# n_particles=N` followed by the header and one row per sample.
pub fn write_trajectory_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# n_particles={}", log.n_particles)?;
    writeln!(out, "{}", trajectory_header(log.estimate.is_some()).join(","))?;
    let cond = series_columns(&log.conditioned);
    let est = log.estimate.as_ref().map(series_columns);
    for i in 0..log.len() {
        write!(out, "{:?}", log.times[i])?;
        for col in cond {
            write!(out, ",{:?}", col[i])?;
        }
        if let (Some(est), Some(fid)) = (est, log.fidelity.as_ref()) {
            for col in est {
                write!(out, ",{:?}", col[i])?;
            }
            write!(out, ",{:?}", fid[i])?;
        }
        writeln!(out, ",{:?}", log.norm_drift[i])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryLog> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| Error::format(path, "empty file"))??;
    let n_particles = first
        .strip_prefix("# n_particles=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::format(path, "missing n_particles line"))?;
    let header = lines.next().ok_or_else(|| Error::format(path, "missing header"))??;
    let cols: Vec<&str> = header.split(',').collect();
    let with_estimate = if cols == trajectory_header(true) {
        true
    } else if cols == trajectory_header(false) {
        false
    } else {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    };
    let width = cols.len();
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); width];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::format(path, format!("row {} has {} fields", lineno + 1, fields.len())));
        }
        for (col, field) in table.iter_mut().zip(fields) {
            col.push(
                field
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad number {field:?}")))?,
            );
        }
    }
    let mut it = table.into_iter();
    let take_series = |it: &mut std::vec::IntoIter<Vec<f64>>| ObservableSeries {
        jx: it.next().unwrap_or_default(),
        jy: it.next().unwrap_or_default(),
        jz: it.next().unwrap_or_default(),
        var_jx: it.next().unwrap_or_default(),
        var_jy: it.next().unwrap_or_default(),
        var_jz: it.next().unwrap_or_default(),
        purity: it.next().unwrap_or_default(),
    };
    let times = it.next().unwrap_or_default();
    let conditioned = take_series(&mut it);
    let (estimate, fidelity) = if with_estimate {
        let e = take_series(&mut it);
        (Some(e), it.next())
    } else {
        (None, None)
    };
    let norm_drift = it.next().unwrap_or_default();
    Ok(TrajectoryLog {
        n_particles,
        times,
        conditioned,
        estimate,
        fidelity,
        norm_drift,
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
