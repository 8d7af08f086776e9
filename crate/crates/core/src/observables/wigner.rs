//! Spin Wigner function on the Bloch sphere from the multipole expansion
//!
//! `W(theta, phi) = sqrt((2j+1)/(4 pi)) sum_{k,q} rho_kq Y_kq(theta, phi)`,
//! `rho_kq = Tr(rho T_kq^dagger)`, with the spherical tensors
//! `T_kq = sum (-1)^(j-m') <j m; j -m'|k q> |m><m'|`. The prefactor makes the
//! integral over the unit sphere equal to one.
//!
//! The grid uses Gauss-Legendre nodes in `cos(theta)` and uniform `phi`, which
//! integrates every multipole of rank `<= 2j` exactly once there are at least
//! `2j+1` nodes in each direction.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clebsch::CouplingTable;
use crate::error::{Error, Result};
use crate::spinspace::{check_dim, Operator, QuantumState};

pub const WIGNER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl GridSpec {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self { n_theta, n_phi }
    }

    /// `2j+1` polar nodes and `2(2j+1)` azimuthal nodes.
    pub fn for_particles(n_particles: usize) -> Self {
        Self {
            n_theta: n_particles + 1,
            n_phi: 2 * (n_particles + 1),
        }
    }

    fn check(&self, n_particles: usize) -> Result<()> {
        let need = n_particles + 1;
        if self.n_theta < need {
            return Err(Error::GridTooCoarse(format!(
                "{} polar nodes for 2j+1 = {need}",
                self.n_theta
            )));
        }
        if self.n_phi < need {
            return Err(Error::GridTooCoarse(format!(
                "{} azimuthal nodes for 2j+1 = {need}",
                self.n_phi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub n_particles: usize,
    /// Polar angles, ascending.
    pub theta: Vec<f64>,
    /// Gauss-Legendre weights in `cos(theta)` for each polar node.
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major `theta.len() x phi.len()`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn value(&self, i_theta: usize, i_phi: usize) -> f64 {
        self.values[i_theta * self.n_phi() + i_phi]
    }

    pub fn row(&self, i_theta: usize) -> &[f64] {
        let n = self.n_phi();
        &self.values[i_theta * n..(i_theta + 1) * n]
    }

    /// Quadrature of `W` over the unit sphere.
    pub fn integral(&self) -> f64 {
        let dphi = 2.0 * PI / self.n_phi() as f64;
        (0..self.n_theta())
            .map(|i| self.theta_weights[i] * dphi * self.row(i).iter().sum::<f64>())
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(theta, phi)` of the largest grid value.
    pub fn argmax(&self) -> (f64, f64) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (self.theta[idx / self.n_phi()], self.phi[idx % self.n_phi()])
    }

    /// Number of connected regions where `W >= fraction * max`.
    ///
    /// Neighbours are the eight surrounding cells, `phi` wraps around, and all
    /// cells of the first (last) row touch each other through the pole.
    pub fn count_lobes(&self, fraction: f64) -> usize {
        let (nt, np) = (self.n_theta(), self.n_phi());
        let level = fraction * self.max();
        let above: Vec<bool> = self.values.iter().map(|&v| v >= level).collect();
        let mut label = vec![usize::MAX; above.len()];
        let mut lobes = 0;
        let mut stack = Vec::new();
        for start in 0..above.len() {
            if !above[start] || label[start] != usize::MAX {
                continue;
            }
            label[start] = lobes;
            stack.push(start);
            while let Some(cell) = stack.pop() {
                let (i, j) = (cell / np, cell % np);
                let mut visit = |ni: usize, nj: usize, stack: &mut Vec<usize>| {
                    let idx = ni * np + nj;
                    if above[idx] && label[idx] == usize::MAX {
                        label[idx] = lobes;
                        stack.push(idx);
                    }
                };
                for di in [-1i64, 0, 1] {
                    let ni = i as i64 + di;
                    if ni < 0 || ni >= nt as i64 {
                        continue;
                    }
                    for dj in [-1i64, 0, 1] {
                        let nj = (j as i64 + dj).rem_euclid(np as i64) as usize;
                        visit(ni as usize, nj, &mut stack);
                    }
                }
                if i == 0 || i == nt - 1 {
                    for nj in 0..np {
                        visit(i, nj, &mut stack);
                    }
                }
            }
            lobes += 1;
        }
        lobes
    }

    /// `theta,phi,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "theta,phi,value")?;
        for i in 0..self.n_theta() {
            for j in 0..self.n_phi() {
                writeln!(out, "{},{},{}", self.theta[i], self.phi[j], self.value(i, j))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// JSON header next to a raw little-endian `f64` matrix (row-major).
    pub fn write_binary(&self, header_path: &Path, matrix_path: &Path) -> Result<()> {
        let header = WignerHeader {
            format_version: WIGNER_FORMAT_VERSION,
            n_particles: self.n_particles,
            n_theta: self.n_theta(),
            n_phi: self.n_phi(),
            layout: "row-major theta x phi, little-endian f64".into(),
            matrix_file: matrix_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            theta: self.theta.clone(),
            theta_weights: self.theta_weights.clone(),
            phi: self.phi.clone(),
        };
        let json = serde_json::to_string_pretty(&header)
            .map_err(|e| Error::format(header_path, e.to_string()))?;
        std::fs::write(header_path, json)?;
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(matrix_path, bytes)?;
        Ok(())
    }

    pub fn read_binary(header_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(header_path)?;
        let header: WignerHeader =
            serde_json::from_str(&text).map_err(|e| Error::format(header_path, e.to_string()))?;
        if header.format_version != WIGNER_FORMAT_VERSION {
            return Err(Error::format(
                header_path,
                format!("unsupported format version {}", header.format_version),
            ));
        }
        let matrix_path = header_path.with_file_name(&header.matrix_file);
        let bytes = std::fs::read(&matrix_path)?;
        if bytes.len() != 8 * header.n_theta * header.n_phi {
            return Err(Error::format(&matrix_path, "matrix size does not match header"));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            n_particles: header.n_particles,
            theta: header.theta,
            theta_weights: header.theta_weights,
            phi: header.phi,
            values,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WignerHeader {
    format_version: u32,
    n_particles: usize,
    n_theta: usize,
    n_phi: usize,
    layout: String,
    matrix_file: String,
    theta: Vec<f64>,
    theta_weights: Vec<f64>,
    phi: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes descending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Orthonormal associated Legendre functions with the Condon-Shortley phase,
/// so that `Y_kq(theta, phi) = table[q][k - q] e^{i q phi}` for `q >= 0`.
fn normalized_legendre(l_max: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut table = Vec::with_capacity(l_max + 1);
    let mut diag = (1.0 / (4.0 * PI)).sqrt();
    for q in 0..=l_max {
        if q > 0 {
            let qf = q as f64;
            diag *= -((2.0 * qf + 1.0) / (2.0 * qf)).sqrt() * s;
        }
        let mut col = Vec::with_capacity(l_max - q + 1);
        col.push(diag);
        if q < l_max {
            col.push((2.0 * q as f64 + 3.0).sqrt() * x * diag);
        }
        for k in q + 2..=l_max {
            let (kf, qf) = (k as f64, q as f64);
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
            let b = (((kf - 1.0) * (kf - 1.0) - qf * qf) / (4.0 * (kf - 1.0) * (kf - 1.0) - 1.0)).sqrt();
            let next = a * (x * col[k - q - 1] - b * col[k - q - 2]);
            col.push(next);
        }
        table.push(col);
    }
    table
}

/// Multipole moments `rho_kq = Tr(rho T_kq^dagger)` for `q >= 0`,
/// indexed `[q][k - q]`.
fn multipoles(rho: &Operator, table: &CouplingTable) -> Vec<Vec<Complex64>> {
    let n = table.n_particles();
    let mut out = Vec::with_capacity(n + 1);
    for q in 0..=n {
        let mut row = vec![Complex64::new(0.0, 0.0); n - q + 1];
        for k in q..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            // T_kq has entries at (a, b) with m_a - m_b = q, i.e. a = b + q
            for b in 0..=n - q {
                let a = b + q;
                acc += rho[(a, b)] * table.tensor_element(a, b, k);
            }
            row[k - q] = acc;
        }
        out.push(row);
    }
    out
}

pub fn wigner_function(state: &QuantumState, grid: GridSpec) -> Result<WignerGrid> {
    wigner_function_mixed(&state.projector(), grid)
}

/// Wigner function of a density matrix.
pub fn wigner_function_mixed(rho: &Operator, grid: GridSpec) -> Result<WignerGrid> {
    check_dim(rho.nrows(), rho.ncols())?;
    let n = rho.nrows() - 1;
    if n < 1 {
        return Err(Error::InvalidParameter("empty density matrix".into()));
    }
    grid.check(n)?;
    let table = CouplingTable::new(n);
    let moments = multipoles(rho, &table);
    let scale = ((n as f64 + 1.0) / (4.0 * PI)).sqrt();

    let (xs, weights) = gauss_legendre(grid.n_theta);
    let theta: Vec<f64> = xs.iter().map(|x| x.clamp(-1.0, 1.0).acos()).collect();
    let phi: Vec<f64> = (0..grid.n_phi)
        .map(|l| 2.0 * PI * l as f64 / grid.n_phi as f64)
        .collect();
    let phases: Vec<Vec<Complex64>> = (0..=n)
        .map(|q| phi.iter().map(|p| Complex64::from_polar(1.0, q as f64 * p)).collect())
        .collect();

    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let legendre = normalized_legendre(n, x);
            let azimuthal: Vec<Complex64> = (0..=n)
                .map(|q| {
                    moments[q]
                        .iter()
                        .zip(&legendre[q])
                        .map(|(m, p)| m * p)
                        .sum()
                })
                .collect();
            (0..grid.n_phi)
                .map(|l| {
                    let mut value = azimuthal[0].re;
                    for q in 1..=n {
                        value += 2.0 * (azimuthal[q] * phases[q][l]).re;
                    }
                    scale * value
                })
                .collect()
        })
        .collect();

    Ok(WignerGrid {
        n_particles: n,
        theta,
        theta_weights: weights,
        phi,
        values: rows.into_iter().flatten().collect(),
    })
}
