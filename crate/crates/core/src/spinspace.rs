//! Hilbert space of `N` bosons in two modes, written in the Dicke basis.
//!
//! Basis vectors `|m>` are ordered by ascending `m = -j, ..., j` with `j = N/2`
//! and `m = n_1 - N/2`, so index `i` holds `m = i - j`. The state `|+j>` has all
//! bosons in the first well (North pole of the Bloch sphere).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

/// Dense complex operator on the `(N+1)`-dimensional Dicke space.
pub type Operator = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default coefficient of the `n_1` bias term, in units of `K`.
pub const DEFAULT_BIAS_EPSILON: f64 = 1e-2;

/// Angular momentum matrices `J_x, J_y, J_z, J_z^2, J_+` for spin `j = N/2`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    n_particles: usize,
    pub jx: Operator,
    pub jy: Operator,
    pub jz: Operator,
    pub jz_sq: Operator,
    pub jplus: Operator,
}

impl SpinOperators {
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    pub fn j(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    pub fn jminus(&self) -> Operator {
        self.jplus.adjoint()
    }

    /// Diagonal of `J_z`, i.e. the `m` values in basis order.
    pub fn m_values(&self) -> Vec<f64> {
        m_values(self.n_particles)
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim(), self.dim())
    }
}

/// The `m` values `-j, ..., j` in basis order.
pub fn m_values(n_particles: usize) -> Vec<f64> {
    let j = n_particles as f64 / 2.0;
    (0..=n_particles).map(|i| i as f64 - j).collect()
}

/// `<m+1| J_+ |m> = sqrt(j(j+1) - m(m+1))`.
pub fn ladder_element(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn angular_momentum_operators(n_particles: usize) -> Result<SpinOperators> {
    if n_particles < 1 {
        return Err(Error::InvalidParameter(
            "the particle number must be at least 1".into(),
        ));
    }
    let dim = n_particles + 1;
    let j = n_particles as f64 / 2.0;
    let ms = m_values(n_particles);

    let jz = Operator::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(ms[r], 0.0)
        } else {
            ZERO
        }
    });
    let jz_sq = Operator::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(ms[r] * ms[r], 0.0)
        } else {
            ZERO
        }
    });
    let jplus = Operator::from_fn(dim, dim, |r, c| {
        if r == c + 1 {
            Complex64::new(ladder_element(j, ms[c]), 0.0)
        } else {
            ZERO
        }
    });
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus).map(|z| z * 0.5);
    let jy = (&jplus - &jminus).map(|z| z * Complex64::new(0.0, -0.5));

    Ok(SpinOperators {
        n_particles,
        jx,
        jy,
        jz,
        jz_sq,
        jplus,
    })
}

/// Parameters of the two-mode Bose-Hubbard model under homodyne monitoring.
///
/// `interaction_u = U N / K` and `gamma_bar = gamma N / K` are the dimensionless
/// controls; `tunneling_k` sets the time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_particles: usize,
    pub interaction_u: f64,
    pub tunneling_k: f64,
    pub gamma_bar: f64,
    #[serde(default = "default_bias")]
    pub bias_epsilon: f64,
}

fn default_bias() -> f64 {
    DEFAULT_BIAS_EPSILON
}

impl ModelParams {
    pub fn new(n_particles: usize, interaction_u: f64, gamma_bar: f64) -> Self {
        Self {
            n_particles,
            interaction_u,
            tunneling_k: 1.0,
            gamma_bar,
            bias_epsilon: DEFAULT_BIAS_EPSILON,
        }
    }

    pub fn with_bias(mut self, bias_epsilon: f64) -> Self {
        self.bias_epsilon = bias_epsilon;
        self
    }

    pub fn with_tunneling(mut self, tunneling_k: f64) -> Self {
        self.tunneling_k = tunneling_k;
        self
    }

    /// On-site interaction `U = u K / N`.
    pub fn interaction(&self) -> f64 {
        self.interaction_u * self.tunneling_k / self.n_particles as f64
    }

    /// Measurement strength `gamma = gamma_bar K / N`.
    pub fn gamma(&self) -> f64 {
        self.gamma_bar * self.tunneling_k / self.n_particles as f64
    }

    /// Rabi period `t_R = 2 pi / K`.
    pub fn rabi_period(&self) -> f64 {
        2.0 * PI / self.tunneling_k
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1 {
            return Err(Error::InvalidParameter("n_particles must be >= 1".into()));
        }
        for (name, value) in [
            ("interaction_u", self.interaction_u),
            ("tunneling_k", self.tunneling_k),
            ("gamma_bar", self.gamma_bar),
            ("bias_epsilon", self.bias_epsilon),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the exact bit patterns of every parameter.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_particles as u64).to_le_bytes());
        for v in [
            self.interaction_u,
            self.tunneling_k,
            self.gamma_bar,
            self.bias_epsilon,
        ] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// `H = U J_z^2 - K J_x + eps K n_1` with `n_1 = J_z + N/2`.
pub fn build_hamiltonian(params: &ModelParams, ops: &SpinOperators) -> Result<Operator> {
    if ops.n_particles() != params.n_particles {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: ops.dim(),
        });
    }
    let u = params.interaction();
    let k = params.tunneling_k;
    let bias = params.bias_epsilon * k;
    let half_n = params.n_particles as f64 / 2.0;
    let dim = ops.dim();
    Ok(Operator::from_fn(dim, dim, |r, c| {
        let mut h = -k * ops.jx[(r, c)];
        if r == c {
            let m = ops.jz[(r, r)].re;
            h += Complex64::new(u * m * m + bias * (m + half_n), 0.0);
        }
        h
    }))
}

/// Measurement rate of the dispersive cavity readout, `64 chi^2 eps^2 / Gamma^3`.
pub fn cavity_gamma(chi: f64, epsilon_pump: f64, cavity_damping: f64) -> Result<f64> {
    if !(cavity_damping > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cavity damping must be positive, got {cavity_damping}"
        )));
    }
    Ok(64.0 * chi * chi * epsilon_pump * epsilon_pump / cavity_damping.powi(3))
}

/// Normalized pure state over the Dicke basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidParameter(
                "a state needs at least two amplitudes".into(),
            ));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite { step: 0 });
        }
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_vec(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_amplitudes(DVector::from_vec(amplitudes))
    }

    /// Wraps amplitudes that are already normalized.
    pub(crate) fn from_normalized(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_particles(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies a matrix and renormalizes.
    pub fn transformed(&self, op: &Operator) -> Result<QuantumState> {
        check_dim(op.ncols(), self.dim())?;
        QuantumState::from_amplitudes(op * &self.amplitudes)
    }

    /// Outer product `|psi><psi|`.
    pub fn projector(&self) -> Operator {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn basis_index(n_particles: usize, m: f64) -> Result<usize> {
    let j = n_particles as f64 / 2.0;
    let shifted = m + j;
    if !(m.abs() <= j) || shifted.fract() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} is not one of -{j}, ..., {j} in integer steps"
        )));
    }
    Ok(shifted as usize)
}

/// Fock state `|n_1 = m + N/2, n_2 = N/2 - m>`.
pub fn fock_state(n_particles: usize, m: f64) -> Result<QuantumState> {
    if n_particles < 1 {
        return Err(Error::InvalidParameter("n_particles must be >= 1".into()));
    }
    let idx = basis_index(n_particles, m)?;
    let mut amps = DVector::from_element(n_particles + 1, ZERO);
    amps[idx] = Complex64::new(1.0, 0.0);
    Ok(QuantumState::from_normalized(amps))
}

/// SU(2) coherent state pointing along `(sin t cos p, sin t sin p, cos t)`.
///
/// Amplitudes are `sqrt(C(N, j+m)) cos(t/2)^(j+m) sin(t/2)^(j-m) e^{i (j-m) p}`,
/// which equals `exp(-i p J_z) exp(-i t J_y) |j>` up to a global phase.
/// Binomial weights are accumulated in log space so large `N` stays finite.
pub fn coherent_state(n_particles: usize, theta: f64, phi: f64) -> Result<QuantumState> {
    if n_particles < 1 {
        return Err(Error::InvalidParameter("n_particles must be >= 1".into()));
    }
    if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "coherent state angles out of range: theta = {theta}, phi = {phi}"
        )));
    }
    let n = n_particles;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let log_binom = log_binomials(n);
    let amps = DVector::from_fn(n + 1, |i, _| {
        // i = j + m up-spins, n - i = j - m down-spins
        let up = i as i32;
        let down = (n - i) as i32;
        let magnitude = if (c == 0.0 && up > 0) || (s == 0.0 && down > 0) {
            0.0
        } else {
            let log_mag = 0.5 * log_binom[i]
                + if up > 0 { up as f64 * c.ln() } else { 0.0 }
                + if down > 0 { down as f64 * s.ln() } else { 0.0 };
            log_mag.exp()
        };
        Complex64::from_polar(magnitude, down as f64 * phi)
    });
    QuantumState::from_amplitudes(amps)
}

fn log_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Equal-weight superposition of all Fock states with seeded uniform phases.
pub fn maximally_uncertain_estimate(n_particles: usize, rng_seed: u64) -> Result<QuantumState> {
    if n_particles < 1 {
        return Err(Error::InvalidParameter("n_particles must be >= 1".into()));
    }
    let mut rng = rng::stream(rng_seed, rng::ESTIMATE_STREAM);
    let magnitude = 1.0 / ((n_particles + 1) as f64).sqrt();
    let amps = DVector::from_fn(n_particles + 1, |_, _| {
        let phase = rng.random_range(0.0..2.0 * PI);
        Complex64::from_polar(magnitude, phase)
    });
    Ok(QuantumState::from_normalized(amps))
}
