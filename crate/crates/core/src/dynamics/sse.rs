//! One step of the conditioned stochastic Schrodinger equation
//!
//! `d psi = (-i H - gamma/8 (J_z - <J_z>)^2) psi dt
//!          + gamma/2 (J_z - <J_z>) (dI - <J_z> dt) psi`,
//!
//! driven by a record increment `dI`. For the real system
//! `dI = <J_z>_c dt + gamma^{-1/2} dW`; an estimator feeds the recorded `dI`
//! into the same step with its own `<J_z>`.
//!
//! Two schemes are available:
//!
//! * [`SseScheme::SplitExponential`] (default) applies the measurement factor
//!   `exp(gamma/2 d (dI - mu dt) - gamma/4 d^2 dt)`, `d = m - mu`, exactly in the
//!   `J_z` basis (it is the Ito solution of the measurement part for a fixed
//!   increment), then `exp(-i H dt)` from a precomputed eigendecomposition.
//! * [`SseScheme::EulerMaruyama`] applies the increment above literally.
//!
//! Both renormalize after each step. Plain Euler steps inflate every energy
//! component by `|1 - i E dt|`, which at `N = 100` distorts the state faster than
//! renormalization can hide, so it is kept for comparison only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::unitary::Propagator;
use crate::error::{Error, Result};
use crate::spinspace::{build_hamiltonian, check_dim, ModelParams, Operator, QuantumState, SpinOperators};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SseScheme {
    #[default]
    SplitExponential,
    EulerMaruyama,
}

impl SseScheme {
    pub fn name(&self) -> &'static str {
        match self {
            SseScheme::SplitExponential => "split-exponential",
            SseScheme::EulerMaruyama => "euler-maruyama",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "split-exponential" => Some(SseScheme::SplitExponential),
            "euler-maruyama" => Some(SseScheme::EulerMaruyama),
            _ => None,
        }
    }

    pub fn code(&self) -> u32 {
        match self {
            SseScheme::SplitExponential => 0,
            SseScheme::EulerMaruyama => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SseScheme::SplitExponential),
            1 => Some(SseScheme::EulerMaruyama),
            _ => None,
        }
    }
}

/// Fixed-step integrator for one `(H, gamma, dt, scheme)` combination.
#[derive(Debug, Clone)]
pub struct SseIntegrator {
    dim: usize,
    gamma: f64,
    dt: f64,
    scheme: SseScheme,
    m: Vec<f64>,
    /// Row-major `exp(-i H dt)` (split) or `H` (Euler).
    matrix: Vec<Complex64>,
}

impl SseIntegrator {
    pub fn new(h: &Operator, ops: &SpinOperators, gamma: f64, dt: f64, scheme: SseScheme) -> Result<Self> {
        check_dim(ops.dim(), h.nrows())?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        let dim = ops.dim();
        let dense = match scheme {
            SseScheme::SplitExponential => Propagator::new(h)?.evolution_operator(dt),
            SseScheme::EulerMaruyama => {
                super::unitary::check_hermitian(h)?;
                h.clone()
            }
        };
        let matrix = (0..dim * dim).map(|i| dense[(i / dim, i % dim)]).collect();
        Ok(Self {
            dim,
            gamma,
            dt,
            scheme,
            m: ops.m_values(),
            matrix,
        })
    }

    pub fn for_model(params: &ModelParams, ops: &SpinOperators, dt: f64, scheme: SseScheme) -> Result<Self> {
        params.validate()?;
        let h = build_hamiltonian(params, ops)?;
        Self::new(&h, ops, params.gamma(), dt, scheme)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn scheme(&self) -> SseScheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean_jz(&self, psi: &[Complex64]) -> f64 {
        psi.iter().zip(&self.m).map(|(c, m)| c.norm_sqr() * m).sum()
    }

    /// `dI = <J_z> dt + gamma^{-1/2} dW`; without measurement the noise term is dropped.
    pub fn record_increment(&self, psi: &[Complex64], dw: f64) -> f64 {
        let drift = self.mean_jz(psi) * self.dt;
        if self.gamma > 0.0 {
            drift + dw / self.gamma.sqrt()
        } else {
            drift
        }
    }

    /// Advances `psi` in place given the record increment and returns the
    /// squared norm before renormalization.
    pub fn step_with_record(&self, psi: &mut [Complex64], d_i: f64, scratch: &mut Vec<Complex64>) -> Result<f64> {
        debug_assert_eq!(psi.len(), self.dim);
        let mu = self.mean_jz(psi);
        let innovation = d_i - mu * self.dt;
        scratch.clear();
        scratch.resize(self.dim, Complex64::new(0.0, 0.0));
        match self.scheme {
            SseScheme::SplitExponential => {
                if self.gamma > 0.0 {
                    for (c, m) in psi.iter_mut().zip(&self.m) {
                        let d = m - mu;
                        let exponent = 0.5 * self.gamma * d * innovation - 0.25 * self.gamma * d * d * self.dt;
                        *c *= exponent.exp();
                    }
                }
                matvec(&self.matrix, psi, scratch);
            }
            SseScheme::EulerMaruyama => {
                matvec(&self.matrix, psi, scratch);
                let minus_i_dt = Complex64::new(0.0, -self.dt);
                for ((out, c), m) in scratch.iter_mut().zip(psi.iter()).zip(&self.m) {
                    let d = m - mu;
                    let real = 1.0 - 0.125 * self.gamma * d * d * self.dt + 0.5 * self.gamma * d * innovation;
                    *out = *c * real + *out * minus_i_dt;
                }
            }
        }
        let norm_sq: f64 = scratch.iter().map(|c| c.norm_sqr()).sum();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite { step: 0 });
        }
        if norm_sq == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let inv = norm_sq.sqrt().recip();
        for (dst, src) in psi.iter_mut().zip(scratch.iter()) {
            *dst = src * inv;
        }
        Ok(norm_sq)
    }
}

fn matvec(matrix: &[Complex64], x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    for (row, o) in matrix.chunks_exact(n).zip(out.iter_mut()) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (a, b) in row.iter().zip(x) {
            re += a.re * b.re - a.im * b.im;
            im += a.re * b.im + a.im * b.re;
        }
        *o = Complex64::new(re, im);
    }
}

/// One step of the conditioned equation with a caller-supplied Wiener
/// increment. Returns the new state and the record increment `dI`.
///
/// Builds a one-off integrator; use [`SseIntegrator`] for repeated steps.
pub fn sse_step(
    state: &QuantumState,
    h: &Operator,
    ops: &SpinOperators,
    gamma: f64,
    dt: f64,
    dw: f64,
    scheme: SseScheme,
) -> Result<(QuantumState, f64)> {
    check_dim(ops.dim(), state.dim())?;
    let integrator = SseIntegrator::new(h, ops, gamma, dt, scheme)?;
    let mut psi: Vec<Complex64> = state.amplitudes().iter().copied().collect();
    let d_i = integrator.record_increment(&psi, dw);
    let mut scratch = Vec::with_capacity(psi.len());
    integrator.step_with_record(&mut psi, d_i, &mut scratch)?;
    Ok((QuantumState::from_vec(psi)?, d_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::unitary::unitary_propagate;
    use crate::observables::{expectation, fidelity, variance};
    use crate::rng::WienerIncrements;
    use crate::spinspace::{angular_momentum_operators, coherent_state, fock_state};
    use approx::assert_abs_diff_eq;

    fn setup(n: usize, u: f64) -> (SpinOperators, Operator) {
        let ops = angular_momentum_operators(n).unwrap();
        let h = build_hamiltonian(&ModelParams::new(n, u, 0.0), &ops).unwrap();
        (ops, h)
    }

    #[test]
    fn without_measurement_matches_unitary_step() {
        let (ops, h) = setup(20, 1.0);
        let psi = coherent_state(20, 0.8, 0.3).unwrap();
        for scheme in [SseScheme::SplitExponential, SseScheme::EulerMaruyama] {
            let mut errors = Vec::new();
            for dt in [1e-2, 5e-3] {
                let (next, d_i) = sse_step(&psi, &h, &ops, 0.0, dt, 0.0, scheme).unwrap();
                let exact = unitary_propagate(&psi, &h, dt).unwrap();
                let err = (next.amplitudes() - exact.amplitudes()).norm();
                assert_abs_diff_eq!(d_i, expectation(&psi, &ops.jz).unwrap() * dt, epsilon = 1e-14);
                errors.push(err);
            }
            match scheme {
                SseScheme::SplitExponential => assert!(errors[0] < 1e-12),
                // local error O(dt^2): halving dt quarters it
                SseScheme::EulerMaruyama => {
                    let ratio = errors[0] / errors[1];
                    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
                }
            }
        }
    }

    #[test]
    fn pure_measurement_collapses_onto_jz_eigenstate() {
        let n = 10;
        let ops = angular_momentum_operators(n).unwrap();
        let h = Operator::zeros(n + 1, n + 1);
        let gamma = 1.0;
        let dt = 1e-3;
        for scheme in [SseScheme::SplitExponential, SseScheme::EulerMaruyama] {
            let integrator = SseIntegrator::new(&h, &ops, gamma, dt, scheme).unwrap();
            let start = coherent_state(n, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
            let mut psi: Vec<Complex64> = start.amplitudes().iter().copied().collect();
            let mut noise = WienerIncrements::new(5, dt);
            let mut scratch = Vec::new();
            for _ in 0..40_000 {
                let d_i = integrator.record_increment(&psi, noise.next_increment());
                integrator.step_with_record(&mut psi, d_i, &mut scratch).unwrap();
            }
            let state = QuantumState::from_vec(psi).unwrap();
            let var = variance(&state, &ops.jz).unwrap();
            assert!(var < 1e-3, "{scheme:?}: Var(Jz) = {var}");
            let mean = expectation(&state, &ops.jz).unwrap();
            assert_abs_diff_eq!(mean, mean.round(), epsilon = 1e-2);
        }
    }

    #[test]
    fn record_increment_is_unbiased() {
        let (ops, h) = setup(10, 1.0);
        let psi = coherent_state(10, 1.0, 0.0).unwrap();
        let integrator = SseIntegrator::new(&h, &ops, 0.1, 1e-2, SseScheme::SplitExponential).unwrap();
        let amps: Vec<Complex64> = psi.amplitudes().iter().copied().collect();
        let mut noise = WienerIncrements::new(9, 1e-2);
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| integrator.record_increment(&amps, noise.next_increment()))
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws as f64).sqrt();
        let expected = expectation(&psi, &ops.jz).unwrap() * 1e-2;
        assert!((mean - expected).abs() < 4.0 * sd / (draws as f64).sqrt());
        // standard deviation gamma^{-1/2} sqrt(dt)
        assert_abs_diff_eq!(sd, (1e-2f64 / 0.1).sqrt(), epsilon = 0.01);
    }

    #[test]
    fn identical_states_follow_identical_steps() {
        let (ops, h) = setup(30, 1.0);
        let integrator = SseIntegrator::new(&h, &ops, 1.0 / 30.0, 5e-3, SseScheme::SplitExponential).unwrap();
        let start = fock_state(30, 15.0).unwrap();
        let mut truth: Vec<Complex64> = start.amplitudes().iter().copied().collect();
        let mut copy = truth.clone();
        let mut noise = WienerIncrements::new(1, 5e-3);
        let mut scratch = Vec::new();
        for _ in 0..500 {
            let d_i = integrator.record_increment(&truth, noise.next_increment());
            integrator.step_with_record(&mut truth, d_i, &mut scratch).unwrap();
            integrator.step_with_record(&mut copy, d_i, &mut scratch).unwrap();
        }
        assert_eq!(truth, copy);
        let a = QuantumState::from_vec(truth).unwrap();
        let b = QuantumState::from_vec(copy).unwrap();
        assert_eq!(fidelity(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn oversized_euler_step_is_reported() {
        let (ops, h) = setup(100, 1.0);
        let integrator = SseIntegrator::new(&h, &ops, 0.01, 1e3, SseScheme::EulerMaruyama).unwrap();
        let mut psi: Vec<Complex64> = fock_state(100, 50.0).unwrap().amplitudes().iter().copied().collect();
        let mut scratch = Vec::new();
        let mut failed = false;
        for _ in 0..200 {
            if integrator.step_with_record(&mut psi, 1e300, &mut scratch).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (ops, h) = setup(4, 1.0);
        let psi = fock_state(4, 2.0).unwrap();
        assert!(sse_step(&psi, &h, &ops, 0.1, 0.0, 0.0, SseScheme::default()).is_err());
        assert!(sse_step(&psi, &h, &ops, -0.1, 0.1, 0.0, SseScheme::default()).is_err());
        assert!(sse_step(&fock_state(5, 0.5).unwrap(), &h, &ops, 0.1, 0.1, 0.0, SseScheme::default()).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [SseScheme::SplitExponential, SseScheme::EulerMaruyama] {
            assert_eq!(SseScheme::from_name(s.name()), Some(s));
            assert_eq!(SseScheme::from_code(s.code()), Some(s));
        }
    }
}
