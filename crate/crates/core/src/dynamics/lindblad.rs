//! Ensemble-averaged dynamics
//!
//! `d rho / dt = -i [H, rho] + gamma/4 (J_z rho J_z - 1/2 {J_z^2, rho})`,
//! the same as `-gamma/8 [J_z, [J_z, rho]]`. In the `J_z` basis the dissipator
//! acts elementwise, `rho_mm' -> exp(-gamma/8 (m - m')^2 t) rho_mm'`, so a
//! Strang splitting around the exact unitary step is used.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::unitary::{check_hermitian, Propagator};
use crate::error::{Error, Result};
use crate::spinspace::{build_hamiltonian, check_dim, m_values, ModelParams, Operator, QuantumState};

const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite operator over the Dicke basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Operator,
}

impl DensityMatrix {
    pub fn new(matrix: Operator) -> Result<Self> {
        check_dim(matrix.nrows(), matrix.ncols())?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        check_hermitian(&matrix)?;
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceDrift(trace - 1.0));
        }
        let lowest = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if lowest < -PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {lowest:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(state: &QuantumState) -> Self {
        Self {
            matrix: state.projector(),
        }
    }

    /// Equal-weight mixture of pure states.
    pub fn mixture(states: &[QuantumState]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let dim = first.dim();
        let mut sum = Operator::zeros(dim, dim);
        for s in states {
            check_dim(dim, s.dim())?;
            let a = s.amplitudes();
            sum += a * a.adjoint();
        }
        Ok(Self {
            matrix: sum / Complex64::new(states.len() as f64, 0.0),
        })
    }

    pub(crate) fn from_matrix_unchecked(matrix: Operator) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn into_matrix(self) -> Operator {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        check_dim(self.dim(), op.nrows())?;
        Ok((&self.matrix * op).trace().re)
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }
}

/// `1/2 sum |lambda_i|` over the eigenvalues of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let diff = &a.matrix - &b.matrix;
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

/// Fixed-step Strang integrator: half dissipator, full unitary, half dissipator.
#[derive(Debug, Clone)]
pub struct LindbladSolver {
    dt: f64,
    unitary: Operator,
    half_damping: Operator,
}

impl LindbladSolver {
    pub fn new(h: &Operator, gamma: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        let dim = h.nrows();
        let m = m_values(dim - 1);
        let half_damping = Operator::from_fn(dim, dim, |r, c| {
            let d = m[r] - m[c];
            Complex64::new((-gamma / 8.0 * d * d * 0.5 * dt).exp(), 0.0)
        });
        Ok(Self {
            dt,
            unitary: Propagator::new(h)?.evolution_operator(dt),
            half_damping,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, rho: &mut Operator) {
        rho.component_mul_assign(&self.half_damping);
        *rho = &self.unitary * &*rho * self.unitary.adjoint();
        rho.component_mul_assign(&self.half_damping);
    }

    /// Takes `steps` steps, returning the state after every `sample_every`-th
    /// (the initial state included).
    pub fn evolve(&self, initial: &DensityMatrix, steps: usize, sample_every: usize) -> Result<Vec<DensityMatrix>> {
        check_dim(self.unitary.nrows(), initial.dim())?;
        let sample_every = sample_every.max(1);
        let mut rho = initial.matrix.clone();
        let mut out = vec![initial.clone()];
        for step in 1..=steps {
            self.step(&mut rho);
            if step % sample_every == 0 || step == steps {
                let trace = rho.trace().re;
                if !trace.is_finite() {
                    return Err(Error::NonFinite { step });
                }
                if (trace - 1.0).abs() > TRACE_TOL {
                    return Err(Error::TraceDrift(trace - 1.0));
                }
                if step % sample_every == 0 {
                    out.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
                }
            }
        }
        Ok(out)
    }
}

/// Integrates the master equation up to `t_final` (Rabi periods) with step
/// `dt` (Rabi periods). Returns the state at every step, starting with the
/// initial one.
pub fn lindblad_solve(initial: &DensityMatrix, params: &ModelParams, t_final: f64, dt: f64) -> Result<Vec<DensityMatrix>> {
    let (solver, steps) = solver_for(params, t_final, dt)?;
    solver.evolve(initial, steps, 1)
}

/// As [`lindblad_solve`] but keeping only every `sample_every`-th state.
pub fn lindblad_solve_sampled(
    initial: &DensityMatrix,
    params: &ModelParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<DensityMatrix>> {
    let (solver, steps) = solver_for(params, t_final, dt)?;
    solver.evolve(initial, steps, sample_every)
}

fn solver_for(params: &ModelParams, t_final: f64, dt: f64) -> Result<(LindbladSolver, usize)> {
    params.validate()?;
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need t_final >= 0 and dt > 0, got {t_final} and {dt}"
        )));
    }
    let ops = crate::spinspace::angular_momentum_operators(params.n_particles)?;
    let h = build_hamiltonian(params, &ops)?;
    let t_r = params.rabi_period();
    let steps = (t_final / dt).round() as usize;
    Ok((LindbladSolver::new(&h, params.gamma(), dt * t_r)?, steps))
}
