//! State diagnostics: expectation values, variances, Bloch vector, one-body
//! purity, fidelity and the spin Wigner function.

pub mod clebsch;
pub mod wigner;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spinspace::{check_dim, Operator, QuantumState, SpinOperators};

pub use wigner::{wigner_function, wigner_function_mixed, GridSpec, WignerGrid, WIGNER_FORMAT_VERSION};

/// Single-particle Bloch vector `s = (2/N) <J>`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochState {
    pub const fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Self { sx, sy, sz }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }
}

/// `<psi|A|psi>`; the imaginary residue left by round-off is dropped.
pub fn expectation(state: &QuantumState, op: &Operator) -> Result<f64> {
    check_dim(op.ncols(), state.dim())?;
    check_dim(op.nrows(), state.dim())?;
    Ok(state.amplitudes().dotc(&(op * state.amplitudes())).re)
}

/// `<A^2> - <A>^2`, clamped at zero.
pub fn variance(state: &QuantumState, op: &Operator) -> Result<f64> {
    check_dim(op.ncols(), state.dim())?;
    check_dim(op.nrows(), state.dim())?;
    let a_psi = op * state.amplitudes();
    let mean = state.amplitudes().dotc(&a_psi).re;
    let second = a_psi.norm_squared();
    Ok((second - mean * mean).max(0.0))
}

pub fn bloch_vector(state: &QuantumState, ops: &SpinOperators) -> Result<BlochState> {
    let moments = spin_moments(state.amplitudes(), ops)?;
    Ok(moments.bloch())
}

/// `p = (1 + |s|^2) / 2`.
pub fn one_body_purity(state: &QuantumState, ops: &SpinOperators) -> Result<f64> {
    Ok(purity_from_bloch(&bloch_vector(state, ops)?))
}

pub fn purity_from_bloch(s: &BlochState) -> f64 {
    0.5 * (1.0 + s.norm_sq())
}

/// `F = |<a|b>|^2`.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// First and second moments of the three spin components.
///
/// Computed straight from the ladder structure, so it costs `O(N)` and is
/// what the integrators use for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpinMoments {
    pub n_particles: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub var_jx: f64,
    pub var_jy: f64,
    pub var_jz: f64,
}

impl SpinMoments {
    pub fn bloch(&self) -> BlochState {
        let scale = 2.0 / self.n_particles as f64;
        BlochState::new(scale * self.jx, scale * self.jy, scale * self.jz)
    }

    pub fn purity(&self) -> f64 {
        purity_from_bloch(&self.bloch())
    }
}

pub fn spin_moments(amps: &DVector<Complex64>, ops: &SpinOperators) -> Result<SpinMoments> {
    check_dim(ops.dim(), amps.len())?;
    let n = ops.n_particles();
    let j = ops.j();
    let mut jz = 0.0;
    let mut jz2 = 0.0;
    // <J+> and <J+^2>
    let mut jp = Complex64::new(0.0, 0.0);
    let mut jp2 = Complex64::new(0.0, 0.0);
    let mut jpjm = 0.0; // <J+ J->
    let ladder: Vec<f64> = (0..n).map(|i| ops.jplus[(i + 1, i)].re).collect();
    for i in 0..=n {
        let p = amps[i].norm_sqr();
        let m = i as f64 - j;
        jz += p * m;
        jz2 += p * m * m;
        if i > 0 {
            jpjm += p * ladder[i - 1] * ladder[i - 1];
        }
        if i < n {
            jp += amps[i + 1].conj() * amps[i] * ladder[i];
        }
        if i + 1 < n {
            jp2 += amps[i + 2].conj() * amps[i] * ladder[i] * ladder[i + 1];
        }
    }
    // J-J+ = J^2 - Jz^2 - Jz, J+J- = J^2 - Jz^2 + Jz
    let jmjp = jpjm - 2.0 * jz;
    let jx = jp.re;
    let jy = jp.im;
    // Jx^2 = (J+^2 + J-^2 + J+J- + J-J+)/4, Jy^2 = -(J+^2 + J-^2 - J+J- - J-J+)/4
    let jx2 = 0.5 * jp2.re + 0.25 * (jpjm + jmjp);
    let jy2 = -0.5 * jp2.re + 0.25 * (jpjm + jmjp);
    Ok(SpinMoments {
        n_particles: n,
        jx,
        jy,
        jz,
        var_jx: (jx2 - jx * jx).max(0.0),
        var_jy: (jy2 - jy * jy).max(0.0),
        var_jz: (jz2 - jz * jz).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::{
        angular_momentum_operators, coherent_state, fock_state, maximally_uncertain_estimate,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cat_state(n: usize) -> QuantumState {
        let j = n as f64 / 2.0;
        let a = fock_state(n, j).unwrap().into_amplitudes();
        let b = fock_state(n, -j).unwrap().into_amplitudes();
        QuantumState::from_amplitudes(a + b).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> QuantumState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        QuantumState::from_vec(
            (0..=n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn expectation_on_pole_and_cat() {
        let ops = angular_momentum_operators(100).unwrap();
        let north = fock_state(100, 50.0).unwrap();
        assert_eq!(expectation(&north, &ops.jz).unwrap(), 50.0);
        assert_eq!(expectation(&north, &ops.jx).unwrap(), 0.0);
        assert_abs_diff_eq!(expectation(&cat_state(100), &ops.jz).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let ops = angular_momentum_operators(4).unwrap();
        assert!(expectation(&fock_state(5, 0.5).unwrap(), &ops.jz).is_err());
        assert!(variance(&fock_state(5, 0.5).unwrap(), &ops.jz).is_err());
    }

    #[test]
    fn variances_of_reference_states() {
        let ops = angular_momentum_operators(100).unwrap();
        let north = fock_state(100, 50.0).unwrap();
        assert_eq!(variance(&north, &ops.jz).unwrap(), 0.0);

        // brute force <Jx^2> on the pole state: only <j|J- J+ + J+ J-|j>/4 survives
        let j: f64 = 50.0;
        let lower = crate::spinspace::ladder_element(j, j - 1.0);
        assert_abs_diff_eq!(lower * lower / 4.0, j / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(variance(&north, &ops.jx).unwrap(), j / 2.0, epsilon = 1e-10);

        let flat = maximally_uncertain_estimate(100, 5).unwrap();
        let ms: Vec<f64> = (0..=100).map(|i| i as f64 - 50.0).collect();
        let mean = ms.iter().sum::<f64>() / 101.0;
        let want = ms.iter().map(|m| m * m).sum::<f64>() / 101.0 - mean * mean;
        assert_abs_diff_eq!(variance(&flat, &ops.jz).unwrap(), want, epsilon = 1e-9);
    }

    #[test]
    fn bloch_vectors() {
        let ops = angular_momentum_operators(100).unwrap();
        let s = bloch_vector(&fock_state(100, 50.0).unwrap(), &ops).unwrap();
        assert_eq!(s.as_array(), [0.0, 0.0, 1.0]);
        let s = bloch_vector(&coherent_state(100, PI / 2.0, PI / 2.0).unwrap(), &ops).unwrap();
        assert_abs_diff_eq!(s.sx, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.sy, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.sz, 0.0, epsilon = 1e-10);
        let s = bloch_vector(&cat_state(100), &ops).unwrap();
        assert_abs_diff_eq!(s.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one_body_purity(&cat_state(100), &ops).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn coherent_states_have_unit_purity() {
        let ops = angular_momentum_operators(100).unwrap();
        for (t, p) in [(0.3, 0.1), (1.2, -2.0), (2.9, 4.0), (PI / 2.0, 0.0)] {
            let state = coherent_state(100, t, p).unwrap();
            assert_abs_diff_eq!(one_body_purity(&state, &ops).unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fidelity_reference_values() {
        let n = 100;
        let north = fock_state(n, 50.0).unwrap();
        let south = fock_state(n, -50.0).unwrap();
        assert_eq!(fidelity(&north, &north).unwrap(), 1.0);
        assert_eq!(fidelity(&north, &south).unwrap(), 0.0);
        for theta in [0.05, 0.2, 0.5, 1.0] {
            let c = coherent_state(n, theta, 0.7).unwrap();
            let want = (theta / 2.0).cos().powi(2 * n as i32);
            // direct summation: only the m = j amplitude overlaps
            let direct = c.amplitudes()[n].norm_sqr();
            assert_abs_diff_eq!(direct, want, epsilon = 1e-12);
            assert_abs_diff_eq!(fidelity(&north, &c).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn fidelity_is_bounded_and_symmetric() {
        for seed in 0..100 {
            let a = random_state(12, 2 * seed);
            let b = random_state(12, 2 * seed + 1);
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            assert!((0.0..=1.0).contains(&fab));
            assert_abs_diff_eq!(fab, fba, epsilon = 1e-15);
        }
    }

    #[test]
    fn purity_matches_bloch_formula_for_random_states() {
        let ops = angular_momentum_operators(9).unwrap();
        for seed in 0..20 {
            let state = random_state(9, seed);
            let s = bloch_vector(&state, &ops).unwrap();
            assert_eq!(
                one_body_purity(&state, &ops).unwrap(),
                0.5 * (1.0 + s.norm_sq())
            );
            assert!(s.norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn spin_moments_match_dense_operators() {
        let ops = angular_momentum_operators(15).unwrap();
        for seed in 0..10 {
            let state = random_state(15, seed);
            let m = spin_moments(state.amplitudes(), &ops).unwrap();
            assert_abs_diff_eq!(m.jx, expectation(&state, &ops.jx).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.jy, expectation(&state, &ops.jy).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.jz, expectation(&state, &ops.jz).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.var_jx, variance(&state, &ops.jx).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(m.var_jy, variance(&state, &ops.jy).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(m.var_jz, variance(&state, &ops.jz).unwrap(), epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn fidelity_ignores_global_phase(seed in 0u64..1000, phase in 0.0f64..6.3) {
            let a = random_state(8, seed);
            let b = random_state(8, seed + 1000);
            let rotated = QuantumState::from_amplitudes(
                b.amplitudes() * Complex64::from_polar(1.0, phase),
            ).unwrap();
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = fidelity(&a, &rotated).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-13);
        }
    }
}
