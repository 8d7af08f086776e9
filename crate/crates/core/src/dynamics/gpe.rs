//! Mean-field dynamics of the single-particle Bloch vector, time in units of `1/K`:
//!
//! `s_x' = -u s_y s_z`, `s_y' = s_z + u s_x s_z`, `s_z' = -s_y`.
//!
//! Both `|s|` and `E = u/2 s_z^2 - s_x` are constants of motion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observables::BlochState;

/// Largest tolerated `||s| - 1|` for trajectory starting points.
pub const UNIT_SPHERE_TOL: f64 = 1e-6;

pub fn gpe_rhs(s: &BlochState, u: f64) -> BlochState {
    BlochState::new(-u * s.sy * s.sz, s.sz + u * s.sx * s.sz, -s.sy)
}

pub fn gpe_energy(s: &BlochState, u: f64) -> f64 {
    0.5 * u * s.sz * s.sz - s.sx
}

fn axpy(s: &BlochState, k: &BlochState, h: f64) -> BlochState {
    BlochState::new(s.sx + h * k.sx, s.sy + h * k.sy, s.sz + h * k.sz)
}

/// One classical fourth-order Runge-Kutta step.
pub fn gpe_step(s: &BlochState, u: f64, dt: f64) -> BlochState {
    let k1 = gpe_rhs(s, u);
    let k2 = gpe_rhs(&axpy(s, &k1, 0.5 * dt), u);
    let k3 = gpe_rhs(&axpy(s, &k2, 0.5 * dt), u);
    let k4 = gpe_rhs(&axpy(s, &k3, dt), u);
    BlochState::new(
        s.sx + dt / 6.0 * (k1.sx + 2.0 * k2.sx + 2.0 * k3.sx + k4.sx),
        s.sy + dt / 6.0 * (k1.sy + 2.0 * k2.sy + 2.0 * k3.sy + k4.sy),
        s.sz + dt / 6.0 * (k1.sz + 2.0 * k2.sz + 2.0 * k3.sz + k4.sz),
    )
}

/// Sampled mean-field trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GpeTrajectory {
    pub u: f64,
    /// Rabi periods.
    pub times: Vec<f64>,
    pub points: Vec<BlochState>,
}

impl GpeTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|s| gpe_energy(s, self.u)).collect()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.points.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = match self.points.first() {
            Some(s) => gpe_energy(s, self.u),
            None => return 0.0,
        };
        self.points
            .iter()
            .map(|s| (gpe_energy(s, self.u) - e0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates from `s0` up to `t_final` with step `dt` (both in Rabi periods,
/// `K = 1`), keeping every `sample_every`-th point.
pub fn gpe_trajectory(s0: BlochState, u: f64, t_final: f64, dt: f64, sample_every: usize) -> Result<GpeTrajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !u.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, t_final >= 0 and finite u, got {dt}, {t_final}, {u}"
        )));
    }
    if (s0.norm() - 1.0).abs() > UNIT_SPHERE_TOL {
        return Err(Error::InvalidParameter(format!(
            "Bloch vector off the unit sphere: |s| = {}",
            s0.norm()
        )));
    }
    let sample_every = sample_every.max(1);
    let steps = (t_final / dt).round() as usize;
    let h = dt * 2.0 * std::f64::consts::PI;
    let mut s = s0;
    let mut times = vec![0.0];
    let mut points = vec![s0];
    for step in 1..=steps {
        s = gpe_step(&s, u, h);
        if step % sample_every == 0 {
            times.push(step as f64 * dt);
            points.push(s);
        }
    }
    Ok(GpeTrajectory { u, times, points })
}

/// Trajectories from every starting point, computed in parallel.
pub fn gpe_phase_portrait(
    u: f64,
    initial_conditions: &[BlochState],
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<GpeTrajectory>> {
    initial_conditions
        .par_iter()
        .map(|s0| gpe_trajectory(*s0, u, t_final, dt, sample_every))
        .collect()
}

/// Starting points on a latitude/longitude lattice with `rings` rings of
/// `per_ring` points each, poles excluded.
pub fn sphere_lattice(rings: usize, per_ring: usize) -> Vec<BlochState> {
    let mut out = Vec::with_capacity(rings * per_ring);
    for r in 0..rings {
        let theta = std::f64::consts::PI * (r as f64 + 0.5) / rings as f64;
        for p in 0..per_ring {
            let phi = 2.0 * std::f64::consts::PI * p as f64 / per_ring as f64;
            out.push(BlochState::new(
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn free_rotation_about_x() {
        let mut s = BlochState::new(0.0, 0.0, 1.0);
        for _ in 0..1000 {
            s = gpe_step(&s, 0.0, 1e-3);
        }
        assert_abs_diff_eq!(s.sx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sy, 1f64.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.sz, 1f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn fixed_points_do_not_move() {
        for u in [0.0, 0.5, 1.0, 3.0] {
            for sign in [1.0, -1.0] {
                let s0 = BlochState::new(sign, 0.0, 0.0);
                let traj = gpe_trajectory(s0, u, 5.0, 1e-3, 100).unwrap();
                for s in &traj.points {
                    assert!((s.sx - sign).abs() < 1e-12 && s.sy.abs() < 1e-12 && s.sz.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn energy_rate_vanishes() {
        // dE/dt = u s_z s_z' - s_x' = -u s_z s_y + u s_y s_z = 0
        for &(x, y, z) in &[(0.1, 0.7, 0.2), (-0.4, 0.3, 0.86), (0.0, -1.0, 0.0)] {
            let s = BlochState::new(x, y, z);
            for u in [0.0, 1.0, 2.5] {
                let ds = gpe_rhs(&s, u);
                let de = u * s.sz * ds.sz - ds.sx;
                assert_abs_diff_eq!(de, 0.0, epsilon = 1e-15);
                let dn = s.sx * ds.sx + s.sy * ds.sy + s.sz * ds.sz;
                assert_abs_diff_eq!(dn, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn half_step_reference_agrees() {
        let s0 = BlochState::new(0.0, 0.0, 1.0);
        let coarse = gpe_trajectory(s0, 1.0, 10.0, 1e-3, 1000).unwrap();
        let fine = gpe_trajectory(s0, 1.0, 10.0, 5e-4, 2000).unwrap();
        for (a, b) in coarse.points.iter().zip(&fine.points) {
            assert_abs_diff_eq!(a.sx, b.sx, epsilon = 1e-8);
            assert_abs_diff_eq!(a.sz, b.sz, epsilon = 1e-8);
        }
        assert!(coarse.max_energy_drift() < 1e-8);
    }

    #[test]
    fn portrait_of_empty_set_is_empty() {
        assert!(gpe_phase_portrait(1.0, &[], 1.0, 1e-2, 1).unwrap().is_empty());
    }

    #[test]
    fn rejects_off_sphere_start() {
        assert!(gpe_trajectory(BlochState::new(0.0, 0.0, 1.1), 1.0, 1.0, 1e-3, 1).is_err());
    }

    #[test]
    fn linear_portrait_is_circles_of_constant_sx() {
        let starts = sphere_lattice(5, 6);
        let portrait = gpe_phase_portrait(0.0, &starts, 1.0, 1e-3, 10).unwrap();
        for (traj, s0) in portrait.iter().zip(&starts) {
            for s in &traj.points {
                assert_abs_diff_eq!(s.sx, s0.sx, epsilon = 1e-12);
                assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn invariants_hold_for_random_starts(theta in 0.0..std::f64::consts::PI, phi in 0.0..6.28f64, u in 0.0..2.0f64) {
            let s0 = BlochState::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let traj = gpe_trajectory(s0, u, 3.0, 1e-3, 50).unwrap();
            prop_assert!(traj.max_norm_drift() < 1e-9);
            prop_assert!(traj.max_energy_drift() < 1e-9);
        }
    }
}
