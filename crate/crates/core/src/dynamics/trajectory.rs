//! Conditioned trajectories, record synthesis and the slaved estimator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::record::MeasurementRecord;
use super::sse::{SseIntegrator, SseScheme};
use crate::error::{Error, Result};
use crate::observables::{spin_moments, SpinMoments};
use crate::rng::WienerIncrements;
use crate::spinspace::{angular_momentum_operators, check_dim, ModelParams, QuantumState, SpinOperators};

/// Default observable cadence in Rabi periods.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1e-2;
/// Default step in Rabi periods.
pub const DEFAULT_DT: f64 = 1e-3;

/// Step, horizon and logging cadence, all in Rabi periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub t_final: f64,
    pub dt: f64,
    pub sample_interval: f64,
    #[serde(default)]
    pub scheme: SseScheme,
}

impl Integration {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            scheme: SseScheme::default(),
        }
    }

    pub fn with_sample_interval(mut self, sample_interval: f64) -> Self {
        self.sample_interval = sample_interval;
        self
    }

    pub fn with_scheme(mut self, scheme: SseScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !(self.dt > 0.0) || self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, t_final], got {}", self.dt)));
        }
        self.sample_every()?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Steps per logged sample; the sampling interval must be a multiple of `dt`.
    pub fn sample_every(&self) -> Result<usize> {
        divides(self.dt, self.sample_interval)
    }
}

fn divides(dt: f64, interval: f64) -> Result<usize> {
    let ratio = interval / dt;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-6 * k {
        return Err(Error::InvalidParameter(format!(
            "sampling interval {interval} is not a multiple of dt {dt}"
        )));
    }
    Ok(k as usize)
}

/// Logged moments of one state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub jz: Vec<f64>,
    pub var_jx: Vec<f64>,
    pub var_jy: Vec<f64>,
    pub var_jz: Vec<f64>,
    pub purity: Vec<f64>,
}

impl ObservableSeries {
    fn with_capacity(n: usize) -> Self {
        Self {
            jx: Vec::with_capacity(n),
            jy: Vec::with_capacity(n),
            jz: Vec::with_capacity(n),
            var_jx: Vec::with_capacity(n),
            var_jy: Vec::with_capacity(n),
            var_jz: Vec::with_capacity(n),
            purity: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, m: &SpinMoments) {
        self.jx.push(m.jx);
        self.jy.push(m.jy);
        self.jz.push(m.jz);
        self.var_jx.push(m.var_jx);
        self.var_jy.push(m.var_jy);
        self.var_jz.push(m.var_jz);
        self.purity.push(m.purity());
    }

    pub fn len(&self) -> usize {
        self.jz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jz.is_empty()
    }
}

/// Observables sampled along a run. `conditioned` holds the state driven by
/// its own noise (or, for a bare replay, the state fed with the record);
/// `estimate` and `fidelity` are present when an estimator was run alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub n_particles: usize,
    /// Rabi periods.
    pub times: Vec<f64>,
    pub conditioned: ObservableSeries,
    pub estimate: Option<ObservableSeries>,
    pub fidelity: Option<Vec<f64>>,
    /// Mean of `|psi|^2 - 1` before renormalization over the steps since the
    /// previous sample (zero at `t = 0`).
    pub norm_drift: Vec<f64>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Indices of samples with `t_start <= t <= t_end`.
    pub fn window(&self, t_start: f64, t_end: f64) -> std::ops::Range<usize> {
        let eps = 1e-9;
        let lo = self.times.partition_point(|&t| t < t_start - eps);
        let hi = self.times.partition_point(|&t| t <= t_end + eps);
        lo..hi.max(lo)
    }
}

/// Conditioned (and estimated) states at a requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Rabi periods.
    pub time: f64,
    pub conditioned: QuantumState,
    pub estimate: Option<QuantumState>,
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub record: MeasurementRecord,
    pub snapshots: Vec<Snapshot>,
    pub final_conditioned: QuantumState,
    pub final_estimate: Option<QuantumState>,
}

/// Reusable setup for runs sharing parameters and stepping.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    integration: Integration,
    ops: SpinOperators,
    integrator: SseIntegrator,
}

impl Simulation {
    pub fn new(params: ModelParams, integration: Integration) -> Result<Self> {
        Self::with_internal_step(params, integration, integration.dt * params.rabi_period())
    }

    fn with_internal_step(params: ModelParams, integration: Integration, dt: f64) -> Result<Self> {
        params.validate()?;
        integration.validate()?;
        let ops = angular_momentum_operators(params.n_particles)?;
        let integrator = SseIntegrator::for_model(&params, &ops, dt, integration.scheme)?;
        Ok(Self {
            params,
            integration,
            ops,
            integrator,
        })
    }

    /// Setup matching the stepping a record was made with.
    pub fn for_record(record: &MeasurementRecord, params: &ModelParams, sample_interval: f64) -> Result<Self> {
        record.check_compatible(params)?;
        let t_r = params.rabi_period();
        let dt = record.dt / t_r;
        let integration = Integration {
            t_final: record.len() as f64 * dt,
            dt,
            sample_interval,
            scheme: record.scheme,
        };
        Self::with_internal_step(*params, integration, record.dt)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn integration(&self) -> &Integration {
        &self.integration
    }

    pub fn ops(&self) -> &SpinOperators {
        &self.ops
    }

    pub fn integrator(&self) -> &SseIntegrator {
        &self.integrator
    }

    /// Conditioned run with noise from `seed`, optionally with an estimator
    /// slaved to the record it generates.
    pub fn run(
        &self,
        initial: &QuantumState,
        estimate: Option<&QuantumState>,
        seed: u64,
        snapshot_times: &[f64],
    ) -> Result<RunOutput> {
        let mut noise = WienerIncrements::new(seed, self.integrator.dt());
        self.drive(initial, estimate, seed, snapshot_times, Source::Noise(&mut noise))
    }

    /// Feeds a stored record into `initial` and, if given, into `estimate`.
    pub fn replay(
        &self,
        initial: &QuantumState,
        estimate: Option<&QuantumState>,
        record: &MeasurementRecord,
        snapshot_times: &[f64],
    ) -> Result<RunOutput> {
        record.check_compatible(&self.params)?;
        if record.scheme != self.integration.scheme
            || record.dt.to_bits() != self.integrator.dt().to_bits()
            || record.len() != self.integration.steps()
        {
            return Err(Error::RecordMismatch(format!(
                "record stepping (dt {}, {} steps, {}) differs from the simulation's (dt {}, {} steps, {})",
                record.dt,
                record.len(),
                record.scheme.name(),
                self.integrator.dt(),
                self.integration.steps(),
                self.integration.scheme.name()
            )));
        }
        self.drive(initial, estimate, record.seed, snapshot_times, Source::Record(&record.increments))
    }

    fn drive(
        &self,
        initial: &QuantumState,
        estimate: Option<&QuantumState>,
        seed: u64,
        snapshot_times: &[f64],
        mut source: Source<'_>,
    ) -> Result<RunOutput> {
        check_dim(self.ops.dim(), initial.dim())?;
        if let Some(e) = estimate {
            check_dim(self.ops.dim(), e.dim())?;
        }
        let steps = self.integration.steps();
        let sample_every = self.integration.sample_every()?;
        let snapshot_steps = self.snapshot_steps(snapshot_times, steps)?;
        let n_samples = steps / sample_every + 1;

        let mut psi: Vec<Complex64> = initial.amplitudes().iter().copied().collect();
        let mut est: Option<Vec<Complex64>> = estimate.map(|e| e.amplitudes().iter().copied().collect());
        let mut scratch = Vec::with_capacity(psi.len());

        let mut times = Vec::with_capacity(n_samples);
        let mut conditioned = ObservableSeries::with_capacity(n_samples);
        let mut estimated = est.as_ref().map(|_| ObservableSeries::with_capacity(n_samples));
        let mut fidelity = est.as_ref().map(|_| Vec::with_capacity(n_samples));
        let mut norm_drift = Vec::with_capacity(n_samples);
        let mut increments = Vec::with_capacity(steps);
        let mut snapshots = Vec::with_capacity(snapshot_steps.len());
        let mut next_snapshot = 0;
        let mut drift_sum = 0.0;

        let dt_r = self.integration.dt;
        let mut log_sample = |step: usize,
                              psi: &[Complex64],
                              est: Option<&Vec<Complex64>>,
                              drift: f64|
         -> Result<()> {
            times.push(step as f64 * dt_r);
            conditioned.push(&self.moments(psi)?);
            if let (Some(series), Some(e)) = (estimated.as_mut(), est) {
                series.push(&self.moments(e)?);
            }
            if let (Some(f), Some(e)) = (fidelity.as_mut(), est) {
                f.push(overlap_sq(psi, e));
            }
            norm_drift.push(drift);
            Ok(())
        };

        log_sample(0, &psi, est.as_ref(), 0.0)?;
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot].1 == 0 {
            snapshots.push(self.snapshot(snapshot_steps[next_snapshot].0, &psi, est.as_ref())?);
            next_snapshot += 1;
        }
        for step in 1..=steps {
            let d_i = match &mut source {
                Source::Noise(noise) => self.integrator.record_increment(&psi, noise.next_increment()),
                Source::Record(incs) => incs[step - 1],
            };
            let norm_sq = self
                .integrator
                .step_with_record(&mut psi, d_i, &mut scratch)
                .map_err(|e| at_step(e, step))?;
            if let Some(e) = est.as_mut() {
                self.integrator
                    .step_with_record(e, d_i, &mut scratch)
                    .map_err(|e| at_step(e, step))?;
            }
            increments.push(d_i);
            drift_sum += norm_sq - 1.0;
            if step % sample_every == 0 {
                log_sample(step, &psi, est.as_ref(), drift_sum / sample_every as f64)?;
                drift_sum = 0.0;
            }
            while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot].1 == step {
                snapshots.push(self.snapshot(snapshot_steps[next_snapshot].0, &psi, est.as_ref())?);
                next_snapshot += 1;
            }
        }

        let log = TrajectoryLog {
            n_particles: self.params.n_particles,
            times,
            conditioned,
            estimate: estimated,
            fidelity,
            norm_drift,
        };
        let record = MeasurementRecord {
            params: self.params,
            dt: self.integrator.dt(),
            seed,
            scheme: self.integration.scheme,
            increments,
        };
        Ok(RunOutput {
            log,
            record,
            snapshots,
            final_conditioned: QuantumState::from_vec(psi)?,
            final_estimate: est.map(QuantumState::from_vec).transpose()?,
        })
    }

    fn moments(&self, psi: &[Complex64]) -> Result<SpinMoments> {
        spin_moments(&nalgebra::DVector::from_column_slice(psi), &self.ops)
    }

    fn snapshot(&self, time: f64, psi: &[Complex64], est: Option<&Vec<Complex64>>) -> Result<Snapshot> {
        Ok(Snapshot {
            time,
            conditioned: QuantumState::from_vec(psi.to_vec())?,
            estimate: est.map(|e| QuantumState::from_vec(e.clone())).transpose()?,
        })
    }

    /// `(requested time, step index)` sorted by step.
    fn snapshot_steps(&self, times: &[f64], steps: usize) -> Result<Vec<(f64, usize)>> {
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= 0.0) || t > self.integration.t_final * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.integration.t_final
                )));
            }
            out.push((t, ((t / self.integration.dt).round() as usize).min(steps)));
        }
        out.sort_by_key(|&(_, s)| s);
        Ok(out)
    }
}

enum Source<'a> {
    Noise(&'a mut WienerIncrements),
    Record(&'a [f64]),
}

fn at_step(err: Error, step: usize) -> Error {
    match err {
        Error::NonFinite { .. } => Error::NonFinite { step },
        other => other,
    }
}

fn overlap_sq(a: &[Complex64], b: &[Complex64]) -> f64 {
    let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    s.norm_sqr().min(1.0)
}

/// Conditioned run from `initial` with noise drawn from `seed`.
pub fn propagate_conditioned(
    initial: &QuantumState,
    params: &ModelParams,
    integration: &Integration,
    seed: u64,
) -> Result<(TrajectoryLog, MeasurementRecord)> {
    let out = Simulation::new(*params, *integration)?.run(initial, None, seed, &[])?;
    Ok((out.log, out.record))
}

/// Estimator driven by a stored record. The log's `conditioned` series
/// describes the estimate; no fidelity is available without the true state.
pub fn propagate_estimate(
    initial_estimate: &QuantumState,
    record: &MeasurementRecord,
    params: &ModelParams,
) -> Result<TrajectoryLog> {
    let sim = Simulation::for_record(record, params, record_sample_interval(record, params))?;
    Ok(sim.replay(initial_estimate, None, record, &[])?.log)
}

/// Replays the true state and an estimate through the same record, giving
/// the fidelity along the way.
pub fn propagate_estimate_against(
    true_initial: &QuantumState,
    initial_estimate: &QuantumState,
    record: &MeasurementRecord,
    params: &ModelParams,
) -> Result<TrajectoryLog> {
    let sim = Simulation::for_record(record, params, record_sample_interval(record, params))?;
    Ok(sim.replay(true_initial, Some(initial_estimate), record, &[])?.log)
}

/// Default cadence when it is a multiple of the record step, else every step.
fn record_sample_interval(record: &MeasurementRecord, params: &ModelParams) -> f64 {
    let dt = record.dt / params.rabi_period();
    match divides(dt, DEFAULT_SAMPLE_INTERVAL) {
        Ok(_) => DEFAULT_SAMPLE_INTERVAL,
        Err(_) => dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::fidelity;
    use crate::spinspace::{coherent_state, fock_state, maximally_uncertain_estimate};
    use approx::assert_abs_diff_eq;

    fn small() -> (ModelParams, Integration) {
        (ModelParams::new(20, 1.0, 1.0), Integration::new(2.0, 1e-3))
    }

    #[test]
    fn sampling_layout() {
        let (params, integration) = small();
        let psi = fock_state(20, 10.0).unwrap();
        let (log, record) = propagate_conditioned(&psi, &params, &integration, 3).unwrap();
        assert_eq!(record.len(), 2000);
        assert_eq!(log.len(), 201);
        assert_abs_diff_eq!(log.times[200], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(record.duration(), 2.0 * params.rabi_period(), epsilon = 1e-9);
        assert!(log.estimate.is_none() && log.fidelity.is_none());
        assert_eq!(log.window(1.0, 1.5), 100..151);
    }

    #[test]
    fn replay_reproduces_the_conditioned_run_exactly() {
        let (params, integration) = small();
        let sim = Simulation::new(params, integration).unwrap();
        let psi = fock_state(20, 10.0).unwrap();
        let run = sim.run(&psi, Some(&psi), 17, &[]).unwrap();
        assert!(run.log.fidelity.as_ref().unwrap().iter().all(|&f| (f - 1.0).abs() < 1e-12));
        let replay = propagate_estimate(&psi, &run.record, &params).unwrap();
        assert_eq!(replay.conditioned, run.log.conditioned);
        assert_eq!(replay.times, run.log.times);
    }

    #[test]
    fn same_seed_same_record() {
        let (params, integration) = small();
        let psi = coherent_state(20, 0.5, 0.0).unwrap();
        let a = propagate_conditioned(&psi, &params, &integration, 8).unwrap();
        let b = propagate_conditioned(&psi, &params, &integration, 8).unwrap();
        let c = propagate_conditioned(&psi, &params, &integration, 9).unwrap();
        assert_eq!(a.1, b.1);
        assert_ne!(a.1.increments, c.1.increments);
    }

    #[test]
    fn snapshots_land_on_requested_steps() {
        let (params, integration) = small();
        let sim = Simulation::new(params, integration).unwrap();
        let psi = fock_state(20, 10.0).unwrap();
        let est = maximally_uncertain_estimate(20, 1).unwrap();
        let run = sim.run(&psi, Some(&est), 4, &[1.5, 0.0, 2.0]).unwrap();
        let times: Vec<f64> = run.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 1.5, 2.0]);
        assert_eq!(run.snapshots[0].conditioned, psi);
        assert_eq!(run.snapshots[2].conditioned, run.final_conditioned);
        let f = fidelity(&run.final_conditioned, run.final_estimate.as_ref().unwrap()).unwrap();
        assert_abs_diff_eq!(f, *run.log.fidelity.as_ref().unwrap().last().unwrap(), epsilon = 1e-12);
        assert!(sim.run(&psi, None, 4, &[2.5]).is_err());
    }

    #[test]
    fn replay_rejects_mismatched_records() {
        let (params, integration) = small();
        let psi = fock_state(20, 10.0).unwrap();
        let (_, record) = propagate_conditioned(&psi, &params, &integration, 3).unwrap();
        let other = ModelParams::new(20, 0.0, 1.0);
        assert!(matches!(
            propagate_estimate(&psi, &record, &other),
            Err(Error::RecordMismatch(_))
        ));
        let sim = Simulation::new(params, Integration::new(2.0, 2e-3)).unwrap();
        assert!(sim.replay(&psi, None, &record, &[]).is_err());
    }

    #[test]
    fn integration_validation() {
        assert!(Integration::new(1.0, 3e-3).validate().is_err());
        assert!(Integration::new(0.0, 1e-3).validate().is_err());
        assert!(Integration::new(1.0, 1e-3).validate().is_ok());
        assert!(Integration::new(1.0, 2.5e-3).with_sample_interval(5e-3).validate().is_ok());
    }

    #[test]
    fn logged_quantities_stay_in_range() {
        let (params, integration) = small();
        let sim = Simulation::new(params, integration).unwrap();
        let psi = fock_state(20, 10.0).unwrap();
        let est = maximally_uncertain_estimate(20, 5).unwrap();
        let run = sim.run(&psi, Some(&est), 11, &[]).unwrap();
        for &f in run.log.fidelity.as_ref().unwrap() {
            assert!((0.0..=1.0).contains(&f));
        }
        for series in [&run.log.conditioned, run.log.estimate.as_ref().unwrap()] {
            for &p in &series.purity {
                assert!((0.5 - 1e-9..=1.0 + 1e-9).contains(&p));
            }
        }
    }
}
