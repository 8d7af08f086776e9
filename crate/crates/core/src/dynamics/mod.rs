//! Time evolution: conditioned and estimated states, exact unitary and
//! ensemble-averaged references, and the mean-field limit.

pub mod gpe;
pub mod lindblad;
pub mod record;
pub mod sse;
pub mod trajectory;
pub mod unitary;

pub use gpe::{gpe_energy, gpe_phase_portrait, gpe_rhs, gpe_step, gpe_trajectory, sphere_lattice, GpeTrajectory};
pub use lindblad::{lindblad_solve, lindblad_solve_sampled, trace_distance, DensityMatrix, LindbladSolver};
pub use record::{MeasurementRecord, RECORD_FORMAT_VERSION};
pub use sse::{sse_step, SseIntegrator, SseScheme};
pub use trajectory::{
    propagate_conditioned, propagate_estimate, propagate_estimate_against, Integration, ObservableSeries,
    RunOutput, Simulation, Snapshot, TrajectoryLog, DEFAULT_DT, DEFAULT_SAMPLE_INTERVAL,
};
pub use unitary::{unitary_propagate, Propagator};
