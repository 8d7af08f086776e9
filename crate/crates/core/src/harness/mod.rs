//! Configuration, run directories, ensembles and plot data.

pub mod config;
pub mod experiment;
pub mod io;
pub mod plot;

pub use config::{presets, ExperimentConfig, InitialState, CONFIG_FORMAT_VERSION};
pub use experiment::{
    first_crossing, output_root, run_ensemble, run_experiment, settled_from, simulate, simulate_ensemble,
    wigner_stem, EnsembleSummary, Manifest, CONVERGED_FIDELITY, OUTPUT_ENV,
};
pub use io::{read_trajectory_csv, write_trajectory_csv};
pub use plot::emit_plot_data;
