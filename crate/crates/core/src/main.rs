use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use doublewell::dynamics::{gpe_phase_portrait, sphere_lattice, Integration, MeasurementRecord, Simulation, SseScheme};
use doublewell::harness::{
    emit_plot_data, output_root, presets, run_ensemble, run_experiment, write_trajectory_csv, ExperimentConfig,
    InitialState, OUTPUT_ENV,
};
use doublewell::observables::{wigner_function, BlochState, GridSpec};
use doublewell::spinspace::{maximally_uncertain_estimate, ModelParams};
use doublewell::{Error, Result};

/// Continuous measurement and state estimation of a condensate in a double well.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one conditioned trajectory (with estimator) and write a run directory.
    Run(RunArgs),
    /// Replay a stored record against a fresh estimate.
    Estimate(EstimateArgs),
    /// Run several seeds in parallel and aggregate.
    Ensemble(RunArgs),
    /// Mean-field phase portrait.
    Gpe(GpeArgs),
    /// Wigner function of a state, optionally after replaying a record.
    Wigner(WignerArgs),
    /// Run a preset experiment.
    Preset(PresetArgs),
    /// Write plot-ready files for a finished run directory.
    Plot { run_dir: PathBuf },
    /// Print a configuration as TOML without running it.
    Config(RunArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Number of bosons.
    #[arg(long = "n")]
    n_particles: Option<usize>,
    /// Interaction u = U N / K.
    #[arg(long)]
    u: Option<f64>,
    /// Tunneling rate K.
    #[arg(long)]
    k: Option<f64>,
    /// Measurement strength gamma_bar = gamma N / K.
    #[arg(long)]
    gamma_bar: Option<f64>,
    /// Bias coefficient multiplying n_1 (0 switches it off).
    #[arg(long)]
    bias: Option<f64>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Duration in Rabi periods.
    #[arg(long)]
    t_final: Option<f64>,
    /// Step in Rabi periods.
    #[arg(long)]
    dt: Option<f64>,
    /// Logging interval in Rabi periods.
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seed_count: Option<usize>,
    /// `fock:M`, `coherent:THETA,PHI` or `random`.
    #[arg(long)]
    initial: Option<String>,
    /// Skip the estimator.
    #[arg(long)]
    no_estimator: bool,
    /// Wigner snapshot times in Rabi periods.
    #[arg(long = "snapshot", value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Run directory (default: <output root>/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for run directories.
    #[arg(long, env = OUTPUT_ENV)]
    output_root: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    SplitExponential,
    EulerMaruyama,
}

impl From<SchemeArg> for SseScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::SplitExponential => SseScheme::SplitExponential,
            SchemeArg::EulerMaruyama => SseScheme::EulerMaruyama,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Record file (`.csv` or `.bin`).
    #[arg(long)]
    record: PathBuf,
    /// Seed of the random initial estimate.
    #[arg(long, default_value_t = 1)]
    estimate_seed: u64,
    /// True initial state; when given, it is replayed too and the fidelity logged.
    #[arg(long)]
    truth: Option<String>,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GpeArgs {
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    /// Duration in Rabi periods.
    #[arg(long, default_value_t = 2.0)]
    t_final: f64,
    /// Step in Rabi periods.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    sample_every: usize,
    #[arg(long, default_value_t = 6)]
    rings: usize,
    #[arg(long, default_value_t = 8)]
    per_ring: usize,
    /// CSV to write (`trajectory,t,sx,sy,sz`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WignerArgs {
    #[arg(long = "n", default_value_t = 100)]
    n_particles: usize,
    /// `fock:M`, `coherent:THETA,PHI` or `random`.
    #[arg(long, default_value = "fock:50")]
    state: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Record to replay from `state` before evaluating.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Replay time in Rabi periods.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_phi: Option<usize>,
    /// CSV to write (`theta,phi,value`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PresetArgs {
    #[arg(value_parser = ["fig2", "fig4"])]
    name: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = OUTPUT_ENV)]
    output_root: Option<PathBuf>,
    /// Also write plot-ready files.
    #[arg(long)]
    plot: bool,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(ModelParams::new(100, 1.0, 1.0), 60.0, 1),
    };
    let m = &args.model;
    if let Some(n) = m.n_particles {
        config.model.n_particles = n;
        if args.initial.is_none() && args.config.is_none() {
            config.initial_state = InitialState::north_pole(n);
        }
    }
    if let Some(u) = m.u {
        config.model.interaction_u = u;
    }
    if let Some(k) = m.k {
        config.model.tunneling_k = k;
    }
    if let Some(g) = m.gamma_bar {
        config.model.gamma_bar = g;
    }
    if let Some(b) = m.bias {
        config.model.bias_epsilon = b;
    }
    if let Some(t) = args.t_final {
        config.t_final = t;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(s) = args.sample_interval {
        config.sample_interval = s;
    }
    if let Some(s) = args.scheme {
        config.scheme = s.into();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(c) = args.seed_count {
        config.seed_count = c;
    }
    if let Some(init) = &args.initial {
        config.initial_state = InitialState::parse(init)?;
    }
    if args.no_estimator {
        config.estimator = false;
    }
    if !args.snapshots.is_empty() {
        config.wigner_snapshots = args.snapshots.clone();
    }
    if let Some(root) = &args.output_root {
        config.output_dir = Some(root.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run_dir(config: &ExperimentConfig, out: &Option<PathBuf>, name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| output_root(config).join(name))
}

fn default_name(config: &ExperimentConfig, kind: &str) -> String {
    format!(
        "{kind}_n{}_u{}_g{}_seed{}",
        config.model.n_particles, config.model.interaction_u, config.model.gamma_bar, config.seed
    )
}

fn read_record(path: &Path) -> Result<MeasurementRecord> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => MeasurementRecord::read_csv(path),
        Some("bin") => MeasurementRecord::read_binary(path),
        _ => Err(Error::Config(format!("{}: expected a .csv or .bin record", path.display()))),
    }
}

fn replay_simulation(record: &MeasurementRecord) -> Result<Simulation> {
    let dt = record.dt / record.params.rabi_period();
    let integration = Integration::new(record.len() as f64 * dt, dt);
    let interval = if integration.sample_every().is_ok() {
        integration.sample_interval
    } else {
        dt
    };
    Simulation::for_record(record, &record.params, interval)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = build_config(&args)?;
            let dir = run_dir(&config, &args.out, &default_name(&config, "run"));
            let manifest = run_experiment(&config, &dir)?;
            println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
        }
        Command::Ensemble(args) => {
            let mut config = build_config(&args)?;
            if args.seed_count.is_none() && config.seeds.is_none() && config.seed_count < 2 {
                config.seed_count = 10;
            }
            let dir = run_dir(&config, &args.out, &default_name(&config, "ensemble"));
            let summary = run_ensemble(&config, &dir)?;
            let converged = summary.convergence_times.iter().filter(|t| t.is_some()).count();
            println!(
                "{} seeds written to {}; fidelity settled above 0.99 on {converged}",
                summary.seeds.len(),
                dir.display()
            );
        }
        Command::Config(args) => {
            print!("{}", build_config(&args)?.to_toml_string()?);
        }
        Command::Estimate(args) => {
            let record = read_record(&args.record)?;
            let n = record.params.n_particles;
            let sim = replay_simulation(&record)?;
            let estimate = maximally_uncertain_estimate(n, args.estimate_seed)?;
            let out = match &args.truth {
                Some(spec) => {
                    let truth = InitialState::parse(spec)?.build(n, record.seed)?;
                    sim.replay(&truth, Some(&estimate), &record, &[])?
                }
                None => sim.replay(&estimate, None, &record, &[])?,
            };
            write_trajectory_csv(&out.log, &args.out)?;
            if let Some(f) = out.log.fidelity.as_ref().and_then(|f| f.last()) {
                println!("final fidelity {f:.6}");
            }
            println!("wrote {}", args.out.display());
        }
        Command::Gpe(args) => {
            let starts = sphere_lattice(args.rings, args.per_ring);
            let portrait = gpe_phase_portrait(args.u, &starts, args.t_final, args.dt, args.sample_every)?;
            let mut text = String::from("trajectory,t,sx,sy,sz\n");
            for (k, traj) in portrait.iter().enumerate() {
                for (t, s) in traj.times.iter().zip(&traj.points) {
                    text.push_str(&format!("{k},{t:?},{:?},{:?},{:?}\n", s.sx, s.sy, s.sz));
                }
            }
            std::fs::write(&args.out, text)?;
            let worst = portrait.iter().map(|t| t.max_energy_drift()).fold(0.0, f64::max);
            println!("{} orbits, max energy drift {worst:.2e}; wrote {}", portrait.len(), args.out.display());
        }
        Command::Wigner(args) => {
            let mut grid = GridSpec::for_particles(args.n_particles);
            if let Some(t) = args.n_theta {
                grid.n_theta = t;
            }
            if let Some(p) = args.n_phi {
                grid.n_phi = p;
            }
            let initial = InitialState::parse(&args.state)?;
            let state = match &args.record {
                Some(path) => {
                    let record = read_record(path)?;
                    let start = initial.build(record.params.n_particles, args.seed)?;
                    let sim = replay_simulation(&record)?;
                    let t = args.time.unwrap_or(sim.integration().t_final);
                    sim.replay(&start, None, &record, &[t])?.snapshots.remove(0).conditioned
                }
                None => initial.build(args.n_particles, args.seed)?,
            };
            let w = wigner_function(&state, grid)?;
            w.write_csv(&args.out)?;
            let (theta, phi) = w.argmax();
            let peak = BlochState::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            println!(
                "min {:.4e}, max {:.4e} at ({:.3}, {:.3}, {:.3}), integral {:.10}; wrote {}",
                w.min(),
                w.max(),
                peak.sx,
                peak.sy,
                peak.sz,
                w.integral(),
                args.out.display()
            );
        }
        Command::Preset(args) => {
            let mut config = presets::by_name(&args.name)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(root) = args.output_root {
                config.output_dir = Some(root);
            }
            let dir = run_dir(&config, &args.out, &format!("{}_seed{}", args.name, config.seed));
            let manifest = run_experiment(&config, &dir)?;
            println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
            if args.plot {
                let files = emit_plot_data(&dir)?;
                println!("wrote {} plot files to {}", files.len(), dir.join("plot").display());
            }
        }
        Command::Plot { run_dir } => {
            let files = emit_plot_data(&run_dir)?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
