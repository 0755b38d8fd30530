//! `squeezecat`: scripted pipelines for squeezed cat states under loss.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use squeezecat::metrics::Objective;

use crate::config::{ConfigError, ParityArg, ScenarioConfig, StateKind};

#[derive(Debug, Parser)]
#[command(name = "squeezecat", version, about = "Squeezed cat states under loss: Wigner negativity, rate of decay, tomography")]
struct Cli {
    /// Scenario file (JSON or TOML); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fock cutoff of the initial state.
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a state and write it as JSON.
    State(StateArgs),
    /// Send a state through a channel.
    Channel {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Read the input state from a JSON file instead of building it.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sample a Wigner function on a grid, optionally after a channel.
    Wigner {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Backend::Fock)]
        backend: Backend,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        cross_x: Option<f64>,
    },
    /// Negativity decay curves for the state with and without its squeezing.
    Decay {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        eta_start: Option<f64>,
        #[arg(long)]
        eta_stop: Option<f64>,
        #[arg(long)]
        eta_step: Option<f64>,
    },
    /// Rate of decay at η = 1 for plain and optimally squeezed cats, with
    /// Fock-state reference values.
    Fig2 {
        #[arg(long)]
        alpha2_min: Option<f64>,
        #[arg(long)]
        alpha2_max: Option<f64>,
        #[arg(long)]
        alpha2_step: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_enum)]
        parity: Option<ParityArg>,
    },
    /// Squeezing that best protects the state at a given transmission.
    Optimize {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
    },
    /// Simulated homodyne tomography of the state.
    Tomo {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        phases: Option<usize>,
        /// Detection efficiency of the simulated homodyne detector.
        #[arg(long)]
        efficiency: Option<f64>,
        /// Correct the reconstruction for the detection efficiency.
        #[arg(long)]
        correct: bool,
        /// Fock cutoff of the reconstruction.
        #[arg(long)]
        recon_dim: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        delay_tau: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Channel applied to the density matrix.
    Fock,
    /// Channel applied to the sampled Wigner function by Gaussian convolution.
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    MinRd,
    MinWValue,
}

#[derive(Debug, Args)]
struct StateArgs {
    #[arg(long, value_enum)]
    kind: Option<StateKind>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_phase: Option<f64>,
    #[arg(long, value_enum)]
    parity: Option<ParityArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    two_photon_weight: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    squeeze_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    env_gain: Option<f64>,
    #[arg(long)]
    env_var_x: Option<f64>,
    #[arg(long)]
    env_var_p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<f64>,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl StateArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        let s = &mut cfg.state;
        set(&mut s.kind, self.kind);
        set(&mut s.alpha2, self.alpha2);
        set(&mut s.alpha_phase, self.alpha_phase);
        set(&mut s.parity, self.parity);
        set(&mut s.n, self.n);
        set(&mut s.nbar, self.nbar);
        set(&mut s.two_photon_weight, self.two_photon_weight);
        set(&mut s.s_db, self.squeeze_db);
        set(&mut s.angle, self.angle);
    }
}

impl ChannelArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        let c = &mut cfg.channel;
        set(&mut c.eta, self.eta);
        set(&mut c.env_gain, self.env_gain);
        set(&mut c.env_var_x, self.env_var_x);
        set(&mut c.env_var_p, self.env_var_p);
        set(&mut c.phase, self.phase);
    }
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(squeezecat::Error),
}

impl From<squeezecat::Error> for CliError {
    fn from(e: squeezecat::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("serialization failed: {e}"))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        if self.exit_code() == 3 {
            "numerical"
        } else {
            "config"
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out.clone());
    set(&mut cfg.state.dim, cli.dim);

    match cli.command {
        Command::State(state) => {
            state.apply(&mut cfg);
            commands::state(&cfg)
        }
        Command::Channel { state, channel, input } => {
            state.apply(&mut cfg);
            channel.apply(&mut cfg);
            commands::channel(&cfg, input.as_deref())
        }
        Command::Wigner {
            state,
            channel,
            input,
            backend,
            half_width,
            points,
            cross_x,
        } => {
            state.apply(&mut cfg);
            let through_channel = channel.eta.is_some();
            channel.apply(&mut cfg);
            set(&mut cfg.wigner.half_width, half_width);
            set(&mut cfg.wigner.points, points);
            set(&mut cfg.wigner.cross_x, cross_x);
            commands::wigner(&cfg, input.as_deref(), through_channel, backend == Backend::Kernel)
        }
        Command::Decay {
            state,
            channel,
            eta_start,
            eta_stop,
            eta_step,
        } => {
            state.apply(&mut cfg);
            channel.apply(&mut cfg);
            set(&mut cfg.sweep.start, eta_start);
            set(&mut cfg.sweep.stop, eta_stop);
            set(&mut cfg.sweep.step, eta_step);
            commands::decay(&cfg)
        }
        Command::Fig2 {
            alpha2_min,
            alpha2_max,
            alpha2_step,
            n_max,
            parity,
        } => {
            let f = &mut cfg.fig2;
            set(&mut f.alpha2_min, alpha2_min);
            set(&mut f.alpha2_max, alpha2_max);
            set(&mut f.alpha2_step, alpha2_step);
            set(&mut f.n_max, n_max);
            set(&mut f.parity, parity);
            commands::fig2(&cfg)
        }
        Command::Optimize { state, eta, objective } => {
            state.apply(&mut cfg);
            set(&mut cfg.optimize.eta, eta);
            set(
                &mut cfg.optimize.objective,
                objective.map(|o| match o {
                    ObjectiveArg::MinRd => Objective::MinRd,
                    ObjectiveArg::MinWValue => Objective::MinWValue,
                }),
            );
            commands::optimize(&cfg)
        }
        Command::Tomo {
            state,
            samples,
            phases,
            efficiency,
            correct,
            recon_dim,
            gamma,
            delay_tau,
            max_iters,
        } => {
            state.apply(&mut cfg);
            let t = &mut cfg.tomo;
            set(&mut t.samples, samples);
            set(&mut t.phases, phases);
            set(&mut t.efficiency, efficiency);
            t.correct |= correct;
            set(&mut t.dim, recon_dim);
            set(&mut t.gamma, gamma);
            set(&mut t.delay_tau, delay_tau);
            set(&mut t.max_iters, max_iters);
            commands::tomo(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.message() });
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}
