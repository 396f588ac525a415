//! Command line parsing and validation into a [`RunSpec`].

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imagtime::analysis::MAX_DENSE_K;
use imagtime::flow::{random_symmetric_perturbation, GROUND_STATE_TAU, GROUND_STATE_TOL};
use imagtime::{FlowConfig, Grid, InitialData, SchemeKind};
use thiserror::Error;

/// Environment variable overriding the worker count of sweeps.
pub const THREADS_ENV: &str = "IMAGTIME_THREADS";

#[derive(Debug, Error)]
pub enum UsageError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("invalid value for {flag}: {reason}")]
    Invalid { flag: &'static str, reason: String },
}

impl UsageError {
    fn invalid(flag: &'static str, reason: impl Into<String>) -> Self {
        UsageError::Invalid {
            flag,
            reason: reason.into(),
        }
    }

    /// `--help` and `--version` surface as clap errors but are not failures.
    pub fn is_informational(&self) -> bool {
        matches!(
            self,
            UsageError::Clap(e) if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            )
        )
    }

    /// Prints the message the way clap would (help text to stdout, errors to
    /// stderr).
    pub fn print(&self) {
        match self {
            UsageError::Clap(e) => {
                let _ = e.print();
            }
            other => eprintln!("error: {other}"),
        }
    }
}

/// A fully validated experiment request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub out: PathBuf,
    /// Worker count for sweeps; `None` means available parallelism.
    pub threads: Option<NonZeroUsize>,
}

/// Settings for the ground-state solves done by sweeps and references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSolve {
    pub tau: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    /// One flow run, one CSV row per recorded iteration.
    Solve {
        grid: Grid,
        config: FlowConfig,
        /// Track errors against the discrete ground state and `½ sech(x/2)`.
        reference: Option<ReferenceSolve>,
    },
    GroundState {
        grid: Grid,
        solve: ReferenceSolve,
    },
    /// Ground states on grids of fixed extent `Kh`.
    SweepH {
        grids: Vec<Grid>,
        solve: ReferenceSolve,
    },
    /// Ground states at fixed `h` with growing cutoff.
    SweepK {
        grids: Vec<Grid>,
        solve: ReferenceSolve,
    },
    /// Convergence rate of the flow for several time steps.
    SweepTau {
        grid: Grid,
        taus: Vec<f64>,
        config: FlowConfig,
        solve: ReferenceSolve,
    },
    /// Limits of all three schemes and their rates at one time step.
    CompareSchemes {
        grid: Grid,
        config: FlowConfig,
        solve: ReferenceSolve,
    },
    Coercivity {
        grids: Vec<Grid>,
        solve: ReferenceSolve,
    },
    /// Discrete flow against the continuous normalized flow at time `t_final`.
    CngfCheck {
        grid: Grid,
        taus: Vec<f64>,
        init: InitialData,
        dt: f64,
        t_final: f64,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "imagtime",
    version,
    about = "Normalized gradient flow for the ground state of the 1D cubic NLS"
)]
struct Cli {
    /// Worker threads for sweeps [env: IMAGTIME_THREADS]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the gradient flow and record every iteration
    #[command(allow_negative_numbers = true)]
    Solve {
        #[command(flatten)]
        grid: GridArgs,
        /// Time step
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        #[command(flatten)]
        flow: FlowArgs,
        /// Also record errors against the discrete ground state and the exact soliton
        #[arg(long)]
        reference: bool,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compute the discrete ground state on one grid
    #[command(allow_negative_numbers = true)]
    GroundState {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ground states over several h at fixed extent Kh
    #[command(allow_negative_numbers = true)]
    SweepH {
        #[arg(long, value_delimiter = ',', required = true)]
        h_list: Vec<f64>,
        /// Domain half-width; K = round(kh / h)
        #[arg(long, default_value_t = 40.0)]
        kh: f64,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ground states over several extents Kh at fixed h
    #[command(allow_negative_numbers = true)]
    SweepK {
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// Domain half-widths; K = round(kh / h)
        #[arg(long, value_delimiter = ',', required = true)]
        kh_list: Vec<f64>,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fitted convergence rate for several time steps
    #[command(allow_negative_numbers = true)]
    SweepTau {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fixed points and rates of the three schemes
    #[command(allow_negative_numbers = true)]
    CompareSchemes {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Smallest eigenvalue of the linearized operator over several h
    #[command(allow_negative_numbers = true)]
    Coercivity {
        #[arg(long, value_delimiter = ',', required = true)]
        h_list: Vec<f64>,
        #[arg(long, default_value_t = 40.0)]
        kh: f64,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Discrepancy between the discrete and the continuous flow
    #[command(allow_negative_numbers = true)]
    CngfCheck {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        #[command(flatten)]
        init: InitArgs,
        /// Runge-Kutta step of the continuous flow
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 5.0)]
        t_final: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Mesh width
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Cutoff index; the lattice is x = l h for |l| <= K
    #[arg(long = "K", default_value_t = 400)]
    k: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitKind {
    /// Normalized samples of the exact soliton
    Soliton,
    /// Soliton plus eps times a Gaussian bump
    Perturbed,
    /// Soliton plus a seeded random symmetric perturbation of size eps
    Random,
}

#[derive(Debug, Args)]
struct InitArgs {
    #[arg(long, value_enum, default_value_t = InitKind::Perturbed)]
    init: InitKind,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Seed for --init random
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FlowArgs {
    /// linimp, semiexp or fullimp
    #[arg(long, default_value = "linimp")]
    scheme: SchemeKind,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Stop once the residual drops to this value
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also stop once an iteration moves the state by at most this (L2 norm)
    #[arg(long)]
    stagnation_tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[command(flatten)]
    init: InitArgs,
}

/// The ground-state solve behind references and sweeps.
#[derive(Debug, Args)]
struct SolveArgs {
    /// Time step of the ground-state solve
    #[arg(long = "gs-tau", default_value_t = GROUND_STATE_TAU)]
    gs_tau: f64,
    /// Residual tolerance of the ground-state solve
    #[arg(long = "gs-tol", default_value_t = GROUND_STATE_TOL)]
    gs_tol: f64,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first) and validates every value.
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let threads = match cli.threads {
        Some(n) => Some(
            NonZeroUsize::new(n).ok_or_else(|| UsageError::invalid("--threads", "must be >= 1"))?,
        ),
        None => threads_from_env()?,
    };
    let (experiment, out) = build(cli.command)?;
    Ok(RunSpec {
        experiment,
        out,
        threads,
    })
}

fn threads_from_env() -> Result<Option<NonZeroUsize>, UsageError> {
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s.trim().parse::<NonZeroUsize>().map(Some).map_err(|_| {
            UsageError::invalid(
                "IMAGTIME_THREADS",
                format!("expected a positive integer, got {s:?}"),
            )
        }),
        _ => Ok(None),
    }
}

fn build(command: Command) -> Result<(Experiment, PathBuf), UsageError> {
    Ok(match command {
        Command::Solve {
            grid,
            tau,
            flow,
            reference,
            solve,
            out,
        } => {
            let grid = grid.build()?;
            let config = flow.build(&grid, tau)?;
            let solve = solve.build()?;
            let experiment = Experiment::Solve {
                grid,
                config: FlowConfig {
                    track_exact_error: reference,
                    ..config
                },
                reference: reference.then_some(solve),
            };
            (experiment, out.out)
        }
        Command::GroundState { grid, solve, out } => (
            Experiment::GroundState {
                grid: grid.build()?,
                solve: solve.build()?,
            },
            out.out,
        ),
        Command::SweepH {
            h_list,
            kh,
            solve,
            out,
        } => {
            check_sorted("--h-list", &h_list)?;
            let grids = h_list
                .iter()
                .map(|&h| fixed_extent("--h-list", h, kh))
                .collect::<Result<_, _>>()?;
            (
                Experiment::SweepH {
                    grids,
                    solve: solve.build()?,
                },
                out.out,
            )
        }
        Command::SweepK {
            h,
            kh_list,
            solve,
            out,
        } => {
            check_sorted("--kh-list", &kh_list)?;
            let grids = kh_list
                .iter()
                .map(|&kh| fixed_extent("--kh-list", h, kh))
                .collect::<Result<_, _>>()?;
            (
                Experiment::SweepK {
                    grids,
                    solve: solve.build()?,
                },
                out.out,
            )
        }
        Command::SweepTau {
            grid,
            tau_list,
            flow,
            solve,
            out,
        } => {
            check_sorted("--tau-list", &tau_list)?;
            let grid = grid.build()?;
            let config = flow.build(&grid, tau_list[0])?;
            for &tau in &tau_list {
                check_tau("--tau-list", &config, tau)?;
            }
            (
                Experiment::SweepTau {
                    grid,
                    taus: tau_list,
                    config,
                    solve: solve.build()?,
                },
                out.out,
            )
        }
        Command::CompareSchemes {
            grid,
            tau,
            flow,
            solve,
            out,
        } => {
            let grid = grid.build()?;
            (
                Experiment::CompareSchemes {
                    config: flow.build(&grid, tau)?,
                    grid,
                    solve: solve.build()?,
                },
                out.out,
            )
        }
        Command::Coercivity {
            h_list,
            kh,
            solve,
            out,
        } => {
            check_sorted("--h-list", &h_list)?;
            let grids: Vec<Grid> = h_list
                .iter()
                .map(|&h| fixed_extent("--h-list", h, kh))
                .collect::<Result<_, _>>()?;
            if let Some(g) = grids.iter().find(|g| g.k() > MAX_DENSE_K) {
                return Err(UsageError::invalid(
                    "--h-list",
                    format!(
                        "K = {} exceeds {MAX_DENSE_K}, the largest size of the dense eigensolver",
                        g.k()
                    ),
                ));
            }
            (
                Experiment::Coercivity {
                    grids,
                    solve: solve.build()?,
                },
                out.out,
            )
        }
        Command::CngfCheck {
            grid,
            tau_list,
            init,
            dt,
            t_final,
            out,
        } => {
            check_sorted("--tau-list", &tau_list)?;
            let grid = grid.build()?;
            let init = init.build(&grid)?;
            for &tau in &tau_list {
                let config = FlowConfig {
                    tau,
                    init: init.clone(),
                    ..FlowConfig::default()
                };
                check_tau("--tau-list", &config, tau)?;
            }
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(UsageError::invalid("--dt", "must be positive"));
            }
            if !(t_final > 0.0 && t_final.is_finite()) {
                return Err(UsageError::invalid("--t-final", "must be positive"));
            }
            (
                Experiment::CngfCheck {
                    grid,
                    taus: tau_list,
                    init,
                    dt,
                    t_final,
                },
                out.out,
            )
        }
    })
}

impl GridArgs {
    fn build(&self) -> Result<Grid, UsageError> {
        Grid::new(self.h, self.k).map_err(|e| UsageError::invalid("--h/--K", e.to_string()))
    }
}

impl InitArgs {
    fn build(&self, grid: &Grid) -> Result<InitialData, UsageError> {
        let bad_eps = |e: imagtime::Error| UsageError::invalid("--eps", e.to_string());
        Ok(match self.init {
            InitKind::Soliton => InitialData::SolitonSample,
            InitKind::Perturbed => InitialData::Perturbed { eps: self.eps },
            InitKind::Random => InitialData::Custom(
                random_symmetric_perturbation(grid, self.eps, self.seed).map_err(bad_eps)?,
            ),
        })
    }
}

impl FlowArgs {
    fn build(&self, grid: &Grid, tau: f64) -> Result<FlowConfig, UsageError> {
        let max_iters = NonZeroUsize::new(self.max_iters)
            .ok_or_else(|| UsageError::invalid("--max-iters", "must be >= 1"))?;
        let record_every = NonZeroUsize::new(self.record_every)
            .ok_or_else(|| UsageError::invalid("--record-every", "must be >= 1"))?;
        let config = FlowConfig {
            scheme: self.scheme,
            tau,
            max_iters,
            tol_residual: self.tol,
            init: self.init.build(grid)?,
            record_every,
            stagnation_tol: self.stagnation_tol,
            track_exact_error: false,
        };
        check_tau("--tau", &config, tau)?;
        Ok(config)
    }
}

impl SolveArgs {
    fn build(&self) -> Result<ReferenceSolve, UsageError> {
        let probe = FlowConfig {
            tau: self.gs_tau,
            tol_residual: self.gs_tol,
            ..FlowConfig::default()
        };
        probe
            .validate()
            .map_err(|e| UsageError::invalid("--gs-tau/--gs-tol", e.to_string()))?;
        Ok(ReferenceSolve {
            tau: self.gs_tau,
            tol: self.gs_tol,
        })
    }
}

/// Validates `config` with its time step replaced by `tau`.
fn check_tau(flag: &'static str, config: &FlowConfig, tau: f64) -> Result<(), UsageError> {
    FlowConfig {
        tau,
        ..config.clone()
    }
    .validate()
    .map_err(|e| UsageError::invalid(flag, e.to_string()))
}

fn fixed_extent(flag: &'static str, h: f64, extent: f64) -> Result<Grid, UsageError> {
    Grid::with_extent(h, extent).map_err(|e| UsageError::invalid(flag, e.to_string()))
}

/// Sweep lists must be nonempty and strictly monotone in either direction.
fn check_sorted(flag: &'static str, list: &[f64]) -> Result<(), UsageError> {
    if list.is_empty() {
        return Err(UsageError::invalid(flag, "empty list"));
    }
    if list.iter().any(|v| !v.is_finite()) {
        return Err(UsageError::invalid(flag, "values must be finite"));
    }
    let up = list.windows(2).all(|w| w[0] < w[1]);
    let down = list.windows(2).all(|w| w[0] > w[1]);
    if up || down {
        Ok(())
    } else {
        Err(UsageError::invalid(
            flag,
            "values must be sorted without repeats",
        ))
    }
}
