//! One function per subcommand, each producing a CSV report.
//!
//! Sweep points are independent and run on a rayon pool; results are
//! collected in sweep order so the output does not depend on scheduling.

use std::num::NonZeroUsize;

use imagtime::analysis::{fit_exponential_rate, min_eigenvalue_a, ErrorWindow, RateFit};
use imagtime::flow::{
    compute_ground_state, gradient_step, integrate_cngf, run_flow, MIN_TOL_RESIDUAL,
};
use imagtime::grid::l2_sq;
use imagtime::soliton::h1_error_vs_exact;
use imagtime::{Error, FlowConfig, FlowTrace, Grid, GroundStateRef, InitialData, SchemeKind};
use rayon::prelude::*;

use crate::args::{Experiment, ReferenceSolve};
use crate::csv::{Cell, CsvReport};
use crate::ExitStatus;

pub const SOLVE_COLUMNS: [&str; 7] = [
    "n",
    "t",
    "energy_Hh",
    "residual",
    "lambda_h",
    "err_ref_h1disc",
    "err_exact_h1cont",
];
pub const GROUND_STATE_COLUMNS: [&str; 5] = ["h", "K", "lambda_h", "residual", "iterations"];
pub const SPATIAL_COLUMNS: [&str; 6] = [
    "h",
    "K",
    "lambda_h",
    "residual",
    "iterations",
    "err_exact_h1cont",
];
pub const TAU_COLUMNS: [&str; 7] = [
    "tau",
    "iterations",
    "converged",
    "residual",
    "err_ref_h1disc",
    "rate",
    "r_squared",
];
pub const COMPARE_COLUMNS: [&str; 4] = ["scheme", "fixed_point_distance", "rate", "r_squared"];
pub const COERCIVITY_COLUMNS: [&str; 4] = ["h", "K", "lambda_h", "min_eigenvalue"];
pub const CNGF_COLUMNS: [&str; 4] = ["tau", "steps", "t", "discrepancy_l2"];

/// Stagnation threshold used by compare-schemes when none is given.
pub const DEFAULT_STAGNATION_TOL: f64 = 1e-14;

/// A report plus the exit status it implies.
#[derive(Debug)]
pub struct Outcome {
    pub report: CsvReport,
    pub status: ExitStatus,
}

impl Outcome {
    fn new(header: &[&'static str]) -> Self {
        Outcome {
            report: CsvReport::new(header),
            status: ExitStatus::Success,
        }
    }

    fn flag(&mut self, status: ExitStatus, message: impl Into<String>) {
        self.report.comment(message);
        self.status = self.status.max(status);
    }

    fn fail(mut self, context: &str, e: &Error) -> Self {
        self.flag(classify(e), format!("{context}: {e}"));
        self
    }
}

/// Configuration problems map to 2, everything else the solver reports to 1.
pub fn classify(e: &Error) -> ExitStatus {
    match e {
        Error::InvalidParameter { .. }
        | Error::GridMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::ProblemTooLarge { .. } => ExitStatus::Usage,
        _ => ExitStatus::NotConverged,
    }
}

pub fn run(experiment: &Experiment, threads: Option<NonZeroUsize>) -> Outcome {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.map_or(0, NonZeroUsize::get))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            let mut out = Outcome::new(&[]);
            out.flag(ExitStatus::Usage, format!("cannot start worker pool: {e}"));
            return out;
        }
    };
    pool.install(|| match experiment {
        Experiment::Solve {
            grid,
            config,
            reference,
        } => solve(grid, config, *reference),
        Experiment::GroundState { grid, solve } => ground_state(grid, *solve),
        Experiment::SweepH { grids, solve } | Experiment::SweepK { grids, solve } => {
            spatial_sweep(grids, *solve)
        }
        Experiment::SweepTau {
            grid,
            taus,
            config,
            solve,
        } => sweep_tau(grid, taus, config, *solve),
        Experiment::CompareSchemes {
            grid,
            config,
            solve,
        } => compare_schemes(grid, config, *solve),
        Experiment::Coercivity { grids, solve } => coercivity(grids, *solve),
        Experiment::CngfCheck {
            grid,
            taus,
            init,
            dt,
            t_final,
        } => cngf_check(grid, taus, init, *dt, *t_final),
    })
}

fn grid_label(g: &Grid) -> String {
    format!("h = {}, K = {}", g.h(), g.k())
}

fn reference(grid: &Grid, solve: ReferenceSolve) -> Result<GroundStateRef, Error> {
    compute_ground_state(grid, solve.tau, solve.tol)
}

fn push_records(out: &mut Outcome, trace: &FlowTrace, tau: f64) {
    for r in &trace.records {
        out.report.push(vec![
            r.n.into(),
            (r.n as f64 * tau).into(),
            r.energy.into(),
            r.residual.into(),
            r.lambda_h.into(),
            r.err_ref.into(),
            r.err_exact.into(),
        ]);
    }
}

fn solve(grid: &Grid, config: &FlowConfig, solve: Option<ReferenceSolve>) -> Outcome {
    let out = Outcome::new(&SOLVE_COLUMNS);
    let target = match solve.map(|s| reference(grid, s)).transpose() {
        Ok(t) => t,
        Err(e) => return out.fail("reference ground state", &e),
    };
    let psi0 = match config.init.build(grid) {
        Ok(p) => p,
        Err(e) => return out.fail("initial data", &e),
    };
    let mut out = out;
    match run_flow(&psi0, config, target.as_ref()) {
        Ok(trace) => {
            push_records(&mut out, &trace, config.tau);
            if !trace.converged {
                let residual = trace.records.last().map_or(f64::NAN, |r| r.residual);
                out.flag(
                    ExitStatus::NotConverged,
                    format!(
                        "not converged: {} iterations, residual {residual:e}",
                        trace.iterations_used
                    ),
                );
            }
        }
        Err(Error::FlowAborted {
            iteration,
            source,
            trace,
        }) => {
            push_records(&mut out, &trace, config.tau);
            out.flag(
                ExitStatus::NotConverged,
                format!("aborted at iteration {iteration}: {source}"),
            );
        }
        Err(e) => return out.fail("flow", &e),
    }
    out
}

fn ground_state(grid: &Grid, solve: ReferenceSolve) -> Outcome {
    let mut out = Outcome::new(&GROUND_STATE_COLUMNS);
    match reference(grid, solve) {
        Ok(r) => out.report.push(vec![
            grid.h().into(),
            grid.k().into(),
            r.lambda_h.into(),
            r.residual.into(),
            r.iterations.into(),
        ]),
        Err(e) => return out.fail(&grid_label(grid), &e),
    }
    out
}

/// Collects per-point rows in order; failed points become trailing comments.
fn collect_rows<T>(
    out: &mut Outcome,
    points: &[T],
    label: impl Fn(&T) -> String,
    results: Vec<Result<Vec<Cell>, Error>>,
) {
    for (p, res) in points.iter().zip(results) {
        match res {
            Ok(row) => out.report.push(row),
            Err(e) => out.flag(classify(&e), format!("{}: {e}", label(p))),
        }
    }
}

fn spatial_sweep(grids: &[Grid], solve: ReferenceSolve) -> Outcome {
    let mut out = Outcome::new(&SPATIAL_COLUMNS);
    let results = grids
        .par_iter()
        .map(|g| {
            let r = reference(g, solve)?;
            Ok(vec![
                g.h().into(),
                g.k().into(),
                r.lambda_h.into(),
                r.residual.into(),
                r.iterations.into(),
                h1_error_vs_exact(&r.state).into(),
            ])
        })
        .collect();
    collect_rows(&mut out, grids, grid_label, results);
    out
}

fn coercivity(grids: &[Grid], solve: ReferenceSolve) -> Outcome {
    let mut out = Outcome::new(&COERCIVITY_COLUMNS);
    let results = grids
        .par_iter()
        .map(|g| {
            let r = reference(g, solve)?;
            let lam = min_eigenvalue_a(&r)?;
            Ok(vec![
                g.h().into(),
                g.k().into(),
                r.lambda_h.into(),
                lam.into(),
            ])
        })
        .collect();
    collect_rows(&mut out, grids, grid_label, results);
    out
}

/// Rate and R² cells, left empty when the window holds too few points.
fn rate_cells(fit: Result<RateFit, Error>) -> [Cell; 2] {
    match fit {
        Ok(f) if !f.degenerate => [f.rate.into(), f.r_squared.into()],
        _ => [Cell::Empty, Cell::Empty],
    }
}

fn sweep_tau(grid: &Grid, taus: &[f64], config: &FlowConfig, solve: ReferenceSolve) -> Outcome {
    let out = Outcome::new(&TAU_COLUMNS);
    let target = match reference(grid, solve) {
        Ok(t) => t,
        Err(e) => return out.fail("reference ground state", &e),
    };
    let psi0 = match config.init.build(grid) {
        Ok(p) => p,
        Err(e) => return out.fail("initial data", &e),
    };
    let mut out = out;
    let results: Vec<Result<(Vec<Cell>, bool), Error>> = taus
        .par_iter()
        .map(|&tau| {
            let cfg = FlowConfig {
                tau,
                ..config.clone()
            };
            let trace = run_flow(&psi0, &cfg, Some(&target))?;
            let last = trace.records.last();
            let [rate, r2] = rate_cells(fit_exponential_rate(&trace, tau, ErrorWindow::default()));
            Ok((
                vec![
                    tau.into(),
                    trace.iterations_used.into(),
                    Cell::Int(trace.converged as u64),
                    last.map(|r| r.residual).into(),
                    last.and_then(|r| r.err_ref).into(),
                    rate,
                    r2,
                ],
                trace.converged,
            ))
        })
        .collect();
    for (tau, res) in taus.iter().zip(results) {
        match res {
            Ok((row, converged)) => {
                out.report.push(row);
                if !converged {
                    out.flag(
                        ExitStatus::NotConverged,
                        format!("tau = {tau}: not converged"),
                    );
                }
            }
            Err(e) => out.flag(classify(&e), format!("tau = {tau}: {e}")),
        }
    }
    out
}

/// Runs `scheme` to its fixed point, then reruns it tracking the error to
/// that fixed point so the rate is measured against the scheme's own limit.
fn scheme_limit(
    scheme: SchemeKind,
    psi0: &imagtime::StateVector,
    config: &FlowConfig,
    target: &GroundStateRef,
) -> Result<Vec<Cell>, Error> {
    let base = FlowConfig {
        scheme,
        tol_residual: MIN_TOL_RESIDUAL,
        stagnation_tol: Some(config.stagnation_tol.unwrap_or(DEFAULT_STAGNATION_TOL)),
        record_every: config.max_iters,
        track_exact_error: false,
        ..config.clone()
    };
    let first = run_flow(psi0, &base, None)?;
    if !first.converged {
        return Err(Error::NotConverged {
            iterations: first.iterations_used,
            residual: first.records.last().map_or(f64::NAN, |r| r.residual),
        });
    }
    let distance = target.distance(&first.final_state)?;
    let own = GroundStateRef::from_state(first.final_state)?;
    let tracked = FlowConfig {
        record_every: NonZeroUsize::MIN,
        ..base
    };
    let second = run_flow(psi0, &tracked, Some(&own))?;
    let [rate, r2] = rate_cells(fit_exponential_rate(
        &second,
        config.tau,
        ErrorWindow::default(),
    ));
    Ok(vec![scheme.name().into(), distance.into(), rate, r2])
}

fn compare_schemes(grid: &Grid, config: &FlowConfig, solve: ReferenceSolve) -> Outcome {
    let out = Outcome::new(&COMPARE_COLUMNS);
    let target = match reference(grid, solve) {
        Ok(t) => t,
        Err(e) => return out.fail("reference ground state", &e),
    };
    let psi0 = match config.init.build(grid) {
        Ok(p) => p,
        Err(e) => return out.fail("initial data", &e),
    };
    let mut out = out;
    let results = SchemeKind::ALL
        .par_iter()
        .map(|&s| scheme_limit(s, &psi0, config, &target))
        .collect();
    collect_rows(&mut out, &SchemeKind::ALL, |s| s.name().to_owned(), results);
    out
}

fn cngf_check(grid: &Grid, taus: &[f64], init: &InitialData, dt: f64, t_final: f64) -> Outcome {
    let out = Outcome::new(&CNGF_COLUMNS);
    let psi0 = match init.build(grid) {
        Ok(p) => p,
        Err(e) => return out.fail("initial data", &e),
    };
    let exact = match integrate_cngf(&psi0, dt, t_final) {
        Ok(p) => p,
        Err(e) => return out.fail("continuous flow", &e),
    };
    let mut out = out;
    let results = taus
        .par_iter()
        .map(|&tau| {
            let steps = (t_final / tau).round() as usize;
            let mut psi = psi0.clone();
            for _ in 0..steps {
                psi = gradient_step(&psi, tau, SchemeKind::LinearlyImplicit)?;
            }
            let gap = l2_sq(&psi.sub(&exact)?).sqrt();
            Ok(vec![
                tau.into(),
                steps.into(),
                (steps as f64 * tau).into(),
                gap.into(),
            ])
        })
        .collect();
    collect_rows(&mut out, taus, |t| format!("tau = {t}"), results);
    out
}
