//! The normalized gradient flow: iterate `ψ_{n+1} = ψ*/‖ψ*‖_h` with `ψ*` one
//! implicit step of `∂ₜψ = ½Δ_hψ + ψ³`, and track how far each iterate is
//! from solving the discrete ground state equation
//!
//! ```text
//! ½Δ_h η + η³ = λ_h η,   N_h(η) = 1.
//! ```
//!
//! Convergence is always declared on that equation's residual (or, for the
//! schemes whose fixed point is shifted away from the ground state, on the
//! iterates stagnating), never on a fixed iteration count.

use std::num::NonZeroUsize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{
    h1_norm_sq, hamiltonian_h, inner_unchecked, l2_sq, laplacian, Grid, StateVector,
};
use crate::integrators::{normalize, SchemeKind};
use crate::soliton::{h1_error_vs_exact, sample_soliton};

/// Tolerance on `|N_h(ψ) - 1|` accepted as "on the unit sphere".
pub const UNIT_NORM_TOL: f64 = 1e-10;
pub const GROUND_STATE_TAU: f64 = 0.5;
pub const GROUND_STATE_TOL: f64 = 1e-13;
pub const GROUND_STATE_MAX_ITERS: usize = 100_000;
pub const MIN_TOL_RESIDUAL: f64 = 1e-14;

/// Starting point of a flow run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Normalized samples of `½ sech(x/2)`.
    SolitonSample,
    /// `normalize(η + ε·e^{-x²})`.
    Perturbed { eps: f64 },
    /// Any state; normalized before use.
    Custom(StateVector),
}

impl InitialData {
    pub fn build(&self, grid: &Grid) -> Result<StateVector> {
        match self {
            InitialData::SolitonSample => normalize(&sample_soliton(grid)),
            InitialData::Perturbed { eps } => perturbed_soliton(grid, *eps),
            InitialData::Custom(psi) => {
                grid.check_same(psi.grid())?;
                normalize(psi)
            }
        }
    }
}

/// `normalize(η + ε·g)` with the symmetric bump `g(x) = e^{-x²}`.
pub fn perturbed_soliton(grid: &Grid, eps: f64) -> Result<StateVector> {
    check_eps(eps)?;
    let k = grid.k() as isize;
    let values = (-k..=k)
        .map(|l| {
            let x = grid.x(l.abs());
            crate::soliton::eta(x) + eps * (-x * x).exp()
        })
        .collect();
    normalize(&StateVector::from_raw(*grid, values))
}

/// `normalize(η + ε·ξ)` with `ξ^ℓ = ξ^{-ℓ}` uniform in `[-1, 1]`, seeded.
pub fn random_symmetric_perturbation(grid: &Grid, eps: f64, seed: u64) -> Result<StateVector> {
    check_eps(eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half: Vec<f64> = (0..=grid.k()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let k = grid.k() as isize;
    let values = (-k..=k)
        .map(|l| crate::soliton::eta(grid.x(l.abs())) + eps * half[l.unsigned_abs()])
        .collect();
    normalize(&StateVector::from_raw(*grid, values))
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=0.5).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(
            "eps",
            format!("must lie in [0, 0.5], got {eps}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub scheme: SchemeKind,
    pub tau: f64,
    pub max_iters: NonZeroUsize,
    pub tol_residual: f64,
    pub init: InitialData,
    pub record_every: NonZeroUsize,
    /// Also stop once `‖ψ_{n+1} - ψ_n‖_h` drops below this value. Needed for
    /// the semi-explicit and fully implicit schemes, whose residual stalls
    /// at an O(τ) floor.
    pub stagnation_tol: Option<f64>,
    /// Record `‖i_hψ_n - η‖_{H¹}` (quadrature over the whole line, slow).
    pub track_exact_error: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::LinearlyImplicit,
            tau: 0.1,
            max_iters: NonZeroUsize::new(100_000).unwrap(),
            tol_residual: 1e-12,
            init: InitialData::Perturbed { eps: 0.05 },
            record_every: NonZeroUsize::new(1).unwrap(),
            stagnation_tol: None,
            track_exact_error: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(
                "tau",
                format!("must lie in (0, 1], got {}", self.tau),
            ));
        }
        if !(self.tol_residual >= MIN_TOL_RESIDUAL && self.tol_residual.is_finite()) {
            return Err(Error::invalid(
                "tol_residual",
                format!("must be >= {MIN_TOL_RESIDUAL:e}, got {}", self.tol_residual),
            ));
        }
        if let InitialData::Perturbed { eps } = self.init {
            check_eps(eps)?;
        }
        if let Some(s) = self.stagnation_tol {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(
                    "stagnation_tol",
                    format!("must be > 0, got {s}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub n: usize,
    pub energy: f64,
    /// `N_h(ψ*)` before normalization; NaN for the initial state.
    pub prenorm_l2sq: f64,
    pub residual: f64,
    pub lambda_h: f64,
    /// `‖ψ_n - η_{h,K}‖` in the discrete H¹ norm.
    pub err_ref: Option<f64>,
    pub err_exact: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Residual,
    Stagnation,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub final_state: StateVector,
    pub converged: bool,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
}

/// Converged discrete ground state `η_{h,K}` with its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateRef {
    pub state: StateVector,
    pub lambda_h: f64,
    pub residual: f64,
    pub grid: Grid,
    pub iterations: usize,
}

impl GroundStateRef {
    /// Wraps an arbitrary unit state, e.g. the limit of a non-conservative
    /// scheme, so it can serve as the target of error tracking.
    pub fn from_state(state: StateVector) -> Result<Self> {
        check_unit(&state)?;
        let (lambda_h, residual) = lambda_and_residual(&state)?;
        Ok(Self {
            grid: *state.grid(),
            state,
            lambda_h,
            residual,
            iterations: 0,
        })
    }

    /// `‖ψ - η_{h,K}‖` in the discrete H¹ norm.
    pub fn distance(&self, psi: &StateVector) -> Result<f64> {
        Ok(h1_norm_sq(&psi.sub(&self.state)?).sqrt())
    }
}

fn check_unit(psi: &StateVector) -> Result<()> {
    let n = l2_sq(psi);
    if (n - 1.0).abs() <= UNIT_NORM_TOL {
        Ok(())
    } else {
        Err(Error::NotNormalized { l2_sq: n })
    }
}

/// Returns `(ψ*, normalize(ψ*))`.
fn step_and_normalize(
    psi: &StateVector,
    tau: f64,
    scheme: SchemeKind,
) -> Result<(StateVector, StateVector)> {
    let star = scheme.step(psi, tau)?;
    let next = normalize(&star)?;
    Ok((star, next))
}

/// One iteration of the normalized gradient flow from a unit state.
pub fn gradient_step(psi: &StateVector, tau: f64, scheme: SchemeKind) -> Result<StateVector> {
    check_unit(psi)?;
    step_and_normalize(psi, tau, scheme).map(|(_, next)| next)
}

/// `G = ½Δ_hψ + ψ³`.
fn driving_term(psi: &StateVector) -> StateVector {
    let lap = laplacian(psi);
    psi.zip_map(&lap, |p, l| 0.5 * l + p * p * p)
}

/// Rayleigh-type multiplier `⟨G, ψ⟩/N_h(ψ)` and residual `‖G - λψ‖_h` of the
/// ground state equation, `G = ½Δ_hψ + ψ³`.
pub fn lambda_and_residual(psi: &StateVector) -> Result<(f64, f64)> {
    let n = l2_sq(psi);
    if !(n > 0.0) {
        return Err(Error::DegenerateState { l2_sq: n });
    }
    let g = driving_term(psi);
    let lambda = inner_unchecked(&g, psi) / n;
    let r = g.zip_map(psi, |gv, p| gv - lambda * p);
    Ok((lambda, l2_sq(&r).sqrt()))
}

/// Spatially discrete right-hand side of the continuous normalized flow,
/// `G - ⟨G, ψ̂⟩ψ̂` with `ψ̂ = ψ/‖ψ‖_h`.
pub fn cngf_rhs(psi: &StateVector) -> Result<StateVector> {
    let n = l2_sq(psi);
    if !(n > 0.0) {
        return Err(Error::DegenerateState { l2_sq: n });
    }
    let g = driving_term(psi);
    let c = inner_unchecked(&g, psi) / n;
    Ok(g.zip_map(psi, |gv, p| gv - c * p))
}

/// Classical RK4 for `∂ₜψ = cngf_rhs(ψ)` up to `t_final`, renormalizing after
/// every step. The step is shrunk so that it divides `t_final` evenly.
pub fn integrate_cngf(psi0: &StateVector, dt: f64, t_final: f64) -> Result<StateVector> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(
            "t_final",
            format!("must be > 0, got {t_final}"),
        ));
    }
    check_unit(psi0)?;
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;

    let mut psi = psi0.clone();
    for step in 0..steps {
        let blow_up = || Error::BlowUp {
            time: (step + 1) as f64 * dt,
        };
        let k1 = cngf_rhs(&psi).map_err(|_| blow_up())?;
        let k2 = cngf_rhs(&psi.add_scaled(0.5 * dt, &k1)?).map_err(|_| blow_up())?;
        let k3 = cngf_rhs(&psi.add_scaled(0.5 * dt, &k2)?).map_err(|_| blow_up())?;
        let k4 = cngf_rhs(&psi.add_scaled(dt, &k3)?).map_err(|_| blow_up())?;
        let values = psi
            .values()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                p + dt / 6.0
                    * (k1.values()[i]
                        + 2.0 * k2.values()[i]
                        + 2.0 * k3.values()[i]
                        + k4.values()[i])
            })
            .collect();
        let next = StateVector::from_raw(*psi.grid(), values);
        if !next.is_finite() {
            return Err(blow_up());
        }
        psi = normalize(&next).map_err(|_| blow_up())?;
    }
    Ok(psi)
}

fn make_record(
    n: usize,
    psi: &StateVector,
    prenorm_l2sq: f64,
    lambda_h: f64,
    residual: f64,
    reference: Option<&GroundStateRef>,
    track_exact: bool,
) -> Result<FlowRecord> {
    Ok(FlowRecord {
        n,
        energy: hamiltonian_h(psi),
        prenorm_l2sq,
        residual,
        lambda_h,
        err_ref: reference.map(|r| r.distance(psi)).transpose()?,
        err_exact: track_exact.then(|| h1_error_vs_exact(psi)),
    })
}

/// Iterates [`gradient_step`] until the ground state residual drops below
/// `config.tol_residual`, the iterates stagnate, or `max_iters` is reached.
///
/// Records are taken every `record_every` iterations and at the final one.
/// The initial state is recorded (as `n = 0`) only if it already meets the
/// tolerance.
pub fn run_flow(
    psi0: &StateVector,
    config: &FlowConfig,
    reference: Option<&GroundStateRef>,
) -> Result<FlowTrace> {
    config.validate()?;
    check_unit(psi0)?;
    let asym = psi0.asymmetry();
    if asym > 1e-12 * psi0.max_abs() {
        return Err(Error::invalid(
            "psi0",
            format!("not symmetric (asymmetry {asym:e})"),
        ));
    }
    if let Some(r) = reference {
        psi0.grid().check_same(&r.grid)?;
    }

    let track = config.track_exact_error;
    let mut records = Vec::new();
    let (lambda0, residual0) = lambda_and_residual(psi0)?;
    if residual0 <= config.tol_residual {
        records.push(make_record(
            0,
            psi0,
            f64::NAN,
            lambda0,
            residual0,
            reference,
            track,
        )?);
        return Ok(FlowTrace {
            records,
            final_state: psi0.clone(),
            converged: true,
            iterations_used: 0,
            stop_reason: StopReason::Residual,
        });
    }

    let max_iters = config.max_iters.get();
    let every = config.record_every.get();
    let mut psi = psi0.clone();
    for n in 1..=max_iters {
        let (star, next) = match step_and_normalize(&psi, config.tau, config.scheme) {
            Ok(pair) => pair,
            Err(source) => {
                return Err(Error::FlowAborted {
                    iteration: n,
                    source: Box::new(source),
                    trace: Box::new(FlowTrace {
                        records,
                        final_state: psi,
                        converged: false,
                        iterations_used: n - 1,
                        stop_reason: StopReason::MaxIters,
                    }),
                })
            }
        };
        let (lambda_h, residual) = lambda_and_residual(&next)?;

        let stop = if residual <= config.tol_residual {
            Some(StopReason::Residual)
        } else if config
            .stagnation_tol
            .is_some_and(|tol| l2_sq(&next.zip_map(&psi, |a, b| a - b)).sqrt() <= tol)
        {
            Some(StopReason::Stagnation)
        } else if n == max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        psi = next;

        if n % every == 0 || stop.is_some() {
            let prenorm = l2_sq(&star);
            records.push(make_record(
                n, &psi, prenorm, lambda_h, residual, reference, track,
            )?);
        }
        if let Some(reason) = stop {
            return Ok(FlowTrace {
                records,
                final_state: psi,
                converged: reason != StopReason::MaxIters,
                iterations_used: n,
                stop_reason: reason,
            });
        }
    }
    unreachable!("loop always exits through a stop reason")
}

/// Discrete ground state `η_{h,K}`: linearly implicit flow from the
/// normalized sampled soliton until the residual is at most `tol`.
pub fn compute_ground_state(grid: &Grid, tau: f64, tol: f64) -> Result<GroundStateRef> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be > 0, got {tau}")));
    }
    if !(tol >= MIN_TOL_RESIDUAL) {
        return Err(Error::invalid(
            "tol",
            format!("must be >= {MIN_TOL_RESIDUAL:e}, got {tol}"),
        ));
    }
    let mut psi = normalize(&sample_soliton(grid))?;
    let (mut lambda_h, mut residual) = lambda_and_residual(&psi)?;
    let mut iterations = 0;
    while residual > tol {
        if iterations == GROUND_STATE_MAX_ITERS {
            return Err(Error::NotConverged {
                iterations,
                residual,
            });
        }
        psi = step_and_normalize(&psi, tau, SchemeKind::LinearlyImplicit)?.1;
        (lambda_h, residual) = lambda_and_residual(&psi)?;
        iterations += 1;
    }
    Ok(GroundStateRef {
        state: psi,
        lambda_h,
        residual,
        grid: *grid,
        iterations,
    })
}

/// [`compute_ground_state`] with `τ = 0.5` and `tol = 10⁻¹³`.
pub fn compute_ground_state_default(grid: &Grid) -> Result<GroundStateRef> {
    compute_ground_state(grid, GROUND_STATE_TAU, GROUND_STATE_TOL)
}
