//! One time step `ψ_n ↦ ψ*` of the parabolic flow `∂ₜψ = ½Δ_hψ + ψ³`, in
//! three flavours that differ only in how the cubic term is treated, plus
//! the projection back onto the unit sphere.
//!
//! | scheme              | cubic term     | solve per step                 |
//! |---------------------|----------------|--------------------------------|
//! | linearly implicit   | `ψ_n² ψ*`      | one tridiagonal                |
//! | semi-explicit       | `ψ_n³`         | one constant tridiagonal       |
//! | fully implicit      | `(ψ*)³`        | Newton, tridiagonal Jacobians  |
//!
//! Only the linearly implicit step maps the discrete ground state onto a
//! multiple of itself; the other two have O(τ)-shifted fixed points.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{l2_sq, laplacian, Grid, StateVector};

/// Relative pivot threshold of the Thomas elimination.
const PIVOT_GUARD: f64 = 1e-30;
pub const NEWTON_MAX_ITERS: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
/// Below this squared norm a state is considered collapsed.
pub const DEGENERATE_L2_SQ: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    LinearlyImplicit,
    SemiExplicit,
    FullyImplicit,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::LinearlyImplicit,
        SchemeKind::SemiExplicit,
        SchemeKind::FullyImplicit,
    ];

    /// Short name used on the command line and in CSV files.
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::LinearlyImplicit => "linimp",
            SchemeKind::SemiExplicit => "semiexp",
            SchemeKind::FullyImplicit => "fullimp",
        }
    }

    pub fn step(&self, psi: &StateVector, tau: f64) -> Result<StateVector> {
        match self {
            SchemeKind::LinearlyImplicit => step_linearly_implicit(psi, tau),
            SchemeKind::SemiExplicit => step_semi_explicit(psi, tau),
            SchemeKind::FullyImplicit => step_fully_implicit(psi, tau),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linimp" | "linearly-implicit" => Ok(SchemeKind::LinearlyImplicit),
            "semiexp" | "semi-explicit" => Ok(SchemeKind::SemiExplicit),
            "fullimp" | "fully-implicit" => Ok(SchemeKind::FullyImplicit),
            other => Err(format!(
                "unknown scheme `{other}` (expected linimp, semiexp or fullimp)"
            )),
        }
    }
}

/// Tridiagonal matrix with `sub[i] = A[i+1][i]` and `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("diag", "empty system"));
        }
        if sub.len() != n - 1 || sup.len() != n - 1 {
            return Err(Error::invalid(
                "sub/sup",
                format!(
                    "off-diagonals must have length {}, got {} and {}",
                    n - 1,
                    sub.len(),
                    sup.len()
                ),
            ));
        }
        let all = sub.iter().chain(&diag).chain(&sup);
        if let Some(index) = all.clone().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { sub, diag, sup })
    }

    /// `I - τ(½Δ_h + diag(potential))` on `grid`.
    fn shifted_laplacian(grid: &Grid, tau: f64, potential: impl Fn(usize) -> f64) -> Self {
        let n = grid.len();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let off = -0.5 * tau * inv_h2;
        let diag = (0..n)
            .map(|i| 1.0 + tau * inv_h2 - tau * potential(i))
            .collect();
        Self {
            sub: vec![off; n - 1],
            diag,
            sup: vec![off; n - 1],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    fn row_scale(&self, i: usize) -> f64 {
        let mut s = self.diag[i].abs();
        if i > 0 {
            s = s.max(self.sub[i - 1].abs());
        }
        if i + 1 < self.len() {
            s = s.max(self.sup[i].abs());
        }
        s
    }
}

/// Thomas elimination without pivoting.
pub fn solve_tridiagonal(sys: &TridiagonalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = sys.len();
    if rhs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    let check = |row: usize, pivot: f64| -> Result<f64> {
        let scale = sys.row_scale(row);
        if !pivot.is_finite() || pivot.abs() < PIVOT_GUARD * scale || pivot == 0.0 {
            Err(Error::SingularSystem { row, pivot })
        } else {
            Ok(pivot)
        }
    };

    let p0 = check(0, sys.diag[0])?;
    if n > 1 {
        c[0] = sys.sup[0] / p0;
    }
    d[0] = rhs[0] / p0;
    for i in 1..n {
        let pivot = check(i, sys.diag[i] - sys.sub[i - 1] * c[i - 1])?;
        if i + 1 < n {
            c[i] = sys.sup[i] / pivot;
        }
        d[i] = (rhs[i] - sys.sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "tau",
            format!("must be finite and > 0, got {tau}"),
        ))
    }
}

fn step_failure(tau: f64, err: Error) -> Error {
    match err {
        Error::SingularSystem { row, pivot } => Error::StepFailure {
            tau,
            reason: format!("singular system at row {row} (pivot {pivot:e})"),
        },
        other => other,
    }
}

fn finish(grid: Grid, tau: f64, values: Vec<f64>) -> Result<StateVector> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure {
            tau,
            reason: "non-finite values in the solution".into(),
        });
    }
    Ok(StateVector::from_raw(grid, values))
}

/// Solves `(I - τ(½Δ_h + diag(ψ²))) ψ* = ψ`.
pub fn step_linearly_implicit(psi: &StateVector, tau: f64) -> Result<StateVector> {
    check_tau(tau)?;
    let v = psi.values();
    let sys = TridiagonalSystem::shifted_laplacian(psi.grid(), tau, |i| v[i] * v[i]);
    let x = solve_tridiagonal(&sys, v).map_err(|e| step_failure(tau, e))?;
    finish(*psi.grid(), tau, x)
}

/// Solves `(I - ½τΔ_h) ψ* = ψ + τψ³`.
pub fn step_semi_explicit(psi: &StateVector, tau: f64) -> Result<StateVector> {
    check_tau(tau)?;
    let sys = TridiagonalSystem::shifted_laplacian(psi.grid(), tau, |_| 0.0);
    let rhs: Vec<f64> = psi.values().iter().map(|&p| p + tau * p * p * p).collect();
    let x = solve_tridiagonal(&sys, &rhs)?;
    finish(*psi.grid(), tau, x)
}

/// Solves `ψ* - ψ - τ(½Δ_hψ* + (ψ*)³) = 0` by Newton's method.
pub fn step_fully_implicit(psi: &StateVector, tau: f64) -> Result<StateVector> {
    step_fully_implicit_counted(psi, tau).map(|(s, _)| s)
}

/// As [`step_fully_implicit`], also returning the number of Newton iterations.
pub fn step_fully_implicit_counted(psi: &StateVector, tau: f64) -> Result<(StateVector, usize)> {
    let mut phi = step_linearly_implicit(psi, tau)?;
    let grid = *psi.grid();
    let mut last_update = f64::INFINITY;
    for iter in 1..=NEWTON_MAX_ITERS {
        let residual = fully_implicit_residual(psi, &phi, tau);
        let p = phi.values();
        let jac = TridiagonalSystem::shifted_laplacian(&grid, tau, |i| 3.0 * p[i] * p[i]);
        let neg: Vec<f64> = residual.iter().map(|r| -r).collect();
        let delta = solve_tridiagonal(&jac, &neg).map_err(|e| step_failure(tau, e))?;
        let values: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
        phi = finish(grid, tau, values)?;
        last_update = delta.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        if last_update <= NEWTON_TOL * (1.0 + phi.max_abs()) {
            return Ok((phi, iter));
        }
    }
    Err(Error::NewtonNonconvergence {
        tau,
        iterations: NEWTON_MAX_ITERS,
        last_update,
    })
}

/// `φ - ψ - τ(½Δ_hφ + φ³)`, the defining equation of the fully implicit step.
pub fn fully_implicit_residual(psi: &StateVector, phi: &StateVector, tau: f64) -> Vec<f64> {
    let lap = laplacian(phi);
    phi.values()
        .iter()
        .zip(psi.values())
        .zip(lap.values())
        .map(|((&f, &p), &l)| f - p - tau * (0.5 * l + f * f * f))
        .collect()
}

/// `ψ / √N_h(ψ)`.
pub fn normalize(psi: &StateVector) -> Result<StateVector> {
    let n = l2_sq(psi);
    if !(n > DEGENERATE_L2_SQ) {
        return Err(Error::DegenerateState { l2_sq: n });
    }
    let inv = 1.0 / n.sqrt();
    Ok(psi.map(|v| v * inv))
}
