//! Local structure of the constrained problem around a ground state
//! reference `η`, and fitting utilities for convergence studies.
//!
//! Near `η` every unit state is written `ψ = (1 + r)η + u` with `u ⊥ η`. The
//! linearization of the normalized flow in `u` is `-A u` with
//!
//! ```text
//! A u = P_W(λ_h u - ½Δ_h u - 3η² u),
//! ```
//!
//! and the flow converges exponentially exactly when `A` is positive
//! definite on symmetric `u ⊥ η`. [`min_eigenvalue_a`] measures the smallest
//! eigenvalue of `A` there (in the discrete L² metric).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::flow::{FlowTrace, GroundStateRef};
use crate::grid::{inner, inner_unchecked, l2_sq, laplacian, Grid, StateVector};

/// Largest cutoff index handled by the dense eigensolver.
pub const MAX_DENSE_K: usize = 2048;
/// Relative tolerance on `⟨u, η⟩` for inputs of [`operator_a`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// `P_η ψ = ⟨ψ, η⟩_h η`.
pub fn project_p_eta(psi: &StateVector, reference: &GroundStateRef) -> Result<StateVector> {
    let c = inner(psi, &reference.state)?;
    Ok(reference.state.scaled(c))
}

/// `P_W ψ = ψ - P_η ψ`.
pub fn project_p_w(psi: &StateVector, reference: &GroundStateRef) -> Result<StateVector> {
    let c = inner(psi, &reference.state)?;
    psi.add_scaled(-c, &reference.state)
}

/// Local coordinates `(r, u)` with `ψ = (1 + r)η + u`, `u ⊥ η`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub r: f64,
    pub u: StateVector,
}

impl Decomposition {
    /// `(1 + r)η + u`.
    pub fn reconstruct(&self, reference: &GroundStateRef) -> Result<StateVector> {
        self.u.add_scaled(1.0 + self.r, &reference.state)
    }
}

pub fn decompose(psi: &StateVector, reference: &GroundStateRef) -> Result<Decomposition> {
    let c = inner(psi, &reference.state)?;
    Ok(Decomposition {
        r: c - 1.0,
        u: psi.add_scaled(-c, &reference.state)?,
    })
}

/// `r(u) = -1 + √(1 - ‖u‖²)`, the radial coordinate putting
/// `(1 + r)η + u` on the unit sphere.
pub fn r_of_u(u: &StateVector) -> Result<f64> {
    let n = l2_sq(u);
    if n >= 1.0 {
        return Err(Error::OutOfChart { l2_sq: n });
    }
    Ok((1.0 - n).sqrt() - 1.0)
}

fn check_orthogonal(u: &StateVector, reference: &GroundStateRef) -> Result<()> {
    let overlap = inner(u, &reference.state)?;
    if overlap.abs() <= ORTHOGONALITY_TOL * l2_sq(u).sqrt() {
        Ok(())
    } else {
        Err(Error::NotOrthogonal { overlap })
    }
}

/// `A u = P_W(λ_h u - ½Δ_h u - 3η² u)` for `u ⊥ η`.
pub fn operator_a(u: &StateVector, reference: &GroundStateRef) -> Result<StateVector> {
    check_orthogonal(u, reference)?;
    let lambda = reference.lambda_h;
    let lap = laplacian(u);
    let eta = reference.state.values();
    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(lap.values())
        .zip(eta)
        .map(|((&uv, &l), &e)| lambda * uv - 0.5 * l - 3.0 * e * e * uv)
        .collect();
    let raw = StateVector::new(*u.grid(), values)?;
    project_p_w(&raw, reference)
}

/// Orthonormal (in `⟨·,·⟩_h`) coordinates on the symmetric subspace:
/// `q_0 = e_0/√h`, `q_j = (e_j + e_{-j})/√(2h)`.
struct SymmetricCoords {
    grid: Grid,
    w0: f64,
    wj: f64,
}

impl SymmetricCoords {
    fn new(grid: Grid) -> Self {
        Self {
            grid,
            w0: grid.h().sqrt(),
            wj: (2.0 * grid.h()).sqrt(),
        }
    }

    fn dim(&self) -> usize {
        self.grid.k() + 1
    }

    /// Coordinates of the symmetric part of `psi`.
    fn coords(&self, psi: &StateVector) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let j = j as isize;
                if j == 0 {
                    self.w0 * psi.at(0)
                } else {
                    self.wj * 0.5 * (psi.at(j) + psi.at(-j))
                }
            })
            .collect()
    }

    fn state(&self, c: &[f64]) -> StateVector {
        let k = self.grid.k() as isize;
        let values = (-k..=k)
            .map(|l| {
                let j = l.unsigned_abs();
                if j == 0 {
                    c[0] / self.w0
                } else {
                    c[j] / self.wj
                }
            })
            .collect();
        StateVector::from_raw(self.grid, values)
    }
}

/// Householder reflector `I - 2vvᵀ/(vᵀv)` sending the unit vector `c` to a
/// multiple of `e_0`; its columns 1.. span the orthogonal complement of `c`.
struct Reflector {
    v: Vec<f64>,
    vtv: f64,
}

impl Reflector {
    fn new(c: &[f64]) -> Self {
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = c.to_vec();
        v[0] += norm.copysign(c[0]);
        let vtv = v.iter().map(|x| x * x).sum();
        Self { v, vtv }
    }

    fn apply(&self, x: &mut [f64]) {
        let dot: f64 = self.v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / self.vtv;
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= f * vi;
        }
    }

    fn column(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.v.len()];
        e[i] = 1.0;
        self.apply(&mut e);
        e
    }
}

/// Orthonormal basis of symmetric `u ⊥ η` (K vectors).
pub fn symmetric_w_basis(reference: &GroundStateRef) -> Vec<StateVector> {
    let sc = SymmetricCoords::new(reference.grid);
    let reflector = Reflector::new(&sc.coords(&reference.state));
    (1..sc.dim())
        .map(|i| sc.state(&reflector.column(i)))
        .collect()
}

/// Smallest eigenvalue of a self-adjoint `op` restricted to symmetric
/// `u ⊥ η`, from the dense Gram matrix `⟨b_i, op(b_j)⟩_h` in an orthonormal
/// basis of that subspace.
pub fn min_eigenvalue_on_w<F>(reference: &GroundStateRef, op: F) -> Result<f64>
where
    F: Fn(&StateVector) -> Result<StateVector>,
{
    let k = reference.grid.k();
    if k > MAX_DENSE_K {
        return Err(Error::ProblemTooLarge {
            k,
            max: MAX_DENSE_K,
        });
    }
    let sc = SymmetricCoords::new(reference.grid);
    let reflector = Reflector::new(&sc.coords(&reference.state));
    let dim = sc.dim() - 1;

    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let b = sc.state(&reflector.column(j + 1));
        let mut y = sc.coords(&op(&b)?);
        // rows of Hᵀ = H
        reflector.apply(&mut y);
        for i in 0..dim {
            gram[(i, j)] = y[i + 1];
        }
    }
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?;
    eig.eigenvalues
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::Eigensolver("empty spectrum".into()))
}

/// Smallest eigenvalue of [`operator_a`] on symmetric `u ⊥ η`.
pub fn min_eigenvalue_a(reference: &GroundStateRef) -> Result<f64> {
    min_eigenvalue_on_w(reference, |u| operator_a(u, reference))
}

/// `⟨u, A u⟩_h / ‖u‖²_h`.
pub fn rayleigh_quotient_a(u: &StateVector, reference: &GroundStateRef) -> Result<f64> {
    let au = operator_a(u, reference)?;
    Ok(inner_unchecked(u, &au) / l2_sq(u))
}

/// Least-squares line through log-transformed data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Decay rate per unit time (exponential fits) or order (power fits).
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// The dependent values were constant; `r_squared` is reported as 0.
    pub degenerate: bool,
}

/// Selection of trace records entering an exponential fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorWindow {
    pub lo: f64,
    pub hi: f64,
    /// Records with `n` below this are transient and skipped.
    pub skip_first: usize,
}

impl Default for ErrorWindow {
    fn default() -> Self {
        Self {
            lo: 1e-10,
            hi: 1e-2,
            skip_first: 10,
        }
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    degenerate: bool,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Result<Line> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            usable: n,
            required: 3,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData {
            usable: 1,
            required: 3,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // relative to the data's own scale so rounding noise counts as constant
    let degenerate = syy <= (f64::EPSILON * my.abs()).powi(2) * nf;
    let (slope, r_squared) = if degenerate {
        (0.0, 0.0)
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (slope, (1.0 - ss_res / syy).clamp(0.0, 1.0))
    };
    Ok(Line {
        slope,
        intercept: if degenerate { my } else { intercept },
        r_squared,
        degenerate,
    })
}

/// Fits `err_ref ≈ C e^{-r nτ}` on records inside `window`.
pub fn fit_exponential_rate(trace: &FlowTrace, tau: f64, window: ErrorWindow) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = trace
        .records
        .iter()
        .filter(|r| r.n >= window.skip_first)
        .filter_map(|r| r.err_ref.map(|e| (r.n, e)))
        .filter(|&(_, e)| e >= window.lo && e <= window.hi && e > 0.0)
        .map(|(n, e)| (n as f64 * tau, e.ln()))
        .unzip();
    let line = least_squares(&xs, &ys)?;
    Ok(RateFit {
        rate: -line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        points_used: xs.len(),
        degenerate: line.degenerate,
    })
}

/// Fits `error ≈ C·parameter^p`; `rate` holds the order `p`.
pub fn fit_power_slope(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(p, e)) = pairs.iter().find(|(p, e)| !(*p > 0.0 && *e > 0.0)) {
        return Err(Error::invalid(
            "pairs",
            format!("parameters and errors must be positive, got ({p}, {e})"),
        ));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(p, e)| (p.ln(), e.ln())).unzip();
    let line = least_squares(&xs, &ys)?;
    Ok(RateFit {
        rate: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        points_used: xs.len(),
        degenerate: line.degenerate,
    })
}
