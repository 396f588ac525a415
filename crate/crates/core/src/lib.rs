//! Ground states of the 1D focusing cubic nonlinear Schrödinger equation
//!
//! ```text
//! i ∂ₜψ = -½ ∂ₓₓψ - |ψ|²ψ
//! ```
//!
//! computed by the normalized gradient flow (the "imaginary time method"):
//! each iteration takes one implicit step of the parabolic flow
//! ∂ₜψ = ½Δψ + |ψ|²ψ and projects the result back onto the unit sphere of
//! the discrete L² norm.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: uniform lattice with a Dirichlet cutoff, the finite-difference
//!   Laplacian, discrete norms and the discrete Hamiltonian.
//! - [`soliton`]: the exact ground state `½ sech(x/2)`, its multiplier `1/8`,
//!   the piecewise-linear embedding of lattice vectors and the continuous H¹
//!   error measurement.
//! - [`integrators`]: one time step of the linearly implicit, semi-explicit and
//!   fully implicit schemes, the normalization, and the tridiagonal solver.
//! - [`flow`]: the iteration driver, the discrete ground state reference and a
//!   Runge-Kutta integrator of the continuous normalized flow.
//! - [`analysis`]: projectors and local coordinates around the ground state,
//!   the linearized operator and its smallest eigenvalue, and rate fitting.
//!
//! ```
//! use imagtime::{flow, grid::Grid};
//!
//! let grid = Grid::new(0.2, 100).unwrap();
//! let reference = flow::compute_ground_state(&grid, 0.5, 1e-12).unwrap();
//! assert!((reference.lambda_h - 0.125).abs() < 0.01);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod flow;
pub mod grid;
pub mod integrators;
pub mod soliton;

pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowRecord, FlowTrace, GroundStateRef, InitialData};
pub use grid::{Grid, StateVector};
pub use integrators::SchemeKind;
