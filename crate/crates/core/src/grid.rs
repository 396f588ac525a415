//! Uniform lattice `x_ℓ = ℓh`, `|ℓ| ≤ K`, with homogeneous Dirichlet values
//! beyond the cutoff, and the discrete operators living on it.
//!
//! Every operator works on the full `2K+1` values. Symmetry `ψ^ℓ = ψ^{-ℓ}`
//! is never assumed by storage; it is preserved by the stencils and checked
//! with [`StateVector::asymmetry`].
//!
//! The discrete Hamiltonian [`hamiltonian_h`] and the H¹ norm
//! [`h1_norm_sq`] use the weights of their defining lattice formulas
//! (gradient weight 1 and quartic weight ½ in the energy, factor 2 on the
//! difference term of the norm). They are not rescaled to match the
//! continuous energy `¼∫|∂ₓψ|² - |ψ|⁴`.

use crate::error::{Error, Result};

/// Mesh spacing `h` and cutoff index `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    h: f64,
    k: usize,
}

impl Grid {
    pub fn new(h: f64, k: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(
                "h",
                format!("must be finite and > 0, got {h}"),
            ));
        }
        if k < 1 {
            return Err(Error::invalid("K", "must be >= 1"));
        }
        Ok(Self { h, k })
    }

    /// Grid with `K = round(extent / h)`, i.e. cutoff at `|x| ≈ extent`.
    pub fn with_extent(h: f64, extent: f64) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::invalid(
                "extent",
                format!("must be > 0, got {extent}"),
            ));
        }
        let k = (extent / h).round();
        if !(k >= 1.0) {
            return Err(Error::invalid("extent", "fewer than one node on each side"));
        }
        Self::new(h, k as usize)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of stored nodes, `2K+1`.
    #[inline]
    pub fn len(&self) -> usize {
        2 * self.k + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Storage index of lattice index `ℓ`.
    #[inline]
    pub fn index(&self, l: isize) -> usize {
        debug_assert!(l.unsigned_abs() <= self.k);
        (l + self.k as isize) as usize
    }

    /// Lattice index of storage index `i`.
    #[inline]
    pub fn lattice(&self, i: usize) -> isize {
        i as isize - self.k as isize
    }

    /// Node coordinate `ℓh`, computed as a single product.
    #[inline]
    pub fn x(&self, l: isize) -> f64 {
        l as f64 * self.h
    }

    /// Node coordinates in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(self.lattice(i)))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                h_left: self.h,
                k_left: self.k,
                h_right: other.h,
                k_right: other.k,
            })
        }
    }
}

/// Real node values `ψ^ℓ`, `|ℓ| ≤ K`, on a [`Grid`]; zero outside by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    grid: Grid,
    values: Vec<f64>,
}

impl StateVector {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Unchecked constructor for values produced by this crate's operators.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    /// Samples `f(ℓh)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    /// Unit spike at lattice index `l`.
    pub fn spike(grid: Grid, l: isize, height: f64) -> Self {
        let mut v = Self::zeros(grid);
        v.values[grid.index(l)] = height;
        v
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at lattice index `l`; zero beyond the cutoff.
    #[inline]
    pub fn at(&self, l: isize) -> f64 {
        if l.unsigned_abs() > self.grid.k {
            0.0
        } else {
            self.values[self.grid.index(l)]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_ℓ |ψ^ℓ - ψ^{-ℓ}|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &StateVector) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.zip_map(other, |a, b| a + c * b))
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn zip_map(&self, other: &StateVector, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `(Δ_h ψ)^ℓ = (ψ^{ℓ+1} + ψ^{ℓ-1} - 2ψ^ℓ)/h²` with zero neighbours past the cutoff.
pub fn laplacian(psi: &StateVector) -> StateVector {
    let v = &psi.values;
    let n = v.len();
    let inv_h2 = 1.0 / (psi.grid.h * psi.grid.h);
    let out = (0..n)
        .map(|i| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            // grouped as two differences so the rounding scales with the
            // differences rather than with ψ itself
            ((right - v[i]) + (left - v[i])) * inv_h2
        })
        .collect();
    StateVector::from_raw(psi.grid, out)
}

/// `N_h(ψ) = h Σ (ψ^ℓ)²`.
pub fn l2_sq(psi: &StateVector) -> f64 {
    psi.grid.h * psi.values.iter().map(|v| v * v).sum::<f64>()
}

/// `⟨ψ, φ⟩_h = h Σ ψ^ℓ φ^ℓ`.
pub fn inner(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    psi.grid.check_same(&phi.grid)?;
    Ok(inner_unchecked(psi, phi))
}

#[inline]
pub(crate) fn inner_unchecked(psi: &StateVector, phi: &StateVector) -> f64 {
    psi.grid.h
        * psi
            .values
            .iter()
            .zip(&phi.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

/// Forward differences `ψ^{j+1} - ψ^j` over every `j` touching the support,
/// i.e. `j = -K-1, …, K` (2K+2 terms).
fn forward_differences(psi: &StateVector) -> impl Iterator<Item = f64> + '_ {
    let k = psi.grid.k as isize;
    (-k - 1..=k).map(move |j| psi.at(j + 1) - psi.at(j))
}

/// Discrete H¹ norm squared: `2h Σ |ψ^{j+1}-ψ^j|²/h² + h Σ |ψ^j|²`.
pub fn h1_norm_sq(psi: &StateVector) -> f64 {
    let h = psi.grid.h;
    let grad: f64 = forward_differences(psi).map(|d| d * d).sum();
    2.0 * grad / h + l2_sq(psi)
}

/// `H_h(ψ) = h Σ [ |(ψ^j - ψ^{j-1})/h|² - |ψ^j|⁴/2 ]`.
pub fn hamiltonian_h(psi: &StateVector) -> f64 {
    let h = psi.grid.h;
    let grad: f64 = forward_differences(psi).map(|d| d * d).sum();
    let quartic: f64 = psi.values.iter().map(|v| v.powi(4)).sum();
    grad / h - 0.5 * h * quartic
}
