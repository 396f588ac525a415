//! The exact ground state `η(x) = ½ sech(x/2)` and tools to compare lattice
//! vectors against it in the continuous H¹(ℝ) norm.

use crate::grid::{Grid, StateVector};

/// Multiplier of `-½η'' - η³ = -λη` for `η = ½ sech(x/2)`.
pub const LAMBDA_EXACT: f64 = 0.125;

/// Beyond this radius the tail of `η² + η'²` is below `e^{-80}` and ignored.
pub const TAIL_EXTENT: f64 = 80.0;

/// `½ sech(x/2)`, evaluated as `e^{-|x|/2} / (1 + e^{-|x|})`.
pub fn eta(x: f64) -> f64 {
    let a = x.abs();
    (-0.5 * a).exp() / (1.0 + (-a).exp())
}

/// `η'(x) = -¼ sech(x/2) tanh(x/2)`.
pub fn eta_prime(x: f64) -> f64 {
    let a = x.abs();
    let e = (-a).exp();
    let tanh_half = ((1.0 - e) / (1.0 + e)).copysign(x);
    -0.5 * eta(x) * tanh_half
}

pub fn lambda_exact() -> f64 {
    LAMBDA_EXACT
}

/// Anything evaluable together with its first derivative.
pub trait ContinuousProfile {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// The exact soliton as a [`ContinuousProfile`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Soliton;

impl ContinuousProfile for Soliton {
    fn value(&self, x: f64) -> f64 {
        eta(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        eta_prime(x)
    }
}

/// `η(ℓh)` at every node of `grid`.
pub fn sample_soliton(grid: &Grid) -> StateVector {
    let k = grid.k() as isize;
    let values = (-k..=k).map(|l| eta(grid.x(l.abs()))).collect();
    StateVector::from_raw(*grid, values)
}

/// Hat function `s(x) = max(0, 1 - |x|)`.
pub fn hat(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// Piecewise-linear interpolant `Σ ψ_j s(x/h - j)` of a lattice vector.
#[derive(Debug, Clone, Copy)]
pub struct PiecewiseLinear<'a> {
    psi: &'a StateVector,
}

/// The embedding `i_h` of a lattice vector into H¹(ℝ).
pub fn embed(psi: &StateVector) -> PiecewiseLinear<'_> {
    PiecewiseLinear { psi }
}

impl PiecewiseLinear<'_> {
    /// Cell index `j` with `x ∈ [jh, (j+1)h)` and local coordinate in `[0, 1)`.
    fn locate(&self, x: f64) -> (isize, f64) {
        let s = x / self.psi.grid().h();
        let j = s.floor();
        (j as isize, s - j)
    }
}

impl ContinuousProfile for PiecewiseLinear<'_> {
    fn value(&self, x: f64) -> f64 {
        let k = self.psi.grid().k() as f64;
        if !x.is_finite() || (x / self.psi.grid().h()).abs() >= k + 1.0 {
            return 0.0;
        }
        let (j, t) = self.locate(x);
        self.psi.at(j) * (1.0 - t) + self.psi.at(j + 1) * t
    }

    /// Right derivative; the interpolant has kinks at the nodes.
    fn derivative(&self, x: f64) -> f64 {
        let k = self.psi.grid().k() as f64;
        if !x.is_finite() || (x / self.psi.grid().h()).abs() >= k + 1.0 {
            return 0.0;
        }
        let (j, _) = self.locate(x);
        (self.psi.at(j + 1) - self.psi.at(j)) / self.psi.grid().h()
    }
}

/// Gauss-Legendre nodes and weights on the reference interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be >= 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, z);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        len * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + len * t))
            .sum::<f64>()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(4)
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let dp = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// `‖i_h ψ - η‖_{H¹(ℝ)}` by 4-point Gauss-Legendre quadrature per cell.
pub fn h1_error_vs_exact(psi: &StateVector) -> f64 {
    h1_error_vs_exact_with(psi, &QuadratureRule::default())
}

pub fn h1_error_vs_exact_with(psi: &StateVector, rule: &QuadratureRule) -> f64 {
    let grid = psi.grid();
    let h = grid.h();
    let k = grid.k() as isize;

    // cells [jh, (j+1)h] covering the support of i_h ψ
    let mut total = 0.0;
    for j in -k - 1..=k {
        let (left, right) = (psi.at(j), psi.at(j + 1));
        let slope = (right - left) / h;
        let a = grid.x(j);
        total += rule.integrate(a, grid.x(j + 1), |x| {
            let v = left + slope * (x - a) - eta(x);
            let d = slope - eta_prime(x);
            v * v + d * d
        });
    }

    // both tails, where i_h ψ vanishes
    let start = grid.x(k + 1);
    let stop = start.max(TAIL_EXTENT);
    let mut tail = 0.0;
    let mut a = start;
    while a < stop {
        let b = (a + h).min(stop);
        tail += rule.integrate(a, b, |x| {
            let v = eta(x);
            let d = eta_prime(x);
            v * v + d * d
        });
        a = b;
    }

    (total + 2.0 * tail).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l2_sq;

    #[test]
    fn eta_basic_values() {
        assert_eq!(eta(0.0), 0.5);
        for &x in &[0.3, 1.7, 12.0, 55.5] {
            assert_eq!(eta(x), eta(-x));
            assert!(eta(x) > 0.0 && eta(x) < 0.5);
        }
        let far = eta(100.0);
        assert!(far.is_finite() && far > 0.0 && far < 1e-20);
        // 0.5 sech(50) = 1/(e^50 + e^-50)
        let oracle = 1.0 / (50f64.exp() + (-50f64).exp());
        assert!((far - oracle).abs() <= 1e-15 * oracle);
        assert!(eta(1e6).is_finite());
    }

    #[test]
    fn eta_prime_matches_closed_form() {
        for &x in &[-7.0, -0.4, 0.0, 0.9, 3.3] {
            let y: f64 = x / 2.0;
            let expected = -0.25 * y.tanh() / y.cosh();
            assert!((eta_prime(x) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gauss_legendre_rules() {
        for order in [1, 2, 4, 8, 9] {
            let rule = QuadratureRule::gauss_legendre(order);
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            // exact up to degree 2n-1
            let deg = 2 * order - 1;
            let got = rule.integrate(-1.0, 2.0, |x| x.powi(deg as i32));
            let expected =
                (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn sampled_soliton_is_symmetric_with_unit_mass() {
        let g = Grid::new(0.1, 400).unwrap();
        let s = sample_soliton(&g);
        assert_eq!(s.at(0), 0.5);
        assert_eq!(s.at(400), s.at(-400));
        assert_eq!(s.asymmetry(), 0.0);
        assert!((l2_sq(&s) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn embedding_nodes_midpoints_and_support() {
        let g = Grid::new(0.25, 8).unwrap();
        let psi = StateVector::from_fn(g, |x| (x - 0.3).sin() + 2.0).unwrap();
        let f = embed(&psi);
        for j in -8..=8 {
            assert!((f.value(g.x(j)) - psi.at(j)).abs() < 1e-14);
        }
        for j in -8..8 {
            let mid = (j as f64 + 0.5) * g.h();
            let expected = 0.5 * (psi.at(j) + psi.at(j + 1));
            assert!((f.value(mid) - expected).abs() < 1e-14);
        }
        // the last cells ramp down to zero at ±(K+1)h
        assert!((f.value(8.5 * 0.25) - 0.5 * psi.at(8)).abs() < 1e-14);
        assert_eq!(f.value(10.0 * 0.25), 0.0);
        assert_eq!(f.value(-10.0 * 0.25), 0.0);
        assert_eq!(f.derivative(10.0 * 0.25), 0.0);
        assert!(hat(0.0) == 1.0 && hat(1.0) == 0.0 && hat(-0.5) == 0.5);
    }

    #[test]
    fn h1_error_of_zero_is_norm_of_eta() {
        let g = Grid::new(0.1, 400).unwrap();
        let err = h1_error_vs_exact(&StateVector::zeros(g));
        assert!((err - (13.0f64 / 12.0).sqrt()).abs() < 1e-10, "{err}");
    }

    #[test]
    fn h1_error_of_sampled_soliton_is_first_order() {
        let coarse = Grid::with_extent(0.2, 40.0).unwrap();
        let fine = Grid::with_extent(0.1, 40.0).unwrap();
        let e_coarse = h1_error_vs_exact(&sample_soliton(&coarse));
        let e_fine = h1_error_vs_exact(&sample_soliton(&fine));
        assert!(e_fine > 0.0 && e_fine < 0.05);
        assert!(e_fine < e_coarse);
        let ratio = e_coarse / e_fine;
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quadrature_order_doubling_is_converged() {
        let g = Grid::new(0.1, 400).unwrap();
        let s = sample_soliton(&g);
        let e4 = h1_error_vs_exact_with(&s, &QuadratureRule::gauss_legendre(4));
        let e8 = h1_error_vs_exact_with(&s, &QuadratureRule::gauss_legendre(8));
        assert!(((e4 - e8) / e8).abs() < 1e-8);
    }
}
