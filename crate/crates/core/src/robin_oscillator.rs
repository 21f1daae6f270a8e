//! The half-line family `H[γ, ξ] = -d²/dt² + (t - ξ)²` with `u'(0) = γ u(0)`.
//!
//! Second-order finite differences on a uniform grid. The Robin condition
//! enters through a ghost node `φ₋₁ = φ₁ - 2Δγφ₀`; after scaling the boundary
//! row by 1/2 the operator is symmetric in the trapezoid inner product, and
//! we store it symmetrized (`y = √w · φ`) so the tridiagonal kernels apply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;

/// Minimum distance between the potential minimum and the truncation point.
pub const TAIL_MARGIN: f64 = 8.0;
pub const MIN_NODES: usize = 64;
pub const MAX_SPACING: f64 = 0.05;
pub const SOLVER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinParams {
    pub gamma: f64,
    pub xi: f64,
}

impl RobinParams {
    pub fn new(gamma: f64, xi: f64) -> Self {
        RobinParams { gamma, xi }
    }
}

/// Boundary condition at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Robin,
    /// `u(0) = 0`, the γ → +∞ limit.
    Dirichlet,
}

/// Uniform grid `t_i = iΔ`, `i = 0..n`, with a Dirichlet node at `t_n = t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLineGrid {
    t_max: f64,
    n: usize,
}

impl HalfLineGrid {
    pub fn new(t_max: f64, n: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::config(format!("t_max must be positive, got {t_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::config(format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        let g = HalfLineGrid { t_max, n };
        if g.spacing() > MAX_SPACING {
            return Err(Error::config(format!("spacing {} exceeds {MAX_SPACING}", g.spacing())));
        }
        Ok(g)
    }

    /// Grid with `t_max = max(12, ξ + 8)` and spacing at most `spacing`.
    pub fn for_xi(xi: f64, spacing: f64) -> Result<Self> {
        let t_max = (xi + TAIL_MARGIN).max(12.0);
        let n = (t_max / spacing).ceil() as usize;
        HalfLineGrid::new(t_max, n)
    }

    /// Same truncation, spacing halved.
    pub fn refined(&self) -> Self {
        HalfLineGrid {
            t_max: self.t_max,
            n: 2 * self.n,
        }
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Trapezoid weights on `t_0..t_{n-1}` (the last node carries a zero value).
    pub fn weights(&self) -> Vec<f64> {
        let d = self.spacing();
        let mut w = vec![d; self.n];
        w[0] = 0.5 * d;
        w
    }

    fn check_xi(&self, xi: f64) -> Result<()> {
        if self.t_max < xi + TAIL_MARGIN - 1e-12 {
            return Err(Error::config(format!(
                "t_max = {} is shorter than xi + {TAIL_MARGIN} = {}",
                self.t_max,
                xi + TAIL_MARGIN
            )));
        }
        Ok(())
    }
}

/// Nodal samples on a half-line grid, integrated with the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl Sampled {
    pub fn from_fn(grid: &HalfLineGrid, f: impl Fn(f64) -> f64) -> Self {
        Sampled {
            spacing: grid.spacing(),
            values: (0..grid.n()).map(|i| f(grid.node(i))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| self.weight(i) * v).sum()
    }

    pub fn dot(&self, other: &Sampled) -> f64 {
        assert_eq!(self.len(), other.len(), "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| self.weight(i) * a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `∫ g(t) f(t)² dt`, summed with compensation: the band slope is a
    /// near-cancelling sum whose true value can be far below rounding.
    pub fn weighted_square(&self, g: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(
            self.values
                .iter()
                .enumerate()
                .map(|(i, v)| self.weight(i) * g(self.t(i)) * v * v),
        )
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Sampled {
        Sampled {
            spacing: self.spacing,
            values: self.values.iter().enumerate().map(|(i, v)| f(self.t(i), *v)).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Sampled) {
        for (v, w) in self.values.iter_mut().zip(&x.values) {
            *v += a * w;
        }
    }

    /// Linear interpolation; zero beyond the last node.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.values[0];
        }
        let x = t / self.spacing;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            if i + 1 == self.values.len() {
                let f = x - i as f64;
                return self.values[i] * (1.0 - f);
            }
            return 0.0;
        }
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Cubic (Catmull-Rom) interpolation of value and derivative.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let n = self.values.len();
        let get = |k: isize| -> f64 {
            if k < 0 {
                // reflect through the first interval: linear extrapolation
                2.0 * self.values[0] - self.values[1]
            } else if (k as usize) < n {
                self.values[k as usize]
            } else {
                0.0
            }
        };
        let x = (t / self.spacing).max(0.0);
        let i = x.floor() as isize;
        if i as usize >= n {
            return (0.0, 0.0);
        }
        let u = x - i as f64;
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        let v = ((a * u + b) * u + c) * u + p1;
        let dv = ((3.0 * a * u + 2.0 * b) * u + c) / self.spacing;
        (v, dv)
    }
}

/// Symmetrized discrete operator for one `(γ, ξ)`.
#[derive(Debug, Clone)]
pub struct RobinOperator {
    pub params: RobinParams,
    pub grid: HalfLineGrid,
    pub boundary: Boundary,
    matrix: SymTridiag,
    /// `√w_i` for the unknowns (trapezoid weights).
    sqrt_w: Vec<f64>,
    /// Index of the first unknown node (1 under Dirichlet).
    first: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair1D {
    pub mu: f64,
    /// Samples on every grid node `t_0..t_{n-1}`; `phi.values[0] = 0` under Dirichlet.
    pub phi: Sampled,
    pub phi0: f64,
    /// `‖Cy - μy‖ / ‖C‖∞` for the symmetrized matrix.
    pub residual: f64,
}

/// Build the discrete operator with the Robin condition `u'(0) = γu(0)`.
pub fn assemble(params: RobinParams, grid: HalfLineGrid) -> Result<RobinOperator> {
    assemble_with(params, grid, Boundary::Robin)
}

pub fn assemble_dirichlet(xi: f64, grid: HalfLineGrid) -> Result<RobinOperator> {
    assemble_with(RobinParams::new(f64::INFINITY, xi), grid, Boundary::Dirichlet)
}

pub fn assemble_with(params: RobinParams, grid: HalfLineGrid, boundary: Boundary) -> Result<RobinOperator> {
    if !params.xi.is_finite() || (boundary == Boundary::Robin && !params.gamma.is_finite()) {
        return Err(Error::config("Robin parameters must be finite"));
    }
    grid.check_xi(params.xi)?;
    let d = grid.spacing();
    let inv = 1.0 / (d * d);
    let n = grid.n();
    let pot = |i: usize| {
        let s = grid.node(i) - params.xi;
        s * s
    };
    match boundary {
        Boundary::Robin => {
            let mut off = vec![-inv; n - 1];
            off[0] = -std::f64::consts::SQRT_2 * inv;
            let mut excess: Vec<f64> = (0..n).map(pot).collect();
            excess[0] += (2.0 - std::f64::consts::SQRT_2) * inv + 2.0 * d * params.gamma * inv;
            excess[1] += (1.0 - std::f64::consts::SQRT_2) * inv;
            excess[n - 1] += inv;
            let sqrt_w = grid.weights().iter().map(|w| w.sqrt()).collect();
            Ok(RobinOperator {
                params,
                grid,
                boundary,
                matrix: SymTridiag::from_excess(excess, off),
                sqrt_w,
                first: 0,
            })
        }
        Boundary::Dirichlet => {
            let mut excess: Vec<f64> = (1..n).map(pot).collect();
            excess[0] += inv;
            excess[n - 2] += inv;
            let off = vec![-inv; n - 2];
            Ok(RobinOperator {
                params,
                grid,
                boundary,
                matrix: SymTridiag::from_excess(excess, off),
                sqrt_w: vec![d.sqrt(); n - 1],
                first: 1,
            })
        }
    }
}

impl RobinOperator {
    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// `√w` for the unknowns.
    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    pub fn first_unknown(&self) -> usize {
        self.first
    }

    /// Map a symmetrized vector back to nodal samples.
    pub fn to_samples(&self, y: &[f64]) -> Sampled {
        let mut values = vec![0.0; self.grid.n()];
        for (k, v) in y.iter().enumerate() {
            values[k + self.first] = v / self.sqrt_w[k];
        }
        Sampled {
            spacing: self.grid.spacing(),
            values,
        }
    }

    /// Nodal samples to the symmetrized representation.
    pub fn to_symmetric(&self, f: &Sampled) -> Vec<f64> {
        (0..self.sqrt_w.len())
            .map(|k| f.values[k + self.first] * self.sqrt_w[k])
            .collect()
    }

    /// Discrete quadratic form `Σ(Δu)²/Δ + Σ w V u² + γu(0)²` of nodal samples.
    pub fn quadratic_form(&self, u: &Sampled) -> f64 {
        let y = self.to_symmetric(u);
        let cy = self.matrix.apply(&y);
        y.iter().zip(&cy).map(|(a, b)| a * b).sum()
    }

    pub fn lowest_eigenpair(&self) -> Result<EigenPair1D> {
        let (mu, mut y, residual) = self.matrix.lowest_eigenpair()?;
        if residual > SOLVER_TOL {
            return Err(Error::solver("lowest eigenpair did not converge", residual));
        }
        // Sign convention: φ(0) ≥ 0, or φ'(0) > 0 when φ(0) = 0.
        if y[0] < 0.0 {
            for v in y.iter_mut() {
                *v = -*v;
            }
        }
        let phi = self.to_samples(&y);
        let phi0 = phi.values[0];
        Ok(EigenPair1D {
            mu,
            phi,
            phi0,
            residual,
        })
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.matrix.eigenvalue(k)
    }

    pub fn second_eigenvalue(&self) -> Result<f64> {
        self.matrix.eigenvalue(1)
    }

    /// Exact ξ-derivative of the discrete lowest eigenvalue (Hellmann-Feynman):
    /// `-2 Σ w (t - ξ) φ²`.
    pub fn band_slope(&self, pair: &EigenPair1D) -> f64 {
        let xi = self.params.xi;
        -2.0 * pair.phi.weighted_square(|t| t - xi)
    }
}

/// `(ξ² - μ - γ²) φ(0)²`, the closed-form ξ-derivative of the lowest band.
pub fn dmu_dxi(params: RobinParams, grid: HalfLineGrid) -> Result<f64> {
    let op = assemble(params, grid)?;
    let pair = op.lowest_eigenpair()?;
    Ok(f_formula(params, &pair))
}

pub fn f_formula(params: RobinParams, pair: &EigenPair1D) -> f64 {
    (params.xi * params.xi - pair.mu - params.gamma * params.gamma) * pair.phi0 * pair.phi0
}

/// Lowest eigenvalue with the default truncation for `ξ` and the given spacing.
pub fn lowest_eigenvalue(params: RobinParams, spacing: f64) -> Result<f64> {
    let grid = HalfLineGrid::for_xi(params.xi, spacing)?;
    Ok(assemble(params, grid)?.lowest_eigenpair()?.mu)
}

/// Neumaier summation.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Richardson extrapolation of a second-order quantity computed at `Δ` and `Δ/2`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(xi: f64) -> HalfLineGrid {
        HalfLineGrid::for_xi(xi, 0.005).unwrap()
    }

    fn extrapolated(params: RobinParams, k: usize) -> f64 {
        let g = grid(params.xi);
        let a = assemble(params, g).unwrap().eigenvalue(k).unwrap();
        let b = assemble(params, g.refined()).unwrap().eigenvalue(k).unwrap();
        richardson(a, b)
    }

    #[test]
    fn neumann_oscillator_ground_energy_is_one() {
        assert!((extrapolated(RobinParams::new(0.0, 0.0), 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn neumann_second_level_is_five() {
        // even Hermite functions: levels 1, 5, 9, ...
        let mu2 = extrapolated(RobinParams::new(0.0, 0.0), 1);
        assert!((mu2 - 5.0).abs() < 1e-5, "{mu2}");
    }

    #[test]
    fn dirichlet_levels_are_odd_hermite() {
        let g = grid(0.0);
        let a = assemble_dirichlet(0.0, g).unwrap();
        let b = assemble_dirichlet(0.0, g.refined()).unwrap();
        let mu1 = richardson(a.eigenvalue(0).unwrap(), b.eigenvalue(0).unwrap());
        let mu2 = richardson(a.second_eigenvalue().unwrap(), b.second_eigenvalue().unwrap());
        assert!((mu1 - 3.0).abs() < 1e-6, "{mu1}");
        assert!((mu2 - 7.0).abs() < 1e-4, "{mu2}");
        let pair = b.lowest_eigenpair().unwrap();
        assert_eq!(pair.phi0, 0.0);
        assert!(pair.phi.values[1] > 0.0);
    }

    #[test]
    fn half_gaussian_ground_state() {
        let g = grid(0.0).refined();
        let pair = assemble(RobinParams::new(0.0, 0.0), g)
            .unwrap()
            .lowest_eigenpair()
            .unwrap();
        let c = (4.0 / std::f64::consts::PI).powf(0.25);
        for i in (0..2000).step_by(97) {
            let t = g.node(i);
            assert!((pair.phi.values[i] - c * (-t * t / 2.0).exp()).abs() < 1e-4);
        }
        assert!((pair.phi.norm() - 1.0).abs() < 1e-12);
        assert!(pair.phi.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn exponential_test_function_bound() {
        // Rayleigh quotient of e^{γt} at ξ = 0 is -γ² + 1/(2γ²); the ground
        // energy must sit below it.
        let gamma: f64 = -1.0;
        let g = grid(0.0).refined();
        let op = assemble(RobinParams::new(gamma, 0.0), g).unwrap();
        let u = Sampled::from_fn(&g, |t| (gamma * t).exp());
        let rq = op.quadratic_form(&u) / u.dot(&u);
        let exact = -gamma * gamma + 1.0 / (2.0 * gamma * gamma);
        assert!((rq - exact).abs() < 1e-4, "{rq} vs {exact}");
        let mu = op.lowest_eigenpair().unwrap().mu;
        assert!(mu <= rq);
    }

    #[test]
    fn band_tends_to_one_for_large_xi() {
        let mu = lowest_eigenvalue(RobinParams::new(0.0, 5.0), 0.005).unwrap();
        assert!((mu - 1.0).abs() < 1e-3);
        let mu_neg = lowest_eigenvalue(RobinParams::new(0.0, -6.0), 0.005).unwrap();
        assert!(mu_neg > 20.0);
    }

    #[test]
    fn f_formula_matches_finite_difference() {
        for &(gamma, xi) in &[(0.0, 0.0), (0.0, 0.5), (-1.0, 1.2), (1.0, 1.5), (0.5, 2.0)] {
            let p = RobinParams::new(gamma, xi);
            let g = HalfLineGrid::for_xi(xi + 1.0, 0.002).unwrap();
            let f = dmu_dxi(p, g).unwrap();
            let e = 1e-3;
            let mp = assemble(RobinParams::new(gamma, xi + e), g)
                .unwrap()
                .eigenvalue(0)
                .unwrap();
            let mm = assemble(RobinParams::new(gamma, xi - e), g)
                .unwrap()
                .eigenvalue(0)
                .unwrap();
            let fd = (mp - mm) / (2.0 * e);
            assert!((f - fd).abs() < 1e-4, "γ={gamma} ξ={xi}: {f} vs {fd}");
        }
    }

    #[test]
    fn band_slope_is_exact_discrete_derivative() {
        let p = RobinParams::new(0.3, 0.9);
        let g = HalfLineGrid::for_xi(2.0, 0.01).unwrap();
        let op = assemble(p, g).unwrap();
        let s = op.band_slope(&op.lowest_eigenpair().unwrap());
        let e = 1e-4;
        let mp = assemble(RobinParams::new(0.3, 0.9 + e), g)
            .unwrap()
            .eigenvalue(0)
            .unwrap();
        let mm = assemble(RobinParams::new(0.3, 0.9 - e), g)
            .unwrap()
            .eigenvalue(0)
            .unwrap();
        assert!((s - (mp - mm) / (2.0 * e)).abs() < 1e-7);
    }

    #[test]
    fn boundary_condition_is_satisfied() {
        for gamma in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let g = HalfLineGrid::for_xi(1.0, 0.004).unwrap();
            let pair = assemble(RobinParams::new(gamma, 1.0), g)
                .unwrap()
                .lowest_eigenpair()
                .unwrap();
            let d = g.spacing();
            let v = &pair.phi.values;
            let dphi0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * d);
            assert!((dphi0 - gamma * v[0]).abs() <= 10.0 * d * pair.phi.norm(), "γ={gamma}");
        }
    }

    #[test]
    fn second_order_self_convergence() {
        let p = RobinParams::new(-0.5, 0.8);
        let mus: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|s| lowest_eigenvalue(p, *s).unwrap())
            .collect();
        let r = (mus[0] - mus[1]) / (mus[1] - mus[2]);
        assert!((r - 4.0).abs() < 0.2, "ratio {r}");
    }

    #[test]
    fn rejects_short_truncation() {
        let g = HalfLineGrid::new(10.0, 1000).unwrap();
        assert!(assemble(RobinParams::new(0.0, 3.0), g).is_err());
        assert!(HalfLineGrid::new(12.0, 100).is_err());
        assert!(HalfLineGrid::new(1.0, 10).is_err());
    }

    #[test]
    fn boundary_value_decays_with_xi() {
        for gamma in [-1.0, 0.0, 1.0] {
            let at = |xi: f64| {
                let g = HalfLineGrid::for_xi(xi, 0.005).unwrap();
                assemble(RobinParams::new(gamma, xi), g)
                    .unwrap()
                    .lowest_eigenpair()
                    .unwrap()
                    .phi0
                    .powi(2)
            };
            assert!(at(6.0) * 10.0 < at(3.0), "γ={gamma}");
        }
    }
}
