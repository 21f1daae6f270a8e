//! Θ(γ) = inf_ξ μ₁(γ, ξ), the minimizing ξ(γ), the ground state φ_γ, its
//! moments, the reduced resolvent and the coefficients d₀..d₃ of the
//! weighted 1D family.
//!
//! Every published scalar is computed on two grids (Δ and Δ/2) and
//! Richardson-extrapolated.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robin_oscillator::{assemble, richardson, EigenPair1D, HalfLineGrid, RobinOperator, RobinParams, Sampled};
use crate::tridiag::SymTridiag;

pub const GAMMA_LIMIT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSettings {
    /// Coarse spacing; the fine level uses half of it.
    pub spacing: f64,
    /// Bound on the discrete band slope at the located minimum.
    pub stationarity_tol: f64,
}

impl Default for ThetaSettings {
    fn default() -> Self {
        ThetaSettings {
            spacing: 0.004,
            stationarity_tol: 1e-8,
        }
    }
}

/// Minimum of the discrete band function on one grid.
#[derive(Debug, Clone)]
pub struct BandMinimum {
    pub gamma: f64,
    pub xi: f64,
    pub op: RobinOperator,
    pub pair: EigenPair1D,
    /// Discrete ξ-derivative at `xi`.
    pub slope: f64,
    pub second: f64,
}

impl BandMinimum {
    pub fn mu(&self) -> f64 {
        self.pair.mu
    }

    pub fn gap(&self) -> f64 {
        self.second - self.pair.mu
    }

    pub fn moment(&self, k: i32) -> f64 {
        let xi = self.xi;
        self.pair.phi.weighted_square(|t| (t - xi).powi(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDiagnostics {
    pub spacing_coarse: f64,
    pub spacing_fine: f64,
    /// Largest |discrete band slope| at the two located minima.
    pub stationarity: f64,
    /// `ξ² - Θ - γ²` from the extrapolated values.
    pub relation_residual: f64,
    /// `(ξ² - Θ - γ²) φ(0)²`, the closed-form slope at the extrapolated minimum.
    pub f_formula: f64,
    /// Fine minus coarse Θ before extrapolation.
    pub theta_change: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub gamma: f64,
    pub theta: f64,
    pub xi_star: f64,
    pub phi0_sq: f64,
    /// `k ↦ ∫(t - ξ)^k φ² dt` for `k = 1, 2, 3`.
    pub moments: BTreeMap<u32, f64>,
    /// `(1/6)(1 + (γξ)²) φ(0)²`.
    pub m3: f64,
    pub gap: f64,
    pub diagnostics: ThetaDiagnostics,
    /// Fine-grid ground state.
    #[serde(skip)]
    pub profile: Option<Sampled>,
}

impl ThetaRecord {
    pub fn moment(&self, k: u32) -> f64 {
        self.moments[&k]
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma.abs() > GAMMA_LIMIT {
        return Err(Error::config(format!(
            "gamma = {gamma} outside the supported range [-{GAMMA_LIMIT}, {GAMMA_LIMIT}]"
        )));
    }
    Ok(())
}

struct Band {
    gamma: f64,
    grid: HalfLineGrid,
}

impl Band {
    fn eval(&self, xi: f64) -> Result<(RobinOperator, EigenPair1D, f64)> {
        let op = assemble(RobinParams::new(self.gamma, xi), self.grid)?;
        let pair = op.lowest_eigenpair()?;
        let slope = op.band_slope(&pair);
        Ok((op, pair, slope))
    }
}

/// Locate the minimum of the discrete band function `ξ ↦ μ₁(γ, ξ)`.
///
/// The upper end of the bracket moves out in steps of ½ until the slope turns
/// positive. Doubling can overshoot: for large γ the band is flat to rounding
/// past its minimum, and the slope there is noise.
/// golden-section search shrinks the bracket and a bracketed secant
/// (Illinois) iteration polishes the root of the slope.
pub fn minimize_band(gamma: f64, spacing: f64, stationarity_tol: f64) -> Result<BandMinimum> {
    check_gamma(gamma)?;
    let mut upper = 1.0;
    loop {
        let band = Band {
            gamma,
            grid: HalfLineGrid::for_xi(upper, spacing)?,
        };
        if band.eval(upper)?.2 > 0.0 {
            break;
        }
        upper += 0.5;
        if upper > 64.0 {
            return Err(Error::domain(format!(
                "band slope never changes sign on (0, 64] for gamma = {gamma}"
            )));
        }
    }
    let band = Band {
        gamma,
        grid: HalfLineGrid::for_xi(upper, spacing)?,
    };

    let mu_at = |x: f64| band.eval(x).map(|r| r.1.mu);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, upper);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = mu_at(c)?;
    let mut fd = mu_at(d)?;
    while b - a > 0.05 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mu_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mu_at(d)?;
        }
    }

    let mut sa = band.eval(a)?.2;
    let mut sb = band.eval(b)?.2;
    if !(sa < 0.0 && sb > 0.0) {
        a = 0.0;
        b = upper;
        sa = band.eval(a)?.2;
        sb = band.eval(b)?.2;
    }
    if !(sa < 0.0 && sb > 0.0) {
        return Err(Error::domain(format!(
            "no sign change of the band slope for gamma = {gamma}"
        )));
    }
    let mut side = 0i8;
    let mut best = None;
    for _ in 0..100 {
        let x = (a * sb - b * sa) / (sb - sa);
        let (op, pair, s) = band.eval(x)?;
        // A slope test alone stops too early for large γ, where the band
        // curvature at the minimum is of the order of φ(0)².
        let done = s == 0.0 || (b - a) < 1e-12;
        best = Some((x, op, pair, s));
        if done {
            break;
        }
        if s < 0.0 {
            a = x;
            sa = s;
            if side == -1 {
                sb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            sb = s;
            if side == 1 {
                sa *= 0.5;
            }
            side = 1;
        }
    }
    let (xi, op, pair, slope) = best.expect("at least one iteration");
    if slope.abs() > stationarity_tol {
        return Err(Error::solver("band minimum not stationary", slope.abs()));
    }
    let second = op.second_eigenvalue()?;
    Ok(BandMinimum {
        gamma,
        xi,
        op,
        pair,
        slope,
        second,
    })
}

/// Θ(γ) with default settings.
pub fn theta(gamma: f64) -> Result<ThetaRecord> {
    theta_with(gamma, &ThetaSettings::default())
}

pub fn theta_with(gamma: f64, settings: &ThetaSettings) -> Result<ThetaRecord> {
    let coarse = minimize_band(gamma, settings.spacing, settings.stationarity_tol)?;
    let fine = minimize_band(gamma, 0.5 * settings.spacing, settings.stationarity_tol)?;
    Ok(record_from_levels(gamma, &coarse, &fine))
}

fn record_from_levels(gamma: f64, coarse: &BandMinimum, fine: &BandMinimum) -> ThetaRecord {
    let r = |f: &dyn Fn(&BandMinimum) -> f64| richardson(f(coarse), f(fine));
    let theta = r(&|m| m.mu());
    let xi = r(&|m| m.xi);
    let phi0_sq = r(&|m| m.pair.phi0 * m.pair.phi0);
    let gap = r(&|m| m.gap());
    let mut moments = BTreeMap::new();
    for k in 1..=3u32 {
        moments.insert(k, r(&|m| m.moment(k as i32)));
    }
    let relation = xi * xi - theta - gamma * gamma;
    let diagnostics = ThetaDiagnostics {
        spacing_coarse: coarse.op.grid.spacing(),
        spacing_fine: fine.op.grid.spacing(),
        stationarity: coarse.slope.abs().max(fine.slope.abs()),
        relation_residual: relation,
        f_formula: relation * phi0_sq,
        theta_change: fine.mu() - coarse.mu(),
        max_residual: coarse.pair.residual.max(fine.pair.residual),
    };
    ThetaRecord {
        gamma,
        theta,
        xi_star: xi,
        phi0_sq,
        moments,
        m3: m3_closed_form(gamma, xi, phi0_sq),
        gap,
        diagnostics,
        profile: Some(fine.pair.phi.clone()),
    }
}

/// Records for a grid of γ values, evaluated in parallel; order is preserved.
pub fn theta_grid(gammas: &[f64], settings: &ThetaSettings) -> Vec<Result<ThetaRecord>> {
    gammas.par_iter().map(|g| theta_with(*g, settings)).collect()
}

/// Θ'(γ) = φ_γ(0)².
pub fn theta_derivative(record: &ThetaRecord) -> f64 {
    record.phi0_sq
}

pub fn moments(gamma: f64) -> Result<BTreeMap<u32, f64>> {
    Ok(theta(gamma)?.moments)
}

fn m3_closed_form(gamma: f64, xi: f64, phi0_sq: f64) -> f64 {
    let gx = gamma * xi;
    (1.0 + gx * gx) * phi0_sq / 6.0
}

/// `M₃(γ) = (1/6)(1 + (γξ(γ))²) φ_γ(0)²`.
pub fn m3_constant(record: &ThetaRecord) -> f64 {
    record.m3
}

/// Closed form `Θ/2 - (γ/4)φ(0)²` of the second moment.
pub fn second_moment_formula(record: &ThetaRecord) -> f64 {
    record.theta / 2.0 - record.gamma / 4.0 * record.phi0_sq
}

/// Closed form `(1/6)(1 - 2(γξ)²) φ(0)²` quoted for the third moment.
pub fn third_moment_formula(record: &ThetaRecord) -> f64 {
    let gx = record.gamma * record.xi_star;
    (1.0 - 2.0 * gx * gx) * record.phi0_sq / 6.0
}

/// Third moment from integrating `φ H' φ` by parts with the Robin condition:
/// `(1/6)(1 + 2γξ) φ(0)²`.
pub fn third_moment_by_parts(record: &ThetaRecord) -> f64 {
    (1.0 + 2.0 * record.gamma * record.xi_star) * record.phi0_sq / 6.0
}

/// `(H[γ] - Θ(γ))⁻¹` on the orthogonal complement of φ_γ, for one grid.
#[derive(Debug, Clone)]
pub struct Resolvent {
    min: BandMinimum,
    y0: Vec<f64>,
    left: Option<SymTridiag>,
    right: Option<SymTridiag>,
    pivot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOutput {
    pub u: Sampled,
    /// `|⟨f, φ⟩|`, removed before solving.
    pub projection_norm: f64,
    /// `‖(H - Θ)u - (f - ⟨f,φ⟩φ)‖` in L².
    pub residual: f64,
}

pub const MIN_GAP: f64 = 1e-6;

impl Resolvent {
    pub fn new(min: BandMinimum) -> Result<Self> {
        if min.gap() < MIN_GAP {
            return Err(Error::Conditioning(format!(
                "spectral gap {:.3e} below {MIN_GAP}",
                min.gap()
            )));
        }
        let y0 = min.op.to_symmetric(&min.pair.phi);
        // Pin the unknown where the ground state peaks: both remaining blocks
        // are Dirichlet-truncated problems whose spectra sit well above μ.
        let pivot = y0
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
            )
            .0;
        let m = min.op.matrix();
        let n = m.len();
        let block = |lo: usize, hi: usize| -> Option<SymTridiag> {
            if lo >= hi {
                return None;
            }
            Some(m.block(lo, hi))
        };
        let left = block(0, pivot);
        let right = block(pivot + 1, n);
        Ok(Resolvent {
            min,
            y0,
            left,
            right,
            pivot,
        })
    }

    pub fn for_gamma(gamma: f64, spacing: f64) -> Result<Self> {
        Resolvent::new(minimize_band(gamma, spacing, 1e-8)?)
    }

    pub fn minimum(&self) -> &BandMinimum {
        &self.min
    }

    pub fn grid(&self) -> HalfLineGrid {
        self.min.op.grid
    }

    pub fn ground_state(&self) -> &Sampled {
        &self.min.pair.phi
    }

    pub fn apply(&self, f: &Sampled) -> Result<ResolventOutput> {
        if f.len() != self.grid().n() || (f.spacing - self.grid().spacing()).abs() > 1e-15 {
            return Err(Error::config("right-hand side is not sampled on the resolvent grid"));
        }
        let op = &self.min.op;
        let mu = self.min.pair.mu;
        let mut g = op.to_symmetric(f);
        let proj: f64 = g.iter().zip(&self.y0).map(|(a, b)| a * b).sum();
        for (gi, yi) in g.iter_mut().zip(&self.y0) {
            *gi -= proj * yi;
        }
        let n = g.len();
        let mut z = vec![0.0; n];
        if let Some(l) = &self.left {
            let sol = l.solve_shifted_spd(mu, &g[..self.pivot])?;
            z[..self.pivot].copy_from_slice(&sol);
        }
        if let Some(r) = &self.right {
            let sol = r.solve_shifted_spd(mu, &g[self.pivot + 1..])?;
            z[self.pivot + 1..].copy_from_slice(&sol);
        }
        let c: f64 = z.iter().zip(&self.y0).map(|(a, b)| a * b).sum();
        for (zi, yi) in z.iter_mut().zip(&self.y0) {
            *zi -= c * yi;
        }
        let cz = op.matrix().apply(&z);
        let residual = cz
            .iter()
            .zip(&z)
            .zip(&g)
            .map(|((a, b), c)| (a - mu * b - c).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(ResolventOutput {
            u: op.to_samples(&z),
            projection_norm: proj.abs(),
            residual,
        })
    }
}

/// Reduced resolvent at the default fine spacing. `f` must be sampled on
/// [`Resolvent::grid`] of `Resolvent::for_gamma(gamma, spacing)`.
pub fn regularized_resolvent(gamma: f64, spacing: f64, f: &Sampled) -> Result<ResolventOutput> {
    Resolvent::for_gamma(gamma, spacing)?.apply(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCoeffs {
    pub alpha: f64,
    pub eta: f64,
    pub beta: f64,
    pub h: f64,
    /// `h^{α-1/2} η`.
    pub eta_tilde: f64,
    pub xi_star: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    /// `d₃` per unit β.
    pub d3_unit: f64,
}

impl PerturbationCoeffs {
    pub fn d3(&self) -> f64 {
        self.beta * self.d3_unit
    }
}

#[derive(Debug, Clone)]
pub struct PerturbationProfiles {
    pub u0: Sampled,
    pub u1: Sampled,
    pub u2: Sampled,
    pub u3: Sampled,
}

struct LevelCoeffs {
    min: BandMinimum,
    d1: f64,
    d2: f64,
    d3_unit: f64,
    u1: Sampled,
    res: Resolvent,
}

fn level_coeffs(eta_tilde: f64, spacing: f64) -> Result<LevelCoeffs> {
    let min = minimize_band(eta_tilde, spacing, 1e-8)?;
    let res = Resolvent::new(min.clone())?;
    let phi = &min.pair.phi;
    let xi = min.xi;
    let f = phi.map(|t, v| (t - xi) * v);
    let mut u1 = res.apply(&f)?.u;
    for v in u1.values.iter_mut() {
        *v *= 2.0;
    }
    let d1 = -2.0 * min.moment(1);
    let d2 = 1.0 - 2.0 * f.dot(&u1);
    // ∫φφ' by the midpoint rule on cells (telescopes to -φ(0)²/2).
    let vals = &phi.values;
    let mut phi_dphi = 0.0;
    for i in 0..vals.len() {
        let next = vals.get(i + 1).copied().unwrap_or(0.0);
        phi_dphi += 0.5 * (vals[i] + next) * (next - vals[i]);
    }
    let d3_unit = phi_dphi + min.moment(3);
    Ok(LevelCoeffs {
        min,
        d1,
        d2,
        d3_unit,
        u1,
        res,
    })
}

fn check_perturbation_input(alpha: f64, eta: f64, beta: f64, h: f64) -> Result<f64> {
    if !(alpha >= 0.5) {
        return Err(Error::config(format!("alpha = {alpha} must be at least 1/2")));
    }
    if !(eta.abs() <= 8.0 && beta.abs() <= 8.0) {
        return Err(Error::config("|eta| and |beta| must not exceed 8"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::config(format!("h = {h} must lie in (0, 1)")));
    }
    Ok(h.powf(alpha - 0.5) * eta)
}

/// d₀..d₃ of the expansion `μ ≈ d₀ + d₁δ + d₂δ² + d₃h^{1/2}` with `δ = ξ - ξ(η̃)`.
pub fn perturbation_coefficients(alpha: f64, eta: f64, beta: f64, h: f64) -> Result<PerturbationCoeffs> {
    perturbation_coefficients_with(alpha, eta, beta, h, &ThetaSettings::default())
}

pub fn perturbation_coefficients_with(
    alpha: f64,
    eta: f64,
    beta: f64,
    h: f64,
    settings: &ThetaSettings,
) -> Result<PerturbationCoeffs> {
    let eta_tilde = check_perturbation_input(alpha, eta, beta, h)?;
    let c = level_coeffs(eta_tilde, settings.spacing)?;
    let f = level_coeffs(eta_tilde, 0.5 * settings.spacing)?;
    Ok(PerturbationCoeffs {
        alpha,
        eta,
        beta,
        h,
        eta_tilde,
        xi_star: richardson(c.min.xi, f.min.xi),
        d0: richardson(c.min.mu(), f.min.mu()),
        d1: richardson(c.d1, f.d1),
        d2: richardson(c.d2, f.d2),
        d3_unit: richardson(c.d3_unit, f.d3_unit),
    })
}

/// The correctors u₀..u₃ on the fine grid.
pub fn perturbation_profiles(alpha: f64, eta: f64, beta: f64, h: f64) -> Result<PerturbationProfiles> {
    let eta_tilde = check_perturbation_input(alpha, eta, beta, h)?;
    let lc = level_coeffs(eta_tilde, 0.5 * ThetaSettings::default().spacing)?;
    let phi = lc.min.pair.phi.clone();
    let xi = lc.min.xi;
    let d2 = lc.d2;
    let d3 = beta * lc.d3_unit;

    let rhs2 = lc.u1.map(|t, v| 2.0 * (t - xi) * v);
    let mut rhs2 = rhs2;
    rhs2.axpy(-d2, &phi);
    let u2 = lc.res.apply(&rhs2)?.u;

    let dphi = derivative(&phi, eta_tilde);
    let mut rhs3 = Sampled {
        spacing: phi.spacing,
        values: phi
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = phi.t(i) - xi;
                beta * (dphi[i] + (s * s * s - xi * xi * s) * v) - d3 * v
            })
            .collect(),
    };
    for v in rhs3.values.iter_mut() {
        *v = -*v;
    }
    let u3 = lc.res.apply(&rhs3)?.u;
    Ok(PerturbationProfiles {
        u0: phi,
        u1: lc.u1,
        u2,
        u3,
    })
}

fn derivative(f: &Sampled, gamma: f64) -> Vec<f64> {
    let v = &f.values;
    let n = v.len();
    let d = f.spacing;
    (0..n)
        .map(|i| {
            if i == 0 {
                gamma * v[0]
            } else {
                let next = if i + 1 < n { v[i + 1] } else { 0.0 };
                (next - v[i - 1]) / (2.0 * d)
            }
        })
        .collect()
}
