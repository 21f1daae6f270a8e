use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::theta_profile::theta;

/// Asymptotic models for `mu1(h)`. Each subtracts an exactly computed leading
/// term and fits only the correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    /// `mu1 − hΘ(η_h)` against `h^{3/2}`.
    Leading,
    /// α = 1: `mu1 − hΘ₀` against `h^{3/2}, h²`; the first coefficient is
    /// `−2M₃(κ − 3γ)_max`.
    TwoTermAlpha1,
    /// ½ < α < 1: `mu1 − hΘ₀` against `h^{α+½}, h^{3/2}`; the first
    /// coefficient is `6M₃γ₀`.
    TwoTermAlphaMid,
    /// Constant γ: `mu1 − hΘ(η_h)` against `h^{3/2}, h²`; the first
    /// coefficient is `−2M₃(η)κ_max`.
    TwoTermGammaConst,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::Leading,
        ModelId::TwoTermAlpha1,
        ModelId::TwoTermAlphaMid,
        ModelId::TwoTermGammaConst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Leading => "leading",
            ModelId::TwoTermAlpha1 => "two-term-alpha1",
            ModelId::TwoTermAlphaMid => "two-term-alpha-mid",
            ModelId::TwoTermGammaConst => "two-term-gamma-const",
        }
    }
}

/// Exact term removed before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeadingTerm {
    /// `hΘ(h^{α−½} min γ)`.
    ThetaAtEta,
    /// `hΘ(0)`.
    ThetaZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub model: ModelId,
    pub leading: LeadingTerm,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub h: Vec<f64>,
    /// `mu1 − leading` per case.
    pub corrections: Vec<f64>,
    /// Raw least-squares residuals.
    pub residuals: Vec<f64>,
    /// Residuals divided by `h^{p₀}` of the first correction term, i.e. in
    /// units of its coefficient.
    pub normalized_residuals: Vec<f64>,
    /// RMS of the normalized residuals.
    pub residual_rms: f64,
}

impl Fit {
    /// Coefficient of the first correction term.
    pub fn primary(&self) -> f64 {
        self.coefficients[0]
    }
}

fn model_spec(report: &SweepReport, model: ModelId) -> Result<(LeadingTerm, Vec<f64>)> {
    let t = &report.template;
    let alpha = t.alpha;
    Ok(match model {
        ModelId::Leading => (LeadingTerm::ThetaAtEta, vec![1.5]),
        ModelId::TwoTermAlpha1 => {
            if (alpha - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!("model two-term-alpha1 needs α = 1, got {alpha}")));
            }
            (LeadingTerm::ThetaZero, vec![1.5, 2.0])
        }
        ModelId::TwoTermAlphaMid => {
            if !(alpha > 0.5 && alpha < 1.0) {
                return Err(Error::config(format!(
                    "model two-term-alpha-mid needs ½ < α < 1, got {alpha}"
                )));
            }
            (LeadingTerm::ThetaZero, vec![alpha + 0.5, 1.5])
        }
        ModelId::TwoTermGammaConst => {
            if !t.gamma.is_constant() {
                return Err(Error::config("model two-term-gamma-const needs a constant γ"));
            }
            (LeadingTerm::ThetaAtEta, vec![1.5, 2.0])
        }
    })
}

/// Least-squares fit of `model` over the solved cases of `report`.
pub fn fit_expansion(report: &SweepReport, model: ModelId) -> Result<Fit> {
    let (leading, exponents) = model_spec(report, model)?;
    let mut fit = fit_terms(report, leading, &exponents)?;
    fit.model = model;
    Ok(fit)
}

/// Fit `mu1 − leading = Σ c_k h^{p_k}` over the solved cases.
pub fn fit_terms(report: &SweepReport, leading: LeadingTerm, exponents: &[f64]) -> Result<Fit> {
    if exponents.is_empty() {
        return Err(Error::Fit("no correction terms".into()));
    }
    let cases: Vec<_> = report.solved().collect();
    if cases.len() < 3 || cases.len() < exponents.len() {
        return Err(Error::Fit(format!(
            "fit needs at least 3 solved cases and one per term, found {}",
            cases.len()
        )));
    }
    let gamma0 = report.template.gamma.min();
    let mut h = Vec::with_capacity(cases.len());
    let mut y = Vec::with_capacity(cases.len());
    for c in &cases {
        let eta = match leading {
            LeadingTerm::ThetaAtEta => c.h.powf(report.template.alpha - 0.5) * gamma0,
            LeadingTerm::ThetaZero => 0.0,
        };
        let th = theta(eta).map_err(|e| Error::Fit(format!("leading term at h = {}: {e}", c.h)))?;
        h.push(c.h);
        y.push(c.mu1.unwrap() - c.h * th.theta);
    }

    // Columns are scaled to unit norm so the rank test is scale free.
    let (n, p) = (h.len(), exponents.len());
    let mut scale = vec![0.0; p];
    for (k, e) in exponents.iter().enumerate() {
        scale[k] = h.iter().map(|x| x.powf(*e).powi(2)).sum::<f64>().sqrt();
    }
    let a = Mat::<f64>::from_fn(n, p, |i, k| h[i].powf(exponents[k]) / scale[k]);
    let qr = a.qr();
    let r = qr.R();
    let diag: Vec<f64> = (0..p).map(|k| r[(k, k)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|d| !(*d > 1e-10 * dmax)) {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (exponents {exponents:?})"
        )));
    }
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
    let sol = qr.solve_lstsq(&rhs);
    let coefficients: Vec<f64> = (0..p).map(|k| sol[(k, 0)] / scale[k]).collect();
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            y[i] - exponents
                .iter()
                .zip(&coefficients)
                .map(|(e, c)| c * h[i].powf(*e))
                .sum::<f64>()
        })
        .collect();
    let normalized: Vec<f64> = residuals
        .iter()
        .zip(&h)
        .map(|(r, x)| r / x.powf(exponents[0]))
        .collect();
    let rms = (normalized.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    Ok(Fit {
        model: ModelId::Leading,
        leading,
        exponents: exponents.to_vec(),
        coefficients,
        h,
        corrections: y,
        residuals,
        normalized_residuals: normalized,
        residual_rms: rms,
    })
}
