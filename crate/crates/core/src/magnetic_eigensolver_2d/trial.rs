use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::problem::{BoundaryCondition, MagneticProblem2D};
use crate::boundary_geometry::{tube_quadratic_form, SWindow, TubeGauge, TubeQuadrature};
use crate::error::{Error, Result};
use crate::robin_oscillator::Sampled;
use crate::theta_profile::{theta, GAMMA_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    /// Profile `φ_η(t/√h)` under an `h^{1/4}` window in `s`, weighted by `a^{-1/2}`.
    Leading,
    /// Same profile under an `h^{1/8}` window, weighted by `a₀^{-1/2}` frozen at `z₀`.
    Curvature,
    /// No window: a single Fourier mode around the whole boundary.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBound {
    /// Smallest Rayleigh quotient over the kinds tried.
    pub value: f64,
    pub kind: TrialKind,
    pub s0: f64,
    pub eta: f64,
    pub values: Vec<(TrialKind, f64)>,
}

/// Grid points per magnetic length in the tube quadrature.
const POINTS_PER_LENGTH: f64 = 40.0;

/// C^∞ bump supported in `(−½, ½)`.
fn bump(x: f64) -> f64 {
    let y = 1.0 - 4.0 * x * x;
    if y <= 0.0 {
        0.0
    } else {
        (-1.0 / y).exp()
    }
}

/// Smooth step: 1 for `t ≤ t1`, 0 for `t ≥ t2`.
fn cutoff(t: f64, t1: f64, t2: f64) -> f64 {
    if t <= t1 {
        return 1.0;
    }
    if t >= t2 {
        return 0.0;
    }
    let x = (t - t1) / (t2 - t1);
    let e = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    e(1.0 - x) / (e(1.0 - x) + e(x))
}

struct Profile {
    xi: f64,
    phi: Sampled,
}

fn profile(eta: f64) -> Result<Profile> {
    if eta.abs() > GAMMA_LIMIT {
        return Err(Error::config(format!(
            "η = {eta:.3} is outside the tabulated range |η| ≤ {GAMMA_LIMIT}"
        )));
    }
    let rec = theta(eta)?;
    let phi = rec
        .profile
        .clone()
        .ok_or_else(|| Error::solver("Θ record carries no profile", f64::NAN))?;
    Ok(Profile { xi: rec.xi_star, phi })
}

/// Rayleigh quotient of one trial state centred at the boundary point `s0`.
pub fn trial_value(problem: &MagneticProblem2D, s0: f64, kind: TrialKind) -> Result<f64> {
    if problem.boundary == BoundaryCondition::Dirichlet {
        return Err(Error::config(
            "trial states are built for the De Gennes boundary condition",
        ));
    }
    let eta = problem.eta(problem.gamma_at(s0));
    let prof = profile(eta)?;
    trial_value_with(problem, s0, kind, &prof)
}

fn trial_value_with(problem: &MagneticProblem2D, s0: f64, kind: TrialKind, prof: &Profile) -> Result<f64> {
    let curve = &problem.curve;
    let h = problem.h;
    let sh = h.sqrt();
    let len = curve.length();
    let reach = curve.reach();
    let t_profile = sh * prof.phi.t(prof.phi.len());
    let t_cut = (0.9 * reach).min(t_profile);
    if t_cut < 3.0 * sh {
        return Err(Error::config(format!(
            "tube width {reach:.3} is too narrow for a cutoff at h = {h}"
        )));
    }
    let step = sh / POINTS_PER_LENGTH;
    let n_t = ((t_cut / step).ceil() as usize).max(8);
    let gamma_fn = |s: f64| problem.gamma_at(s);
    let kappa0 = curve.curvature(s0);
    let phi = &prof.phi;
    let radial = move |t: f64| phi.eval_with_derivative(t / sh).0 * cutoff(t, 0.8 * t_cut, t_cut);

    match kind {
        TrialKind::Leading | TrialKind::Curvature => {
            let width = if kind == TrialKind::Leading {
                h.powf(0.25)
            } else {
                h.powf(0.125)
            };
            if width > len {
                return Err(Error::config("s-window longer than the boundary"));
            }
            let quad = TubeQuadrature {
                window: SWindow::Window {
                    center: s0,
                    half_width: 0.5 * width,
                },
                n_s: ((width / step).ceil() as usize).max(8),
                t_max: t_cut,
                n_t,
            };
            let xi = prof.xi;
            let v = |s: f64, t: f64| -> Complex64 {
                let a = if kind == TrialKind::Leading {
                    1.0 - t * curve.curvature(s)
                } else {
                    1.0 - t * kappa0
                };
                let amp = bump((s - s0) / width) * radial(t) / a.sqrt();
                Complex64::from_polar(amp, -xi * (s - s0) / sh)
            };
            let r = tube_quadratic_form(curve, h, problem.alpha, &gamma_fn, &v, &quad, TubeGauge::Local)?;
            Ok(r.rayleigh())
        }
        TrialKind::Periodic => {
            let quad = TubeQuadrature {
                window: SWindow::Periodic,
                n_s: ((len / step).ceil() as usize).max(8),
                t_max: t_cut,
                n_t,
            };
            // The global gauge carries the holonomy |Ω|/|∂Ω|; the mode number is
            // the integer nearest to the band minimum.
            let c = curve.area() / len;
            let m_star = (len * (c - sh * prof.xi) / (2.0 * PI * h)).round() as i64;
            let mut best = f64::INFINITY;
            for m in m_star - 1..=m_star + 1 {
                let k = 2.0 * PI * m as f64 / len;
                let v = |s: f64, t: f64| -> Complex64 {
                    let a = 1.0 - t * curve.curvature(s);
                    Complex64::from_polar(radial(t) / a.sqrt(), k * s)
                };
                let r = tube_quadratic_form(curve, h, problem.alpha, &gamma_fn, &v, &quad, TubeGauge::Global)?;
                best = best.min(r.rayleigh());
            }
            Ok(best)
        }
    }
}

/// Upper bound on the ground energy from trial states centred at `s0`: the
/// minimum Rayleigh quotient over all trial kinds that can be built there.
pub fn trial_upper_bound(problem: &MagneticProblem2D, s0: f64) -> Result<TrialBound> {
    let eta = problem.eta(problem.gamma_at(s0));
    let prof = profile(eta)?;
    let mut values = Vec::new();
    let mut last_err = None;
    for kind in [TrialKind::Leading, TrialKind::Curvature, TrialKind::Periodic] {
        match trial_value_with(problem, s0, kind, &prof) {
            Ok(v) => values.push((kind, v)),
            Err(e) => last_err = Some(e),
        }
    }
    let (kind, value) = values
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| last_err.unwrap_or_else(|| Error::config("no trial state could be built")))?;
    Ok(TrialBound {
        value,
        kind,
        s0,
        eta,
        values,
    })
}

/// Boundary points worth trying: maxima of curvature, minima of γ, and of
/// `κ − 3γ`.
pub fn candidate_points(problem: &MagneticProblem2D) -> Vec<f64> {
    let len = problem.curve.length();
    let n = 512;
    let argmax = |f: &dyn Fn(f64) -> f64| -> f64 {
        (0..n)
            .map(|k| k as f64 * len / n as f64)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    };
    let mut pts = vec![
        argmax(&|s| problem.curve.curvature(s)),
        argmax(&|s| -problem.gamma_at(s)),
        argmax(&|s| problem.curve.curvature(s) - 3.0 * problem.gamma_at(s)),
    ];
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    pts
}

/// Best bound over the candidate points.
pub fn best_trial_bound(problem: &MagneticProblem2D) -> Result<TrialBound> {
    let mut best: Option<TrialBound> = None;
    let mut last_err = None;
    for s0 in candidate_points(problem) {
        match trial_upper_bound(problem, s0) {
            Ok(b) => {
                if best.as_ref().is_none_or(|x| b.value < x.value) {
                    best = Some(b);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap())
}
