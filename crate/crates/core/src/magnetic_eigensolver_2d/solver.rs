use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{assemble_forms, Forms};
use super::problem::{BoundaryCondition, MagneticProblem2D};
use crate::error::{Error, Result};
use crate::mesh::{ring_mesh, Mesh, MeshSpec};
use crate::theta_profile::{theta_with, ThetaSettings, GAMMA_LIMIT};
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Target for `‖Qu − λMu‖_{M⁻¹} / max(|λ|, h)`.
    pub tol: f64,
    /// Krylov basis size before a restart.
    pub basis: usize,
    pub restarts: usize,
    /// Seed of the start vector.
    pub seed: u64,
    /// Boundary-layer refinement factor of the default mesh.
    pub refinement: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-9,
            basis: 48,
            restarts: 12,
            seed: 20_240_601,
            refinement: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState2D {
    pub mu1: f64,
    /// Nodal values on the mesh, `∫|u|² = 1` with the lumped mass.
    pub u: Vec<Complex64>,
    pub residual: f64,
    /// `u` at the boundary nodes, in mesh boundary order.
    pub boundary_trace: Vec<Complex64>,
    pub dof: usize,
    pub shift: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Default mesh for a problem: `√h/4` in the bulk, refined near ∂Ω. When
/// `η_min = h^{α−½}γ_min < −1` the ground state decays on the shorter scale
/// `√h/|η_min|`, which gets its own surface zone.
pub fn default_mesh(problem: &MagneticProblem2D, settings: &SolverSettings) -> Result<Mesh> {
    ring_mesh(&problem.curve, &mesh_spec(problem, settings))
}

pub fn mesh_spec(problem: &MagneticProblem2D, settings: &SolverSettings) -> MeshSpec {
    let spec = MeshSpec::for_h(problem.h, settings.refinement);
    let eta = problem.eta(problem.gamma.min());
    if problem.boundary == BoundaryCondition::Robin && eta < -1.0 {
        let decay = problem.h.sqrt() / eta.abs();
        spec.with_surface(decay * 4.0 / (settings.refinement * SURFACE_POINTS), 6.0 * decay)
    } else {
        spec
    }
}

/// Surface-zone rings per decay length at the default refinement.
const SURFACE_POINTS: f64 = 16.0;

/// Θ(η) accurate enough to place a shift; asymptotic forms outside the tabulated box.
pub fn theta_estimate(eta: f64) -> Result<f64> {
    if eta < -GAMMA_LIMIT {
        return Ok(-eta * eta);
    }
    if eta > GAMMA_LIMIT {
        return Ok(1.0);
    }
    let s = ThetaSettings {
        spacing: 0.01,
        ..ThetaSettings::default()
    };
    Ok(theta_with(eta, &s)?.theta)
}

/// Shift just below the expected ground energy `hΘ(h^{α−½}γ_min)`.
fn initial_shift(problem: &MagneticProblem2D) -> Result<f64> {
    let h = problem.h;
    let lead = match problem.boundary {
        BoundaryCondition::Dirichlet => h,
        BoundaryCondition::Robin => h * theta_estimate(problem.eta(problem.gamma.min()))?,
    };
    let kappa = problem.curve.max_abs_curvature();
    Ok(lead - 0.5 * kappa * h.powf(1.5) - 0.05 * h.max(lead.abs()))
}

pub fn ground_state(problem: &MagneticProblem2D, mesh: &Mesh, settings: &SolverSettings) -> Result<GroundState2D> {
    let forms = assemble_forms(problem, mesh)?;
    ground_state_of(problem, mesh, &forms, settings)
}

pub fn ground_state_of(
    problem: &MagneticProblem2D,
    mesh: &Mesh,
    forms: &Forms,
    settings: &SolverSettings,
) -> Result<GroundState2D> {
    if forms.dof() == 0 {
        return Err(Error::config("no unknowns"));
    }
    let h = problem.h;
    let mut sigma = initial_shift(problem)?;
    let mut step = 0.1 * h.max(sigma.abs());
    // Lower the shift until Q − σM is positive definite.
    let llt = loop {
        let k = forms.q.shifted(sigma, &forms.mass)?;
        match k.sp_cholesky(Side::Lower) {
            Ok(f) => break f,
            Err(_) => {
                sigma -= step;
                step *= 2.0;
                if step > 1e6 * h.max(1.0) {
                    return Err(Error::Conditioning("no positive definite shift found".into()));
                }
            }
        }
    };
    let (lambda, x, residual, iterations, history) = lanczos(forms, &llt, sigma, h, settings)?;
    let mut u = forms.to_nodes(&x);
    fix_phase(&mut u, &full_mass(mesh));
    let boundary_trace = mesh.boundary_nodes.iter().map(|&i| u[i]).collect();
    Ok(GroundState2D {
        mu1: lambda,
        u,
        residual,
        boundary_trace,
        dof: forms.dof(),
        shift: sigma,
        iterations,
        history,
    })
}

pub fn full_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for t in &mesh.triangles {
        let a = mesh.triangle_area(t) / 3.0;
        for &i in t {
            m[i] += a;
        }
    }
    m
}

/// Rotate `u` so that `∫u` is real and positive; if `|∫u|` is negligible,
/// the largest nodal value is made real positive instead.
pub fn fix_phase(u: &mut [Complex64], mass: &[f64]) {
    let total: Complex64 = u.iter().zip(mass).map(|(z, m)| z * m).sum();
    let pivot = if total.norm() >= 1e-12 {
        total
    } else {
        u.iter()
            .copied()
            .fold(Complex64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() { z } else { a })
    };
    if pivot.norm() == 0.0 {
        return;
    }
    let rot = pivot.conj() / pivot.norm();
    for z in u.iter_mut() {
        *z *= rot;
    }
}

type LanczosOutput = (f64, Vec<Complex64>, f64, usize, Vec<f64>);

fn lanczos(
    forms: &Forms,
    llt: &Llt<usize, Complex64>,
    sigma: f64,
    h: f64,
    settings: &SolverSettings,
) -> Result<LanczosOutput> {
    let n = forms.dof();
    let basis = settings.basis.clamp(4, n.max(4));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    normalize(forms, &mut x);

    let apply_op = |v: &[Complex64]| -> Vec<Complex64> {
        let mut b = Mat::<Complex64>::from_fn(n, 1, |i, _| v[i] * forms.mass[i]);
        llt.solve_in_place(b.as_mut());
        (0..n).map(|i| b[(i, 0)]).collect()
    };

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<Complex64>, f64)> = None;
    for _restart in 0..=settings.restarts {
        let mut v: Vec<Vec<Complex64>> = vec![x.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..basis {
            let mut w = apply_op(&v[j]);
            iterations += 1;
            let a = forms.mass_dot(&v[j], &w).re;
            alpha.push(a);
            for pass in 0..2 {
                for vi in &v {
                    let c = forms.mass_dot(vi, &w);
                    for (wk, vk) in w.iter_mut().zip(vi) {
                        *wk -= c * vk;
                    }
                }
                let _ = pass;
            }
            let b = forms.mass_norm(&w);
            let last = j + 1 == basis;
            let check = last || b < 1e-14 * a.abs().max(1e-300) || (j + 1) % 8 == 0;
            if check {
                let (lambda, u, res) = ritz(forms, &v, &alpha, &beta, sigma, h)?;
                history.push(res);
                let better = best.as_ref().is_none_or(|(_, _, r)| res < *r);
                if better {
                    best = Some((lambda, u.clone(), res));
                }
                if res <= settings.tol {
                    let (lambda, u, res) = best.unwrap();
                    return Ok((lambda, u, res, iterations, history));
                }
                if last || b < 1e-14 * a.abs().max(1e-300) {
                    x = u;
                    break;
                }
            }
            beta.push(b);
            for wk in w.iter_mut() {
                *wk /= b;
            }
            v.push(w);
        }
    }
    let res = best.map(|b| b.2).unwrap_or(f64::NAN);
    Err(Error::Solver {
        message: format!("shift-invert Lanczos stagnated after {iterations} iterations"),
        residual: res,
        history,
    })
}

fn normalize(forms: &Forms, x: &mut [Complex64]) {
    let nrm = forms.mass_norm(x);
    for z in x.iter_mut() {
        *z /= nrm;
    }
}

/// Ritz pair for the largest eigenvalue of the projected operator, mapped back
/// to `(Q, M)` and refined by the Rayleigh quotient.
fn ritz(
    forms: &Forms,
    v: &[Vec<Complex64>],
    alpha: &[f64],
    beta: &[f64],
    sigma: f64,
    h: f64,
) -> Result<(f64, Vec<Complex64>, f64)> {
    let m = alpha.len();
    let t = SymTridiag::new(
        alpha.iter().map(|a| -a).collect(),
        beta[..m - 1].iter().map(|b| -b).collect(),
    );
    let (neg_theta, y, _) = t.lowest_eigenpair()?;
    if -neg_theta <= 0.0 {
        return Err(Error::Conditioning("shifted operator lost definiteness".into()));
    }
    let n = forms.dof();
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    for (yk, vk) in y.iter().zip(v) {
        for (ui, vi) in u.iter_mut().zip(vk) {
            *ui += *yk * vi;
        }
    }
    normalize(forms, &mut u);
    let qu = forms.q.apply(&u);
    let lambda = u.iter().zip(&qu).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    let r2: f64 = qu
        .iter()
        .zip(&u)
        .zip(&forms.mass)
        .map(|((q, x), m)| (q - lambda * m * x).norm_sqr() / m)
        .sum();
    let _ = sigma;
    Ok((lambda, u, r2.sqrt() / lambda.abs().max(h)))
}
