use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::MagneticProblem2D;
use super::solver::{full_mass, GroundState2D};
use crate::boundary_geometry::Point;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mesh::Mesh;

/// Region a ground state is expected to concentrate near.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSet {
    /// Points within distance `r` of ∂Ω.
    Boundary,
    /// Points within Euclidean distance `r` of any listed point.
    Points { points: Vec<Point> },
    /// Points whose boundary projection lies within arclength `r` of a listed `s`.
    Arcs { centers: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// `‖u‖²` outside the `r`-neighbourhood of the target.
    pub mass_outside: f64,
    /// Decay rate `δ` in `|u| ~ exp(−δ d/√h)`, from a least-squares fit over bins.
    pub agmon_rate: f64,
    /// `‖u‖²` farther than `4√h` from ∂Ω.
    pub mass_beyond_layer: f64,
    /// Bin centres in `d/√h` and log of the RMS of `|u|` per bin.
    pub bins: Vec<(f64, f64)>,
}

/// Distance to ∂Ω and boundary coordinate of every mesh node.
pub struct NodeGeometry {
    pub dist: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn node_geometry(problem: &MagneticProblem2D, mesh: &Mesh) -> NodeGeometry {
    let (dist, s): (Vec<f64>, Vec<f64>) = mesh
        .nodes
        .par_iter()
        .map(|&x| {
            let (s, t) = problem.curve.project(x);
            (t.abs(), s)
        })
        .unzip();
    NodeGeometry { dist, s }
}

const BIN_WIDTH: f64 = 0.5;

pub fn localization_profile(
    problem: &MagneticProblem2D,
    mesh: &Mesh,
    state: &GroundState2D,
    target: &TargetSet,
    radius: f64,
) -> Result<Localization> {
    let geo = node_geometry(problem, mesh);
    localization_with(problem, mesh, &geo, state, target, radius)
}

pub fn localization_with(
    problem: &MagneticProblem2D,
    mesh: &Mesh,
    geo: &NodeGeometry,
    state: &GroundState2D,
    target: &TargetSet,
    radius: f64,
) -> Result<Localization> {
    if !(radius > 0.0) {
        return Err(Error::config("neighbourhood radius must be positive"));
    }
    let mass = full_mass(mesh);
    let dens: Vec<f64> = state.u.iter().zip(&mass).map(|(z, m)| z.norm_sqr() * m).collect();
    let total: f64 = dens.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Diagnostics("state has zero norm".into()));
    }
    let len = problem.curve.length();
    let inside = |i: usize| -> bool {
        match target {
            TargetSet::Boundary => geo.dist[i] <= radius,
            TargetSet::Points { points } => points.iter().any(|p| {
                let x = mesh.nodes[i];
                (x[0] - p[0]).hypot(x[1] - p[1]) <= radius
            }),
            TargetSet::Arcs { centers } => centers.iter().any(|c| {
                let d = (geo.s[i] - c).rem_euclid(len);
                d.min(len - d) <= radius
            }),
        }
    };
    let outside: f64 = (0..dens.len()).filter(|&i| !inside(i)).fold(0.0, |a, i| a + dens[i]);
    let sh = problem.h.sqrt();
    let beyond: f64 = (0..dens.len())
        .filter(|&i| geo.dist[i] > 4.0 * sh)
        .fold(0.0, |a, i| a + dens[i]);

    // RMS of |u| per distance bin; bins below the round-off floor are dropped.
    let x_max = geo.dist.iter().fold(0.0f64, |a, d| a.max(*d)) / sh;
    let nbins = (x_max / BIN_WIDTH).ceil() as usize + 1;
    let mut num = vec![0.0; nbins];
    let mut den = vec![0.0; nbins];
    for i in 0..dens.len() {
        let b = ((geo.dist[i] / sh) / BIN_WIDTH) as usize;
        num[b] += dens[i];
        den[b] += mass[i];
    }
    let peak = (0..nbins)
        .filter(|&b| den[b] > 0.0)
        .map(|b| num[b] / den[b])
        .fold(0.0, f64::max);
    let bins: Vec<(f64, f64)> = (0..nbins)
        .filter(|&b| den[b] > 0.0 && num[b] / den[b] > 1e-24 * peak)
        .map(|b| ((b as f64 + 0.5) * BIN_WIDTH, 0.5 * (num[b] / den[b]).ln()))
        .collect();
    if bins.len() < 3 {
        return Err(Error::Diagnostics(format!(
            "decay fit needs at least 3 non-empty distance bins, found {}",
            bins.len()
        )));
    }
    let n = bins.len() as f64;
    let mx = bins.iter().map(|b| b.0).sum::<f64>() / n;
    let my = bins.iter().map(|b| b.1).sum::<f64>() / n;
    let sxy: f64 = bins.iter().map(|b| (b.0 - mx) * (b.1 - my)).sum();
    let sxx: f64 = bins.iter().map(|b| (b.0 - mx).powi(2)).sum();
    Ok(Localization {
        mass_outside: outside / total,
        agmon_rate: -sxy / sxx,
        mass_beyond_layer: beyond / total,
        bins,
    })
}

/// Field table with columns `x1,x2,re_u,im_u,abs_u_sq`.
pub fn write_field_csv<W: Write>(mesh: &Mesh, state: &GroundState2D, mut w: W) -> Result<()> {
    writeln!(w, "x1,x2,re_u,im_u,abs_u_sq")?;
    for (x, z) in mesh.nodes.iter().zip(&state.u) {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(z.norm_sqr())
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub mu1: f64,
    pub residual: f64,
    pub dof: usize,
    pub h: f64,
    pub alpha: f64,
}

pub fn summary(problem: &MagneticProblem2D, state: &GroundState2D) -> SolutionSummary {
    SolutionSummary {
        mu1: state.mu1,
        residual: state.residual,
        dof: state.dof,
        h: problem.h,
        alpha: problem.alpha,
    }
}
