use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use rayon::prelude::*;

use super::problem::{BoundaryCondition, MagneticProblem2D};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Largest element diameter allowed, in units of the magnetic length `√h`.
pub const RESOLUTION: f64 = 0.25;

/// Compressed sparse rows with complex entries.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Entries must be sorted by `(row, col)`; duplicates are summed in order.
    fn from_sorted(n: usize, entries: &[(usize, usize, Complex64)]) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for &(i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * x[self.cols[k]];
                }
                acc
            })
            .collect()
    }

    /// `⟨x, A y⟩ = Σ conj(x_i) A_ij y_j`.
    pub fn form(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        self.apply(y).iter().zip(x).map(|(ay, xi)| xi.conj() * ay).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .unwrap_or_default()
            })
            .collect()
    }

    /// `A − σ·diag(mass)` as a faer matrix.
    pub fn shifted(&self, sigma: f64, mass: &[f64]) -> Result<SparseColMat<usize, Complex64>> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let mut v = self.vals[k];
                if i == j {
                    v -= sigma * mass[i];
                }
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::solver(format!("sparse matrix construction failed: {e:?}"), f64::NAN))
    }
}

/// Discrete forms restricted to the unknowns.
#[derive(Debug, Clone)]
pub struct Forms {
    /// Hermitian form `∫|(h∇−iA)u|² + h^{1+α}∮γ|u|²`.
    pub q: CsrMatrix,
    /// Lumped mass, one weight per unknown.
    pub mass: Vec<f64>,
    /// Mesh node of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown of each mesh node, if any.
    pub unknown: Vec<Option<usize>>,
}

impl Forms {
    pub fn dof(&self) -> usize {
        self.mass.len()
    }

    pub fn mass_norm(&self, u: &[Complex64]) -> f64 {
        u.iter()
            .zip(&self.mass)
            .map(|(z, m)| m * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn mass_dot(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        u.iter()
            .zip(v)
            .zip(&self.mass)
            .map(|((a, b), m)| a.conj() * b * *m)
            .sum()
    }

    /// Spread unknowns back onto mesh nodes (zero at eliminated nodes).
    pub fn to_nodes(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.unknown.len()];
        for (k, &node) in self.nodes.iter().enumerate() {
            out[node] = u[k];
        }
        out
    }
}

pub fn check_resolution(problem: &MagneticProblem2D, mesh: &Mesh) -> Result<f64> {
    let d = mesh.quality().max_diameter;
    let bound = RESOLUTION * problem.h.sqrt();
    if d > bound * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "mesh too coarse: max element diameter {d:.4e} exceeds {RESOLUTION}·√h = {bound:.4e}"
        )));
    }
    Ok(d)
}

/// Assemble `Q` and the lumped mass on P1 elements. Each edge carries the
/// gauge link `exp(−i(1/h)∫A·dl)` and its cotangent weight; the boundary term
/// uses the trapezoid rule on boundary edges.
pub fn assemble_forms(problem: &MagneticProblem2D, mesh: &Mesh) -> Result<Forms> {
    check_resolution(problem, mesh)?;
    let n = mesh.n_nodes();
    let h2 = problem.h * problem.h;

    let per_triangle: Vec<[(usize, usize, Complex64); 12]> = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let p = t.map(|i| mesh.nodes[i]);
            let twice_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
            let mut out = [(0, 0, Complex64::new(0.0, 0.0)); 12];
            for k in 0..3 {
                let (a, b, o) = (k, (k + 1) % 3, (k + 2) % 3);
                let e1 = [p[a][0] - p[o][0], p[a][1] - p[o][1]];
                let e2 = [p[b][0] - p[o][0], p[b][1] - p[o][1]];
                let cot = (e1[0] * e2[0] + e1[1] * e2[1]) / twice_area;
                let c = 0.5 * cot * h2;
                let link = Complex64::from_polar(1.0, -problem.link_phase(p[a], p[b]));
                let (i, j) = (t[a], t[b]);
                out[4 * k] = (i, i, Complex64::new(c, 0.0));
                out[4 * k + 1] = (j, j, Complex64::new(c, 0.0));
                out[4 * k + 2] = (i, j, -c * link);
                out[4 * k + 3] = (j, i, -c * link.conj());
            }
            out
        })
        .collect();

    let mut entries: Vec<(usize, usize, Complex64)> = per_triangle.into_iter().flatten().collect();

    let mut mass = vec![0.0; n];
    for t in &mesh.triangles {
        let a = mesh.triangle_area(t) / 3.0;
        for &i in t {
            mass[i] += a;
        }
    }

    if problem.boundary == BoundaryCondition::Robin {
        let scale = problem.h.powf(1.0 + problem.alpha);
        let b = &mesh.boundary_nodes;
        let nb = b.len();
        for k in 0..nb {
            let (prev, cur, next) = (b[(k + nb - 1) % nb], b[k], b[(k + 1) % nb]);
            let len = |x: usize, y: usize| {
                let (p, q) = (mesh.nodes[x], mesh.nodes[y]);
                (q[0] - p[0]).hypot(q[1] - p[1])
            };
            let w = 0.5 * (len(prev, cur) + len(cur, next));
            let g = problem.gamma_at(mesh.boundary_s[k]);
            entries.push((cur, cur, Complex64::new(scale * g * w, 0.0)));
        }
    }

    let mut unknown = vec![None; n];
    let mut nodes = Vec::with_capacity(n);
    let is_boundary = mesh.is_boundary();
    for i in 0..n {
        if problem.boundary == BoundaryCondition::Dirichlet && is_boundary[i] {
            continue;
        }
        unknown[i] = Some(nodes.len());
        nodes.push(i);
    }
    let mut reduced: Vec<(usize, usize, Complex64)> = entries
        .into_iter()
        .filter_map(|(i, j, v)| Some((unknown[i]?, unknown[j]?, v)))
        .collect();
    // Stable sort keeps the summation order fixed, so assembly is reproducible.
    reduced.sort_by_key(|&(i, j, _)| (i, j));
    let q = CsrMatrix::from_sorted(nodes.len(), &reduced);
    let mass = nodes.iter().map(|&i| mass[i]).collect();
    Ok(Forms {
        q,
        mass,
        nodes,
        unknown,
    })
}
