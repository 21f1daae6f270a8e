//! Real symmetric tridiagonal matrices: Sturm-sequence bisection for
//! eigenvalues and LDLᵀ solves for shifted systems.
//!
//! The diagonal is kept as `-off[i-1] - off[i] + excess[i]`. For a fine
//! difference Laplacian plus a potential the excess is the potential, and
//! pivots, Sturm counts and products are formed from it directly instead of
//! from `2/Δ² + V`, which would round V at the scale of `1/Δ²`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
    excess: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length mismatch");
        let excess = (0..diag.len()).map(|i| diag[i] - row_sum_part(&off, i)).collect();
        SymTridiag { diag, off, excess }
    }

    /// From the off-diagonal and the part of the diagonal beyond `-off[i-1] - off[i]`.
    pub fn from_excess(excess: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, excess.len().max(1), "off-diagonal length mismatch");
        let diag = (0..excess.len()).map(|i| row_sum_part(&off, i) + excess[i]).collect();
        SymTridiag { diag, off, excess }
    }

    /// Principal block of rows `lo..hi`.
    pub fn block(&self, lo: usize, hi: usize) -> SymTridiag {
        let mut excess = self.excess[lo..hi].to_vec();
        if lo > 0 {
            excess[0] -= self.off[lo - 1];
        }
        if hi < self.len() {
            excess[hi - lo - 1] -= self.off[hi - 1];
        }
        SymTridiag {
            diag: self.diag[lo..hi].to_vec(),
            off: self.off[lo..hi - 1].to_vec(),
            excess,
        }
    }

    /// `-off[i]` for rows with a successor, zero for the last.
    fn lead(&self, i: usize) -> f64 {
        if i + 1 < self.len() {
            -self.off[i]
        } else {
            0.0
        }
    }

    /// Pivots of `T - x` shifted by their leading parts: `d[i] = lead(i) + e[i]`.
    fn next_pivot_excess(&self, i: usize, x: f64, prev: f64) -> f64 {
        let o = self.off[i - 1];
        let d_prev = -o + prev;
        -o * prev / d_prev + (self.excess[i] - x)
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i].abs();
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                r
            })
            .fold(0.0, f64::max)
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.excess[i] * x[i];
            if i > 0 {
                v -= self.off[i - 1] * (x[i] - x[i - 1]);
            }
            if i + 1 < n {
                v -= self.off[i] * (x[i] - x[i + 1]);
            }
            y[i] = v;
        }
        y
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_hint());
        let mut count = 0;
        let mut e = self.excess[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                e = self.next_pivot_excess(i, x, e);
            }
            let mut q = self.lead(i) + e;
            if q == 0.0 {
                q = -tiny;
                e = q - self.lead(i);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn norm_hint(&self) -> f64 {
        self.diag.first().map(|d| d.abs()).unwrap_or(0.0)
    }

    /// The `k`-th smallest eigenvalue (0-based), bisected to machine precision.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::config(format!(
                "eigenvalue index {k} out of range for order {}",
                self.len()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solve `(T - sigma) x = b` by LDLᵀ without pivoting.
    ///
    /// Only valid when `T - sigma` is positive definite; a non-positive
    /// pivot is reported as a conditioning error.
    pub fn solve_shifted_spd(&self, sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut e = self.excess[0] - sigma;
        for i in 0..n {
            if i > 0 {
                l[i - 1] = self.off[i - 1] / d[i - 1];
                e = self.next_pivot_excess(i, sigma, e);
            }
            d[i] = self.lead(i) + e;
            if !(d[i] > 0.0) {
                return Err(Error::Conditioning(format!(
                    "non-positive pivot {:.3e} at row {i}",
                    d[i]
                )));
            }
        }
        let mut x = b.to_vec();
        for i in 1..n {
            x[i] -= l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= l[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Ground-state eigenpair. The inverse-iteration shift sits just below the
    /// bisected eigenvalue, so every solve is with a positive definite
    /// M-matrix and the iterate stays entrywise positive when the
    /// off-diagonals are non-positive.
    pub fn lowest_eigenpair(&self) -> Result<(f64, Vec<f64>, f64)> {
        let n = self.len();
        let lambda = self.eigenvalue(0)?;
        let scale = self.norm_inf().max(1.0);
        let mut delta = 64.0 * f64::EPSILON * scale;
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut last_err = None;
        for _attempt in 0..6 {
            match self.inverse_iterate(lambda - delta, &mut x, 4) {
                Ok(()) => {
                    last_err = None;
                    break;
                }
                Err(e) => {
                    last_err = Some(e);
                    delta *= 16.0;
                    x = vec![1.0 / (n as f64).sqrt(); n];
                }
            }
        }
        if let Some(e) = last_err {
            return Err(e);
        }
        let tx = self.apply(&x);
        let mu: f64 = x.iter().zip(&tx).map(|(a, b)| a * b).sum();
        let res = tx.iter().zip(&x).map(|(t, v)| (t - mu * v).powi(2)).sum::<f64>().sqrt() / scale;
        Ok((mu, x, res))
    }

    fn inverse_iterate(&self, shift: f64, x: &mut Vec<f64>, steps: usize) -> Result<()> {
        for _ in 0..steps {
            let mut y = self.solve_shifted_spd(shift, x)?;
            let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(Error::solver(
                    "inverse iteration produced a degenerate iterate",
                    f64::NAN,
                ));
            }
            for v in y.iter_mut() {
                *v /= nrm;
            }
            *x = y;
        }
        Ok(())
    }
}

fn row_sum_part(off: &[f64], i: usize) -> f64 {
    let mut a = 0.0;
    if i > 0 {
        a -= off[i - 1];
    }
    if i < off.len() {
        a -= off[i];
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        for k in [0usize, 3, 17, 49] {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn lowest_vector_is_positive_and_normalized() {
        let t = laplacian(200);
        let (mu, v, res) = t.lowest_eigenpair().unwrap();
        assert!(res < 1e-12);
        assert!(v.iter().all(|x| *x > 0.0));
        let nrm: f64 = v.iter().map(|x| x * x).sum();
        assert!((nrm - 1.0).abs() < 1e-13);
        assert!((mu - t.eigenvalue(0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_roundtrip() {
        let t = laplacian(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = t.solve_shifted_spd(-0.5, &b).unwrap();
        let r = t.apply(&x);
        for i in 0..30 {
            assert!((r[i] + 0.5 * x[i] - b[i]).abs() < 1e-12);
        }
        assert!(t.solve_shifted_spd(1.0, &b).is_err());
    }

    #[test]
    fn excess_form_matches_plain_form() {
        let excess: Vec<f64> = (0..40).map(|i| 1e-6 * (i as f64).cos()).collect();
        let off = vec![-1e6; 39];
        let a = SymTridiag::from_excess(excess, off.clone());
        let b = SymTridiag::new(a.diag.clone(), off);
        assert!((a.eigenvalue(0).unwrap() - b.eigenvalue(0).unwrap()).abs() < 1e-6);
        let blk = a.block(5, 20);
        assert_eq!(blk.diag, a.diag[5..20].to_vec());
        let x: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let y = blk.apply(&x);
        let z = SymTridiag::new(blk.diag.clone(), blk.off.clone()).apply(&x);
        for (u, v) in y.iter().zip(&z) {
            assert!((u - v).abs() < 1e-6 * (1.0 + v.abs()));
        }
    }
}
