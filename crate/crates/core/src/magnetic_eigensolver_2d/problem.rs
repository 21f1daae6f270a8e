use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary_geometry::{BoundaryCurve, Point};
use crate::error::{Error, Result};

/// Boundary coefficient γ as a function of arclength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GammaProfile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·cos(2πs/|∂Ω|)`; on the unit circle this is `mean + amplitude·cos s`.
    Cosine {
        mean: f64,
        amplitude: f64,
    },
}

impl GammaProfile {
    pub fn constant(value: f64) -> Self {
        GammaProfile::Constant { value }
    }

    pub fn eval(&self, s: f64, length: f64) -> f64 {
        match *self {
            GammaProfile::Constant { value } => value,
            GammaProfile::Cosine { mean, amplitude } => mean + amplitude * (2.0 * PI * s / length).cos(),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            GammaProfile::Constant { value } => value,
            GammaProfile::Cosine { mean, amplitude } => mean - amplitude.abs(),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            GammaProfile::Constant { value } => value,
            GammaProfile::Cosine { mean, amplitude } => mean + amplitude.abs(),
        }
    }

    /// Arclength of a minimum point.
    pub fn argmin(&self, length: f64) -> f64 {
        match *self {
            GammaProfile::Cosine { amplitude, .. } if amplitude > 0.0 => 0.5 * length,
            _ => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, GammaProfile::Constant { .. })
            || matches!(self, GammaProfile::Cosine { amplitude, .. } if *amplitude == 0.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GammaProfile::Constant { value } => value.is_finite(),
            GammaProfile::Cosine { mean, amplitude } => mean.is_finite() && amplitude.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("γ profile parameters must be finite"))
        }
    }
}

/// One monomial `coeff·x₁^px·x₂^py`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub px: u32,
    pub py: u32,
    pub coeff: f64,
}

/// Polynomial scalar potential of degree at most 3; the vector potential is
/// `A₀ + ∇φ` with `A₀ = ½(−x₂, x₁)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GaugePotential {
    pub terms: Vec<Monomial>,
}

pub const MAX_GAUGE_DEGREE: u32 = 3;

impl GaugePotential {
    pub fn zero() -> Self {
        GaugePotential { terms: Vec::new() }
    }

    /// `φ = −x₁x₂/2`, which turns `A₀` into the Landau gauge `(−x₂, 0)`.
    pub fn landau() -> Self {
        GaugePotential {
            terms: vec![Monomial {
                px: 1,
                py: 1,
                coeff: -0.5,
            }],
        }
    }

    /// Random coefficients in `[-scale, scale]` for every monomial of degree 1..=3.
    pub fn random<R: Rng>(rng: &mut R, scale: f64) -> Self {
        let mut terms = Vec::new();
        for d in 1..=MAX_GAUGE_DEGREE {
            for px in 0..=d {
                terms.push(Monomial {
                    px,
                    py: d - px,
                    coeff: rng.random_range(-scale..=scale),
                });
            }
        }
        GaugePotential { terms }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.terms {
            if m.px + m.py > MAX_GAUGE_DEGREE || !m.coeff.is_finite() {
                return Err(Error::config(
                    "gauge potential must be a finite polynomial of degree ≤ 3",
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * x[0].powi(m.px as i32) * x[1].powi(m.py as i32))
            .sum()
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for m in &self.terms {
            if m.px > 0 {
                g[0] += m.coeff * m.px as f64 * x[0].powi(m.px as i32 - 1) * x[1].powi(m.py as i32);
            }
            if m.py > 0 {
                g[1] += m.coeff * m.py as f64 * x[0].powi(m.px as i32) * x[1].powi(m.py as i32 - 1);
            }
        }
        g
    }

    pub fn add(&self, other: &GaugePotential) -> GaugePotential {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        GaugePotential { terms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Natural condition with the boundary term `h^{1+α}∮γ|u|²`.
    #[default]
    Robin,
    /// Trace set to zero; γ is ignored.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct MagneticProblem2D {
    pub curve: BoundaryCurve,
    pub h: f64,
    pub alpha: f64,
    pub gamma: GammaProfile,
    pub gauge: GaugePotential,
    pub boundary: BoundaryCondition,
}

impl MagneticProblem2D {
    pub fn new(curve: BoundaryCurve, h: f64, alpha: f64, gamma: GammaProfile) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::config(format!("h must lie in (0, 1), got {h}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("α must be positive, got {alpha}")));
        }
        gamma.validate()?;
        Ok(MagneticProblem2D {
            curve,
            h,
            alpha,
            gamma,
            gauge: GaugePotential::zero(),
            boundary: BoundaryCondition::Robin,
        })
    }

    pub fn with_boundary(mut self, boundary: BoundaryCondition) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn gamma_at(&self, s: f64) -> f64 {
        self.gamma.eval(s, self.curve.length())
    }

    /// `η = h^{α−½}γ`.
    pub fn eta(&self, gamma: f64) -> f64 {
        self.h.powf(self.alpha - 0.5) * gamma
    }

    pub fn vector_potential(&self, x: Point) -> [f64; 2] {
        let g = self.gauge.gradient(x);
        [-0.5 * x[1] + g[0], 0.5 * x[0] + g[1]]
    }

    /// `(1/h)∫A·dl` along the segment `x → y`. Exact: `A₀` is linear and the
    /// gauge part integrates to a potential difference.
    pub fn link_phase(&self, x: Point, y: Point) -> f64 {
        let m = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
        let d = [y[0] - x[0], y[1] - x[1]];
        let a0 = -0.5 * m[1] * d[0] + 0.5 * m[0] * d[1];
        (a0 + self.gauge.eval(y) - self.gauge.eval(x)) / self.h
    }

    /// Largest deviation of the sampled curl of `A` from 1 (central differences).
    pub fn curl_defect(&self, points: &[Point]) -> f64 {
        let e = 1e-4;
        points
            .iter()
            .map(|&x| {
                let ax = |p: Point| self.vector_potential(p);
                let d2a1 = (ax([x[0], x[1] + e])[0] - ax([x[0], x[1] - e])[0]) / (2.0 * e);
                let d1a2 = (ax([x[0] + e, x[1]])[1] - ax([x[0] - e, x[1]])[1]) / (2.0 * e);
                (d1a2 - d2a1 - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Same problem with `A' = A + ∇φ`.
    pub fn gauge_transform(&self, phi: &GaugePotential) -> Result<Self> {
        phi.validate()?;
        let mut p = self.clone();
        p.gauge = self.gauge.add(phi);
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn landau_gauge_potential() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let p = MagneticProblem2D::new(c, 0.1, 1.0, GammaProfile::constant(0.0)).unwrap();
        let q = p.gauge_transform(&GaugePotential::landau()).unwrap();
        let a = q.vector_potential([0.3, -0.7]);
        assert!((a[0] - 0.7).abs() < 1e-15 && a[1].abs() < 1e-15);
    }

    #[test]
    fn random_gauges_keep_unit_curl() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let p = MagneticProblem2D::new(c, 0.1, 1.0, GammaProfile::constant(0.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..50)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        for _ in 0..5 {
            let q = p.gauge_transform(&GaugePotential::random(&mut rng, 1.0)).unwrap();
            assert!(q.curl_defect(&pts) < 1e-8);
        }
    }

    #[test]
    fn link_phase_is_a_line_integral() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = MagneticProblem2D::new(c, 0.5, 1.0, GammaProfile::constant(0.0))
            .unwrap()
            .gauge_transform(&GaugePotential::random(&mut rng, 1.0))
            .unwrap();
        let (x, y) = ([0.1, 0.2], [-0.4, 0.5]);
        // Simpson on a fine partition
        let n = 2000;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = k as f64 / n as f64;
            let z = [x[0] + t * (y[0] - x[0]), x[1] + t * (y[1] - x[1])];
            let a = p.vector_potential(z);
            acc += w * (a[0] * (y[0] - x[0]) + a[1] * (y[1] - x[1]));
        }
        acc /= 3.0 * n as f64;
        assert!((p.link_phase(x, y) - acc / p.h).abs() < 1e-12);
    }

    #[test]
    fn profile_json() {
        let g: GammaProfile = serde_json::from_str(r#"{"type":"cosine","mean":1.0,"amplitude":0.5}"#).unwrap();
        assert_eq!(g.min(), 0.5);
        assert!((g.eval(std::f64::consts::PI, 2.0 * std::f64::consts::PI) - 0.5).abs() < 1e-15);
        assert!(serde_json::from_str::<GammaProfile>(r#"{"type":"constant","valu":1.0}"#).is_err());
        assert!(MagneticProblem2D::new(BoundaryCurve::circle(1.0).unwrap(), 1.5, 1.0, g).is_err());
    }
}
