//! Fixtures shared by the benchmarks.

use degennes_core::boundary_geometry::BoundaryCurve;
use degennes_core::magnetic_eigensolver_2d::{GammaProfile, MagneticProblem2D};

/// Unit disk, α = 1, constant γ.
pub fn disk(h: f64, gamma: f64) -> MagneticProblem2D {
    MagneticProblem2D::new(
        BoundaryCurve::circle(1.0).unwrap(),
        h,
        1.0,
        GammaProfile::constant(gamma),
    )
    .unwrap()
}

/// 2:1 ellipse, α = 1, γ ≡ 0.
pub fn ellipse(h: f64) -> MagneticProblem2D {
    MagneticProblem2D::new(
        BoundaryCurve::ellipse(2.0, 1.0).unwrap(),
        h,
        1.0,
        GammaProfile::constant(0.0),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert_eq!(super::disk(0.1, 0.0).h, 0.1);
        assert!(super::ellipse(0.1).curve.length() > 9.0);
    }
}
