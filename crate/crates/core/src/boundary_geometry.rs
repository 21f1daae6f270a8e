//! Smooth closed boundary curves in arclength parametrization, the tubular
//! coordinates `x = M(s) + t·n(s)` (`n` the inward normal, `t` the distance
//! to the boundary), the Jacobian `a = 1 - tκ(s)` and the local gauge
//! `Ã = (-t(1 - tκ/2), 0)` whose curl is `a`.
//!
//! Curves are traversed counterclockwise, so convex boundaries have κ > 0.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Parameter-space description of a closed curve.
pub trait ParametricCurve: Send + Sync {
    fn period(&self) -> f64;
    /// Position and first two derivatives at parameter `u`.
    fn eval(&self, u: f64) -> (Point, Point, Point);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParam {
    pub a: f64,
    pub b: f64,
}

impl ParametricCurve for EllipseParam {
    fn period(&self) -> f64 {
        2.0 * PI
    }

    fn eval(&self, u: f64) -> (Point, Point, Point) {
        let (s, c) = u.sin_cos();
        (
            [self.a * c, self.b * s],
            [-self.a * s, self.b * c],
            [-self.a * c, -self.b * s],
        )
    }
}

/// Periodic cubic spline through `points` with unit knot spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    points: Vec<Point>,
    second: Vec<Point>,
}

impl PeriodicSpline {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n < 5 {
            return Err(Error::config("a spline boundary needs at least 5 points"));
        }
        // Cyclic system M_{i-1} + 4M_i + M_{i+1} = 6(P_{i+1} - 2P_i + P_{i-1});
        // strictly diagonally dominant, so Gauss-Seidel converges geometrically.
        let rhs: Vec<Point> = (0..n)
            .map(|i| {
                let (p, c, q) = (points[(i + n - 1) % n], points[i], points[(i + 1) % n]);
                [6.0 * (q[0] - 2.0 * c[0] + p[0]), 6.0 * (q[1] - 2.0 * c[1] + p[1])]
            })
            .collect();
        let mut m = vec![[0.0; 2]; n];
        for _ in 0..200 {
            let mut change: f64 = 0.0;
            for i in 0..n {
                for k in 0..2 {
                    let v = (rhs[i][k] - m[(i + n - 1) % n][k] - m[(i + 1) % n][k]) / 4.0;
                    change = change.max((v - m[i][k]).abs());
                    m[i][k] = v;
                }
            }
            if change < 1e-15 {
                break;
            }
        }
        Ok(PeriodicSpline { points, second: m })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

impl ParametricCurve for PeriodicSpline {
    fn period(&self) -> f64 {
        self.points.len() as f64
    }

    fn eval(&self, u: f64) -> (Point, Point, Point) {
        let n = self.points.len();
        let u = u.rem_euclid(n as f64);
        let i = (u.floor() as usize).min(n - 1);
        let j = (i + 1) % n;
        let tau = u - i as f64;
        let (p0, p1) = (self.points[i], self.points[j]);
        let (m0, m1) = (self.second[i], self.second[j]);
        let om = 1.0 - tau;
        let mut r = [0.0; 2];
        let mut d1 = [0.0; 2];
        let mut d2 = [0.0; 2];
        for k in 0..2 {
            r[k] = om * p0[k] + tau * p1[k] + ((om * om * om - om) * m0[k] + (tau * tau * tau - tau) * m1[k]) / 6.0;
            d1[k] = p1[k] - p0[k] + ((1.0 - 3.0 * om * om) * m0[k] + (3.0 * tau * tau - 1.0) * m1[k]) / 6.0;
            d2[k] = om * m0[k] + tau * m1[k];
        }
        (r, d1, d2)
    }
}

#[allow(clippy::excessive_precision)]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
#[allow(clippy::excessive_precision)]
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// Arclength reparametrization of any parametric curve.
#[derive(Debug, Clone)]
pub struct Arclength<C> {
    raw: C,
    /// Cumulative length at the start of each panel, plus the total.
    cumulative: Vec<f64>,
    panel: f64,
}

impl<C: ParametricCurve> Arclength<C> {
    pub fn new(raw: C) -> Self {
        Self::with_panels(raw, 2048)
    }

    pub fn with_panels(raw: C, panels: usize) -> Self {
        let panel = raw.period() / panels as f64;
        let mut cumulative = Vec::with_capacity(panels + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..panels {
            let u0 = k as f64 * panel;
            acc += gauss_length(&raw, u0, u0 + panel);
            cumulative.push(acc);
        }
        Arclength { raw, cumulative, panel }
    }

    pub fn raw(&self) -> &C {
        &self.raw
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Raw parameter `u` with arclength `s` from `u = 0`.
    pub fn parameter(&self, s: f64) -> f64 {
        let len = self.length();
        let s = s.rem_euclid(len);
        let k = match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(self.cumulative.len() - 2),
            Err(k) => k - 1,
        };
        let u0 = k as f64 * self.panel;
        let target = s - self.cumulative[k];
        let mut u = u0 + self.panel * target / (self.cumulative[k + 1] - self.cumulative[k]);
        for _ in 0..30 {
            let f = gauss_length(&self.raw, u0, u) - target;
            let speed = norm(self.raw.eval(u).1);
            let step = f / speed;
            u -= step;
            if step.abs() < 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        u
    }
}

fn gauss_length<C: ParametricCurve + ?Sized>(raw: &C, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * norm(raw.eval(mid + half * x).1))
        .sum::<f64>()
        * half
}

impl<C: ParametricCurve> ParametricCurve for Arclength<C> {
    fn period(&self) -> f64 {
        self.length()
    }

    fn eval(&self, s: f64) -> (Point, Point, Point) {
        let u = self.parameter(s);
        let (r, r1, r2) = self.raw.eval(u);
        let sp = norm(r1);
        let t = [r1[0] / sp, r1[1] / sp];
        let along = r2[0] * t[0] + r2[1] * t[1];
        let acc = [(r2[0] - along * t[0]) / (sp * sp), (r2[1] - along * t[1]) / (sp * sp)];
        (r, t, acc)
    }
}

/// JSON descriptor of a boundary curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveDescriptor {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Spline { points: Vec<Point> },
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { radius: f64 },
    Ellipse(Arclength<EllipseParam>),
    Spline(Arclength<PeriodicSpline>),
}

/// Point on the boundary with its moving frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub point: Point,
    pub tangent: Point,
    /// Inward unit normal.
    pub normal: Point,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeCoords {
    pub s: f64,
    pub t: f64,
}

/// A smooth closed boundary in arclength parametrization, centered so the
/// origin lies inside.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    shape: Shape,
    descriptor: CurveDescriptor,
    length: f64,
    max_curvature: f64,
    tube_width: f64,
    area: f64,
    samples: Vec<Point>,
}

const SAMPLES: usize = 2048;

impl BoundaryCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        Self::from_descriptor(&CurveDescriptor::Circle { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::from_descriptor(&CurveDescriptor::Ellipse { a, b })
    }

    pub fn spline(points: Vec<Point>) -> Result<Self> {
        Self::from_descriptor(&CurveDescriptor::Spline { points })
    }

    pub fn from_descriptor(d: &CurveDescriptor) -> Result<Self> {
        let shape = match d {
            CurveDescriptor::Circle { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::config(format!("circle radius must be positive, got {radius}")));
                }
                Shape::Circle { radius: *radius }
            }
            CurveDescriptor::Ellipse { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return Err(Error::config("ellipse semi-axes must be positive"));
                }
                Shape::Ellipse(Arclength::new(EllipseParam { a: *a, b: *b }))
            }
            CurveDescriptor::Spline { points } => {
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(Error::config("spline points must be finite"));
                }
                let mut pts = points.clone();
                if shoelace(&pts) < 0.0 {
                    pts.reverse();
                }
                Shape::Spline(Arclength::new(PeriodicSpline::new(pts)?))
            }
        };
        let length = match &shape {
            Shape::Circle { radius } => 2.0 * PI * radius,
            Shape::Ellipse(c) => c.length(),
            Shape::Spline(c) => c.length(),
        };
        let mut curve = BoundaryCurve {
            shape,
            descriptor: d.clone(),
            length,
            max_curvature: 0.0,
            tube_width: 0.0,
            area: 0.0,
            samples: Vec::new(),
        };
        let ds = length / SAMPLES as f64;
        let mut kmax: f64 = 0.0;
        let mut area = 0.0;
        let mut samples = Vec::with_capacity(SAMPLES);
        for i in 0..SAMPLES {
            let f = curve.frame(i as f64 * ds);
            kmax = kmax.max(f.curvature.abs());
            area += 0.5 * (f.point[0] * f.tangent[1] - f.point[1] * f.tangent[0]) * ds;
            samples.push(f.point);
        }
        if area <= 0.0 {
            return Err(Error::config("boundary curve must enclose positive area"));
        }
        curve.max_curvature = kmax;
        curve.tube_width = 0.5 / kmax.max(1e-12);
        curve.area = area;
        curve.samples = samples;
        Ok(curve)
    }

    pub fn descriptor(&self) -> &CurveDescriptor {
        &self.descriptor
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Default tube width `0.5 / max|κ|`.
    pub fn tube_width(&self) -> f64 {
        self.tube_width
    }

    /// Largest width for which the normal map stays injective (`1 / max|κ|`).
    pub fn reach(&self) -> f64 {
        1.0 / self.max_curvature.max(1e-12)
    }

    pub fn reduce(&self, s: f64) -> f64 {
        s.rem_euclid(self.length)
    }

    pub fn frame(&self, s: f64) -> Frame {
        let (p, t, acc) = match &self.shape {
            Shape::Circle { radius } => {
                let th = s / radius;
                let (sn, cs) = th.sin_cos();
                ([radius * cs, radius * sn], [-sn, cs], [-cs / radius, -sn / radius])
            }
            Shape::Ellipse(c) => c.eval(s),
            Shape::Spline(c) => c.eval(s),
        };
        let normal = [-t[1], t[0]];
        Frame {
            point: p,
            tangent: t,
            normal,
            curvature: acc[0] * normal[0] + acc[1] * normal[1],
        }
    }

    pub fn point(&self, s: f64) -> Point {
        self.frame(s).point
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.frame(s).curvature
    }

    /// `a(s, t) = 1 - tκ(s)`.
    pub fn jacobian(&self, s: f64, t: f64) -> f64 {
        1.0 - t * self.curvature(s)
    }

    pub fn from_tube(&self, c: TubeCoords) -> Point {
        let f = self.frame(c.s);
        [f.point[0] + c.t * f.normal[0], f.point[1] + c.t * f.normal[1]]
    }

    /// Nearest boundary point: `(s, signed distance)`, positive inside.
    pub fn project(&self, x: Point) -> (f64, f64) {
        let ds = self.length / SAMPLES as f64;
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, p) in self.samples.iter().enumerate() {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        let mut s = best as f64 * ds;
        for _ in 0..50 {
            let f = self.frame(s);
            let r = [f.point[0] - x[0], f.point[1] - x[1]];
            let g = r[0] * f.tangent[0] + r[1] * f.tangent[1];
            let dg = 1.0 + f.curvature * (r[0] * f.normal[0] + r[1] * f.normal[1]);
            let step = g / dg.max(1e-3);
            s -= step.clamp(-ds * 4.0, ds * 4.0);
            if step.abs() < 1e-15 * self.length {
                break;
            }
        }
        let s = self.reduce(s);
        let f = self.frame(s);
        let d = [x[0] - f.point[0], x[1] - f.point[1]];
        let t = d[0] * f.normal[0] + d[1] * f.normal[1];
        (s, t)
    }

    /// Distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        self.project(x).1
    }

    pub fn to_tube(&self, x: Point) -> Result<TubeCoords> {
        self.to_tube_within(x, self.tube_width)
    }

    pub fn to_tube_within(&self, x: Point, width: f64) -> Result<TubeCoords> {
        let (s, t) = self.project(x);
        if t < -1e-12 {
            return Err(Error::domain(format!(
                "point ({}, {}) lies outside the domain",
                x[0], x[1]
            )));
        }
        if t >= width {
            return Err(Error::domain(format!(
                "point ({}, {}) at distance {t} is outside the tube of width {width}",
                x[0], x[1]
            )));
        }
        Ok(TubeCoords { s, t: t.max(0.0) })
    }

    /// `Ã = (-t(1 - tκ(s)/2), 0)`.
    pub fn local_gauge(&self, s: f64, t: f64) -> [f64; 2] {
        [-t * (1.0 - 0.5 * t * self.curvature(s)), 0.0]
    }

    /// Whether `x` lies in the closed domain.
    pub fn contains(&self, x: Point) -> bool {
        self.project(x).1 >= -1e-12
    }
}

fn shoelace(p: &[Point]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

/// Magnetic potential convention inside the tube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TubeGauge {
    /// `Ã = (-t(1 - tκ/2), 0)`. Valid for functions localized in `s`.
    Local,
    /// Local gauge plus the constant `|Ω|/|∂Ω|` in `Ã₁`, so the holonomy around
    /// the boundary matches a field of unit curl on the whole domain.
    Global,
    /// `Ã ≡ 0`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SWindow {
    /// The whole boundary, periodic.
    Periodic,
    /// `|s - center| ≤ half_width`; the function must vanish at both ends.
    Window { center: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeQuadrature {
    pub window: SWindow,
    pub n_s: usize,
    /// Outer edge of the integration region in `t`; the function must vanish there.
    pub t_max: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeFormValue {
    /// The full quadratic form.
    pub form: f64,
    /// `∫|v|² a ds dt`.
    pub norm_sq: f64,
    /// The boundary part `h^{1+α} ∮ γ |v(s,0)|²`.
    pub boundary: f64,
}

impl TubeFormValue {
    pub fn rayleigh(&self) -> f64 {
        self.form / self.norm_sq
    }
}

/// `∫∫ [|(h∂_t - iÃ₂)v|² + a⁻²|(h∂_s - iÃ₁)v|²] a ds dt + h^{1+α}∮γ|v(s,0)|² ds`
/// on a tensor grid. Derivatives are taken at cell midpoints; the `s`-derivative
/// uses a gauge link so the phase of Ã₁ is integrated exactly along the cell.
#[allow(clippy::too_many_arguments)]
pub fn tube_quadratic_form(
    curve: &BoundaryCurve,
    h: f64,
    alpha: f64,
    gamma_fn: &dyn Fn(f64) -> f64,
    v: &dyn Fn(f64, f64) -> Complex64,
    quad: &TubeQuadrature,
    gauge: TubeGauge,
) -> Result<TubeFormValue> {
    if quad.t_max >= curve.reach() {
        return Err(Error::config(format!(
            "integration depth {} reaches the focal distance {}",
            quad.t_max,
            curve.reach()
        )));
    }
    if quad.n_s < 8 || quad.n_t < 8 {
        return Err(Error::config("tube quadrature needs at least 8 points per direction"));
    }
    let (s0, ds, n_nodes_s, periodic) = match quad.window {
        SWindow::Periodic => (0.0, curve.length() / quad.n_s as f64, quad.n_s, true),
        SWindow::Window { center, half_width } => {
            if 2.0 * half_width > curve.length() {
                return Err(Error::config("s-window longer than the boundary"));
            }
            (
                center - half_width,
                2.0 * half_width / quad.n_s as f64,
                quad.n_s + 1,
                false,
            )
        }
    };
    let dt = quad.t_max / quad.n_t as f64;
    let holonomy = match gauge {
        TubeGauge::Global => curve.area() / curve.length(),
        _ => 0.0,
    };
    let a1 = |kappa: f64, t: f64| -> f64 {
        match gauge {
            TubeGauge::Zero => 0.0,
            _ => holonomy - t * (1.0 - 0.5 * t * kappa),
        }
    };

    let nt = quad.n_t + 1;
    let mut vals = vec![Complex64::new(0.0, 0.0); n_nodes_s * nt];
    let mut kap = vec![0.0; n_nodes_s];
    let mut kap_mid = vec![0.0; n_nodes_s];
    for i in 0..n_nodes_s {
        let s = s0 + i as f64 * ds;
        kap[i] = curve.curvature(s);
        kap_mid[i] = curve.curvature(s + 0.5 * ds);
        for j in 0..nt {
            vals[i * nt + j] = v(s, j as f64 * dt);
        }
    }
    let vmax = vals.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return Err(Error::domain("trial function vanishes on the quadrature grid"));
    }
    let edge_t = (0..n_nodes_s)
        .map(|i| vals[i * nt + nt - 1].norm_sqr())
        .fold(0.0, f64::max);
    let mut leak = edge_t;
    if !periodic {
        for j in 0..nt {
            leak = leak
                .max(vals[j].norm_sqr())
                .max(vals[(n_nodes_s - 1) * nt + j].norm_sqr());
        }
    }
    if leak > 1e-12 * vmax {
        return Err(Error::domain(format!(
            "function support leaks past the quadrature region (relative edge value {:.2e})",
            leak / vmax
        )));
    }

    let wt = |j: usize| if j == 0 || j == nt - 1 { 0.5 * dt } else { dt };
    let mut kinetic = 0.0;
    let mut norm_sq = 0.0;
    let mut boundary = 0.0;
    let hp = h.powf(1.0 + alpha);
    for i in 0..n_nodes_s {
        let s = s0 + i as f64 * ds;
        let ws = if periodic || (i > 0 && i + 1 < n_nodes_s) {
            ds
        } else {
            0.5 * ds
        };
        for j in 0..nt {
            let t = j as f64 * dt;
            let z = vals[i * nt + j];
            norm_sq += z.norm_sqr() * (1.0 - t * kap[i]) * ws * wt(j);
            if j + 1 < nt {
                let tm = t + 0.5 * dt;
                let dz = (vals[i * nt + j + 1] - z) * (h / dt);
                kinetic += dz.norm_sqr() * (1.0 - tm * kap[i]) * ws * dt;
            }
        }
        boundary += gamma_fn(curve.reduce(s)) * vals[i * nt].norm_sqr() * ws;
        let next = if i + 1 < n_nodes_s {
            Some(i + 1)
        } else if periodic {
            Some(0)
        } else {
            None
        };
        if let Some(ip) = next {
            for j in 0..nt {
                let t = j as f64 * dt;
                let a = 1.0 - t * kap_mid[i];
                let theta = a1(kap_mid[i], t) * ds / h;
                let link = Complex64::from_polar(1.0, -theta);
                let dz = (link * vals[ip * nt + j] - vals[i * nt + j]) * (h / ds);
                kinetic += dz.norm_sqr() / a * ds * wt(j);
            }
        }
    }
    let boundary = hp * boundary;
    Ok(TubeFormValue {
        form: kinetic + boundary,
        norm_sq,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circle_curvature() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let c2 = BoundaryCurve::circle(2.0).unwrap();
        for s in [0.0, 0.3, 2.0, 5.9] {
            assert!((c.curvature(s) - 1.0).abs() < 1e-14);
            assert!((c2.curvature(s) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn ellipse_vertex_curvature_and_length() {
        let e = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        assert!((e.curvature(0.0) - 2.0).abs() < 1e-9);
        assert!((e.curvature(e.length() / 2.0) - 2.0).abs() < 1e-9);
        assert!((e.curvature(e.length() / 4.0) - 0.25).abs() < 1e-9);
        // Ramanujan's second approximation is accurate to ~1e-10 here
        let (a, b) = (2.0f64, 1.0f64);
        let hh = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * hh / (10.0 + (4.0 - 3.0 * hh).sqrt()));
        assert!((e.length() - ram).abs() < 1e-8);
        assert!((e.area() - 2.0 * PI).abs() < 1e-9);
        assert!((e.tube_width() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn unit_speed() {
        let e = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        let eps = 1e-6;
        for k in 0..40 {
            let s = k as f64 * e.length() / 40.0 + 0.01;
            let p = e.point(s + eps);
            let q = e.point(s - eps);
            let speed = norm([p[0] - q[0], p[1] - q[1]]) / (2.0 * eps);
            assert!((speed - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn circle_tube_coordinates() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let tc = c.to_tube([0.9, 0.0]).unwrap();
        assert!(tc.s.abs() < 1e-12 || (tc.s - c.length()).abs() < 1e-12);
        assert!((tc.t - 0.1).abs() < 1e-12);
        assert!(c.to_tube([0.1, 0.0]).is_err());
        assert!(c.to_tube([1.1, 0.0]).is_err());
    }

    #[test]
    fn tube_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for curve in [
            BoundaryCurve::circle(1.0).unwrap(),
            BoundaryCurve::ellipse(2.0, 1.0).unwrap(),
        ] {
            for _ in 0..100 {
                let c = TubeCoords {
                    s: rng.random::<f64>() * curve.length(),
                    t: rng.random::<f64>() * curve.tube_width() * 0.999,
                };
                let x = curve.from_tube(c);
                let back = curve.to_tube(x).unwrap();
                let ds = (back.s - c.s).abs();
                assert!(ds.min(curve.length() - ds) < 1e-8);
                assert!((back.t - c.t).abs() < 1e-8);
                let y = curve.from_tube(back);
                assert!(norm([x[0] - y[0], x[1] - y[1]]) < 1e-8);
            }
        }
    }

    #[test]
    fn ellipse_distance_matches_dense_projection() {
        let e = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        let dense: Vec<Point> = (0..400_000)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 400_000.0;
                [2.0 * th.cos(), th.sin()]
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = TubeCoords {
                s: rng.random::<f64>() * e.length(),
                t: rng.random::<f64>() * 0.24,
            };
            let x = e.from_tube(c);
            let brute = dense
                .iter()
                .map(|p| norm([p[0] - x[0], p[1] - x[1]]))
                .fold(f64::INFINITY, f64::min);
            assert!((e.to_tube(x).unwrap().t - brute).abs() < 1e-6);
        }
    }

    #[test]
    fn local_gauge_values_and_curl() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        assert_eq!(c.local_gauge(1.0, 0.0), [0.0, 0.0]);
        assert!((c.local_gauge(0.4, 0.1)[0] + 0.095).abs() < 1e-15);
        let e = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        let eps = 1e-5;
        for k in 0..10 {
            for j in 1..5 {
                let s = k as f64 * 0.9;
                let t = j as f64 * 0.04;
                // ∂_s Ã₂ - ∂_t Ã₁ with Ã₂ ≡ 0
                let curl = -(e.local_gauge(s, t + eps)[0] - e.local_gauge(s, t - eps)[0]) / (2.0 * eps);
                assert!((curl - e.jacobian(s, t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn arclength_is_idempotent() {
        let pts: Vec<Point> = (0..40)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 40.0;
                let r = 1.0 + 0.2 * (3.0 * th).cos();
                [r * th.cos(), r * th.sin()]
            })
            .collect();
        let once = Arclength::new(PeriodicSpline::new(pts).unwrap());
        let twice = Arclength::new(once.clone());
        assert!((once.length() - twice.length()).abs() < 1e-10);
        for k in 0..200 {
            let s = k as f64 * once.length() / 200.0;
            let (p, _, _) = once.eval(s);
            let (q, _, _) = twice.eval(s);
            assert!(norm([p[0] - q[0], p[1] - q[1]]) < 1e-10);
        }
    }

    #[test]
    fn spline_approximates_circle() {
        let pts: Vec<Point> = (0..64)
            .rev()
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 64.0;
                [th.cos(), th.sin()]
            })
            .collect();
        let c = BoundaryCurve::spline(pts).unwrap();
        assert!(c.area() > 0.0, "orientation is normalized");
        assert!((c.length() - 2.0 * PI).abs() < 1e-4);
        for k in 0..16 {
            assert!((c.curvature(k as f64 * 0.39) - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn cartesian_dirichlet_energy() {
        // h = 1, Ã ≡ 0, γ ≡ 0: the form is ∫|∇v|² over the annulus.
        // v = (1 - r)² (r - 0.6)² χ... use v = ((1 - r)(r - 0.6))² which vanishes
        // at r = 0.6 to second order: ∫|∇v|² = 2π ∫ v_r² r dr.
        let c = BoundaryCurve::circle(1.0).unwrap();
        let v = |_s: f64, t: f64| {
            let r = 1.0 - t;
            Complex64::new(((1.0 - r) * (r - 0.6)).powi(2), 0.0)
        };
        let exact = {
            let n = 200_000;
            let dr = 0.4 / n as f64;
            (0..n)
                .map(|k| {
                    let r = 0.6 + (k as f64 + 0.5) * dr;
                    let d = 2.0 * (1.0 - r) * (r - 0.6) * ((r - 0.6) - (1.0 - r));
                    d * d * r * dr
                })
                .sum::<f64>()
                * 2.0
                * PI
        };
        let run = |n_t: usize| {
            let q = TubeQuadrature {
                window: SWindow::Periodic,
                n_s: 64,
                t_max: 0.4,
                n_t,
            };
            tube_quadratic_form(&c, 1.0, 1.0, &|_| 0.0, &v, &q, TubeGauge::Zero)
                .unwrap()
                .form
        };
        let extrapolated = (4.0 * run(800) - run(400)) / 3.0;
        assert!((extrapolated - exact).abs() < 1e-8, "{extrapolated} vs {exact}");
    }

    #[test]
    fn leakage_is_rejected() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let q = TubeQuadrature {
            window: SWindow::Periodic,
            n_s: 32,
            t_max: 0.3,
            n_t: 32,
        };
        let v = |_s: f64, _t: f64| Complex64::new(1.0, 0.0);
        assert!(tube_quadratic_form(&c, 0.1, 1.0, &|_| 0.0, &v, &q, TubeGauge::Local).is_err());
    }

    #[test]
    fn descriptor_json() {
        let d: CurveDescriptor = serde_json::from_str(r#"{"type":"ellipse","a":2.0,"b":1.0}"#).unwrap();
        assert_eq!(d, CurveDescriptor::Ellipse { a: 2.0, b: 1.0 });
        assert!(serde_json::from_str::<CurveDescriptor>(r#"{"type":"ellipse","a":2.0,"bb":1.0}"#).is_err());
    }
}
