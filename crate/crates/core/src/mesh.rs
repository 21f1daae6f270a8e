//! Boundary-fitted triangulations of star-shaped domains.
//!
//! Nodes sit on scaled copies `ρ·M(s)` of the boundary, equally spaced in `s`
//! and staggered between neighbouring rings. Ring spacing is fine inside a
//! boundary layer and grows geometrically towards the interior; rings with
//! different node counts are stitched along the shorter diagonals.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::boundary_geometry::{BoundaryCurve, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Largest edge length allowed in the boundary layer.
    pub boundary_spacing: f64,
    /// Largest edge length allowed anywhere.
    pub interior_spacing: f64,
    /// Depth of the finely resolved layer along ∂Ω.
    pub layer_depth: f64,
    /// Optional zone right at ∂Ω with closer rings (tangential spacing unchanged),
    /// for states decaying across the boundary faster than `√h`.
    #[serde(default)]
    pub surface: Option<SurfaceZone>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceZone {
    pub spacing: f64,
    pub depth: f64,
}

impl MeshSpec {
    /// Spacing tied to the magnetic length: `√h/4` in the bulk, refined by
    /// `refinement` within `4√h` of the boundary.
    pub fn for_h(h: f64, refinement: f64) -> Self {
        let l = h.sqrt();
        MeshSpec {
            boundary_spacing: 0.25 * l / refinement,
            interior_spacing: 0.25 * l,
            layer_depth: 4.0 * l,
            surface: None,
        }
    }

    /// Add a surface zone of the given ring spacing and depth.
    pub fn with_surface(mut self, spacing: f64, depth: f64) -> Self {
        if spacing < self.boundary_spacing {
            self.surface = Some(SurfaceZone { spacing, depth });
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.boundary_spacing) && ok(self.interior_spacing) && self.layer_depth >= 0.0) {
            return Err(Error::config("mesh spacings must be positive"));
        }
        if self.boundary_spacing > self.interior_spacing {
            return Err(Error::config("boundary spacing must not exceed interior spacing"));
        }
        if let Some(z) = self.surface {
            if !(ok(z.spacing) && z.depth >= 0.0) {
                return Err(Error::config("surface zone spacing must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Counterclockwise triangles.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary nodes in counterclockwise order.
    pub boundary_nodes: Vec<usize>,
    /// Arclength coordinate of each boundary node.
    pub boundary_s: Vec<f64>,
}

/// Summary statistics used to enforce the resolution rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshQuality {
    pub nodes: usize,
    pub triangles: usize,
    pub max_diameter: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub area: f64,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_boundary(&self) -> Vec<bool> {
        let mut b = vec![false; self.nodes.len()];
        for &i in &self.boundary_nodes {
            b[i] = true;
        }
        b
    }

    pub fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn quality(&self) -> MeshQuality {
        let mut max_d: f64 = 0.0;
        let mut min_a: f64 = 180.0;
        let mut max_a: f64 = 0.0;
        let mut area = 0.0;
        for t in &self.triangles {
            let p = t.map(|i| self.nodes[i]);
            let e = |i: usize, j: usize| ((p[j][0] - p[i][0]).powi(2) + (p[j][1] - p[i][1]).powi(2)).sqrt();
            let l = [e(1, 2), e(2, 0), e(0, 1)];
            max_d = max_d.max(l[0]).max(l[1]).max(l[2]);
            for k in 0..3 {
                let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
                let cosang = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
                let ang = cosang.acos().to_degrees();
                min_a = min_a.min(ang);
                max_a = max_a.max(ang);
            }
            area += self.triangle_area(t);
        }
        MeshQuality {
            nodes: self.nodes.len(),
            triangles: self.triangles.len(),
            max_diameter: max_d,
            min_angle_deg: min_a,
            max_angle_deg: max_a,
            area,
        }
    }

    /// Plain-text layout: a header line, `nodes N` followed by `x y` rows,
    /// `triangles M` followed by `i j k` rows (0-based), and `boundary B`
    /// followed by `node s` rows. Floats are written with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# degennes mesh v1")?;
        writeln!(w, "nodes {}", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.16e} {:.16e}", p[0], p[1])?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "boundary {}", self.boundary_nodes.len())?;
        for (i, s) in self.boundary_nodes.iter().zip(&self.boundary_s) {
            writeln!(w, "{} {:.16e}", i, s)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
        let bad = |m: &str| Error::Io(format!("malformed mesh file: {m}"));
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                rows.push(t.split_whitespace().map(String::from).collect::<Vec<_>>());
            }
        }
        let mut it = rows.into_iter();
        let header = |it: &mut std::vec::IntoIter<Vec<String>>, name: &str| -> Result<usize> {
            let row = it.next().ok_or_else(|| bad("truncated"))?;
            if row.len() != 2 || row[0] != name {
                return Err(bad(&format!("expected section {name}")));
            }
            row[1].parse().map_err(|_| bad("bad count"))
        };
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float"));
        let u = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
        let n = header(&mut it, "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let row = it.next().ok_or_else(|| bad("truncated"))?;
            if row.len() != 2 {
                return Err(bad("node row"));
            }
            nodes.push([f(&row[0])?, f(&row[1])?]);
        }
        let m = header(&mut it, "triangles")?;
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let row = it.next().ok_or_else(|| bad("truncated"))?;
            if row.len() != 3 {
                return Err(bad("triangle row"));
            }
            triangles.push([u(&row[0])?, u(&row[1])?, u(&row[2])?]);
        }
        let b = header(&mut it, "boundary")?;
        let mut boundary_nodes = Vec::with_capacity(b);
        let mut boundary_s = Vec::with_capacity(b);
        for _ in 0..b {
            let row = it.next().ok_or_else(|| bad("truncated"))?;
            if row.len() != 2 {
                return Err(bad("boundary row"));
            }
            boundary_nodes.push(u(&row[0])?);
            boundary_s.push(f(&row[1])?);
        }
        if triangles
            .iter()
            .flatten()
            .chain(&boundary_nodes)
            .any(|&i| i >= nodes.len())
        {
            return Err(bad("index out of range"));
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary_nodes,
            boundary_s,
        })
    }
}

/// Build a ring mesh of the domain bounded by `curve`, which must be
/// star-shaped with respect to the origin. No edge is longer than
/// `spec.interior_spacing`.
pub fn ring_mesh(curve: &BoundaryCurve, spec: &MeshSpec) -> Result<Mesh> {
    spec.validate()?;
    let mut scale = 1.0;
    for _ in 0..8 {
        let mesh = build_rings(curve, spec, scale)?;
        let d = mesh.quality().max_diameter;
        if d <= spec.interior_spacing * (1.0 + 1e-12) {
            return Ok(mesh);
        }
        scale *= 0.98 * spec.interior_spacing / d;
    }
    Err(Error::config("could not meet the mesh size bound"))
}

fn build_rings(curve: &BoundaryCurve, spec: &MeshSpec, scale: f64) -> Result<Mesh> {
    let spec = MeshSpec {
        boundary_spacing: spec.boundary_spacing.min(spec.interior_spacing * scale),
        interior_spacing: spec.interior_spacing * scale,
        layer_depth: spec.layer_depth,
        surface: spec.surface,
    };
    let len = curve.length();
    // Support function p(s) = M(s)·n_out(s) controls the normal gap between rings.
    let probe = 1024;
    let mut p_min = f64::INFINITY;
    let mut p_max: f64 = 0.0;
    // g = d(M·T)/ds = 1 - κp bounds how far the node map may be sheared.
    let mut g_max: f64 = 0.0;
    for k in 0..probe {
        let f = curve.frame(k as f64 * len / probe as f64);
        let p = -(f.point[0] * f.normal[0] + f.point[1] * f.normal[1]);
        p_min = p_min.min(p);
        p_max = p_max.max(p);
        g_max = g_max.max(1.0 - f.curvature * p);
    }
    if p_min <= 1e-6 * p_max {
        return Err(Error::config("domain is not star-shaped with respect to the origin"));
    }

    // Tangential spacing leaves room for the shortest radial gap so the two
    // angles facing a ring edge stay below π in total.
    let spacing_at = |depth: f64, last: f64| -> f64 {
        match spec.surface {
            Some(z) if depth <= z.depth => z.spacing,
            _ if depth <= spec.layer_depth => (last * 1.2).min(spec.boundary_spacing),
            _ => (last * 1.2).min(spec.interior_spacing),
        }
    };
    let stretch = (1.8 * p_min / p_max).min(1.0);

    struct Ring {
        rho: f64,
        count: usize,
        offset: f64,
        shear: f64,
    }
    // Scaling about the origin slides ring points tangentially by
    // (1-ρ)(M·T); nodes are placed so their feet on ∂Ω stay staggered. The
    // correction fades out towards the center, where feet mean nothing and
    // a strong shear bunches the nodes of small rings.
    let shear_for = |rho: f64| (1.0 - rho).min(rho).min(0.8 / g_max.max(1e-12));
    let mut rings = Vec::new();
    let mut rho = 1.0;
    let mut delta = spec.surface.map_or(spec.boundary_spacing, |z| z.spacing);
    let mut k = 0;
    loop {
        let shear = shear_for(rho);
        let slack = 1.0 - shear * g_max;
        // Small rings change node count quickly; finer spacing keeps the
        // stitched diagonals short near the center.
        let local = if rho * p_max < 5.0 * delta { 0.6 * delta } else { delta };
        // The surface zone refines only across the boundary.
        let tangential = local.max(spec.boundary_spacing);
        let count = ((rho * len / (tangential * stretch * slack)).ceil() as usize).max(6);
        rings.push(Ring {
            rho,
            count,
            offset: if k % 2 == 0 { 0.0 } else { 0.5 },
            shear,
        });
        let depth = (1.0 - rho) * p_min;
        delta = spacing_at(depth, delta);
        let local = if rho * p_max < 5.0 * delta { 0.6 * delta } else { delta };
        // The fan around the center needs the last ring within δ of the origin.
        if rho * p_max <= 0.95 * local {
            break;
        }
        let mut next = rho - local / p_max;
        if next * p_max < 0.45 * local {
            next = 0.5 * rho;
        }
        rho = next;
        k += 1;
        if k > 100_000 {
            return Err(Error::config("mesh spacing too small for the domain"));
        }
    }

    let mut nodes = Vec::new();
    let mut start = Vec::with_capacity(rings.len());
    for r in &rings {
        start.push(nodes.len());
        for j in 0..r.count {
            let foot = (j as f64 + r.offset) * len / r.count as f64;
            let p = sheared_point(curve, foot, r.shear);
            nodes.push([r.rho * p[0], r.rho * p[1]]);
        }
    }
    let center = nodes.len();
    nodes.push([0.0, 0.0]);

    let mut triangles = Vec::new();
    for w in 0..rings.len() - 1 {
        let (a, b) = (&rings[w], &rings[w + 1]);
        stitch(
            &nodes,
            (start[w], a.count, a.offset),
            (start[w + 1], b.count, b.offset),
            &mut triangles,
        );
    }
    let last = rings.last().unwrap();
    let s0 = *start.last().unwrap();
    for j in 0..last.count {
        triangles.push([s0 + j, s0 + (j + 1) % last.count, center]);
    }

    let mut mesh = Mesh {
        nodes,
        triangles,
        boundary_nodes: (0..rings[0].count).collect(),
        boundary_s: (0..rings[0].count)
            .map(|j| j as f64 * len / rings[0].count as f64)
            .collect(),
    };
    for t in mesh.triangles.iter_mut() {
        let [a, b, c] = t.map(|i| mesh.nodes[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if det < 0.0 {
            t.swap(1, 2);
        }
    }
    if mesh.triangles.iter().any(|t| mesh.triangle_area(t) <= 0.0) {
        return Err(Error::config("mesh generation produced a degenerate triangle"));
    }
    Ok(mesh)
}

/// Solve `s - c (M·T)(s) = foot` by Newton and return `M(s)`.
fn sheared_point(curve: &BoundaryCurve, foot: f64, c: f64) -> Point {
    if c == 0.0 {
        return curve.point(foot);
    }
    let mut s = foot;
    for _ in 0..30 {
        let f = curve.frame(s);
        let mt = f.point[0] * f.tangent[0] + f.point[1] * f.tangent[1];
        let mn = f.point[0] * f.normal[0] + f.point[1] * f.normal[1];
        let r = s - c * mt - foot;
        let step = r / (1.0 - c * (1.0 + f.curvature * mn));
        s -= step;
        if step.abs() < 1e-14 * curve.length() {
            break;
        }
    }
    curve.point(s)
}

/// Zip two closed rings (outer `a`, inner `b`), starting from aligned
/// positions and closing each triangle across the shorter diagonal.
fn stitch(nodes: &[Point], a: (usize, usize, f64), b: (usize, usize, f64), out: &mut Vec<[usize; 3]>) {
    let (sa, na, oa) = a;
    let (sb, nb, ob) = b;
    let pa = |i: usize| (i as f64 + oa) / na as f64;
    // start b at its last node not past a's first node
    let raw_b = |j: usize| (j as f64 + ob) / nb as f64;
    let mut j0 = 0;
    let mut best = f64::NEG_INFINITY;
    for j in 0..nb {
        let mut v = raw_b(j);
        if v > pa(0) {
            v -= 1.0;
        }
        if v > best {
            best = v;
            j0 = j;
        }
    }
    let ia = |i: usize| sa + i % na;
    let ib = |j: usize| sb + (j0 + j) % nb;
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_a = if i == na {
            false
        } else if j == nb {
            true
        } else {
            // Prefer the shorter new diagonal unless it would fold a triangle.
            let d = |x: usize, y: usize| {
                let (p, q) = (nodes[x], nodes[y]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            };
            let orient = |t: [usize; 3]| {
                let [a, b, c] = t.map(|k| nodes[k]);
                (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            };
            let ok_a = orient([ia(i), ia(i + 1), ib(j)]) > 0.0;
            let ok_b = orient([ia(i), ib(j + 1), ib(j)]) > 0.0;
            match (ok_a, ok_b) {
                (true, false) => true,
                (false, true) => false,
                _ => d(ia(i + 1), ib(j)) <= d(ia(i), ib(j + 1)),
            }
        };
        if advance_a {
            out.push([ia(i), ia(i + 1), ib(j)]);
            i += 1;
        } else {
            out.push([ia(i), ib(j + 1), ib(j)]);
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_mesh_is_valid() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let m = ring_mesh(&c, &MeshSpec::for_h(0.05, 4.0)).unwrap();
        let q = m.quality();
        assert!((q.area - PI).abs() < 2e-3, "{}", q.area);
        assert!(q.max_diameter <= 0.25 * 0.05f64.sqrt(), "{}", q.max_diameter);
        assert!(q.min_angle_deg > 15.0, "{}", q.min_angle_deg);
        // Euler characteristic of a disk: V - E + F = 1
        let mut edges = std::collections::HashSet::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(m.n_nodes() as i64 - edges.len() as i64 + m.triangles.len() as i64, 1);
    }

    #[test]
    fn ellipse_mesh_respects_sizing() {
        let c = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
        let h: f64 = 0.05;
        let m = ring_mesh(&c, &MeshSpec::for_h(h, 4.0)).unwrap();
        let q = m.quality();
        assert!((q.area - 2.0 * PI).abs() < 5e-3);
        assert!(q.max_diameter <= 0.25 * h.sqrt(), "{}", q.max_diameter);
        // Angles only matter where the ground state lives.
        let mut worst: f64 = 0.0;
        for t in &m.triangles {
            let p = t.map(|i| m.nodes[i]);
            let g = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            if c.distance_to_boundary(g) > 2.0 * h.sqrt() {
                continue;
            }
            for k in 0..3 {
                let (a, b, o) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [a[0] - o[0], a[1] - o[1]];
                let v = [b[0] - o[0], b[1] - o[1]];
                let cs = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                worst = worst.max(cs.acos().to_degrees());
            }
        }
        assert!(worst < 100.0, "{worst}");
    }

    #[test]
    fn text_round_trip() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let m = ring_mesh(&c, &MeshSpec::for_h(0.2, 2.0)).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(m, back);
        assert!(Mesh::read_text(std::io::Cursor::new(b"nodes 2\n0 0\n".to_vec())).is_err());
    }

    #[test]
    fn rejects_non_star_shaped() {
        let c = BoundaryCurve::circle(1.0).unwrap();
        let bad = MeshSpec {
            boundary_spacing: 0.1,
            interior_spacing: 0.05,
            layer_depth: 0.1,
            surface: None,
        };
        assert!(ring_mesh(&c, &bad).is_err());
    }
}
