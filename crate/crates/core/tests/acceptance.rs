//! Acceptance report: one PASS/FAIL line per criterion, with details below
//! each. Lines that fail are reported, never asserted, so the target itself
//! always exits 0 once every computation has run.

use std::collections::BTreeMap;
use std::time::Instant;

use degennes_core::boundary_geometry::BoundaryCurve;
use degennes_core::magnetic_eigensolver_2d::*;
use degennes_core::mesh::{ring_mesh, MeshSpec};
use degennes_core::robin_oscillator::{lowest_eigenvalue, RobinParams};
use degennes_core::semiclassical_harness::*;
use degennes_core::theta_profile::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 9] = [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0];

/// Θ₀ and ξ₀ from an independent shooting computation, for display only.
const THETA0: f64 = 0.590_106_125;
const XI0: f64 = 0.768_184_3;

struct Line {
    details: Vec<String>,
    pass: bool,
}

impl Line {
    fn new() -> Self {
        Line {
            details: Vec::new(),
            pass: true,
        }
    }

    fn check(&mut self, ok: bool, text: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {text}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, text: String) {
        self.details.push(format!("     {text}"));
    }

    fn print(&self, n: usize, title: &str, started: Instant) {
        println!(
            "criterion {n}: {} {title} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
        for d in &self.details {
            println!("    {d}");
        }
    }
}

fn identities() -> Line {
    let mut line = Line::new();
    let recs: Vec<ThetaRecord> = theta_grid(&GRID, &ThetaSettings::default())
        .into_iter()
        .map(|r| r.expect("theta on the identity grid"))
        .collect();
    for r in &recs {
        let g = r.gamma;
        let rel = r.diagnostics.relation_residual;
        line.check(rel.abs() <= 1e-6, format!("γ={g:+}: |ξ²−Θ−γ²| = {:.2e}", rel.abs()));
        let m1 = r.moment(1);
        line.check(m1.abs() <= 1e-6, format!("γ={g:+}: |M1| = {:.2e}", m1.abs()));
        let m2 = r.moment(2) - second_moment_formula(r);
        line.check(m2.abs() <= 1e-6, format!("γ={g:+}: M2 − (Θ/2 − γφ(0)²/4) = {m2:.2e}"));
        let m3 = r.moment(3) - third_moment_formula(r);
        line.check(
            m3.abs() <= 1e-6,
            format!(
                "γ={g:+}: M3 − (1−2(γξ)²)φ(0)²/6 = {m3:.2e} (by parts: {:.2e})",
                r.moment(3) - third_moment_by_parts(r)
            ),
        );
        line.check(r.theta < 1.0, format!("γ={g:+}: Θ = {:.12} < 1", r.theta));

        let e = 1e-2;
        let fd = (theta(g + e).unwrap().theta - theta(g - e).unwrap().theta) / (2.0 * e);
        let dd = theta_derivative(r) - fd;
        line.check(
            dd.abs() <= 1e-4,
            format!("γ={g:+}: φ(0)² − central difference = {dd:.2e}"),
        );

        let c = perturbation_coefficients(0.5, g, 1.0, 0.1).unwrap();
        line.check(c.d1.abs() <= 1e-8, format!("γ={g:+}: |d1| = {:.2e}", c.d1.abs()));
        let spacing = 0.002;
        let mu = |x: f64| lowest_eigenvalue(RobinParams::new(g, x), spacing).unwrap();
        let x0 = c.xi_star;
        let second = (mu(x0 + e) - 2.0 * mu(x0) + mu(x0 - e)) / (e * e);
        let rd2 = (c.d2 - 0.5 * second) / c.d2;
        line.check(
            c.d2 > 0.0 && rd2.abs() <= 0.01,
            format!("γ={g:+}: d2 = {:.6} > 0, relative gap to ½μ'' = {rd2:.2e}", c.d2),
        );
        let d3 = c.d3() + 2.0 * r.m3;
        line.check(d3.abs() <= 1e-6, format!("γ={g:+}: d3 + 2M3 = {d3:.2e}"));
    }
    line
}

fn constants() -> Line {
    let mut line = Line::new();
    let at = |spacing: f64| {
        theta_with(
            0.0,
            &ThetaSettings {
                spacing,
                ..ThetaSettings::default()
            },
        )
        .unwrap()
    };
    let (a, b) = (at(0.004), at(0.002));
    let dt = a.theta - b.theta;
    let dx = a.xi_star - b.xi_star;
    line.check(
        dt.abs() <= 1e-6,
        format!("Θ₀ = {:.10} (spacings 0.004, 0.002 differ by {dt:.2e})", b.theta),
    );
    line.check(dx.abs() <= 1e-6, format!("ξ₀ = {:.10} (differ by {dx:.2e})", b.xi_star));
    line.note(format!(
        "reference Θ₀ = {THETA0}, ξ₀ = {XI0}: deviations {:.2e}, {:.2e}",
        b.theta - THETA0,
        b.xi_star - XI0
    ));
    let e = 2e-3;
    let fd = (theta(e).unwrap().theta - theta(-e).unwrap().theta) / (2.0 * e) / 6.0;
    let routes = [("moment k=3", b.moment(3)), ("closed form", b.m3), ("Θ'(0)/6", fd)];
    for (name, v) in routes {
        line.note(format!("M3 by {name}: {v:.10}"));
    }
    let spread = routes.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max)
        - routes.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    line.check(spread <= 1e-6, format!("spread of the three M3 routes = {spread:.2e}"));
    line
}

fn asymptotics() -> Line {
    let mut line = Line::new();
    for g in [-1.0f64, -2.0, -4.0] {
        let t = theta(g).unwrap().theta;
        let g2 = g * g;
        line.check(
            t >= -g2 && t <= -g2 + 0.25 / g2,
            format!("γ={g}: −γ² ≤ Θ = {t:.10} ≤ −γ² + 1/(4γ²) = {:.10}", -g2 + 0.25 / g2),
        );
    }
    let defects: Vec<f64> = [1.0, 2.0, 3.0, 4.0]
        .iter()
        .map(|g| 1.0 - theta(*g).unwrap().theta)
        .collect();
    line.check(
        defects.windows(2).all(|w| w[1] < w[0]),
        format!(
            "1 − Θ on γ = 1..4: {:?}",
            defects.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    );
    line.check(defects[2] < 1e-2, format!("1 − Θ(3) = {:.3e} < 1e-2", defects[2]));
    line
}

fn check_label(c: &Check) -> String {
    match c {
        Check::LeadingOrder { tolerance } => format!("leading order {tolerance:?}"),
        Check::ScaledWindow { exponent, lo, hi } => format!("mu1/h^{exponent} in ({lo}, {hi})"),
        Check::Coefficient { model, rel_tol } => format!("{} coefficient ±{rel_tol}", model.name()),
        Check::Concentration { min_fraction } => format!("concentration ≥ {min_fraction}"),
        Check::LayerMass { min_fraction } => format!("4√h layer mass ≥ {min_fraction}"),
        Check::TrialAbove => "trial bound ≥ mu1".into(),
    }
}

fn template_label(t: &ProblemTemplate) -> String {
    format!("{:?} α={} γ={:?}", t.curve, t.alpha, t.gamma)
}

/// Adds the outcomes of the checks selected by `keep` on verdicts of `theorems`.
fn judge(line: &mut Line, outcome: &PlanOutcome, theorems: &[TheoremId], keep: impl Fn(&Check) -> bool) {
    for report in &outcome.reports {
        for v in report.verdicts.values().filter(|v| theorems.contains(&v.theorem)) {
            for c in v.checks.iter().filter(|c| keep(&c.check)) {
                line.check(
                    c.status == Status::Pass,
                    format!(
                        "{} [{}] {}: value {} target {} ({})",
                        outcome.plan,
                        template_label(&report.template),
                        check_label(&c.check),
                        c.value.map_or("-".into(), |x| format!("{x:.6}")),
                        c.target.map_or("-".into(), |x| format!("{x:.6}")),
                        c.detail
                    ),
                );
            }
        }
    }
}

fn leading_order(plans: &BTreeMap<&str, PlanOutcome>) -> Line {
    let mut line = Line::new();
    judge(&mut line, &plans["kach1"], &[TheoremId::Kach1], |_| true);
    line
}

fn curvature(plans: &BTreeMap<&str, PlanOutcome>) -> Line {
    let mut line = Line::new();
    let coefficient = |c: &Check| matches!(c, Check::Coefficient { .. });
    let cases = [
        ("curvature-alpha1", TheoremId::KachAlpha1),
        ("curvature-alpha1-gamma", TheoremId::KachAlpha1),
        ("kachLocGC", TheoremId::KachLocGC),
        ("alpha12-1", TheoremId::Alpha121),
    ];
    for (id, t) in cases {
        judge(&mut line, &plans[id], &[t], coefficient);
    }
    line
}

fn localization(plans: &BTreeMap<&str, PlanOutcome>) -> Line {
    let mut line = Line::new();
    let out = &plans["localization"];
    judge(&mut line, out, &[TheoremId::KachAlpha1, TheoremId::KachLoc], |c| {
        matches!(c, Check::Concentration { .. })
    });
    for report in &out.reports {
        for case in &report.cases {
            match &case.localization {
                Some(l) => line.check(
                    l.mass_beyond_layer <= 0.01,
                    format!(
                        "[{}] h={}: mass within 4√h of the boundary = {:.5}",
                        template_label(&report.template),
                        case.h,
                        1.0 - l.mass_beyond_layer
                    ),
                ),
                None => line.check(
                    false,
                    format!("[{}] h={}: no localization", template_label(&report.template), case.h),
                ),
            }
        }
    }
    line
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn structure(plans: &BTreeMap<&str, PlanOutcome>) -> Line {
    let mut line = Line::new();
    let s = SolverSettings::default();
    let disk = BoundaryCurve::circle(1.0).unwrap();

    let well = MagneticProblem2D::new(
        disk.clone(),
        0.05,
        1.0,
        GammaProfile::Cosine {
            mean: 0.0,
            amplitude: 0.5,
        },
    )
    .unwrap();
    let mesh = default_mesh(&well, &s).unwrap();
    let base = ground_state(&well, &mesh, &s).unwrap().mu1;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let q = well.gauge_transform(&GaugePotential::random(&mut rng, 1.0)).unwrap();
        let mu = ground_state(&q, &mesh, &s).unwrap().mu1;
        worst = worst.max(((mu - base) / base).abs());
    }
    line.check(
        worst <= 1e-8,
        format!("5 random gauges: max relative change of mu1 = {worst:.2e}"),
    );

    let mut cases = 0;
    let mut violations = 0;
    for out in plans.values() {
        for v in out.verdicts().filter(|v| v.theorem == TheoremId::UpperBound) {
            cases += 1;
            if !v.pass {
                violations += 1;
            }
        }
    }
    line.check(
        violations == 0 && cases > 0,
        format!("trial bound ≥ mu1: {} of {cases} sweeps pass", cases - violations),
    );

    let p = MagneticProblem2D::new(
        BoundaryCurve::ellipse(1.5, 1.0).unwrap(),
        0.1,
        0.75,
        GammaProfile::Cosine {
            mean: 0.3,
            amplitude: 0.2,
        },
    )
    .unwrap()
    .gauge_transform(&GaugePotential::random(&mut rng, 0.5))
    .unwrap();
    let m = default_mesh(&p, &s).unwrap();
    let forms = assemble_forms(&p, &m).unwrap();
    let (mut herm, mut neg) = (0.0f64, 0usize);
    for _ in 0..50 {
        let u = random_field(&mut rng, forms.dof());
        let v = random_field(&mut rng, forms.dof());
        let d = forms.q.form(&u, &v) - forms.q.form(&v, &u).conj();
        herm = herm.max(d.norm() / (forms.mass_norm(&u) * forms.mass_norm(&v)));
        if forms.q.form(&u, &u).re < 0.0 {
            neg += 1;
        }
    }
    line.check(herm <= 1e-12, format!("Q(u,v) − conj Q(v,u), relative: {herm:.2e}"));
    line.check(
        neg == 0,
        format!("Q(u,u) ≥ 0 for γ ≥ 0 on 50 random fields: {neg} negative"),
    );

    let p = MagneticProblem2D::new(disk, 0.08, 1.0, GammaProfile::constant(0.0)).unwrap();
    let spec = mesh_spec(&p, &s);
    let fine = MeshSpec {
        boundary_spacing: 0.5 * spec.boundary_spacing,
        interior_spacing: 0.5 * spec.interior_spacing,
        ..spec
    };
    let a = ground_state(&p, &ring_mesh(&p.curve, &spec).unwrap(), &s).unwrap().mu1;
    let b = ground_state(&p, &ring_mesh(&p.curve, &fine).unwrap(), &s).unwrap().mu1;
    let rel = (a - b).abs() / b.abs();
    line.check(
        rel <= 0.02,
        format!("mesh halving at h=0.08: {a:.8} → {b:.8}, relative {rel:.2e}"),
    );
    line
}

fn main() {
    let t = Instant::now();
    identities().print(1, "identity suite", t);
    let t = Instant::now();
    constants().print(2, "known constants", t);
    let t = Instant::now();
    asymptotics().print(3, "asymptotic regimes", t);

    let t = Instant::now();
    let settings = SolverSettings::default();
    let mut plans = BTreeMap::new();
    for id in [
        "kach1",
        "curvature-alpha1",
        "curvature-alpha1-gamma",
        "kachLocGC",
        "alpha12-1",
        "localization",
    ] {
        let p = plan(id).expect("known plan");
        let started = Instant::now();
        let out = run_plan(&p, &settings, 0).expect("plan runs");
        eprintln!(
            "plan {id}: {:?} in {:.0} s",
            out.status,
            started.elapsed().as_secs_f64()
        );
        plans.insert(id, out);
    }
    eprintln!("plans finished in {:.0} s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    leading_order(&plans).print(4, "2D leading order on the unit disk", t);
    curvature(&plans).print(5, "two-term curvature coefficients", t);
    localization(&plans).print(6, "localization", t);
    structure(&plans).print(7, "structural properties", t);
}
