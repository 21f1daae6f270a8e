use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use degennes_core::boundary_geometry::{BoundaryCurve, CurveDescriptor};
use degennes_core::io::fmt_f64;
use degennes_core::magnetic_eigensolver_2d::{
    best_trial_bound, default_mesh, ground_state, localization_profile, summary, write_field_csv, BoundaryCondition,
    GammaProfile, GaugePotential, Localization, MagneticProblem2D, SolutionSummary, SolverSettings, TargetSet,
    TrialBound,
};
use degennes_core::semiclassical_harness::{
    self as harness, verify_theorem, write_cases_csv, Status, TheoremId, DEFAULT_GRID, PLAN_IDS,
};
use degennes_core::theta_profile::{
    perturbation_coefficients_with, second_moment_formula, theta_grid, theta_with, third_moment_by_parts,
    third_moment_formula, PerturbationCoeffs, ThetaRecord, GAMMA_LIMIT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::*;
use crate::error::CliError;
use crate::output::{outln, Run};
use crate::{BoundaryArg, Common, Format, ProblemArgs, SolverArgs};

type Outcome = Result<u8, CliError>;

/// Largest relative change of mu1 tolerated by `--gauge-check`.
const GAUGE_TOL: f64 = 1e-8;
const DEFAULT_SEED: u64 = 1;

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(p) => {
            let c = RunConfig::load(p)?;
            c.check_version();
            Ok(c)
        }
        None => Ok(RunConfig::default()),
    }
}

fn bad<E: Display>(flag: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::input(format!("--{flag}: {e}"))
}

fn fresh() -> RunConfig {
    RunConfig {
        version: Some(VERSION.to_string()),
        ..RunConfig::default()
    }
}

fn merge_problem(file: Option<ProblemBlock>, a: &ProblemArgs) -> Result<ProblemBlock, CliError> {
    let mut p = file.unwrap_or(ProblemBlock {
        curve: CurveDescriptor::Circle { radius: 1.0 },
        h: None,
        alpha: 1.0,
        gamma: GammaProfile::constant(0.0),
        boundary: BoundaryCondition::Robin,
    });
    if let Some(c) = &a.curve {
        p.curve = parse_curve(c).map_err(bad("curve"))?;
    }
    if let Some(h) = a.h {
        p.h = Some(h);
    }
    if let Some(alpha) = a.alpha {
        p.alpha = alpha;
    }
    if let Some(g) = &a.gamma {
        p.gamma = parse_gamma(g).map_err(bad("gamma"))?;
    }
    if let Some(b) = a.boundary {
        p.boundary = match b {
            BoundaryArg::Robin => BoundaryCondition::Robin,
            BoundaryArg::Dirichlet => BoundaryCondition::Dirichlet,
        };
    }
    BoundaryCurve::from_descriptor(&p.curve)?;
    Ok(p)
}

fn merge_solver(file: Option<SolverSettings>, a: &SolverArgs) -> Result<SolverSettings, CliError> {
    let mut s = file.unwrap_or_default();
    if let Some(x) = a.tol {
        s.tol = x;
    }
    if let Some(x) = a.basis {
        s.basis = x;
    }
    if let Some(x) = a.restarts {
        s.restarts = x;
    }
    if let Some(x) = a.solver_seed {
        s.seed = x;
    }
    if let Some(x) = a.refinement {
        s.refinement = x;
    }
    if !(s.tol > 0.0) || s.basis < 2 || s.restarts == 0 || !(s.refinement >= 1.0) {
        return Err(CliError::input(format!(
            "solver settings need tol > 0, basis ≥ 2, restarts ≥ 1 and refinement ≥ 1, got {s:?}"
        )));
    }
    Ok(s)
}

fn problem_of(block: &ProblemBlock) -> Result<MagneticProblem2D, CliError> {
    let h = block
        .h
        .ok_or_else(|| CliError::input("h is required: pass --h or set problem.h"))?;
    Ok(block.template().problem(h)?)
}

fn dry(run: &Run) -> Outcome {
    #[derive(Serialize)]
    struct Dry<'a> {
        command: &'a str,
        version: &'a str,
        config_hash: &'a str,
        config: &'a RunConfig,
    }
    let text = degennes_core::io::canonical_json(&Dry {
        command: &run.meta.command,
        version: &run.meta.version,
        config_hash: &run.meta.config_hash,
        config: &run.config,
    })?;
    outln!("{text}");
    Ok(0)
}

/// File when `out` is given, otherwise standard output.
fn emit(run: &mut Run, out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            run.write(p, text.as_bytes())?;
            run.finish(p)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn theta(
    common: &Common,
    gamma: Option<String>,
    spacing: Option<f64>,
    format: Format,
    out: Option<PathBuf>,
) -> Outcome {
    let file = base_config(common)?;
    let mut block = match (gamma, file.theta) {
        (Some(spec), b) => ThetaBlock {
            gamma: parse_range(&spec).map_err(bad("gamma"))?,
            settings: b.map(|b| b.settings).unwrap_or_default(),
        },
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::input("no γ grid: pass --gamma or set theta.gamma")),
    };
    if let Some(s) = spacing {
        block.settings.spacing = s;
    }
    if block.gamma.is_empty() {
        return Err(CliError::input("empty γ grid"));
    }
    if let Some(g) = block.gamma.iter().find(|g| !(g.abs() <= GAMMA_LIMIT)) {
        return Err(CliError::input(format!(
            "γ = {g} outside the supported range [-{GAMMA_LIMIT}, {GAMMA_LIMIT}]"
        )));
    }
    if !(block.settings.spacing > 0.0 && block.settings.spacing < 0.1) {
        return Err(CliError::input(format!(
            "spacing must lie in (0, 0.1), got {}",
            block.settings.spacing
        )));
    }
    let config = RunConfig {
        theta: Some(block.clone()),
        ..fresh()
    };
    let mut run = Run::new("theta", config);
    if common.dry_run {
        return dry(&run);
    }
    let records = theta_grid(&block.gamma, &block.settings)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let text = match format {
        Format::Csv => theta_csv(&records),
        Format::Json => run.json(&records)?,
    };
    emit(&mut run, out.as_deref(), &text)?;
    Ok(0)
}

fn theta_csv(records: &[ThetaRecord]) -> String {
    let mut s = String::from(
        "gamma,theta,xi_star,phi0_sq,moment1,moment2,moment3,m3,gap,relation_residual,stationarity,theta_change\n",
    );
    for r in records {
        let d = &r.diagnostics;
        let row = [
            r.gamma,
            r.theta,
            r.xi_star,
            r.phi0_sq,
            r.moment(1),
            r.moment(2),
            r.moment(3),
            r.m3,
            r.gap,
            d.relation_residual,
            d.stationarity,
            d.theta_change,
        ];
        s += &row.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ProfileResult {
    record: ThetaRecord,
    /// `Θ'(γ) = φ(0)²`.
    theta_prime: f64,
    second_moment_formula: f64,
    third_moment_formula: f64,
    third_moment_by_parts: f64,
    perturbation: PerturbationCoeffs,
    d3: f64,
}

pub fn profile(
    common: &Common,
    gamma: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    h: Option<f64>,
    out: Option<PathBuf>,
    samples: Option<PathBuf>,
) -> Outcome {
    let file = base_config(common)?;
    let mut block = match (gamma, file.profile) {
        (_, Some(b)) => b,
        (Some(g), None) => ProfileBlock {
            gamma: g,
            alpha: 0.5,
            beta: 1.0,
            h: 0.01,
        },
        (None, None) => return Err(CliError::input("no γ: pass --gamma or set profile.gamma")),
    };
    if let Some(g) = gamma {
        block.gamma = g;
    }
    if let Some(a) = alpha {
        block.alpha = a;
    }
    if let Some(b) = beta {
        block.beta = b;
    }
    if let Some(x) = h {
        block.h = x;
    }
    if !(block.gamma.abs() <= GAMMA_LIMIT) {
        return Err(CliError::input(format!(
            "γ = {} outside the supported range [-{GAMMA_LIMIT}, {GAMMA_LIMIT}]",
            block.gamma
        )));
    }
    if !(block.h > 0.0 && block.h < 1.0) || !(block.alpha > 0.0) {
        return Err(CliError::input("profile needs 0 < h < 1 and α > 0"));
    }
    let settings = file.theta.map(|t| t.settings).unwrap_or_default();
    let config = RunConfig {
        profile: Some(block.clone()),
        ..fresh()
    };
    let mut run = Run::new("profile", config);
    if common.dry_run {
        return dry(&run);
    }
    let record = theta_with(block.gamma, &settings)?;
    let pert = perturbation_coefficients_with(block.alpha, block.gamma, block.beta, block.h, &settings)?;
    if let Some(path) = &samples {
        let phi = record.profile.as_ref().expect("fine profile is kept");
        let mut s = String::from("t,phi\n");
        for (i, v) in phi.values.iter().enumerate() {
            s += &format!("{},{}\n", fmt_f64(phi.t(i)), fmt_f64(*v));
        }
        run.write(path, s.as_bytes())?;
    }
    let result = ProfileResult {
        theta_prime: record.phi0_sq,
        second_moment_formula: second_moment_formula(&record),
        third_moment_formula: third_moment_formula(&record),
        third_moment_by_parts: third_moment_by_parts(&record),
        d3: pert.d3(),
        perturbation: pert,
        record,
    };
    let text = run.json(&result)?;
    match (&out, &samples) {
        (None, Some(p)) => {
            crate::output::stdout(&text);
            run.finish(p)?;
        }
        _ => emit(&mut run, out.as_deref(), &text)?,
    }
    Ok(0)
}

#[derive(Serialize)]
struct GaugeCheck {
    gauges: usize,
    seed: u64,
    max_relative_deviation: f64,
    /// Largest change of `|u|` at a node, relative to the peak of `|u|`.
    max_modulus_deviation: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Eig2dSummary {
    solution: SolutionSummary,
    eta_min: f64,
    mu1_over_h: f64,
    nodes: usize,
    triangles: usize,
    shift: f64,
    iterations: usize,
    trial_bound: Option<TrialBound>,
    gauge_check: Option<GaugeCheck>,
}

pub fn eig2d(
    common: &Common,
    problem: &ProblemArgs,
    solver: &SolverArgs,
    out_dir: PathBuf,
    gauges: Option<usize>,
    seed: Option<u64>,
) -> Outcome {
    let file = base_config(common)?;
    let block = merge_problem(file.problem, problem)?;
    let settings = merge_solver(file.solver, solver)?;
    let seed = seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let config = RunConfig {
        seed: gauges.map(|_| seed),
        problem: Some(block.clone()),
        solver: Some(settings),
        ..fresh()
    };
    let mut run = Run::new("eig2d", config);
    let p = problem_of(&block)?;
    if common.dry_run {
        return dry(&run);
    }
    let mesh = default_mesh(&p, &settings)?;
    let gs = ground_state(&p, &mesh, &settings)?;
    let trial = match p.boundary {
        BoundaryCondition::Robin => best_trial_bound(&p).ok(),
        BoundaryCondition::Dirichlet => None,
    };
    let gauge_check = match gauges {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let peak = gs.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let (mut rel, mut modulus) = (0.0_f64, 0.0_f64);
            for _ in 0..n {
                let q = p.gauge_transform(&GaugePotential::random(&mut rng, 1.0))?;
                let g = ground_state(&q, &mesh, &settings)?;
                rel = rel.max((g.mu1 - gs.mu1).abs() / gs.mu1.abs().max(p.h));
                let dev =
                    g.u.iter()
                        .zip(&gs.u)
                        .map(|(a, b)| (a.norm() - b.norm()).abs())
                        .fold(0.0, f64::max);
                modulus = modulus.max(dev / peak);
            }
            outln!("gauge check: {n} random gauges, max relative deviation of mu1 = {rel:.3e}");
            Some(GaugeCheck {
                gauges: n,
                seed,
                max_relative_deviation: rel,
                max_modulus_deviation: modulus,
                tolerance: GAUGE_TOL,
                pass: rel <= GAUGE_TOL,
            })
        }
        None => None,
    };
    let passed = gauge_check.as_ref().is_none_or(|g| g.pass);
    let result = Eig2dSummary {
        solution: summary(&p, &gs),
        eta_min: p.eta(p.gamma.min()),
        mu1_over_h: gs.mu1 / p.h,
        nodes: mesh.nodes.len(),
        triangles: mesh.triangles.len(),
        shift: gs.shift,
        iterations: gs.iterations,
        trial_bound: trial,
        gauge_check,
    };
    let mut field = Vec::new();
    write_field_csv(&mesh, &gs, &mut field)?;
    run.write(&out_dir.join("eig2d_field.csv"), &field)?;
    run.write(&out_dir.join("eig2d_summary.json"), run.json(&result)?.as_bytes())?;
    run.finish(&out_dir.join("eig2d"))?;
    outln!(
        "mu1 = {} (mu1/h = {}), residual {:.3e}, {} dof",
        fmt_f64(gs.mu1),
        fmt_f64(gs.mu1 / p.h),
        gs.residual,
        gs.dof
    );
    Ok(if passed { 0 } else { 1 })
}

fn check_h_list(h: &[f64]) -> Result<(), CliError> {
    if h.is_empty() {
        return Err(CliError::input("empty h list"));
    }
    if h.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(CliError::input("h list must be strictly decreasing"));
    }
    if let Some(x) = h.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(CliError::input(format!("h must lie in (0, 1), got {x}")));
    }
    Ok(())
}

fn print_verdicts<'a>(label: &str, verdicts: impl Iterator<Item = &'a harness::Verdict>) {
    for v in verdicts {
        let margin = v.margin.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into());
        let status = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Incomplete => "INCOMPLETE",
        };
        outln!("{label} {} {status} margin {margin}", v.theorem);
        for c in &v.checks {
            outln!("  {}", c.detail);
        }
    }
}

pub fn sweep(
    common: &Common,
    problem: &ProblemArgs,
    solver: &SolverArgs,
    h_list: Option<String>,
    theorems: Vec<String>,
    jobs: usize,
    out_dir: PathBuf,
) -> Outcome {
    let file = base_config(common)?;
    let mut block = merge_problem(file.problem, problem)?;
    block.h = None;
    let settings = merge_solver(file.solver, solver)?;
    let mut sw = file.sweep.unwrap_or(SweepBlock {
        h: DEFAULT_GRID.to_vec(),
        theorems: Vec::new(),
        localization: None,
    });
    if let Some(spec) = h_list {
        sw.h = parse_list(&spec).map_err(bad("h-list"))?;
    }
    if !theorems.is_empty() {
        sw.theorems = theorems
            .iter()
            .map(|t| t.parse::<TheoremId>())
            .collect::<Result<_, _>>()
            .map_err(bad("theorem"))?;
    }
    check_h_list(&sw.h)?;
    let mut template = block.template();
    template.localization = sw.localization.clone();
    let config = RunConfig {
        problem: Some(block),
        solver: Some(settings),
        sweep: Some(sw.clone()),
        ..fresh()
    };
    let mut run = Run::new("sweep", config);
    if common.dry_run {
        return dry(&run);
    }
    let mut report = harness::sweep(&template, &sw.h, &settings, jobs)?;
    for t in &sw.theorems {
        verify_theorem(&mut report, *t);
    }
    let mut csv = Vec::new();
    write_cases_csv(&report, &mut csv)?;
    run.write(&out_dir.join("sweep_cases.csv"), &csv)?;
    run.write(&out_dir.join("sweep_report.json"), run.json(&report)?.as_bytes())?;
    run.finish(&out_dir.join("sweep"))?;
    for c in &report.cases {
        match c.mu1 {
            Some(mu) => outln!("h = {}: mu1 = {}", c.h, fmt_f64(mu)),
            None => outln!("h = {}: failed", c.h),
        }
        for e in &c.errors {
            outln!("  {}: {}", e.stage, e.message);
        }
    }
    print_verdicts("sweep", report.verdicts.values());
    let failed = report.cases.iter().any(|c| c.failed()) || report.verdicts.values().any(|v| !v.pass);
    Ok(if failed { 1 } else { 0 })
}

pub fn verify(
    common: &Common,
    plan: Option<String>,
    list: bool,
    solver: &SolverArgs,
    jobs: usize,
    out: Option<PathBuf>,
) -> Outcome {
    if list {
        for id in PLAN_IDS {
            let p = harness::plan(id).expect("listed plans exist");
            outln!("{id} (v{}): {}", p.version, p.description);
        }
        return Ok(0);
    }
    let file = base_config(common)?;
    let id = plan
        .or(file.verify.map(|v| v.plan))
        .ok_or_else(|| CliError::input("no plan: pass --plan or set verify.plan"))?;
    let Some(plan) = harness::plan(&id) else {
        return Err(CliError::input(format!(
            "unknown plan {id:?}; known plans: {}",
            PLAN_IDS.join(", ")
        )));
    };
    let settings = merge_solver(file.solver, solver)?;
    let config = RunConfig {
        solver: Some(settings),
        verify: Some(VerifyBlock { plan: id.clone() }),
        ..fresh()
    };
    let mut run = Run::new("verify", config);
    if common.dry_run {
        return dry(&run);
    }
    let outcome = harness::run_plan(&plan, &settings, jobs)?;
    print_verdicts(&id, outcome.verdicts());
    outln!(
        "plan {id} v{}: {}",
        outcome.version,
        if outcome.pass { "PASS" } else { "FAIL" }
    );
    if let Some(p) = &out {
        let text = run.json(&outcome)?;
        emit(&mut run, Some(p), &text)?;
    }
    Ok(if outcome.pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct LocalizeResult {
    mu1: f64,
    target: TargetSet,
    radius: f64,
    localization: Localization,
}

pub fn localize(
    common: &Common,
    problem: &ProblemArgs,
    solver: &SolverArgs,
    target: Option<String>,
    radius: Option<f64>,
    out: Option<PathBuf>,
) -> Outcome {
    let file = base_config(common)?;
    let block = merge_problem(file.problem, problem)?;
    let settings = merge_solver(file.solver, solver)?;
    let p = problem_of(&block)?;
    let mut loc = file.localize.unwrap_or(LocalizeBlock {
        target: TargetSet::Boundary,
        radius: 4.0 * p.h.sqrt(),
    });
    if let Some(t) = &target {
        loc.target = parse_target(t).map_err(bad("target"))?;
    }
    if let Some(r) = radius {
        loc.radius = r;
    }
    if !(loc.radius > 0.0) {
        return Err(CliError::input(format!("radius must be positive, got {}", loc.radius)));
    }
    let config = RunConfig {
        problem: Some(block),
        solver: Some(settings),
        localize: Some(loc.clone()),
        ..fresh()
    };
    let mut run = Run::new("localize", config);
    if common.dry_run {
        return dry(&run);
    }
    let mesh = default_mesh(&p, &settings)?;
    let gs = ground_state(&p, &mesh, &settings)?;
    let l = localization_profile(&p, &mesh, &gs, &loc.target, loc.radius)?;
    eprintln!(
        "mass outside the target: {}, beyond 4√h: {}, decay rate {}",
        fmt_f64(l.mass_outside),
        fmt_f64(l.mass_beyond_layer),
        fmt_f64(l.agmon_rate)
    );
    let result = LocalizeResult {
        mu1: gs.mu1,
        target: loc.target,
        radius: loc.radius,
        localization: l,
    };
    let text = run.json(&result)?;
    emit(&mut run, out.as_deref(), &text)?;
    Ok(0)
}
