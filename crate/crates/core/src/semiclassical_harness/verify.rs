use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fit::{fit_expansion, ModelId};
use super::sweep::{geometric_grid, sweep, ProblemTemplate, SweepReport};
use crate::boundary_geometry::{BoundaryCurve, CurveDescriptor};
use crate::error::{Error, Result};
use crate::magnetic_eigensolver_2d::{GammaProfile, SolverSettings, TargetSet};
use crate::theta_profile::theta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    /// Leading order `mu1 ~ hΘ(h^{α−½}γ₀)`, with the α < ½ limits.
    #[serde(rename = "kach1")]
    Kach1,
    /// ½ < α < 1, variable γ: correction `6M₃γ₀h^{α+½}`.
    #[serde(rename = "alpha12-1")]
    Alpha121,
    /// Concentration near the minimum of γ.
    #[serde(rename = "kachLoc")]
    KachLoc,
    /// α = 1: correction `−2M₃(κ − 3γ)_max h^{3/2}`.
    #[serde(rename = "kach-thm-alp=1")]
    KachAlpha1,
    /// Constant γ: correction `−2M₃κ_max h^{3/2}` and concentration at maximal curvature.
    #[serde(rename = "kachLocGC")]
    KachLocGC,
    /// Exponential decay away from the boundary.
    #[serde(rename = "prop4.1")]
    BoundaryDecay,
    /// Trial states bound the ground energy from above.
    #[serde(rename = "propUB")]
    UpperBound,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::Kach1,
        TheoremId::Alpha121,
        TheoremId::KachLoc,
        TheoremId::KachAlpha1,
        TheoremId::KachLocGC,
        TheoremId::BoundaryDecay,
        TheoremId::UpperBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Kach1 => "kach1",
            TheoremId::Alpha121 => "alpha12-1",
            TheoremId::KachLoc => "kachLoc",
            TheoremId::KachAlpha1 => "kach-thm-alp=1",
            TheoremId::KachLocGC => "kachLocGC",
            TheoremId::BoundaryDecay => "prop4.1",
            TheoremId::UpperBound => "propUB",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown theorem id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Tolerance {
    Absolute { value: f64 },
    Relative { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// `|mu1/h − Θ(η_h)|` does not grow as h decreases and is within
    /// `tolerance` at the smallest h.
    LeadingOrder { tolerance: Tolerance },
    /// `mu1/h^exponent` lies in `(lo, hi)` at the smallest h.
    ScaledWindow { exponent: f64, lo: f64, hi: f64 },
    /// First fitted coefficient of `model` within `rel_tol` of its predicted value.
    Coefficient { model: ModelId, rel_tol: f64 },
    /// At the smallest h, at least `min_fraction` of the mass lies in the
    /// template's localization region.
    Concentration { min_fraction: f64 },
    /// On every case, at least `min_fraction` of the mass lies within `4√h` of ∂Ω.
    LayerMass { min_fraction: f64 },
    /// `trial_bound ≥ mu1` on every case.
    TrialAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub status: Status,
    /// Distance to the threshold, positive on the passing side.
    pub margin: Option<f64>,
    pub value: Option<f64>,
    pub target: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub theorem: TheoremId,
    pub status: Status,
    pub pass: bool,
    /// Smallest margin over the checks.
    pub margin: Option<f64>,
    pub checks: Vec<CheckOutcome>,
}

/// Checks applied by [`verify_theorem`] for a theorem in the regime of `template`.
pub fn default_checks(theorem: TheoremId, template: &ProblemTemplate) -> Vec<Check> {
    let alpha = template.alpha;
    let g0 = template.gamma.min();
    let mut checks = match theorem {
        TheoremId::Kach1 => vec![if alpha < 0.5 && g0 > 0.0 {
            Check::ScaledWindow {
                exponent: 1.0,
                lo: 0.85,
                hi: 1.05,
            }
        } else if alpha < 0.5 && g0 < 0.0 {
            Check::ScaledWindow {
                exponent: 2.0 * alpha,
                lo: -1.3 * g0 * g0,
                hi: -0.7 * g0 * g0,
            }
        } else if g0 == 0.0 {
            Check::LeadingOrder {
                tolerance: Tolerance::Absolute { value: 0.05 },
            }
        } else {
            Check::LeadingOrder {
                tolerance: Tolerance::Relative { value: 0.05 },
            }
        }],
        TheoremId::KachAlpha1 => vec![Check::Coefficient {
            model: ModelId::TwoTermAlpha1,
            rel_tol: if template.gamma.is_constant() && g0 == 0.0 {
                0.10
            } else {
                0.15
            },
        }],
        TheoremId::Alpha121 => vec![Check::Coefficient {
            model: ModelId::TwoTermAlphaMid,
            rel_tol: 0.15,
        }],
        TheoremId::KachLocGC => vec![Check::Coefficient {
            model: ModelId::TwoTermGammaConst,
            rel_tol: 0.15,
        }],
        TheoremId::KachLoc => vec![Check::LayerMass { min_fraction: 0.99 }],
        TheoremId::BoundaryDecay => vec![Check::LayerMass { min_fraction: 0.99 }],
        TheoremId::UpperBound => vec![Check::TrialAbove],
    };
    let localizes = matches!(
        theorem,
        TheoremId::KachLoc | TheoremId::KachAlpha1 | TheoremId::Alpha121 | TheoremId::KachLocGC
    );
    if localizes && template.localization.is_some() {
        checks.push(Check::Concentration { min_fraction: 0.9 });
    }
    checks
}

/// Run the default checks of `theorem` on `report`, store any fits they
/// need and the verdict in the report, and return the verdict.
pub fn verify_theorem(report: &mut SweepReport, theorem: TheoremId) -> Verdict {
    let checks = default_checks(theorem, &report.template);
    verify_checks(report, theorem, &checks)
}

pub fn verify_checks(report: &mut SweepReport, theorem: TheoremId, checks: &[Check]) -> Verdict {
    let outcomes: Vec<CheckOutcome> = checks.iter().map(|c| run_check(report, c)).collect();
    let status = if outcomes.iter().any(|o| o.status == Status::Fail) {
        Status::Fail
    } else if outcomes.iter().any(|o| o.status == Status::Incomplete) || outcomes.is_empty() {
        Status::Incomplete
    } else {
        Status::Pass
    };
    let margin = outcomes.iter().filter_map(|o| o.margin).reduce(f64::min);
    let verdict = Verdict {
        theorem,
        status,
        pass: status == Status::Pass,
        margin,
        checks: outcomes,
    };
    report.verdicts.insert(theorem.name().to_string(), verdict.clone());
    verdict
}

fn outcome(check: &Check, margin: f64, value: f64, target: f64, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        check: check.clone(),
        status: if pass { Status::Pass } else { Status::Fail },
        margin: Some(margin),
        value: Some(value),
        target: Some(target),
        detail,
    }
}

fn unresolved(check: &Check, status: Status, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        check: check.clone(),
        status,
        margin: None,
        value: None,
        target: None,
        detail: detail.into(),
    }
}

fn run_check(report: &mut SweepReport, check: &Check) -> CheckOutcome {
    let solved: Vec<_> = report.solved().cloned().collect();
    let smallest = solved.last();
    match check {
        Check::LeadingOrder { tolerance } => {
            if solved.len() < 2 {
                return unresolved(check, Status::Incomplete, "needs at least two solved cases");
            }
            let mut devs = Vec::new();
            let mut last_theta = 0.0;
            for c in &solved {
                match theta(c.eta) {
                    Ok(t) => {
                        devs.push((c.mu1.unwrap() / c.h - t.theta).abs());
                        last_theta = t.theta;
                    }
                    Err(e) => return unresolved(check, Status::Fail, format!("Θ at η = {}: {e}", c.eta)),
                }
            }
            let dev = *devs.last().unwrap();
            let (value, tol) = match tolerance {
                Tolerance::Absolute { value } => (dev, *value),
                Tolerance::Relative { value } => (dev / last_theta.abs(), *value),
            };
            let trend = devs.windows(2).all(|w| w[1] <= w[0]);
            outcome(
                check,
                tol - value,
                value,
                tol,
                trend && value <= tol,
                format!("|mu1/h − Θ(η)| over decreasing h: {devs:?}; non-increasing: {trend}"),
            )
        }
        Check::ScaledWindow { exponent, lo, hi } => {
            let Some(c) = smallest else {
                return unresolved(check, Status::Incomplete, "no solved case");
            };
            let v = c.mu1.unwrap() / c.h.powf(*exponent);
            outcome(
                check,
                (v - lo).min(hi - v),
                v,
                0.5 * (lo + hi),
                v > *lo && v < *hi,
                format!("mu1/h^{exponent} = {v} at h = {}, window ({lo}, {hi})", c.h),
            )
        }
        Check::Coefficient { model, rel_tol } => {
            let target = match predicted_coefficient(&report.template, *model) {
                Ok(t) => t,
                Err(e) => return unresolved(check, Status::Fail, e.to_string()),
            };
            if report.fit(*model).is_none() {
                match fit_expansion(report, *model) {
                    Ok(f) => report.fits.push(f),
                    Err(Error::Fit(m)) if report.solved().count() < 3 => {
                        return unresolved(check, Status::Incomplete, m);
                    }
                    Err(e) => return unresolved(check, Status::Fail, e.to_string()),
                }
            }
            let fit = report.fit(*model).unwrap();
            let c = fit.primary();
            let rel = (c - target).abs() / target.abs();
            outcome(
                check,
                rel_tol - rel,
                c,
                target,
                rel <= *rel_tol,
                format!(
                    "fitted {} coefficient {c} vs predicted {target} (relative deviation {rel:.4})",
                    model.name()
                ),
            )
        }
        Check::Concentration { min_fraction } => {
            let Some(c) = smallest else {
                return unresolved(check, Status::Incomplete, "no solved case");
            };
            if report.template.localization.is_none() {
                return unresolved(check, Status::Incomplete, "template has no localization region");
            }
            let Some(loc) = &c.localization else {
                return unresolved(check, Status::Incomplete, "localization metrics missing");
            };
            let inside = 1.0 - loc.mass_outside;
            outcome(
                check,
                inside - min_fraction,
                inside,
                *min_fraction,
                inside >= *min_fraction,
                format!(
                    "mass fraction {inside} within {} of the target at h = {}",
                    loc.radius, c.h
                ),
            )
        }
        Check::LayerMass { min_fraction } => {
            if solved.is_empty() {
                return unresolved(check, Status::Incomplete, "no solved case");
            }
            let mut worst = f64::INFINITY;
            for c in &solved {
                let Some(loc) = &c.localization else {
                    return unresolved(
                        check,
                        Status::Incomplete,
                        format!("localization missing at h = {}", c.h),
                    );
                };
                worst = worst.min(1.0 - loc.mass_beyond_layer);
            }
            outcome(
                check,
                worst - min_fraction,
                worst,
                *min_fraction,
                worst >= *min_fraction,
                format!("smallest mass fraction within 4√h of the boundary: {worst}"),
            )
        }
        Check::TrialAbove => {
            if solved.is_empty() {
                return unresolved(check, Status::Incomplete, "no solved case");
            }
            let mut worst = f64::INFINITY;
            for c in &solved {
                let Some(b) = c.trial_bound else {
                    return unresolved(check, Status::Incomplete, format!("no trial bound at h = {}", c.h));
                };
                let mu = c.mu1.unwrap();
                worst = worst.min((b - mu) / mu.abs().max(c.h));
            }
            outcome(
                check,
                worst,
                worst,
                0.0,
                worst >= 0.0,
                format!("smallest (trial − mu1)/max(|mu1|, h): {worst}"),
            )
        }
    }
}

/// Value the first coefficient of `model` should approach, from the
/// half-plane constants and the boundary geometry of `template`.
pub fn predicted_coefficient(template: &ProblemTemplate, model: ModelId) -> Result<f64> {
    let curve = BoundaryCurve::from_descriptor(&template.curve)?;
    let len = curve.length();
    let n = 2048;
    let sup = |f: &dyn Fn(f64) -> f64| {
        (0..n)
            .map(|k| f(k as f64 * len / n as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let g0 = template.gamma.min();
    match model {
        ModelId::Leading => Err(Error::config("the leading model has no predicted correction")),
        ModelId::TwoTermAlpha1 => {
            let m3 = theta(0.0)?.m3;
            Ok(-2.0 * m3 * sup(&|s| curve.curvature(s) - 3.0 * template.gamma.eval(s, len)))
        }
        ModelId::TwoTermAlphaMid => Ok(6.0 * theta(0.0)?.m3 * g0),
        ModelId::TwoTermGammaConst => {
            // η = h^{α−½}γ₀ is fixed at α = ½ and tends to 0 above.
            let eta = if (template.alpha - 0.5).abs() < 1e-12 { g0 } else { 0.0 };
            Ok(-2.0 * theta(eta)?.m3 * sup(&|s| curve.curvature(s)))
        }
    }
}

/// Solver-independent part of a check plan: one sweep and the theorems judged on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub template: ProblemTemplate,
    pub h: Vec<f64>,
    pub checks: Vec<(TheoremId, Vec<Check>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckPlan {
    pub id: String,
    pub version: u32,
    pub description: String,
    pub entries: Vec<PlanEntry>,
}

pub const PLAN_VERSION: u32 = 1;

/// Leading-order grid.
pub const LEADING_GRID: [f64; 3] = [0.08, 0.04, 0.02];

/// Default sweep grid.
pub const DEFAULT_GRID: [f64; 5] = [0.08, 0.056, 0.04, 0.028, 0.02];

/// Grid for two-term fits: seven geometric steps from 0.02 to 0.005.
pub fn fit_grid() -> Vec<f64> {
    geometric_grid(0.02, 0.005, 7)
}

pub const PLAN_IDS: [&str; 8] = [
    "kach1-disk-neg-gamma",
    "kach1",
    "curvature-alpha1",
    "curvature-alpha1-gamma",
    "kachLocGC",
    "alpha12-1",
    "kachLoc",
    "localization",
];

fn entry(template: ProblemTemplate, h: Vec<f64>, theorems: &[TheoremId]) -> PlanEntry {
    let checks = theorems.iter().map(|&t| (t, default_checks(t, &template))).collect();
    PlanEntry { template, h, checks }
}

fn ellipse() -> CurveDescriptor {
    CurveDescriptor::Ellipse { a: 2.0, b: 1.0 }
}

fn cosine(mean: f64, amplitude: f64) -> GammaProfile {
    GammaProfile::Cosine { mean, amplitude }
}

fn loc_plan_entries() -> Vec<PlanEntry> {
    let pi = std::f64::consts::PI;
    let near_min = |alpha: f64| {
        entry(
            ProblemTemplate::disk(alpha, cosine(0.0, 1.0))
                .with_localization(TargetSet::Arcs { centers: vec![pi] }, 0.5),
            vec![0.01],
            &[TheoremId::KachLoc, TheoremId::UpperBound],
        )
    };
    vec![near_min(0.25), near_min(0.75)]
}

/// Fixed, versioned check plans.
pub fn plan(id: &str) -> Option<CheckPlan> {
    use TheoremId::*;
    let c = GammaProfile::constant;
    let lead = || LEADING_GRID.to_vec();
    let (description, entries) = match id {
        "kach1-disk-neg-gamma" => (
            "leading order on the unit disk, α = ½, γ ≡ −1",
            vec![entry(ProblemTemplate::disk(0.5, c(-1.0)), lead(), &[Kach1, UpperBound])],
        ),
        "kach1" => (
            "leading order on the unit disk in four (α, γ) regimes",
            [(1.0, 0.0), (0.5, -1.0), (0.25, 1.0), (0.25, -1.0)]
                .iter()
                .map(|&(a, g)| entry(ProblemTemplate::disk(a, c(g)), lead(), &[Kach1, UpperBound]))
                .collect(),
        ),
        "curvature-alpha1" => (
            "h^{3/2} coefficient on the unit disk, α = 1, γ ≡ 0",
            vec![entry(
                ProblemTemplate::disk(1.0, c(0.0)),
                fit_grid(),
                &[KachAlpha1, UpperBound],
            )],
        ),
        "curvature-alpha1-gamma" => (
            "h^{3/2} coefficient on the unit disk, α = 1, γ ≡ 0.2",
            vec![entry(
                ProblemTemplate::disk(1.0, c(0.2)),
                fit_grid(),
                &[KachAlpha1, UpperBound],
            )],
        ),
        "kachLocGC" => (
            "constant γ = 0.3, α = ½: h^{3/2} coefficient on the disk, concentration at the ellipse vertices",
            vec![
                entry(ProblemTemplate::disk(0.5, c(0.3)), fit_grid(), &[KachLocGC, UpperBound]),
                PlanEntry {
                    template: ProblemTemplate::new(ellipse(), 0.5, c(0.3)).with_localization(
                        TargetSet::Points {
                            points: vec![[2.0, 0.0], [-2.0, 0.0]],
                        },
                        0.5,
                    ),
                    h: vec![0.01],
                    checks: vec![(KachLocGC, vec![Check::Concentration { min_fraction: 0.9 }])],
                },
            ],
        ),
        "alpha12-1" => (
            "h^{α+½} coefficient on the unit disk, α = ¾, γ = 1 + ½cos s",
            vec![entry(
                ProblemTemplate::disk(0.75, cosine(1.0, 0.5)),
                fit_grid(),
                &[Alpha121, UpperBound],
            )],
        ),
        "kachLoc" => (
            "concentration near the minimum of γ = cos s on the unit disk",
            loc_plan_entries(),
        ),
        "localization" => {
            let mut entries = vec![PlanEntry {
                template: ProblemTemplate::new(ellipse(), 1.0, c(0.0)).with_localization(
                    TargetSet::Points {
                        points: vec![[2.0, 0.0], [-2.0, 0.0]],
                    },
                    0.5,
                ),
                h: vec![0.01],
                checks: vec![
                    (KachAlpha1, vec![Check::Concentration { min_fraction: 0.9 }]),
                    (BoundaryDecay, vec![Check::LayerMass { min_fraction: 0.99 }]),
                    (UpperBound, vec![Check::TrialAbove]),
                ],
            }];
            entries.extend(loc_plan_entries());
            (
                "localization at maximal curvature, at minimal γ, and in the boundary layer",
                entries,
            )
        }
        _ => return None,
    };
    Some(CheckPlan {
        id: id.to_string(),
        version: PLAN_VERSION,
        description: description.to_string(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub plan: String,
    pub version: u32,
    pub status: Status,
    pub pass: bool,
    pub reports: Vec<SweepReport>,
}

impl PlanOutcome {
    pub fn verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.reports.iter().flat_map(|r| r.verdicts.values())
    }
}

pub fn run_plan(plan: &CheckPlan, settings: &SolverSettings, jobs: usize) -> Result<PlanOutcome> {
    let mut reports = Vec::new();
    for e in &plan.entries {
        let mut report = sweep(&e.template, &e.h, settings, jobs)?;
        for (theorem, checks) in &e.checks {
            verify_checks(&mut report, *theorem, checks);
        }
        reports.push(report);
    }
    let statuses: Vec<Status> = reports
        .iter()
        .flat_map(|r| r.verdicts.values().map(|v| v.status))
        .collect();
    let status = if statuses.contains(&Status::Fail) {
        Status::Fail
    } else if statuses.contains(&Status::Incomplete) {
        Status::Incomplete
    } else {
        Status::Pass
    };
    Ok(PlanOutcome {
        plan: plan.id.clone(),
        version: plan.version,
        status,
        pass: status == Status::Pass,
        reports,
    })
}
