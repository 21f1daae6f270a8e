use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::Fit;
use super::verify::Verdict;
use crate::boundary_geometry::{BoundaryCurve, CurveDescriptor};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::magnetic_eigensolver_2d::{
    best_trial_bound, default_mesh, ground_state, localization_profile, BoundaryCondition, GammaProfile,
    MagneticProblem2D, SolverSettings, TargetSet, TrialKind,
};

/// Which region the localization metric measures mass against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationRequest {
    pub target: TargetSet,
    pub radius: f64,
}

/// Everything about a case except `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemTemplate {
    pub curve: CurveDescriptor,
    pub alpha: f64,
    pub gamma: GammaProfile,
    #[serde(default)]
    pub boundary: BoundaryCondition,
    /// Without a request, mass is measured outside the `4√h` boundary layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationRequest>,
}

impl ProblemTemplate {
    pub fn new(curve: CurveDescriptor, alpha: f64, gamma: GammaProfile) -> Self {
        ProblemTemplate {
            curve,
            alpha,
            gamma,
            boundary: BoundaryCondition::Robin,
            localization: None,
        }
    }

    pub fn disk(alpha: f64, gamma: GammaProfile) -> Self {
        Self::new(CurveDescriptor::Circle { radius: 1.0 }, alpha, gamma)
    }

    pub fn with_localization(mut self, target: TargetSet, radius: f64) -> Self {
        self.localization = Some(LocalizationRequest { target, radius });
        self
    }

    pub fn problem(&self, h: f64) -> Result<MagneticProblem2D> {
        let curve = BoundaryCurve::from_descriptor(&self.curve)?;
        Ok(MagneticProblem2D::new(curve, h, self.alpha, self.gamma)?.with_boundary(self.boundary))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseLocalization {
    pub target: TargetSet,
    pub radius: f64,
    pub mass_outside: f64,
    pub agmon_rate: f64,
    pub mass_beyond_layer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseError {
    /// `solve`, `trial` or `localization`.
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub h: f64,
    pub alpha: f64,
    pub gamma: GammaProfile,
    /// `h^{α−½}·min γ`.
    pub eta: f64,
    pub mu1: Option<f64>,
    pub residual: Option<f64>,
    pub dof: Option<usize>,
    pub trial_bound: Option<f64>,
    pub trial_kind: Option<TrialKind>,
    pub localization: Option<CaseLocalization>,
    pub errors: Vec<CaseError>,
}

impl CaseResult {
    pub fn failed(&self) -> bool {
        self.mu1.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub template: ProblemTemplate,
    pub settings: SolverSettings,
    /// Sorted by decreasing `h`.
    pub cases: Vec<CaseResult>,
    pub fits: Vec<Fit>,
    pub verdicts: std::collections::BTreeMap<String, Verdict>,
}

impl SweepReport {
    pub fn solved(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.failed())
    }

    pub fn fit(&self, model: super::fit::ModelId) -> Option<&Fit> {
        self.fits.iter().find(|f| f.model == model)
    }
}

/// Ground state, trial bound and localization metrics for one `h`. Failures
/// are recorded on the case, never propagated.
pub fn run_case(template: &ProblemTemplate, h: f64, settings: &SolverSettings) -> CaseResult {
    let mut case = CaseResult {
        h,
        alpha: template.alpha,
        gamma: template.gamma,
        eta: h.powf(template.alpha - 0.5) * template.gamma.min(),
        mu1: None,
        residual: None,
        dof: None,
        trial_bound: None,
        trial_kind: None,
        localization: None,
        errors: Vec::new(),
    };
    let mut fail = |stage: &str, e: Error| {
        case.errors.push(CaseError {
            stage: stage.into(),
            message: e.to_string(),
        })
    };
    let problem = match template.problem(h) {
        Ok(p) => p,
        Err(e) => {
            fail("solve", e);
            return case;
        }
    };
    let solved = default_mesh(&problem, settings).and_then(|m| ground_state(&problem, &m, settings).map(|g| (m, g)));
    let (mesh, gs) = match solved {
        Ok(x) => x,
        Err(e) => {
            fail("solve", e);
            return case;
        }
    };
    let mut errors = Vec::new();
    let trial = if problem.boundary == BoundaryCondition::Robin {
        match best_trial_bound(&problem) {
            Ok(b) => Some(b),
            Err(e) => {
                errors.push(("trial", e));
                None
            }
        }
    } else {
        None
    };
    let (target, radius) = match &template.localization {
        Some(r) => (r.target.clone(), r.radius),
        None => (TargetSet::Boundary, 4.0 * h.sqrt()),
    };
    let loc = match localization_profile(&problem, &mesh, &gs, &target, radius) {
        Ok(l) => Some(CaseLocalization {
            target,
            radius,
            mass_outside: l.mass_outside,
            agmon_rate: l.agmon_rate,
            mass_beyond_layer: l.mass_beyond_layer,
        }),
        Err(e) => {
            errors.push(("localization", e));
            None
        }
    };
    for (stage, e) in errors {
        fail(stage, e);
    }
    case.mu1 = Some(gs.mu1);
    case.residual = Some(gs.residual);
    case.dof = Some(gs.dof);
    case.trial_bound = trial.as_ref().map(|b| b.value);
    case.trial_kind = trial.map(|b| b.kind);
    case.localization = loc;
    case
}

/// Run every `h` of a strictly decreasing list, `jobs` cases at a time
/// (0 means one per available core).
pub fn sweep(
    template: &ProblemTemplate,
    h_list: &[f64],
    settings: &SolverSettings,
    jobs: usize,
) -> Result<SweepReport> {
    if h_list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::config("h list must be strictly decreasing"));
    }
    if let Some(h) = h_list.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
        return Err(Error::config(format!("h must lie in (0, 1), got {h}")));
    }
    BoundaryCurve::from_descriptor(&template.curve)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let cases = pool.install(|| {
        h_list
            .par_iter()
            .map(|&h| run_case(template, h, settings))
            .collect::<Vec<_>>()
    });
    Ok(SweepReport {
        template: template.clone(),
        settings: *settings,
        cases,
        fits: Vec::new(),
        verdicts: Default::default(),
    })
}

/// `n` points from `first` to `last`, equally spaced in `log h`.
pub fn geometric_grid(first: f64, last: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![first];
    }
    let r = (last / first).ln() / (n - 1) as f64;
    (0..n).map(|k| first * (r * k as f64).exp()).collect()
}

/// Per-case table, one row per case.
pub fn write_cases_csv<W: Write>(report: &SweepReport, mut w: W) -> Result<()> {
    writeln!(
        w,
        "h,alpha,gamma,eta,mu1,mu1_over_h,residual,dof,trial_bound,trial_kind,mass_outside,agmon_rate,mass_beyond_layer,error"
    )?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for c in &report.cases {
        let gamma = serde_json::to_string(&c.gamma).map_err(|e| Error::Io(e.to_string()))?;
        let kind = c
            .trial_kind
            .map(|k| {
                serde_json::to_value(k)
                    .unwrap()
                    .as_str()
                    .unwrap_or_default()
                    .to_string()
            })
            .unwrap_or_default();
        let loc = c.localization.as_ref();
        let error: Vec<String> = c.errors.iter().map(|e| format!("{}: {}", e.stage, e.message)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.h),
            fmt_f64(c.alpha),
            quote(&gamma),
            fmt_f64(c.eta),
            opt(c.mu1),
            opt(c.mu1.map(|m| m / c.h)),
            opt(c.residual),
            c.dof.map(|d| d.to_string()).unwrap_or_default(),
            opt(c.trial_bound),
            kind,
            opt(loc.map(|l| l.mass_outside)),
            opt(loc.map(|l| l.agmon_rate)),
            opt(loc.map(|l| l.mass_beyond_layer)),
            quote(&error.join("; ")),
        )?;
    }
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
