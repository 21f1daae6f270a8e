//! h-sweeps of the 2D ground state, fits of the semiclassical expansion and
//! pass/fail verdicts for the asymptotic statements.

mod fit;
mod sweep;
mod verify;

pub use fit::{fit_expansion, fit_terms, Fit, LeadingTerm, ModelId};
pub use sweep::{
    geometric_grid, run_case, sweep, write_cases_csv, CaseError, CaseLocalization, CaseResult, LocalizationRequest,
    ProblemTemplate, SweepReport,
};
pub use verify::{
    default_checks, fit_grid, plan, predicted_coefficient, run_plan, verify_checks, verify_theorem, Check,
    CheckOutcome, CheckPlan, PlanEntry, PlanOutcome, Status, TheoremId, Tolerance, Verdict, DEFAULT_GRID, LEADING_GRID,
    PLAN_IDS, PLAN_VERSION,
};
