//! Ground states of `−(h∇ − iA)²` with curl A = 1 on a smooth planar domain,
//! with the boundary term `h^{1+α}∮γ|u|²` in the quadratic form.

mod assembly;
mod localization;
mod problem;
mod solver;
mod trial;

pub use assembly::{assemble_forms, check_resolution, CsrMatrix, Forms, RESOLUTION};
pub use localization::{
    localization_profile, localization_with, node_geometry, summary, write_field_csv, Localization, NodeGeometry,
    SolutionSummary, TargetSet,
};
pub use problem::{BoundaryCondition, GammaProfile, GaugePotential, MagneticProblem2D, Monomial, MAX_GAUGE_DEGREE};
pub use solver::{
    default_mesh, fix_phase, full_mass, ground_state, ground_state_of, mesh_spec, theta_estimate, GroundState2D,
    SolverSettings,
};
pub use trial::{best_trial_bound, candidate_points, trial_upper_bound, trial_value, TrialBound, TrialKind};
