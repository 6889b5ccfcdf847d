use thiserror::Error;

use crate::solver::Branch;

/// Every fault raised by the solver stack.
///
/// [`WaveError::reason`] gives a stable machine-readable tag that the CLI
/// writes into its output files.
#[derive(Debug, Error)]
pub enum WaveError {
    #[error("grid of {m} nodes cannot resolve a trace of order {n} (need at least {required})")]
    Truncation { n: usize, m: usize, required: usize },

    #[error("samples are not even: odd-part energy ratio {ratio:e}")]
    SymmetryViolation { ratio: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("extension level beta = {beta} outside admissible band [{lo}, {hi}]")]
    Extension { beta: f64, lo: f64, hi: f64 },

    #[error("grid mismatch: {left} vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("a = {0} is singular for the derived parameters")]
    SingularParameter(f64),

    #[error("no laminar flow: discriminant {0} is negative")]
    NoLaminar(f64),

    #[error("exact family diverges for a = {0} (need 0 <= a < 1)")]
    DivergentSeries(f64),

    #[error("trace leaves the admissible set: |z_alpha|^2 = {min_modulus:e} at alpha = {alpha}")]
    OutsideU { min_modulus: f64, alpha: f64 },

    #[error("non-finite Jacobian entry in column {0}")]
    Differentiation(usize),

    #[error("no sign change of the mode-one eigenvalue on [{lo}, {hi}]")]
    BifurcationNotFound { lo: f64, hi: f64 },

    #[error("degenerate bifurcation: transversality {0:e}")]
    DegenerateBifurcation(f64),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("branch switch failed: {0}")]
    BranchSwitch(String),

    #[error("continuation stalled at a = {at}: {reason}")]
    StalledBranch { at: f64, reason: String, partial: Box<Branch> },

    #[error("event not found: {0}")]
    EventNotFound(String),

    #[error("stagnation point: |z_alpha| = {0:e}")]
    Stagnation(f64),

    #[error("Bernoulli factor B - G y = {0:e} is not positive on the surface")]
    BernoulliBranch(f64),

    #[error("critical-layer classification at finite depth needs the experimental flag")]
    FiniteDepthUnsupported,

    #[error("no vertical tangent on the surface (min x_alpha = {0:e})")]
    NoVerticalTangent(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WaveError {
    pub fn reason(&self) -> &'static str {
        match self {
            WaveError::Truncation { .. } => "truncation",
            WaveError::SymmetryViolation { .. } => "symmetry-violation",
            WaveError::Parameter(_) => "parameter",
            WaveError::Extension { .. } => "extension",
            WaveError::GridMismatch { .. } => "grid-mismatch",
            WaveError::SingularParameter(_) => "singular-parameter",
            WaveError::NoLaminar(_) => "no-laminar",
            WaveError::DivergentSeries(_) => "divergent-series",
            WaveError::OutsideU { .. } => "outside-u",
            WaveError::Differentiation(_) => "differentiation",
            WaveError::BifurcationNotFound { .. } => "bifurcation-not-found",
            WaveError::DegenerateBifurcation(_) => "degenerate-bifurcation",
            WaveError::NoConvergence { .. } => "no-convergence",
            WaveError::BranchSwitch(_) => "branch-switch",
            WaveError::StalledBranch { .. } => "stalled-branch",
            WaveError::EventNotFound(_) => "event-not-found",
            WaveError::Stagnation(_) => "stagnation",
            WaveError::BernoulliBranch(_) => "bernoulli-branch",
            WaveError::FiniteDepthUnsupported => "finite-depth-unsupported",
            WaveError::NoVerticalTangent(_) => "no-vertical-tangent",
            WaveError::Format(_) => "format",
            WaveError::Io(_) => "io",
        }
    }
}

pub type Result<T, E = WaveError> = std::result::Result<T, E>;
