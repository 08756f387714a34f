use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VacuaError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("singular point at r = 0")]
    SingularPoint,

    #[error("on-shell pole at q = |k| = {0}")]
    OnShellPole(f64),

    #[error("resonance pole at omega = {0}")]
    ResonancePole(f64),

    #[error("divergent renormalization: 1 + alpha0*phi vanishes (|1 + alpha0*phi| = {0:e})")]
    DivergentRenormalization(f64),

    #[error("integrand does not decay: {0}")]
    NonDecayingIntegrand(String),

    #[error("tolerance not met: estimate {estimate:e} with error {error:e}")]
    ToleranceNotMet { estimate: f64, error: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("branch out of range: {0}")]
    BranchOutOfRange(String),

    #[error("resummation pole: |k^2 alpha P| or |k^2 alpha Q| reaches 1 at r = {0:e}")]
    ResummationPole(f64),

    #[error("geometric series pole: 1 - chi2/(rho alpha0) vanishes")]
    GeometricPole,

    #[error("series diverging: increment ratio {0:e}")]
    SeriesDiverging(f64),

    #[error("missing chi^(n,0) kernel for n = {0}")]
    MissingKernel(usize),

    #[error("over-critical coupling x = {0} (requires x < 9/2)")]
    OverCritical(f64),

    #[error("momentum cutoff q_max is required")]
    MissingCutoff,

    #[error("interaction matrix singular or indefinite at u = {0:e}")]
    MatrixSingular(f64),

    #[error("packing too dense: {0}")]
    PackingTooDense(String),

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("i/o or format error: {0}")]
    Format(String),
}

impl VacuaError {
    /// Short variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Self::InvalidParameter { .. } => "InvalidParameter",
            Self::SingularPoint => "SingularPoint",
            Self::OnShellPole(_) => "OnShellPole",
            Self::ResonancePole(_) => "ResonancePole",
            Self::DivergentRenormalization(_) => "DivergentRenormalization",
            Self::NonDecayingIntegrand(_) => "NonDecayingIntegrand",
            Self::ToleranceNotMet { .. } => "ToleranceNotMet",
            Self::Precondition(_) => "Precondition",
            Self::BranchOutOfRange(_) => "BranchOutOfRange",
            Self::ResummationPole(_) => "ResummationPole",
            Self::GeometricPole => "GeometricPole",
            Self::SeriesDiverging(_) => "SeriesDiverging",
            Self::MissingKernel(_) => "MissingKernel",
            Self::OverCritical(_) => "OverCritical",
            Self::MissingCutoff => "MissingCutoff",
            Self::MatrixSingular(_) => "MatrixSingular",
            Self::PackingTooDense(_) => "PackingTooDense",
            Self::InsufficientSamples { .. } => "InsufficientSamples",
            Self::Format(_) => "Format",
        }
    }

    /// Parameter errors map to CLI exit code 2, everything else to 3.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Self::InvalidParameter { .. }
                | Self::BranchOutOfRange(_)
                | Self::MissingCutoff
                | Self::MissingKernel(_)
                | Self::OverCritical(_)
                | Self::InsufficientSamples { .. }
                | Self::PackingTooDense(_)
                | Self::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, VacuaError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> VacuaError {
    VacuaError::InvalidParameter { field, reason: reason.into() }
}
