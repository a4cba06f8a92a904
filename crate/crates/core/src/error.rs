use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its domain; `field` names it.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mesh h = {h:.3e} does not resolve the potential at epsilon = {epsilon:.3e} (h > 4 epsilon)")]
    UnresolvedPotential { h: f64, epsilon: f64 },

    #[error("z_final / tau = {ratio} is not an integer step count")]
    FractionalSteps { ratio: f64 },

    #[error("non-finite values after step {step} (z = {z})")]
    BlowUp { step: usize, z: f64 },

    #[error("moment reduction has no surviving coefficient (kappa = {kappa}, lambda = {lambda})")]
    DegenerateReduction { kappa: u32, lambda: f64 },

    #[error("no admissible samples")]
    EmptySampleSet,

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Whether the failure comes from configuration rather than from a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Self::InvalidParameter { .. }
                | Self::LengthMismatch { .. }
                | Self::GridMismatch
                | Self::UnresolvedPotential { .. }
                | Self::FractionalSteps { .. }
                | Self::DegenerateReduction { .. }
        )
    }
}
