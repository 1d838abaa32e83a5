use crate::field::WaveField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integrator failed to converge at t = {t}: {reason}")]
    ConvergenceFailure { t: f64, reason: String },

    #[error("integrator fault at t = {t}: {reason}")]
    IntegratorFault { t: f64, reason: String },

    /// The grid does not contain the essential support of a closed-form field.
    #[error("grid truncates the field: relative mass defect {mass_defect:.3e} ({reason})")]
    Truncation { mass_defect: f64, reason: String },

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("operation supports d = 1 only, got d = {0}")]
    UnsupportedDimension(usize),

    /// Non-finite values appeared during time stepping. `snapshot` is the last
    /// finite state before the failing step.
    #[error("numerical blow-up after step {step} at t = {t}")]
    NumericalBlowup {
        t: f64,
        step: usize,
        snapshot: Box<WaveField>,
    },

    #[error("mass leak at t = {t}: boundary shell holds {shell_fraction:.3e} of the mass")]
    MassLeak { t: f64, shell_fraction: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::IntegratorFault { .. }
                | Error::NumericalBlowup { .. }
                | Error::MassLeak { .. }
                | Error::Truncation { .. }
                | Error::Resolution(_)
        )
    }
}
