use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: expected {expected} cells, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("cell {cell}: Heisenberg radicand {radicand:e} is not positive")]
    Unphysical { cell: usize, radicand: f64 },

    #[error("local-oscillator pulse has zero energy")]
    ZeroLocalOscillator,

    #[error("frequency {omega} exceeds the grid limit {limit}")]
    FrequencyOutOfRange { omega: f64, limit: f64 },

    #[error("frequency window {delta} is below the grid resolution {min}")]
    WindowTooNarrow { delta: f64, min: f64 },

    #[error("step size {h:e} fell below h_min {h_min:e} at t = {t}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("non-finite state encountered after t = {t}")]
    NonFinite { t: f64 },

    #[error("Fock cutoff {cutoff} too small: top-level population {population:e}")]
    CutoffOverflow { cutoff: usize, population: f64 },

    #[error("density matrix trace drifted to {trace}")]
    TraceDrift { trace: f64 },

    #[error("snapshot parse error at line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that arise during time stepping or evaluation of
    /// observables rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::TooManySteps { .. }
                | Error::NonFinite { .. }
                | Error::Unphysical { .. }
                | Error::CutoffOverflow { .. }
                | Error::TraceDrift { .. }
        )
    }
}
