use thiserror::Error;

/// Failures raised by the semiclassical pipeline.
///
/// Variants split into three groups: invalid input, violations of the
/// geometric hypotheses (critical values in the window, non-compact level
/// sets), and numerical or verification failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EbkError {
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("phase-space box does not enclose the preimage of the window")]
    PreimageNotEnclosed,
    #[error("level sets are not compact for energies up to {level}")]
    NonCompactWindow { level: f64 },
    #[error("energy window contains critical value(s) {values:?}")]
    CriticalValueInWindow { values: Vec<f64> },
    #[error("level set {{H = {energy}}} is empty in the box")]
    EmptyLevelSet { energy: f64 },
    #[error("seed is a critical point of H (|grad H| = {grad_norm:e})")]
    DegenerateSeed { grad_norm: f64 },
    #[error("orbit did not close: {reason}")]
    NotClosedOrbit { reason: String },
    #[error("energy drift {drift:e} exceeded the trace tolerance")]
    TraceDiverged { drift: f64 },
    #[error("number of level-set components changes across the window: {detail}")]
    NonConstantTopology { detail: String },
    #[error("polyline is self-intersecting")]
    NotSimple,
    #[error("caustic of infinite order within resolution")]
    DegenerateCaustic,
    #[error("action is not a diffeomorphism on the window: {detail}")]
    NotDiffeomorphism { detail: String },
    #[error("value {value} is outside the window range [{lo}, {hi}]")]
    OutOfWindow { value: f64, lo: f64, hi: f64 },
    #[error("endpoint {endpoint} lies within {distance:e} of the spectrum (required {required:e})")]
    UnsafeEndpoint {
        endpoint: f64,
        distance: f64,
        required: f64,
    },
    #[error("spectrum is empty")]
    EmptySpectrum,
    #[error("domain half-width {half_width} is smaller than the required {required}")]
    DomainTooSmall { half_width: f64, required: f64 },
    #[error("inverse iteration did not converge (residual {residual:e})")]
    InverseIterationFailed { residual: f64 },
    #[error("bijection between Bohr-Sommerfeld and oracle spectra failed: {detail}")]
    BijectionFailure { detail: String },
}

impl EbkError {
    /// True for errors signalling that the input violates the geometric
    /// hypotheses (regular window, compact preimage, constant topology).
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            EbkError::PreimageNotEnclosed
                | EbkError::NonCompactWindow { .. }
                | EbkError::CriticalValueInWindow { .. }
                | EbkError::NonConstantTopology { .. }
                | EbkError::NotDiffeomorphism { .. }
        )
    }

    /// True for failed cross-checks against the oracle.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            EbkError::BijectionFailure { .. } | EbkError::UnsafeEndpoint { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, EbkError>;
