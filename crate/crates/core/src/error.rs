use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error(
        "adaptive quadrature did not reach tolerance {tolerance:e} \
         (achieved error estimate {estimate:e} after {panels} panels)"
    )]
    Quadrature {
        estimate: f64,
        tolerance: f64,
        panels: usize,
    },

    #[error("step size {h} too large for damping {coefficient}: need |A|·h < 1")]
    StepSize { h: f64, coefficient: f64 },

    #[error("insufficient resolution: {levels} grid levels, at least {needed} required")]
    InsufficientResolution { levels: usize, needed: usize },

    #[error("argument {z} outside the supported range of the Bessel series")]
    Range { z: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(
        "layer {layer}: secant iteration did not converge \
         (last bracket [{lo}, {hi}], trace mismatch {residual:e})"
    )]
    LayerFailed {
        layer: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("layer {layer}: reconstruction diverged (node value {value})")]
    Divergence { layer: usize, value: f64 },

    #[error("inconsistent data: extrapolated trace limit {d0:e} is negative")]
    InconsistentData { d0: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::StepSize { .. }
                | Error::Range { .. }
                | Error::LayerFailed { .. }
                | Error::Divergence { .. }
                | Error::InconsistentData { .. }
        )
    }

    pub(crate) fn domain(what: &'static str, value: impl num_traits::ToPrimitive) -> Self {
        Error::Domain {
            what,
            value: value.to_f64().unwrap_or(f64::NAN),
        }
    }
}
