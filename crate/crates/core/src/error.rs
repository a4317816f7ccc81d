use thiserror::Error;

use crate::behavior::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid behavior: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("marginal <A{x}> = {value} has unit modulus; steered correlators undefined")]
    MarginalUnit { x: usize, value: f64 },
    #[error("steered correlator {value} lies outside [-1, 1] beyond clamp tolerance")]
    ClampExcursion { value: f64 },
    #[error("steering image is the null vector (product state with orthogonal direction)")]
    NullImage,
    #[error("theta = {theta} is degenerate for this operation")]
    DegenerateTheta { theta: f64 },
    #[error("behavior is local")]
    LocalInput,
    #[error("marginals are not all zero")]
    NonzeroMarginals,
    #[error("self-test conditions fail (max residual {residual:e})")]
    NotSelfTesting { residual: f64 },
    #[error("gauge estimates disagree (spread {residual:e})")]
    InconsistentGauge { residual: f64 },
    #[error("no entanglement branch in (0, pi/4]")]
    NoThetaBranch,
    #[error("sector ({s}, {t}) is excluded")]
    ExcludedSector { s: i8, t: i8 },
    #[error("sector denominator vanishes ({value:e})")]
    DegenerateDenominator { value: f64 },
    #[error("realization is not in the canonical range")]
    NotCanonical,
    #[error("sampling failed after {attempts} attempts")]
    SamplingFailed { attempts: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by malformed input data rather than an unmet
    /// precondition.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::ClampExcursion { .. })
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
