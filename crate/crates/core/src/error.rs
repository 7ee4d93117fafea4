// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset generation failed: {0}")]
    GenerationFailure(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("dominant energy condition violated: min(mu - |J|) = {min_margin:e} at r = {radius}")]
    DecViolation { min_margin: f64, radius: f64 },
    #[error("capillary configuration failed its own check: {0}")]
    ConfigFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("quadrature failed to reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },
    #[error("no admissible r0 among {tried} candidates")]
    NoAdmissibleR0 { tried: usize },
    #[error("newton diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("singular jacobian at row {row}")]
    SingularJacobian { row: usize },
    #[error("continuation stalled at lambda = {lambda} with step {step:e}")]
    ContinuationFailure { lambda: f64, step: f64 },
    #[error("exhaustion did not converge: last Cauchy difference {last_diff:e}")]
    ExhaustionNonconvergence { last_diff: f64 },
    #[error("gradient audit inapplicable: {0}")]
    AuditInapplicable(String),
    #[error("fit failure: rms residual {rms} >= 0.1")]
    FitFailure { rms: f64 },
    #[error("insufficient data: {usable} usable nodes, need 8")]
    InsufficientData { usable: usize },
    #[error("inadmissible test function: {0}")]
    InadmissibleTestFunction(String),
    #[error("shielding failure: {0}")]
    ShieldingFailure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
