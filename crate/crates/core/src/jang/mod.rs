// SPDX-License-Identifier: Apache-2.0

pub mod audit;
pub mod operator;
pub mod solve;

pub use audit::{estimate_audits, gradient_audit, EstimateReport, GradientAuditSpec, PsiKind};
pub use operator::{capillary_residual, jang_operator, jang_pointwise};
pub use solve::{
    continuation_solve, exhaustion_solve, exhaustion_solve_with, newton_solve, JangLimit, JangState, NewtonOptions, StepTrace, TruncatedDomain,
};
