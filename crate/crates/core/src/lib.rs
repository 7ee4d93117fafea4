// SPDX-License-Identifier: Apache-2.0

//! Numerical laboratory for the capillary Jang equation on rotationally
//! symmetric asymptotically flat initial data sets.
//!
//! The pipeline runs barrier construction, capillary parameter selection,
//! Newton continuation in `lambda`, domain exhaustion, Jang graph geometry and
//! its audits, and mass extraction. See the crate README for the CLI.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod jang;
pub mod linalg;
pub mod mass;
pub mod metric;
pub mod par;
pub mod pipeline;
pub mod quad;
pub mod report;
pub mod spline;

pub use error::{Error, Result};
