//! Per-second traffic features from industrial network captures and three
//! detectors over them: left matrix profile discords, seasonal AR
//! prediction errors and an LSTM next-value predictor.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eval;
pub mod ingest;
pub mod lstm;
pub mod matrix_profile;
pub mod sarima;
pub mod simulate;
pub mod special;
