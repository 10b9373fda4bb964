//! Text-line based document image quality assessment.
//!
//! A document is scored in three stages: text lines are detected
//! ([`detect`]), each line is scored by a quality regressor ([`predict`]),
//! and the line scores are pooled into one document score ([`assess`]).
//! The regressor is trained on synthetic, blur-degraded text lines whose
//! labels come from a piecewise blur-to-quality function ([`synth`]).
//! [`eval`] measures agreement with ground truth via LCC and SROCC.

pub mod assess;
pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod predict;
pub mod synth;

pub use error::{Error, Result};
pub use imgproc::GrayImage;
