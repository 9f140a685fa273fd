//! Robustness certification of video classifiers against optical-flow
//! perturbations.
//!
//! A clip is perturbed only through its motion: the dense optical flow between
//! adjacent frames is nudged on a `τ`-grid and re-imposed onto the frames.
//! [`bounds`] computes anytime upper and lower bounds on the smallest such
//! perturbation that changes the classifier's decision.

mod codec;
pub mod bounds;
pub mod error;
pub mod flow;
pub mod game;
pub mod net;
pub mod perturb;
pub mod pgm;
pub mod synth;
pub mod tensor;
pub mod vten;

pub use error::{Error, Result};
pub use tensor::{NormKind, Tensor, Video};
