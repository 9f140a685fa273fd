//! Anytime bounds on the FMSR.
//!
//! [`UpperSearch`] looks for adversarial grid points along the saliency
//! ranking; every point it finds is a witnessed upper bound. [`AStar`]
//! expands nodes in order of an admissible distance estimate; every popped
//! key is a certified lower bound. [`verify_anytime`] interleaves the two.

mod anytime;
mod astar;
mod saliency;
mod trace;
mod upper;

pub use anytime::{admissible_astar, upper_bound_search, verify_anytime, LowerStatus, VerifyOptions, VerifyOutcome};
pub use astar::{estimate, AStar, AStarStatus, Expanded, HeuristicMode};
pub use saliency::{
    features_wrt_flow_frame, flow_saliency, grad_features_wrt_flow, grad_loss_wrt_features, loss_wrt_features_frame,
    GradientMap,
};
pub use trace::{fmt_g9, BoundKind, BoundsTrace, Clock, SearchBudget, TraceEntry, TRACE_HEADER};
pub use upper::{rank_dims, UpperConfig, UpperSearch};

#[cfg(test)]
mod tests;
