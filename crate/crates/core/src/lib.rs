//! Random survival forests for right-censored data, with the diagnostic
//! tables used to interpret them: Kaplan–Meier curves, OOB error, variable
//! importance, minimal depth, interactions and partial dependence.

pub mod dataset;
pub mod dependence;
pub mod error;
pub mod forest;
pub mod importance;
pub mod inference;
pub mod km;
mod par;
pub mod table;
pub mod util;

pub use dataset::{Frame, GroupAssignment, LoadOptions, VariableKind, VariableSpec};
pub use error::{Error, Result};
pub use forest::{grow, Forest, GrowConfig};
