//! Trial-first code generation: try cheap direct generation, verify against
//! tests, and decompose with a planner only after a verified failure.

pub mod econ;
pub mod gateway;
pub mod harness;
pub mod policy;
pub mod sandbox;
pub mod sync;
pub mod verification;
