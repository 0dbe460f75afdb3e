//! Route selection for AGV fleets as a QUBO, with interchangeable solvers,
//! a replanning simulator and the metrics used to compare controllers.

pub mod bench;
pub mod control;
pub mod metrics;
pub mod plant;
pub mod qubo;
pub mod routing;
pub mod solvers;
