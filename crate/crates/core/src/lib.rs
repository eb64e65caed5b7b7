//! Simulation and convergence certification of targeted opinion formation
//! on signed, time-varying directed graphs.

pub mod error;
pub mod certify;
pub mod dynamics;
pub mod graph;
pub mod output;
pub mod scenario;
