//! Patient-to-room assignment: combinatorial bounds, integer programs,
//! a lexicographic solve driver and a rolling-horizon engine.

pub mod combinatorics;
pub mod dynamic;
pub mod evaluate;
pub mod formulations;
pub mod generator;
pub mod instance;
pub mod model;
pub mod solver;
