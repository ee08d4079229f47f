pub mod backend;
pub mod io;
pub mod planner;

pub use backend::ClarabelSolver;
pub use pushgcs_core as core;
