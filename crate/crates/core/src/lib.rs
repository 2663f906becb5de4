pub mod control;
pub mod linalg;
pub mod estimation;
pub mod scheduler;
pub mod simulator;
pub mod experiment;
