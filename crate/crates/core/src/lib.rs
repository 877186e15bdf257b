pub mod cost_model;
pub mod estimation;
pub mod mechanisms;
pub mod protocol;
pub mod simulator;
