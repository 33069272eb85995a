//! Fair ground-state sampling with Grover-mixer QAOA on small devices.

pub mod circuit;
pub mod fairness;
pub mod gmqaoa;
pub mod ising;
pub mod simulator;
pub mod topology;
