pub mod analysis;
pub mod coding;
pub mod galois;
pub mod provision;
pub mod simulator;
pub mod topology;
