pub mod budget;
pub mod error;
pub mod propagation;
pub mod scenario;
pub mod sweep;
