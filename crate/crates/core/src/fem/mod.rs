//! Updated-Lagrangian finite elements for the plane-stress sheet.

pub mod assembly;
pub mod band;
pub mod element;
pub mod quadrature;
pub mod solver;

pub use assembly::{assemble, Assembly, DofMap};
pub use band::{BandLu, BandMatrix};
pub use element::{ElementMatrix, ElementVector, ThicknessMode};
pub use solver::{EquilibriumState, Problem, SolverOptions, Trajectory};
