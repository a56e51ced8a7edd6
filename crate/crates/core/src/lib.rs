//! Topography optimization of hyperelastic membranes whose embedded pores
//! should open or close by prescribed amounts under a large stretch.

pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod mma;
pub mod output;
pub mod pore;
pub mod sensitivity;

pub use error::{Error, Result};
