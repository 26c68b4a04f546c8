//! Jigsaw puzzle solving with a genetic algorithm over piece placements.
//!
//! Pieces are square tiles cut from one image (or two images printed on the
//! two faces of the same sheet). [`factory`] shreds and scrambles, [`compat`]
//! scores every pairing of edges, [`ga`] evolves assemblies using the
//! relation-preserving operator in [`crossover`], and [`eval`] grades the
//! result against the ground truth.

pub mod bundle;
pub mod color;
pub mod compat;
pub mod crossover;
pub mod eval;
pub mod factory;
pub mod ga;
pub mod model;
pub mod raster;
