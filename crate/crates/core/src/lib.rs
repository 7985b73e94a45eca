//! Random interlacements on finite killed weighted graphs.
//!
//! The crate computes the potential theory of a transient random walk
//! exactly (escape and hitting probabilities, Green's function, equilibrium
//! and hinge measures), samples the interlacement process seen from a finite
//! window, and evaluates 0-1 law criteria along exhaustions.
//!
//! ```
//! use interlace::graph::{build_graph, VertexSet};
//! use interlace::potential::equilibrium;
//!
//! let g = build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0), (1, 1.0)]).unwrap();
//! let eq = equilibrium(&g, &VertexSet::from_indices([0])).unwrap();
//! assert!((eq.capacity - 1.5).abs() < 1e-14);
//! ```

pub mod coupling;
pub mod criteria;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod sampler;
pub mod stats;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use graph::{KilledWeightedGraph, VertexId, VertexSet};
pub use rng::RngStream;

/// Shortest decimal form that reads back to the same `f64`.
///
/// Rust's `Display` for floats already round-trips exactly and never needs
/// more than 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:?}")
}
