//! Two-channel perfect-reconstruction filter-banks on arbitrary graphs.
//!
//! A positive semi-definite variation operator `M` and a vertex bipartition
//! `(A, B)` define the inner product `Q` (the block diagonal of `M`). The
//! generalized eigenvectors of `(M, Q)` fold under the sign flip `J` on `B`,
//! which is what lets classical bipartite filter-bank designs work on any
//! graph. Polynomial designs only need `Z = Q⁻¹M`, so they scale to large
//! sparse graphs such as KNN graphs of point clouds.

pub mod bench;
pub mod cloud;
pub mod error;
pub mod filterbank;
pub mod generate;
pub mod gft;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod knn;
pub mod multires;
pub mod ply;
pub mod rng;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
