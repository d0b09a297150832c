//! Commute-network node embeddings and graph neural regression.
//!
//! The crate turns origin-destination commute flows into a weighted region
//! graph, derives structural node embeddings (spatial, truncated SVD,
//! normalized-Laplacian eigenvectors, random-walk / PageRank), and trains two
//! families of models against a per-region target such as median income:
//!
//! * a two-step pipeline that first learns a trainable embedding by
//!   reconstructing the flow matrix ([`vnn`]) and then regresses the target
//!   from it with an MLP;
//! * a single-pipeline model stacking two GCN or GAT layers under an MLP head
//!   ([`gnn`]), trained transductively with a masked loss.
//!
//! Everything runs on a small tape-based reverse-mode engine ([`nn`]) over
//! 64-bit dense matrices. The crate is `no_std` and only needs `alloc`; file
//! formats and the command-line front end live in the `mobnet` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod embeddings;
mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub(crate) mod math;
pub mod nn;
pub mod region;
pub mod synth;
pub mod vnn;

pub use error::{Error, Result};
pub use graph::{AdjacencyOptions, MobilityNetwork, NormalizedAdjacency, WeightTransform};
pub use linalg::Matrix;
pub use region::{AttributeTable, FlowRecord, GeoLevel, RegionId};
