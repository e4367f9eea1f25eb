//! Replacement-part libraries for 3D printed stop-motion animation.
//!
//! The pipeline takes an animated triangle mesh with fixed connectivity and
//!
//! 1. splits it into parts along cuts that move little ([`segmentation`]),
//! 2. smooths the part boundary and remeshes it exactly ([`boundary`]),
//! 3. deforms every frame so the seams are identical in all frames
//!    ([`homogenize`]),
//! 4. fits, per part, a small library of printable pieces and a per-frame
//!    piece assignment that reproduce both shape and motion ([`library`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the pipeline uses.

pub mod anim;
pub mod boundary;
pub mod error;
pub mod fem;
pub mod homogenize;
pub mod io;
pub mod library;
pub mod maxflow;
pub mod mesh;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod segmentation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type AnimSequence = anim::Anim<f64>;
pub type VertexField = anim::VertexField<f64>;
pub use anim::{average_mesh, forward_difference, DiffOperator};
pub use segmentation::{SeedSet, TriLabeling};
