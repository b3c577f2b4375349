//! tubekit-core: geometry of δ-tube families in R^n.
//!
//! The crate provides exact tube geometry (`tube`), union volume and
//! multiplicity estimation (`measure`), the sharp example constructors
//! (`constructions`), the constructive packer (`packing`), the discretized
//! X-ray transform and convexity index (`voxel`, `xray`), the combinatorial
//! checkers (`combinatorics`), near-extremal structure detection
//! (`rigidity`), and a sweep harness (`sweep`).

pub mod combinatorics;
pub mod constructions;
pub mod error;
pub mod geom;
pub mod measure;
pub mod packing;
pub mod rigidity;
pub mod rng;
pub mod sweep;
pub mod tube;
pub mod voxel;
pub mod xray;

pub use error::{Error, Result};
pub use measure::{MultiplicityProfile, VolumeEstimate, VolumeMethod};
pub use packing::DiscretizedSet;
pub use tube::{Direction, Tube, TubeFamily};
pub use voxel::VoxelSet;
pub use xray::{ConvexityReport, LineSample};
