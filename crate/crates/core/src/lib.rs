//! Morphological symmetry toolkit for rigid-body robots.
//!
//! The crate builds finite-group representations over robot state and sensor
//! spaces, identifies a robot's symmetry group from its kinematic and inertial
//! parameters, decomposes joint-space dynamics into isotypic subspaces,
//! augments tabular datasets along group orbits and trains equivariant MLPs.
//!
//! Numeric types are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the file formats and the CLI
//! use.

pub mod augment;
pub mod dha;
pub mod emlp;
pub mod error;
pub mod groups;
pub mod isotypic;
pub mod rbd;
mod linalg;
pub mod reps;
pub mod scalar;
pub mod symm;

pub use error::{Error, Result};
pub use groups::{FiniteGroup, GroupElement, GroupKind};
pub use isotypic::{decompose, real_character_table, IrrepTable, IsotypicDecomposition, RealIrrep, Subspace};
pub use reps::{EquivariantBasis, Representation, SpatialRepKind};
pub use scalar::Real;

pub type Rep = Representation<f64>;
pub type Decomposition = IsotypicDecomposition<f64>;
pub type Robot = rbd::RobotModel<f64>;
pub type State = rbd::RobotState<f64>;
pub type Action = symm::GroupAction<f64>;
pub type Msg = symm::MorphologicalSymmetryGroup<f64>;
