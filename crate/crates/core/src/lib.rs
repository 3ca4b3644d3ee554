//! Persistent invariant laminations by the graph transform.

pub mod bundle;
pub mod complex;
pub mod dynsys;
pub mod error;
pub mod graph_transform;
pub mod hyperbolic;
pub mod inverse_limit;
pub mod lamination;
pub mod scenarios;
pub mod tangent;
pub mod verify;

pub use bundle::{NormalFrame, Section, Tube};
pub use dynsys::{CoordKind, DeformationFamily, MapSystem, StateSpace};
pub use error::{Error, Result};
pub use graph_transform::{BaseDynamics, FnDynamics, TransformConfig, TransformReport, Variant};
pub use lamination::{Axis, DiscreteLamination, Region, Transversal, TransversalCode};
pub use tangent::{HyperbolicityEstimate, PlaneField};
