//! Constructive verification toolkit for a lattice cluster expansion with a
//! fixed-slice Gaussian covariance: extended-lattice geometry, polymer and
//! graph enumeration, interpolated covariance matrices, truncated-series
//! Gaussian integration, and quantitative convergence bounds.

pub mod bounds;
pub mod engine;
pub mod graph;
pub mod interp;
pub mod kernel;
pub mod lattice;
pub mod model;
pub mod polymer;
pub mod quad;
pub mod series;
pub mod wick;

pub use bounds::BoundConstants;
pub use engine::EngineError;
pub use graph::{enumerate, ClusterGraph, GraphError, Link, LinkKind};
pub use model::{DiscretizedModel, ModelError, Polynomial};
pub use interp::{HVector, InterpolationMatrix};
pub use kernel::{Kernel, KernelError};
pub use lattice::{Cell, MayerBox, Window};
pub use polymer::{Polymer, PolymerError, Region};
pub use series::LambdaSeries;
