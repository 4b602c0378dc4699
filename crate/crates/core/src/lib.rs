//! Moment duality for the compromise diffusion on a graph: dual chains,
//! exact and simulated moments, graph selection and independent sets.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cftp;
pub mod dual;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod moments;
pub mod particles;
pub mod partition;
pub mod sde;
pub mod simplex;
pub mod stats;

pub use cftp::{EstimateResult, SampleMode, SelectionReport};
pub use dual::{ChainConfig, ChainPath, ChainVariant, Horizon};
pub use error::{Error, Result};
pub use graph::{GraphSpec, VertexSet};
pub use moments::{MomentKind, MomentTable, MomentValue};
pub use particles::{FinderConfig, FinderResult, OccupationVector};
pub use partition::{InvariantSpec, PartitionVector};
pub use sde::{BoundaryPolicy, SdeConfig};
pub use simplex::SimplexPoint;
pub use stats::Welford;
