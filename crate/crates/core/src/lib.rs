//! Generalized sparse kernels for graph neural networks.
//!
//! Two kernels cover message passing on a graph:
//!
//! * [`spmm`]: every destination aggregates a user-defined message over its
//!   in-edges (`sum`, `max` or `min`).
//! * [`sddmm`]: a user-defined function evaluated on every edge.
//!
//! Messages and edge functions are small tensor expressions ([`udf`]). How a
//! kernel runs is described by a [`Schedule`]: source partitioning, degree-based
//! reordering, edge traversal order, feature tiling, threading and reduction
//! order. Every schedule computes the same result up to floating-point
//! reassociation, and [`autotune`] searches the schedule space empirically.
//! [`oracle`] holds dense double-precision references.

pub mod autotune;
pub mod error;
mod exec;
pub mod graph;
pub mod oracle;
pub mod reduce;
pub mod schedule;
pub mod sddmm;
pub mod spmm;
pub mod tensor;
pub mod udf;
pub mod workload;

pub use error::{Error, Result};
pub use exec::{Inputs, MIN_CHUNK};
pub use graph::SparseAdjacency;
pub use reduce::{ReduceOp, ReduceStrategy};
pub use schedule::{KernelKind, ParallelAxis, Schedule, TuningSpace};
pub use sddmm::{sddmm, sddmm_backward_feats, SddmmPlan};
pub use spmm::{spmm, spmm_backward_adj, spmm_backward_feats, Aggregator, EmptyRows, SpmmPlan};
pub use tensor::{FeatureTensor, Fill, Scalar, TensorKind};
pub use udf::{builtin, Builtin, Params, UdfExpr};
pub use workload::Workload;
