//! Constant-round joins of simple binary relations in the massively parallel
//! computation (MPC) model.
//!
//! The crate is organised bottom-up:
//!
//! * [`relcore`]: relations, tuples and a brute-force join oracle.
//! * [`hypergraph`]: query hypergraphs and exact fractional edge
//!   covering/packing LPs, quasi-packing numbers and AGM bounds.
//! * [`mpcsim`]: a deterministic round-based simulator with word-exact load
//!   accounting.
//! * [`primitives`]: one-round building blocks (grid cartesian product,
//!   composition, skew-free hypercube).
//! * [`taxonomy`]: heavy/light classification, configurations and residual
//!   queries.
//! * [`joinalg`]: the full heavy/light join algorithm plus checkers for the
//!   isolated cartesian product bounds.
//! * [`subgraph`]: pattern enumeration by reduction to a binary join.
//! * [`datagen`]: reproducible synthetic instances.

pub mod datagen;
mod error;
pub mod hypergraph;
pub mod joinalg;
pub mod mpcsim;
mod par;
pub mod primitives;
pub mod relcore;
pub mod subgraph;
pub mod taxonomy;

pub use error::{Error, Result};
pub use hypergraph::{Edge, Hypergraph, LpResult, Rational, WeightFn};
pub use joinalg::{solve_join, SolveOptions, SolveOutput};
pub use mpcsim::{Cluster, Execution, LoadReport};
pub use relcore::{Attr, Catalog, JoinQuery, Relation, Tuple, Value};
