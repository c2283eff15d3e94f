//! Relations, tuples, schemes and the brute-force join oracle.
//!
//! Everything here is immutable after construction. Relations keep their
//! scheme sorted by attribute id and their rows sorted and duplicate-free, so
//! two relations holding the same set of tuples compare equal with `==`.

mod oracle;
mod relation;
pub mod text;

pub use oracle::{
    cartesian_oracle, count_join, count_join_ordered, join_oracle, join_oracle_ordered,
    join_order, semijoin_filter,
};
pub use relation::{Attr, Catalog, JoinQuery, Relation, Tuple, Value};
