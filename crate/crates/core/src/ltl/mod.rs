//! Linear temporal logic: parsing, translation to Büchi automata, and
//! nested-DFS search of the product with a model.

pub mod buchi;
pub mod formula;
pub mod lasso;
pub mod ndfs;
pub mod props;
pub mod verify;

pub use buchi::{to_buchi, Buchi, Guard};
pub use formula::{parse_ltl, Formula};
pub use lasso::{check_ltl_on_lasso, LassoError, LassoWord};
pub use ndfs::{
    nested_dfs, replay_lasso, LassoReplayError, NdfsOutcome, Product, ProductGraph, ProductMove,
};
pub use props::{Property, PropertySet, DEFAULT_PROPERTIES};
pub use verify::{bind, lasso_trace, lasso_word, verify_ltl, LtlOutcome};
