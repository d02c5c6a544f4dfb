//! From limit-problem weights to an exact size-`N` design.

pub mod bounds;
pub mod brute_force;
pub mod local_search;
pub mod rounding;

pub use bounds::{approx_bound, bound_report, verify_lemma_tau, BoundReport};
pub use brute_force::{brute_force_exact, multiset_count, MAX_ENUMERATION};
pub use local_search::{local_search, LocalSearchConfig, SearchVariant};
pub use rounding::{round_to_exact, RoundingVariant};
