//! Learning cost-effective, interpretable treatment regimes.
//!
//! A regime is a [`DecisionList`](domain::DecisionList) mapping subject
//! characteristics to treatments. Regimes are scored by a doubly robust
//! estimate of the population outcome minus the expected cost of assessing
//! characteristics and the expected treatment cost, and optimized with a
//! pruned Monte-Carlo tree search over rule lists.

pub mod domain;
pub mod error;
pub mod estimation;
pub mod mining;
pub mod objective;
pub mod search;
pub mod synthetic;

pub use error::{Error, Result};
