//! Optimization of the regime objective over decision lists.
//!
//! States are rule-list prefixes; an action appends a `(pattern, treatment)`
//! rule or closes the list with a default treatment. [`uct_search`] explores
//! this space with Monte-Carlo tree search and bound pruning;
//! [`exhaustive_search`] and [`greedy_baseline`] are exact and heuristic
//! references.

mod exhaustive;
mod greedy;
mod state;
mod uct;

#[cfg(test)]
mod tests;

pub use exhaustive::{exhaustive_search, ExhaustiveConfig, ExhaustiveResult};
pub use greedy::{greedy_baseline, greedy_complete};
pub use state::{Action, RuleDelta, SearchContext, SearchState};
pub use uct::{uct_search, LogRecord, UctConfig, UctResult};
