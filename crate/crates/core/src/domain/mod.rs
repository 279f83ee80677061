//! Datasets, cost schedules, predicates and decision lists.

mod dataset;
mod regime;
mod rules;
mod schema;

pub use dataset::Dataset;
pub use regime::{
    assessment_cost, assign, cumulative_features, partition, satisfy, treatment_cost, CostPolicy,
    Group, GroupAssignment,
};
pub use rules::{
    pattern_from_wire, pattern_to_wire, DecisionList, DecisionListWire, Op, Operand, Pattern,
    Predicate, PredicateWire, Rule, RuleWire,
};
pub use schema::{CharacteristicSpec, Kind, Schema, Treatment};
