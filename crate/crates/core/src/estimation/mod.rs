//! Nuisance models fitted on the observational data (treatment propensity
//! and per-arm outcome regression) and the doubly robust score matrix built
//! from them.

mod dr;
mod encode;
mod outcome;
mod propensity;

pub use dr::{compute_dr_scores, DrScores};
pub use encode::{decode_column_name, encode_features, DesignMatrix, EncodedColumn, FeatureEncoder};
pub use outcome::{fit_outcome, fit_ridge, OutcomeConfig, OutcomeModel};
pub use propensity::{fit_propensity, PropensityConfig, PropensityModel, PropensityObjective};
