//! Regime semantics: which group each subject falls into, the treatment it
//! receives, and the assessment and treatment costs it incurs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::dataset::Dataset;
use crate::domain::rules::{DecisionList, Pattern};
use crate::domain::schema::Schema;
use crate::error::Result;

/// How subjects that fall through to the default rule are billed for
/// assessment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostPolicy {
    /// Default-group subjects pay nothing; only rule groups are billed.
    #[default]
    Literal,
    /// Default-group subjects pay for every characteristic used by the list,
    /// since they were screened against every condition.
    ChargeDefaultFull,
}

impl CostPolicy {
    pub fn from_flag(charge_default_full: bool) -> Self {
        if charge_default_full {
            CostPolicy::ChargeDefaultFull
        } else {
            CostPolicy::Literal
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    /// Zero-based rule index.
    Rule(usize),
    Default,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupAssignment {
    pub group_of: Vec<Group>,
    /// `cumulative_features[l]` is the set of characteristics appearing in
    /// rules `0..=l`.
    pub cumulative_features: Vec<BTreeSet<usize>>,
}

impl GroupAssignment {
    /// Characteristics a subject in `group` is billed for under `policy`.
    pub fn billed_features(&self, group: Group, policy: CostPolicy) -> Option<&BTreeSet<usize>> {
        match (group, policy) {
            (Group::Rule(l), _) => Some(&self.cumulative_features[l]),
            (Group::Default, CostPolicy::ChargeDefaultFull) => self.cumulative_features.last(),
            (Group::Default, CostPolicy::Literal) => None,
        }
    }

    pub fn assessment_cost_of(&self, i: usize, schema: &Schema, policy: CostPolicy) -> f64 {
        self.billed_features(self.group_of[i], policy)
            .map_or(0.0, |set| set.iter().map(|&f| schema.feature_cost(f)).sum())
    }

    pub fn num_characteristics_of(&self, i: usize, policy: CostPolicy) -> usize {
        self.billed_features(self.group_of[i], policy)
            .map_or(0, BTreeSet::len)
    }
}

/// 1 if `row` satisfies every predicate of `pattern`, else 0.
pub fn satisfy(schema: &Schema, row: &[f64], pattern: &Pattern) -> Result<u8> {
    pattern.check(schema)?;
    Ok(u8::from(pattern.matches(row)))
}

pub fn cumulative_features(dl: &DecisionList) -> Vec<BTreeSet<usize>> {
    let mut acc = BTreeSet::new();
    dl.rules
        .iter()
        .map(|r| {
            acc.extend(r.pattern.features());
            acc.clone()
        })
        .collect()
}

pub fn partition(ds: &Dataset, dl: &DecisionList) -> GroupAssignment {
    let group_of = (0..ds.n())
        .map(|i| dl.first_match(ds.row(i)).map_or(Group::Default, Group::Rule))
        .collect();
    GroupAssignment {
        group_of,
        cumulative_features: cumulative_features(dl),
    }
}

pub fn assign(ds: &Dataset, dl: &DecisionList) -> Vec<usize> {
    (0..ds.n()).map(|i| dl.treatment_for(ds.row(i))).collect()
}

pub fn treatment_cost(ds: &Dataset, dl: &DecisionList, i: usize) -> f64 {
    ds.schema().treatment_cost(dl.treatment_for(ds.row(i)))
}

pub fn assessment_cost(ds: &Dataset, dl: &DecisionList, i: usize, policy: CostPolicy) -> f64 {
    let upto = match (dl.first_match(ds.row(i)), policy) {
        (Some(j), _) => j + 1,
        (None, CostPolicy::ChargeDefaultFull) => dl.len(),
        (None, CostPolicy::Literal) => 0,
    };
    let features: BTreeSet<usize> = dl.rules[..upto]
        .iter()
        .flat_map(|r| r.pattern.features())
        .collect();
    features.iter().map(|&f| ds.schema().feature_cost(f)).sum()
}
