//! Population value of a regime: doubly robust mean outcome, mean assessment
//! cost and mean treatment cost, and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::domain::{partition, CostPolicy, Dataset, DecisionList, Group};
use crate::error::{Error, Result};
use crate::estimation::DrScores;

/// Nonnegative weights on outcome, assessment cost and treatment cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub outcome: f64,
    pub assessment: f64,
    pub treatment: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights::new(1.0, 1.0, 1.0)
    }
}

impl ObjectiveWeights {
    pub const fn new(outcome: f64, assessment: f64, treatment: f64) -> Self {
        ObjectiveWeights {
            outcome,
            assessment,
            treatment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.outcome),
            ("lambda2", self.assessment),
            ("lambda3", self.treatment),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be a finite number ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, t: f64) -> Self {
        ObjectiveWeights::new(self.outcome * t, self.assessment * t, self.treatment * t)
    }

    pub fn combine(&self, outcome: f64, assess: f64, treat: f64) -> f64 {
        self.outcome * outcome - self.assessment * assess - self.treatment * treat
    }
}

/// Doubly robust estimate of the mean outcome under `dl`.
pub fn g1(scores: &DrScores, dl: &DecisionList, ds: &Dataset) -> f64 {
    let total: f64 = (0..ds.n())
        .map(|i| scores.get(i, dl.treatment_for(ds.row(i))))
        .sum();
    total / ds.n() as f64
}

/// Mean assessment cost.
pub fn g2(ds: &Dataset, dl: &DecisionList, policy: CostPolicy) -> f64 {
    let groups = partition(ds, dl);
    let total: f64 = (0..ds.n())
        .map(|i| groups.assessment_cost_of(i, ds.schema(), policy))
        .sum();
    total / ds.n() as f64
}

/// Mean treatment cost.
pub fn g3(ds: &Dataset, dl: &DecisionList) -> f64 {
    let total: f64 = (0..ds.n())
        .map(|i| ds.schema().treatment_cost(dl.treatment_for(ds.row(i))))
        .sum();
    total / ds.n() as f64
}

pub fn objective_value(
    scores: &DrScores,
    ds: &Dataset,
    dl: &DecisionList,
    w: &ObjectiveWeights,
    policy: CostPolicy,
) -> f64 {
    w.combine(g1(scores, dl, ds), g2(ds, dl, policy), g3(ds, dl))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avg_outcome: f64,
    pub avg_assess_cost: f64,
    pub avg_treat_cost: f64,
    pub avg_num_characteristics: f64,
    pub list_length: usize,
    pub objective_value: f64,
    pub weights: ObjectiveWeights,
    pub cost_policy: CostPolicy,
}

pub fn metrics(
    scores: &DrScores,
    ds: &Dataset,
    dl: &DecisionList,
    w: &ObjectiveWeights,
    policy: CostPolicy,
) -> MetricsReport {
    let groups = partition(ds, dl);
    let schema = ds.schema();
    let n = ds.n() as f64;
    let (mut outcome, mut assess, mut treat, mut chars) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..ds.n() {
        let a = match groups.group_of[i] {
            Group::Rule(l) => dl.rules[l].treatment,
            Group::Default => dl.default_treatment,
        };
        outcome += scores.get(i, a);
        treat += schema.treatment_cost(a);
        assess += groups.assessment_cost_of(i, schema, policy);
        chars += groups.num_characteristics_of(i, policy);
    }
    let (avg_outcome, avg_assess_cost, avg_treat_cost) = (outcome / n, assess / n, treat / n);
    MetricsReport {
        avg_outcome,
        avg_assess_cost,
        avg_treat_cost,
        avg_num_characteristics: chars as f64 / n,
        list_length: dl.len(),
        objective_value: w.combine(avg_outcome, avg_assess_cost, avg_treat_cost),
        weights: *w,
        cost_policy: policy,
    }
}

impl MetricsReport {
    /// Aligned two-line table with one column per metric.
    pub fn to_table(&self) -> String {
        let headers = [
            "Avg. Outcome",
            "Avg. Assess Cost",
            "Avg. Treat Cost",
            "Avg. # of Characs.",
            "List Len",
            "Objective",
        ];
        let values = [
            format!("{:.4}", self.avg_outcome),
            format!("{:.4}", self.avg_assess_cost),
            format!("{:.4}", self.avg_treat_cost),
            format!("{:.4}", self.avg_num_characteristics),
            self.list_length.to_string(),
            format!("{:.6}", self.objective_value),
        ];
        let widths: Vec<usize> = headers
            .iter()
            .zip(&values)
            .map(|(h, v)| h.len().max(v.len()))
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        format!(
            "{}\n{}\n",
            line(headers.to_vec()),
            line(values.iter().map(String::as_str).collect())
        )
    }
}
