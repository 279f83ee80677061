use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::estimation::outcome::OutcomeModel;
use crate::estimation::propensity::PropensityModel;

/// Per-subject, per-treatment doubly robust scores
/// `Γ[i][a] = 1(a_i = a) / ω̂(x_i, a) · (y_i − ŷ(x_i, a)) + ŷ(x_i, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrScores {
    n: usize,
    m: usize,
    /// Row-major `n × m`.
    scores: Vec<f64>,
}

impl DrScores {
    pub fn from_raw(n: usize, m: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != n * m || n == 0 || m == 0 {
            return Err(Error::validation(
                "scores",
                format!("expected {n} × {m} entries, got {}", scores.len()),
            ));
        }
        if let Some(k) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                format!("scores[{}][{}]", k / m, k % m),
                "score is not finite",
            ));
        }
        Ok(DrScores { n, m, scores })
    }

    /// Builds scores from arbitrary propensity and outcome functions.
    pub fn from_fns(
        ds: &Dataset,
        propensity: impl Fn(usize, usize) -> f64,
        outcome: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let (n, m) = (ds.n(), ds.m());
        let mut scores = Vec::with_capacity(n * m);
        for i in 0..n {
            for a in 0..m {
                let yhat = outcome(i, a);
                let s = if ds.treatment(i) == a {
                    (ds.outcome(i) - yhat) / propensity(i, a) + yhat
                } else {
                    yhat
                };
                scores.push(s);
            }
        }
        DrScores::from_raw(n, m, scores)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.scores[i * self.m + a]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.m..(i + 1) * self.m]
    }

    pub fn check_matches(&self, ds: &Dataset) -> Result<()> {
        if self.n != ds.n() || self.m != ds.m() {
            return Err(Error::validation(
                "scores",
                format!(
                    "score matrix is {} × {} but the dataset has {} rows and {} treatments",
                    self.n,
                    self.m,
                    ds.n(),
                    ds.m()
                ),
            ));
        }
        Ok(())
    }
}

pub fn compute_dr_scores(
    ds: &Dataset,
    propensity: &PropensityModel,
    outcome: &OutcomeModel,
) -> Result<DrScores> {
    if propensity.m() != ds.m() || outcome.coefficients.len() != ds.m() {
        return Err(Error::validation(
            "models",
            "fitted models do not match the dataset's treatment set",
        ));
    }
    let probs: Vec<Vec<f64>> = (0..ds.n()).map(|i| propensity.predict(ds.row(i))).collect();
    let preds: Vec<Vec<f64>> = (0..ds.n()).map(|i| outcome.predict_all(ds.row(i))).collect();
    DrScores::from_fns(ds, |i, a| probs[i][a], |i, a| preds[i][a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CharacteristicSpec, Schema, Treatment};

    fn ds() -> Dataset {
        let schema = Schema::new(
            vec![CharacteristicSpec::real("x", 1.0)],
            vec![
                Treatment { name: "a".into(), cost: 0.0 },
                Treatment { name: "b".into(), cost: 0.0 },
            ],
            "t",
            "y",
        )
        .unwrap();
        Dataset::new(schema, vec![1.0, 2.0, 3.0], vec![0, 1, 1], vec![10.0, 20.0, 30.0]).unwrap()
    }

    #[test]
    fn unit_propensity_telescopes_to_observed_outcome() {
        let d = ds();
        let s = DrScores::from_fns(&d, |_, _| 1.0, |i, a| (i * 7 + a) as f64).unwrap();
        for i in 0..d.n() {
            assert_eq!(s.get(i, d.treatment(i)), d.outcome(i));
        }
    }

    #[test]
    fn counterfactual_arm_is_outcome_prediction() {
        let d = ds();
        let yhat = |i: usize, a: usize| 0.5 * i as f64 - a as f64;
        let s = DrScores::from_fns(&d, |_, _| 0.3, yhat).unwrap();
        for i in 0..d.n() {
            for a in 0..2 {
                if a != d.treatment(i) {
                    assert_eq!(s.get(i, a), yhat(i, a));
                } else {
                    assert_ne!(s.get(i, a) - yhat(i, a), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DrScores::from_raw(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DrScores::from_raw(1, 2, vec![1.0]).is_err());
    }
}
