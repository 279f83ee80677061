//! Observational datasets with a known outcome model, a known propensity and
//! a planted best-treatment regime, so learned regimes can be scored against
//! exact population values.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    cumulative_features, CharacteristicSpec, CostPolicy, Dataset, DecisionList, DecisionListWire,
    Kind, Op, Operand, Pattern, Predicate, Rule, Schema, Treatment,
};
use crate::error::{Error, Result};

/// Cells beyond this count switch exact summation to Monte Carlo.
const MAX_CELLS: usize = 1 << 20;

/// Sampling distribution of one characteristic. Characteristics are drawn
/// independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Marginal {
    /// Probability of each level of a binary or categorical characteristic.
    Levels(Vec<f64>),
    /// Uniform over `k / scale` for integers `k` in `lo..=hi`.
    Grid { lo: i64, hi: i64, scale: f64 },
}

impl Marginal {
    /// Support points with their probabilities.
    fn support(&self) -> Vec<(f64, f64)> {
        match self {
            Marginal::Levels(p) => p.iter().enumerate().map(|(l, &q)| (l as f64, q)).collect(),
            Marginal::Grid { lo, hi, scale } => {
                let q = 1.0 / (hi - lo + 1) as f64;
                (*lo..=*hi).map(|k| (k as f64 / scale, q)).collect()
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Marginal::Levels(p) => draw(p, rng) as f64,
            Marginal::Grid { lo, hi, scale } => rng.random_range(*lo..=*hi) as f64 / scale,
        }
    }

    /// Position of `v` within the support, in `[0, 1]`.
    fn position(&self, v: f64) -> f64 {
        match self {
            Marginal::Levels(p) if p.len() > 1 => v / (p.len() - 1) as f64,
            Marginal::Levels(_) => 0.0,
            Marginal::Grid { lo, hi, scale } if hi > lo => {
                (v * scale - *lo as f64) / (hi - lo) as f64
            }
            Marginal::Grid { .. } => 0.0,
        }
    }
}

/// Index drawn from a discrete distribution by inversion.
fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub n_subjects: usize,
    pub seed: u64,
    pub schema: Schema,
    /// One per characteristic, in schema order.
    pub marginals: Vec<Marginal>,
    pub outcome_scores: Vec<f64>,
    /// Score probabilities when the received treatment is the planted one.
    pub match_probs: Vec<f64>,
    /// Score probabilities otherwise.
    pub mismatch_probs: Vec<f64>,
    pub planted_regime: DecisionList,
    /// 0 gives uniform randomization; 1 gives a purely logistic assignment.
    pub confounding_strength: f64,
    pub confounding_intercept: f64,
    /// `(feature, weight)` on the feature's position within its support.
    pub confounding_weights: Vec<(usize, f64)>,
}

impl GeneratorSpec {
    /// Asthma-like schema: thirteen cost-1 demographic and symptom
    /// characteristics, peak flow (2), spirometry (4) and methacholine (6);
    /// quick-relief (10) and controller (15) treatments. Controller is best
    /// for three subgroups, the last of which needs the methacholine test.
    pub fn asthma(n_subjects: usize, seed: u64, confounding_strength: f64) -> Self {
        let no_yes = ["No", "Yes"];
        let feats: Vec<(CharacteristicSpec, Marginal)> = vec![
            (CharacteristicSpec::real("Age", 1.0), Marginal::Grid { lo: 18, hi: 80, scale: 1.0 }),
            (CharacteristicSpec::binary("Gender", ["F", "M"], 1.0), Marginal::Levels(vec![0.5, 0.5])),
            (CharacteristicSpec::real("BMI", 1.0), Marginal::Grid { lo: 16, hi: 45, scale: 1.0 }),
            (
                CharacteristicSpec::categorical("BP", &["low", "normal", "high"], 1.0),
                Marginal::Levels(vec![0.2, 0.6, 0.2]),
            ),
            (CharacteristicSpec::binary("Short-Breath", no_yes, 1.0), Marginal::Levels(vec![0.6, 0.4])),
            (CharacteristicSpec::real("Temperature", 1.0), Marginal::Grid { lo: 360, hi: 400, scale: 10.0 }),
            (
                CharacteristicSpec::categorical("Cough", &["Low", "Medium", "High"], 1.0),
                Marginal::Levels(vec![0.5, 0.3, 0.2]),
            ),
            (CharacteristicSpec::binary("Chest-Pain", no_yes, 1.0), Marginal::Levels(vec![0.65, 0.35])),
            (CharacteristicSpec::binary("Wheezing", no_yes, 1.0), Marginal::Levels(vec![0.6, 0.4])),
            (CharacteristicSpec::binary("Past-Allergies", no_yes, 1.0), Marginal::Levels(vec![0.7, 0.3])),
            (CharacteristicSpec::binary("Prev-Asthma", no_yes, 1.0), Marginal::Levels(vec![0.6, 0.4])),
            (CharacteristicSpec::binary("Family-History", no_yes, 1.0), Marginal::Levels(vec![0.7, 0.3])),
            (CharacteristicSpec::binary("Has-Insurance", no_yes, 1.0), Marginal::Levels(vec![0.2, 0.8])),
            (CharacteristicSpec::binary("Peak-Flow", ["Normal", "Low"], 2.0), Marginal::Levels(vec![0.65, 0.35])),
            (CharacteristicSpec::binary("Spiro-Test", ["Neg", "Pos"], 4.0), Marginal::Levels(vec![0.7, 0.3])),
            (CharacteristicSpec::binary("Methacholine", ["Neg", "Pos"], 6.0), Marginal::Levels(vec![0.75, 0.25])),
        ];
        let (specs, marginals): (Vec<_>, Vec<_>) = feats.into_iter().unzip();
        let schema = Schema::new(
            specs,
            vec![
                Treatment { name: "quick-relief".into(), cost: 10.0 },
                Treatment { name: "controller".into(), cost: 15.0 },
            ],
            "Treatment",
            "Outcome",
        )
        .expect("built-in schema is valid");
        let f = |name: &str| schema.feature_index(name).expect("built-in feature");
        let is = |name: &str, level: usize| {
            Predicate::new(&schema, f(name), Op::Eq, Operand::Level(level)).expect("built-in predicate")
        };
        let rule = |a: Predicate, b: Predicate| Rule {
            pattern: Pattern::new(vec![a, b]).expect("built-in pattern"),
            treatment: 1,
        };
        let planted_regime = DecisionList::new(
            vec![
                rule(is("Spiro-Test", 1), is("Prev-Asthma", 1)),
                rule(is("Peak-Flow", 1), is("Wheezing", 1)),
                rule(is("Methacholine", 1), is("Chest-Pain", 1)),
            ],
            0,
        );
        let confounding_weights = vec![
            (f("Prev-Asthma"), 1.5),
            (f("Wheezing"), 1.0),
            (f("Age"), -1.0),
            (f("Has-Insurance"), 0.5),
        ];
        GeneratorSpec {
            n_subjects,
            seed,
            schema,
            marginals,
            outcome_scores: vec![100.0, 66.0, 33.0, 0.0],
            match_probs: vec![0.5, 0.25, 0.15, 0.1],
            mismatch_probs: vec![0.2, 0.25, 0.3, 0.25],
            planted_regime,
            confounding_strength,
            confounding_intercept: -1.0,
            confounding_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_subjects == 0 {
            return bad("n_subjects must be ≥ 1".into());
        }
        if !(0.0..=1.0).contains(&self.confounding_strength) {
            return bad(format!(
                "confounding_strength = {} must lie in [0, 1]",
                self.confounding_strength
            ));
        }
        if self.marginals.len() != self.schema.p() {
            return bad(format!(
                "{} marginals for {} characteristics",
                self.marginals.len(),
                self.schema.p()
            ));
        }
        for (spec, marg) in self.schema.characteristics.iter().zip(&self.marginals) {
            match (spec.kind, marg) {
                (Kind::Real, Marginal::Grid { lo, hi, scale }) => {
                    if hi < lo || !(*scale > 0.0 && scale.is_finite()) {
                        return bad(format!("invalid grid for `{}`", spec.name));
                    }
                }
                (Kind::Binary | Kind::Categorical, Marginal::Levels(p)) => {
                    if p.len() != spec.levels.len() || !is_distribution(p) {
                        return bad(format!("invalid level probabilities for `{}`", spec.name));
                    }
                }
                _ => return bad(format!("marginal of `{}` does not fit its kind", spec.name)),
            }
        }
        let k = self.outcome_scores.len();
        if k == 0 || self.outcome_scores.iter().any(|s| !s.is_finite()) {
            return bad("outcome_scores must be nonempty and finite".into());
        }
        for probs in [&self.match_probs, &self.mismatch_probs] {
            if probs.len() != k || !is_distribution(probs) {
                return bad("outcome probabilities must form a distribution over the scores".into());
            }
        }
        self.planted_regime.check(&self.schema)?;
        for &(feat, w) in &self.confounding_weights {
            if feat >= self.schema.p() || !w.is_finite() {
                return bad(format!("invalid confounding weight on feature {feat}"));
            }
        }
        if !self.confounding_intercept.is_finite() {
            return bad("confounding_intercept must be finite".into());
        }
        Ok(())
    }

    /// True probability of each treatment given `row`. Arm `a` has logit
    /// `a · s(row)` relative to arm 0, blended with uniform.
    pub fn propensity(&self, row: &[f64]) -> Vec<f64> {
        let m = self.schema.m();
        let s = self.confounding_intercept
            + self
                .confounding_weights
                .iter()
                .map(|&(f, w)| w * self.marginals[f].position(row[f]))
                .sum::<f64>();
        let logits: Vec<f64> = (0..m).map(|a| a as f64 * s).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = exp.iter().sum();
        let c = self.confounding_strength;
        exp.iter().map(|e| (1.0 - c) / m as f64 + c * e / z).collect()
    }

    fn score_probs(&self, row: &[f64], a: usize) -> &[f64] {
        if self.planted_regime.treatment_for(row) == a {
            &self.match_probs
        } else {
            &self.mismatch_probs
        }
    }

    /// `E[Y | x = row, treatment a]`.
    pub fn expected_outcome(&self, row: &[f64], a: usize) -> f64 {
        self.score_probs(row, a)
            .iter()
            .zip(&self.outcome_scores)
            .map(|(p, s)| p * s)
            .sum()
    }
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&q| (0.0..=1.0).contains(&q)) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// Draws the dataset: characteristics, then treatment, then outcome score,
/// row by row from a single seeded stream.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.schema.p();
    let n = spec.n_subjects;
    let mut values = Vec::with_capacity(n * p);
    let mut treatments = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for _ in 0..n {
        for (v, marg) in row.iter_mut().zip(&spec.marginals) {
            *v = marg.sample(&mut rng);
        }
        let a = draw(&spec.propensity(&row), &mut rng);
        let k = draw(spec.score_probs(&row, a), &mut rng);
        values.extend_from_slice(&row);
        treatments.push(a);
        outcomes.push(spec.outcome_scores[k]);
    }
    Dataset::new(spec.schema.clone(), values, treatments, outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueValueOptions {
    /// Fall back to sampling when exact summation is too large.
    pub monte_carlo: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for TrueValueOptions {
    fn default() -> Self {
        TrueValueOptions {
            monte_carlo: true,
            samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Population means of outcome, assessment cost and treatment cost under a
/// regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationValue {
    pub outcome: f64,
    pub assess_cost: f64,
    pub treat_cost: f64,
    /// Standard error of `outcome`; `None` for exact values.
    pub std_error: Option<f64>,
    pub method: ValueMethod,
}

impl PopulationValue {
    pub fn objective(&self, w: &crate::objective::ObjectiveWeights) -> f64 {
        w.combine(self.outcome, self.assess_cost, self.treat_cost)
    }
}

/// Per-subject outcome, assessment and treatment terms of `dl`.
struct Terms<'a> {
    spec: &'a GeneratorSpec,
    dl: &'a DecisionList,
    group_cost: Vec<f64>,
    default_cost: f64,
}

impl<'a> Terms<'a> {
    fn new(spec: &'a GeneratorSpec, dl: &'a DecisionList, policy: CostPolicy) -> Self {
        let group_cost: Vec<f64> = cumulative_features(dl)
            .iter()
            .map(|set| set.iter().map(|&f| spec.schema.feature_cost(f)).sum())
            .collect();
        let default_cost = match policy {
            CostPolicy::Literal => 0.0,
            CostPolicy::ChargeDefaultFull => group_cost.last().copied().unwrap_or(0.0),
        };
        Terms { spec, dl, group_cost, default_cost }
    }

    fn of(&self, row: &[f64]) -> (f64, f64, f64) {
        let (a, assess) = match self.dl.first_match(row) {
            Some(l) => (self.dl.rules[l].treatment, self.group_cost[l]),
            None => (self.dl.default_treatment, self.default_cost),
        };
        (
            self.spec.expected_outcome(row, a),
            assess,
            self.spec.schema.treatment_cost(a),
        )
    }
}

/// Exact population value by summing over the joint support of the
/// characteristics that `dl` or the planted regime test. Support points of
/// each characteristic are merged when every relevant predicate agrees on
/// them, so real-valued characteristics contribute a handful of cells.
pub fn population_value(
    spec: &GeneratorSpec,
    dl: &DecisionList,
    policy: CostPolicy,
    opts: &TrueValueOptions,
) -> Result<PopulationValue> {
    spec.validate()?;
    dl.check(&spec.schema)?;
    let terms = Terms::new(spec, dl, policy);

    let mut preds: BTreeMap<usize, Vec<Predicate>> = BTreeMap::new();
    for rule in dl.rules.iter().chain(&spec.planted_regime.rules) {
        for pr in rule.pattern.predicates() {
            preds.entry(pr.feature).or_default().push(*pr);
        }
    }
    // equivalence classes of support points: (representative, probability)
    let mut axes: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    let mut cells: usize = 1;
    for (&f, ps) in &preds {
        let mut classes: IndexMap<Vec<bool>, (f64, f64)> = IndexMap::new();
        for (v, q) in spec.marginals[f].support() {
            let sig: Vec<bool> = ps.iter().map(|p| p.holds(v)).collect();
            classes.entry(sig).or_insert((v, 0.0)).1 += q;
        }
        cells = cells.saturating_mul(classes.len());
        axes.push((f, classes.into_values().collect()));
    }

    if cells > MAX_CELLS {
        if !opts.monte_carlo {
            return Err(Error::TooLarge(format!(
                "{cells} cells exceed the exact-summation limit of {MAX_CELLS}"
            )));
        }
        return Ok(monte_carlo(spec, &terms, opts));
    }

    let mut row: Vec<f64> = spec.marginals.iter().map(|m| m.support()[0].0).collect();
    let mut idx = vec![0usize; axes.len()];
    let (mut outcome, mut assess, mut treat) = (0.0, 0.0, 0.0);
    loop {
        let mut prob = 1.0;
        for (k, (f, classes)) in axes.iter().enumerate() {
            let (v, q) = classes[idx[k]];
            row[*f] = v;
            prob *= q;
        }
        let (o, c, t) = terms.of(&row);
        outcome += prob * o;
        assess += prob * c;
        treat += prob * t;
        // odometer increment
        let mut k = 0;
        while k < axes.len() {
            idx[k] += 1;
            if idx[k] < axes[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == axes.len() {
            break;
        }
    }
    Ok(PopulationValue {
        outcome,
        assess_cost: assess,
        treat_cost: treat,
        std_error: None,
        method: ValueMethod::Exact,
    })
}

fn monte_carlo(spec: &GeneratorSpec, terms: &Terms<'_>, opts: &TrueValueOptions) -> PopulationValue {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.samples.max(2);
    let mut row = vec![0.0; spec.schema.p()];
    let (mut sum, mut sum_sq, mut assess, mut treat) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        for (v, marg) in row.iter_mut().zip(&spec.marginals) {
            *v = marg.sample(&mut rng);
        }
        let (o, c, t) = terms.of(&row);
        sum += o;
        sum_sq += o * o;
        assess += c;
        treat += t;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    PopulationValue {
        outcome: mean,
        assess_cost: assess / nf,
        treat_cost: treat / nf,
        std_error: Some((var / nf).sqrt()),
        method: ValueMethod::MonteCarlo,
    }
}

/// Expected outcome `μ(dl)` under the generator's outcome distribution.
pub fn true_value(spec: &GeneratorSpec, dl: &DecisionList) -> Result<f64> {
    Ok(population_value(spec, dl, CostPolicy::Literal, &TrueValueOptions::default())?.outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_subjects: usize,
    pub confounding_strength: f64,
    pub outcome_scores: Vec<f64>,
    pub match_probs: Vec<f64>,
    pub mismatch_probs: Vec<f64>,
    pub planted_regime: DecisionListWire,
    pub planted_value: f64,
    /// Mean outcome of treating everyone with each arm.
    pub constant_values: IndexMap<String, f64>,
    pub planted_assess_cost: f64,
    pub planted_treat_cost: f64,
}

pub fn ground_truth(spec: &GeneratorSpec) -> Result<GroundTruth> {
    let opts = TrueValueOptions::default();
    let planted = population_value(spec, &spec.planted_regime, CostPolicy::Literal, &opts)?;
    let constant_values = spec
        .schema
        .treatments
        .iter()
        .enumerate()
        .map(|(a, t)| Ok((t.name.clone(), true_value(spec, &DecisionList::constant(a))?)))
        .collect::<Result<_>>()?;
    Ok(GroundTruth {
        seed: spec.seed,
        n_subjects: spec.n_subjects,
        confounding_strength: spec.confounding_strength,
        outcome_scores: spec.outcome_scores.clone(),
        match_probs: spec.match_probs.clone(),
        mismatch_probs: spec.mismatch_probs.clone(),
        planted_regime: spec.planted_regime.to_wire(&spec.schema),
        planted_value: planted.outcome,
        constant_values,
        planted_assess_cost: planted.assess_cost,
        planted_treat_cost: planted.treat_cost,
    })
}
