use fixedbitset::FixedBitSet;

use crate::domain::{partition, CostPolicy, Dataset, DecisionList, Group, Rule};
use crate::error::{Error, Result};
use crate::estimation::DrScores;
use crate::mining::{coverage_bits, CandidateSet};
use crate::objective::ObjectiveWeights;

/// One move in the rule-list MDP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    /// Append `pattern → treatment` to the list.
    Rule { pattern: usize, treatment: usize },
    /// Close the list with this default treatment.
    Default(usize),
}

/// A rule-list prefix together with running sums over the subjects it
/// already covers.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchState {
    /// `(pattern index, treatment)` pairs in list order.
    pub prefix: Vec<(usize, usize)>,
    pub covered: FixedBitSet,
    pub n_covered: usize,
    /// Characteristics appearing anywhere in the prefix.
    pub features: FixedBitSet,
    /// Sum of assessment costs of `features`.
    pub feature_cost: f64,
    /// Sum over covered subjects of their assessment cost.
    pub incurred_assess: f64,
    /// Sum over covered subjects of `λ1·Γ[i][assigned] − λ3·d′(assigned)`.
    pub incurred_value: f64,
    /// Per treatment `a`, the sum over covered subjects of `λ1·Γ[i][a] − λ3·d′(a)`.
    covered_by_arm: Vec<f64>,
    /// Sum over covered subjects of their best per-subject value.
    covered_best: f64,
    pub terminal: Option<usize>,
}

impl SearchState {
    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    pub fn uses_pattern(&self, pattern: usize) -> bool {
        self.prefix.iter().any(|&(p, _)| p == pattern)
    }
}

/// Effect of appending one pattern before choosing its treatment.
#[derive(Clone, Debug)]
pub struct RuleDelta {
    pub pattern: usize,
    pub new_count: usize,
    /// Per treatment, the value sum over newly covered subjects.
    pub by_arm: Vec<f64>,
    pub best: f64,
    pub feature_cost: f64,
}

/// Everything the search needs, precomputed once per instance.
pub struct SearchContext<'a> {
    ds: &'a Dataset,
    cands: &'a CandidateSet,
    weights: ObjectiveWeights,
    policy: CostPolicy,
    n: usize,
    m: usize,
    /// Row-major `λ1·Γ[i][a] − λ3·d′(a)`.
    value: Vec<f64>,
    best: Vec<f64>,
    total_by_arm: Vec<f64>,
    total_best: f64,
    covers: Vec<FixedBitSet>,
    pattern_features: Vec<Vec<usize>>,
    verify: bool,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        ds: &'a Dataset,
        scores: &DrScores,
        cands: &'a CandidateSet,
        weights: ObjectiveWeights,
        policy: CostPolicy,
    ) -> Result<Self> {
        scores.check_matches(ds)?;
        weights.validate()?;
        for c in &cands.patterns {
            c.pattern.check(ds.schema())?;
        }
        let (n, m) = (ds.n(), ds.m());
        let schema = ds.schema();
        let mut value = Vec::with_capacity(n * m);
        for i in 0..n {
            for a in 0..m {
                value.push(
                    weights.outcome * scores.get(i, a) - weights.treatment * schema.treatment_cost(a),
                );
            }
        }
        let best: Vec<f64> = value
            .chunks(m)
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut total_by_arm = vec![0.0; m];
        for row in value.chunks(m) {
            for (t, v) in total_by_arm.iter_mut().zip(row) {
                *t += v;
            }
        }
        let total_best = best.iter().sum();
        let covers = cands
            .patterns
            .iter()
            .map(|c| coverage_bits(ds, &c.pattern))
            .collect();
        let pattern_features = cands.patterns.iter().map(|c| c.pattern.features()).collect();
        Ok(SearchContext {
            ds,
            cands,
            weights,
            policy,
            n,
            m,
            value,
            best,
            total_by_arm,
            total_best,
            covers,
            pattern_features,
            verify: false,
        })
    }

    /// Re-derives every incremental state from scratch after each action and
    /// panics on mismatch. Expensive; meant for tests.
    pub fn with_verification(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    pub fn candidates(&self) -> &CandidateSet {
        self.cands
    }

    pub fn weights(&self) -> ObjectiveWeights {
        self.weights
    }

    pub fn policy(&self) -> CostPolicy {
        self.policy
    }

    pub fn num_patterns(&self) -> usize {
        self.covers.len()
    }

    pub fn num_treatments(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest admissible number of newly covered subjects for a rule.
    pub fn min_new_count(&self, min_new_coverage: f64) -> usize {
        ((min_new_coverage * self.n as f64 - 1e-9).ceil().max(1.0)) as usize
    }

    pub fn root(&self) -> SearchState {
        SearchState {
            prefix: Vec::new(),
            covered: FixedBitSet::with_capacity(self.n),
            n_covered: 0,
            features: FixedBitSet::with_capacity(self.ds.p()),
            feature_cost: 0.0,
            incurred_assess: 0.0,
            incurred_value: 0.0,
            covered_by_arm: vec![0.0; self.m],
            covered_best: 0.0,
            terminal: None,
        }
    }

    pub fn new_coverage(&self, state: &SearchState, pattern: usize) -> usize {
        self.covers[pattern].difference_count(&state.covered)
    }

    pub fn rule_delta(&self, state: &SearchState, pattern: usize) -> RuleDelta {
        let mut by_arm = vec![0.0; self.m];
        let mut best = 0.0;
        let mut new_count = 0;
        for i in self.covers[pattern].ones() {
            if state.covered.contains(i) {
                continue;
            }
            new_count += 1;
            best += self.best[i];
            for (acc, v) in by_arm.iter_mut().zip(&self.value[i * self.m..(i + 1) * self.m]) {
                *acc += v;
            }
        }
        let schema = self.ds.schema();
        let extra: f64 = self.pattern_features[pattern]
            .iter()
            .filter(|&&f| !state.features.contains(f))
            .map(|&f| schema.feature_cost(f))
            .sum();
        RuleDelta {
            pattern,
            new_count,
            by_arm,
            best,
            feature_cost: state.feature_cost + extra,
        }
    }

    /// Objective of `state + delta → treatment`, closed with `default`.
    pub fn objective_after(
        &self,
        state: &SearchState,
        delta: &RuleDelta,
        treatment: usize,
        default: usize,
    ) -> f64 {
        let uncovered = self.n - state.n_covered - delta.new_count;
        let value = state.incurred_value
            + delta.by_arm[treatment]
            + (self.total_by_arm[default] - state.covered_by_arm[default] - delta.by_arm[default]);
        let mut assess = state.incurred_assess + delta.new_count as f64 * delta.feature_cost;
        if self.policy == CostPolicy::ChargeDefaultFull {
            assess += uncovered as f64 * delta.feature_cost;
        }
        (value - self.weights.assessment * assess) / self.n as f64
    }

    /// Best default after `state + delta → treatment`: `(default, objective)`.
    pub fn best_default_after(&self, state: &SearchState, delta: &RuleDelta, treatment: usize) -> (usize, f64) {
        argmax((0..self.m).map(|a| self.objective_after(state, delta, treatment, a)))
    }

    pub fn apply_rule(&self, state: &SearchState, delta: &RuleDelta, treatment: usize) -> SearchState {
        debug_assert!(!state.is_terminal());
        let mut next = state.clone();
        next.prefix.push((delta.pattern, treatment));
        next.covered.union_with(&self.covers[delta.pattern]);
        next.n_covered += delta.new_count;
        for &f in &self.pattern_features[delta.pattern] {
            next.features.insert(f);
        }
        next.feature_cost = delta.feature_cost;
        next.incurred_assess += delta.new_count as f64 * delta.feature_cost;
        next.incurred_value += delta.by_arm[treatment];
        for (acc, d) in next.covered_by_arm.iter_mut().zip(&delta.by_arm) {
            *acc += d;
        }
        next.covered_best += delta.best;
        if self.verify {
            self.verify_state(&next).expect("incremental search state drifted");
        }
        next
    }

    pub fn apply_default(&self, state: &SearchState, default: usize) -> SearchState {
        debug_assert!(!state.is_terminal());
        let mut next = state.clone();
        next.terminal = Some(default);
        next
    }

    pub fn apply(&self, state: &SearchState, action: Action) -> SearchState {
        match action {
            Action::Rule { pattern, treatment } => {
                let delta = self.rule_delta(state, pattern);
                self.apply_rule(state, &delta, treatment)
            }
            Action::Default(a) => self.apply_default(state, a),
        }
    }

    /// Objective of closing `state` with `default`.
    pub fn closed_objective(&self, state: &SearchState, default: usize) -> f64 {
        let uncovered = (self.n - state.n_covered) as f64;
        let value = state.incurred_value
            + (self.total_by_arm[default] - state.covered_by_arm[default]);
        let mut assess = state.incurred_assess;
        if self.policy == CostPolicy::ChargeDefaultFull {
            assess += uncovered * state.feature_cost;
        }
        (value - self.weights.assessment * assess) / self.n as f64
    }

    pub fn best_default(&self, state: &SearchState) -> (usize, f64) {
        argmax((0..self.m).map(|a| self.closed_objective(state, a)))
    }

    /// Exact objective of a terminal state.
    pub fn objective(&self, state: &SearchState) -> f64 {
        let a = state.terminal.expect("objective of a non-terminal state");
        self.closed_objective(state, a)
    }

    /// Upper bound on the objective of every completion of `state`; exact for
    /// terminal states.
    ///
    /// Uncovered subjects are credited their best per-subject value and, under
    /// the literal policy, no further assessment cost. Under
    /// `ChargeDefaultFull` every uncovered subject is certain to pay at least
    /// the current feature cost.
    pub fn bound(&self, state: &SearchState) -> f64 {
        if state.is_terminal() {
            return self.objective(state);
        }
        let uncovered = (self.n - state.n_covered) as f64;
        let optimistic = self.total_best - state.covered_best;
        let mut assess = state.incurred_assess;
        if self.policy == CostPolicy::ChargeDefaultFull {
            assess += uncovered * state.feature_cost;
        }
        (state.incurred_value + optimistic - self.weights.assessment * assess) / self.n as f64
    }

    /// Legal moves: rules whose pattern is unused and newly covers at least
    /// `min_new_count` subjects (only while the list is shorter than
    /// `l_max`), followed by one default per treatment.
    pub fn legal_actions(&self, state: &SearchState, l_max: usize, min_new_count: usize) -> Vec<Action> {
        if state.is_terminal() {
            return Vec::new();
        }
        let mut actions = Vec::new();
        if state.len() < l_max {
            for p in 0..self.num_patterns() {
                if !state.uses_pattern(p) && self.new_coverage(state, p) >= min_new_count.max(1) {
                    actions.extend((0..self.m).map(|t| Action::Rule { pattern: p, treatment: t }));
                }
            }
        }
        actions.extend((0..self.m).map(Action::Default));
        actions
    }

    pub fn is_legal_rule(&self, state: &SearchState, pattern: usize, min_new_count: usize) -> bool {
        !state.uses_pattern(pattern) && self.new_coverage(state, pattern) >= min_new_count.max(1)
    }

    /// The decision list a state describes; non-terminal states get `default`.
    pub fn decision_list(&self, state: &SearchState, default: usize) -> DecisionList {
        DecisionList::new(
            state
                .prefix
                .iter()
                .map(|&(p, t)| Rule {
                    pattern: self.cands.patterns[p].pattern.clone(),
                    treatment: t,
                })
                .collect(),
            state.terminal.unwrap_or(default),
        )
    }

    /// Recomputes the running sums of `state` through the regime semantics
    /// and reports the first mismatch.
    pub fn verify_state(&self, state: &SearchState) -> Result<()> {
        let dl = self.decision_list(state, 0);
        let groups = partition(self.ds, &dl);
        let schema = self.ds.schema();
        let (mut count, mut assess, mut value) = (0usize, 0.0, 0.0);
        for (i, g) in groups.group_of.iter().enumerate() {
            if let Group::Rule(l) = *g {
                count += 1;
                assess += groups.assessment_cost_of(i, schema, CostPolicy::Literal);
                value += self.value[i * self.m + dl.rules[l].treatment];
                if !state.covered.contains(i) {
                    return Err(Error::validation("search state", format!("subject {i} not marked covered")));
                }
            }
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        if count != state.n_covered || !close(assess, state.incurred_assess) || !close(value, state.incurred_value) {
            return Err(Error::validation(
                "search state",
                format!(
                    "running sums ({}, {}, {}) differ from recomputation ({count}, {assess}, {value})",
                    state.n_covered, state.incurred_assess, state.incurred_value
                ),
            ));
        }
        Ok(())
    }
}

/// Index and value of the first maximum.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
}
