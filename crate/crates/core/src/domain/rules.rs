use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::domain::schema::{Kind, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Eq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Lt => "<",
            Op::Gt => ">",
        }
    }

    pub fn parse(s: &str) -> Option<Op> {
        Some(match s {
            "=" | "==" => Op::Eq,
            "!=" | "≠" => Op::Ne,
            "<=" | "≤" => Op::Le,
            ">=" | "≥" => Op::Ge,
            "<" => Op::Lt,
            ">" => Op::Gt,
            _ => return None,
        })
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Op::Eq | Op::Ne)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Right-hand side of a predicate: a level index for binary/categorical
/// features, a number for real features.
#[derive(Clone, Copy, Debug)]
pub enum Operand {
    Level(usize),
    Number(f64),
}

impl Operand {
    fn key(self) -> (u8, u64) {
        match self {
            Operand::Level(l) => (0, l as u64),
            Operand::Number(v) => (1, v.to_bits()),
        }
    }
}

impl PartialEq for Operand {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Operand {}

impl Hash for Operand {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

/// A test `(feature, op, value)` on one characteristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub feature: usize,
    pub op: Op,
    pub operand: Operand,
}

impl Predicate {
    /// Builds a predicate after checking it against the schema.
    pub fn new(schema: &Schema, feature: usize, op: Op, operand: Operand) -> Result<Self> {
        let p = Predicate {
            feature,
            op,
            operand,
        };
        p.check(schema)?;
        Ok(p)
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        let spec = schema.characteristics.get(self.feature).ok_or_else(|| {
            Error::InvalidPredicate(format!("feature index {} out of range", self.feature))
        })?;
        match (spec.kind, self.operand) {
            (Kind::Real, Operand::Number(v)) if v.is_finite() => Ok(()),
            (Kind::Binary | Kind::Categorical, Operand::Level(l))
                if l < spec.levels.len() && !self.op.is_ordering() =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidPredicate(format!(
                "`{} {} {:?}` does not fit a {:?} characteristic",
                spec.name, self.op, self.operand, spec.kind
            ))),
        }
    }

    /// Evaluates the predicate on a stored value. Comparisons are exact.
    pub fn holds(&self, value: f64) -> bool {
        let rhs = match self.operand {
            Operand::Level(l) => l as f64,
            Operand::Number(v) => v,
        };
        match self.op {
            Op::Eq => value == rhs,
            Op::Ne => value != rhs,
            Op::Le => value <= rhs,
            Op::Ge => value >= rhs,
            Op::Lt => value < rhs,
            Op::Gt => value > rhs,
        }
    }

    pub fn display(&self, schema: &Schema) -> String {
        let spec = &schema.characteristics[self.feature];
        let value = match self.operand {
            Operand::Level(l) => spec.levels[l].clone(),
            Operand::Number(v) => v.to_string(),
        };
        format!("{} {} {}", spec.name, self.op, value)
    }
}

/// A nonempty conjunction of predicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    predicates: Vec<Predicate>,
}

impl Pattern {
    pub fn new(predicates: Vec<Predicate>) -> Result<Self> {
        if predicates.is_empty() {
            return Err(Error::InvalidPredicate("a pattern needs at least one predicate".into()));
        }
        for (k, p) in predicates.iter().enumerate() {
            if predicates[..k].contains(p) {
                return Err(Error::InvalidPredicate(format!(
                    "duplicate predicate on feature {}",
                    p.feature
                )));
            }
        }
        Ok(Pattern { predicates })
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Distinct features referenced, sorted.
    pub fn features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.predicates.iter().map(|p| p.feature).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        self.predicates.iter().try_for_each(|p| p.check(schema))
    }

    /// Evaluates on a row without re-validating the predicates.
    pub fn matches(&self, row: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.holds(row[p.feature]))
    }

    pub fn display(&self, schema: &Schema) -> String {
        self.predicates
            .iter()
            .map(|p| p.display(schema))
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub pattern: Pattern,
    pub treatment: usize,
}

/// An ordered list of `(pattern, treatment)` rules ending in a default
/// treatment; a subject receives the treatment of the first rule it matches.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionList {
    pub rules: Vec<Rule>,
    pub default_treatment: usize,
}

impl DecisionList {
    pub fn new(rules: Vec<Rule>, default_treatment: usize) -> Self {
        DecisionList {
            rules,
            default_treatment,
        }
    }

    pub fn constant(treatment: usize) -> Self {
        DecisionList::new(Vec::new(), treatment)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        for rule in &self.rules {
            rule.pattern.check(schema)?;
            if rule.treatment >= schema.m() {
                return Err(Error::InvalidPredicate(format!(
                    "unknown treatment id {}",
                    rule.treatment
                )));
            }
        }
        if self.default_treatment >= schema.m() {
            return Err(Error::InvalidPredicate(format!(
                "unknown default treatment id {}",
                self.default_treatment
            )));
        }
        Ok(())
    }

    /// Index of the first matching rule, or `None` for the default group.
    pub fn first_match(&self, row: &[f64]) -> Option<usize> {
        self.rules.iter().position(|r| r.pattern.matches(row))
    }

    pub fn treatment_for(&self, row: &[f64]) -> usize {
        self.first_match(row)
            .map_or(self.default_treatment, |j| self.rules[j].treatment)
    }

    /// If/else-if rendering, one rule per line.
    pub fn pretty(&self, schema: &Schema) -> String {
        let mut out = String::new();
        for (j, rule) in self.rules.iter().enumerate() {
            let kw = if j == 0 { "if" } else { "else if" };
            out.push_str(&format!(
                "{kw} {} then {}\n",
                rule.pattern.display(schema),
                schema.treatments[rule.treatment].name
            ));
        }
        let kw = if self.rules.is_empty() { "always" } else { "else" };
        out.push_str(&format!(
            "{kw} {}\n",
            schema.treatments[self.default_treatment].name
        ));
        out
    }

    pub fn to_wire(&self, schema: &Schema) -> DecisionListWire {
        DecisionListWire {
            rules: self
                .rules
                .iter()
                .map(|r| RuleWire {
                    pattern: pattern_to_wire(&r.pattern, schema),
                    treatment: schema.treatments[r.treatment].name.clone(),
                })
                .collect(),
            default_treatment: schema.treatments[self.default_treatment].name.clone(),
        }
    }

    pub fn from_wire(wire: &DecisionListWire, schema: &Schema) -> Result<Self> {
        let treatment = |name: &str| {
            schema
                .treatment_index(name)
                .ok_or_else(|| Error::InvalidPredicate(format!("unknown treatment `{name}`")))
        };
        let rules = wire
            .rules
            .iter()
            .map(|r| {
                Ok(Rule {
                    pattern: pattern_from_wire(&r.pattern, schema)?,
                    treatment: treatment(&r.treatment)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecisionList::new(rules, treatment(&wire.default_treatment)?))
    }

    pub fn to_json(&self, schema: &Schema) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_wire(schema))?)
    }

    pub fn from_json(s: &str, schema: &Schema) -> Result<Self> {
        let wire: DecisionListWire = serde_json::from_str(s)?;
        DecisionList::from_wire(&wire, schema)
    }
}

/// JSON form of a predicate: feature and level by name, thresholds as numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateWire {
    pub feature: String,
    pub op: String,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleWire {
    pub pattern: Vec<PredicateWire>,
    pub treatment: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionListWire {
    pub rules: Vec<RuleWire>,
    pub default_treatment: String,
}

pub fn pattern_to_wire(pattern: &Pattern, schema: &Schema) -> Vec<PredicateWire> {
    pattern
        .predicates()
        .iter()
        .map(|p| {
            let spec = &schema.characteristics[p.feature];
            let value = match p.operand {
                Operand::Level(l) => serde_json::Value::String(spec.levels[l].clone()),
                Operand::Number(v) => serde_json::json!(v),
            };
            PredicateWire {
                feature: spec.name.clone(),
                op: p.op.symbol().to_string(),
                value,
            }
        })
        .collect()
}

pub fn pattern_from_wire(wire: &[PredicateWire], schema: &Schema) -> Result<Pattern> {
    let predicates = wire
        .iter()
        .map(|w| {
            let feature = schema.feature_index(&w.feature).ok_or_else(|| {
                Error::InvalidPredicate(format!("unknown characteristic `{}`", w.feature))
            })?;
            let op = Op::parse(&w.op)
                .ok_or_else(|| Error::InvalidPredicate(format!("unknown operator `{}`", w.op)))?;
            let spec = &schema.characteristics[feature];
            let operand = match (&w.value, spec.kind) {
                (serde_json::Value::Number(n), Kind::Real) => {
                    Operand::Number(n.as_f64().unwrap_or(f64::NAN))
                }
                (serde_json::Value::String(s), Kind::Binary | Kind::Categorical) => {
                    Operand::Level(spec.level_index(s).ok_or_else(|| {
                        Error::InvalidPredicate(format!("`{s}` is not a level of `{}`", spec.name))
                    })?)
                }
                (v, kind) => {
                    return Err(Error::InvalidPredicate(format!(
                        "value {v} does not fit {kind:?} characteristic `{}`",
                        spec.name
                    )))
                }
            };
            Predicate::new(schema, feature, op, operand)
        })
        .collect::<Result<Vec<_>>>()?;
    Pattern::new(predicates)
}
