use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Binary,
    Categorical,
    Real,
}

/// One subject characteristic together with the cost of assessing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSpec {
    pub name: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    pub cost: f64,
}

impl CharacteristicSpec {
    pub fn real(name: impl Into<String>, cost: f64) -> Self {
        CharacteristicSpec {
            name: name.into(),
            kind: Kind::Real,
            levels: Vec::new(),
            cost,
        }
    }

    pub fn binary(name: impl Into<String>, levels: [&str; 2], cost: f64) -> Self {
        CharacteristicSpec {
            name: name.into(),
            kind: Kind::Binary,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            cost,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str], cost: f64) -> Self {
        CharacteristicSpec {
            name: name.into(),
            kind: Kind::Categorical,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            cost,
        }
    }

    pub fn is_real(&self) -> bool {
        self.kind == Kind::Real
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(Error::Schema(format!(
                "characteristic `{}` has invalid cost {}",
                self.name, self.cost
            )));
        }
        let ok = match self.kind {
            Kind::Binary => self.levels.len() == 2,
            Kind::Categorical => self.levels.len() >= 2,
            Kind::Real => self.levels.is_empty(),
        };
        if !ok {
            return Err(Error::Schema(format!(
                "characteristic `{}` of kind {:?} has {} levels",
                self.name,
                self.kind,
                self.levels.len()
            )));
        }
        let distinct: HashSet<&str> = self.levels.iter().map(String::as_str).collect();
        if distinct.len() != self.levels.len() {
            return Err(Error::Schema(format!(
                "characteristic `{}` has duplicate levels",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Treatment {
    pub name: String,
    pub cost: f64,
}

/// Column layout and cost schedule of a dataset: the per-characteristic
/// assessment costs and the per-treatment costs.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub characteristics: Vec<CharacteristicSpec>,
    pub treatments: Vec<Treatment>,
    pub treatment_column: String,
    pub outcome_column: String,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    characteristics: Vec<CharacteristicSpec>,
    treatment_column: String,
    outcome_column: String,
    treatments: IndexMap<String, f64>,
}

impl Schema {
    pub fn new(
        characteristics: Vec<CharacteristicSpec>,
        treatments: Vec<Treatment>,
        treatment_column: impl Into<String>,
        outcome_column: impl Into<String>,
    ) -> Result<Self> {
        let schema = Schema {
            characteristics,
            treatments,
            treatment_column: treatment_column.into(),
            outcome_column: outcome_column.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for spec in &self.characteristics {
            spec.validate()?;
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!("duplicate characteristic `{}`", spec.name)));
            }
        }
        for col in [&self.treatment_column, &self.outcome_column] {
            if !names.insert(col.as_str()) {
                return Err(Error::Schema(format!("column name `{col}` is used twice")));
            }
        }
        if self.treatments.is_empty() {
            return Err(Error::Schema("at least one treatment is required".into()));
        }
        let mut tnames = HashSet::new();
        for t in &self.treatments {
            if !(t.cost.is_finite() && t.cost >= 0.0) {
                return Err(Error::Schema(format!(
                    "treatment `{}` has invalid cost {}",
                    t.name, t.cost
                )));
            }
            if !tnames.insert(t.name.as_str()) {
                return Err(Error::Schema(format!("duplicate treatment `{}`", t.name)));
            }
        }
        Ok(())
    }

    /// Number of characteristics `p`.
    pub fn p(&self) -> usize {
        self.characteristics.len()
    }

    /// Number of treatments `m`.
    pub fn m(&self) -> usize {
        self.treatments.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.characteristics.iter().position(|c| c.name == name)
    }

    pub fn treatment_index(&self, name: &str) -> Option<usize> {
        self.treatments.iter().position(|t| t.name == name)
    }

    pub fn feature_cost(&self, f: usize) -> f64 {
        self.characteristics[f].cost
    }

    pub fn treatment_cost(&self, a: usize) -> f64 {
        self.treatments[a].cost
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SchemaFile {
            characteristics: self.characteristics.clone(),
            treatment_column: self.treatment_column.clone(),
            outcome_column: self.outcome_column.clone(),
            treatments: self
                .treatments
                .iter()
                .map(|t| (t.name.clone(), t.cost))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(s)?;
        Schema::new(
            file.characteristics,
            file.treatments
                .into_iter()
                .map(|(name, cost)| Treatment { name, cost })
                .collect(),
            file.treatment_column,
            file.outcome_column,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Schema::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::validation(
                format!("{}:{}:{}", path.display(), j.line(), j.column()),
                j.to_string(),
            ),
            Error::Schema(msg) => Error::validation(path.display().to_string(), msg),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Schema {
        Schema::new(
            vec![
                CharacteristicSpec::real("Age", 1.0),
                CharacteristicSpec::binary("Gender", ["F", "M"], 1.0),
            ],
            vec![
                Treatment { name: "Q".into(), cost: 10.0 },
                Treatment { name: "C".into(), cost: 15.0 },
            ],
            "treatment",
            "outcome",
        )
        .unwrap()
    }

    #[test]
    fn json_keeps_treatment_order() {
        let s = tiny();
        let back = Schema::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.treatment_index("C"), Some(1));
    }

    #[test]
    fn rejects_bad_kinds_and_costs() {
        let mut bad = CharacteristicSpec::binary("B", ["x", "y"], 1.0);
        bad.levels.push("z".into());
        assert!(bad.validate().is_err());
        assert!(CharacteristicSpec::real("R", -1.0).validate().is_err());
        assert!(CharacteristicSpec::categorical("C", &["only"], 0.0).validate().is_err());
        let mut real = CharacteristicSpec::real("R", 0.0);
        real.levels.push("a".into());
        assert!(real.validate().is_err());
    }

    #[test]
    fn rejects_duplicate_columns() {
        let err = Schema::new(
            vec![CharacteristicSpec::real("outcome", 1.0)],
            vec![Treatment { name: "Q".into(), cost: 1.0 }],
            "treatment",
            "outcome",
        );
        assert!(err.is_err());
    }
}
