use std::io::{Read, Write};
use std::path::Path;

use crate::domain::schema::{Kind, Schema};
use crate::error::{Error, Result};

/// Observational data: `N` subjects with characteristics, the treatment each
/// received and the observed (higher-is-better) outcome.
///
/// Characteristic values are stored row-major as `f64`; binary and
/// categorical values hold the index of their level in the schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    values: Vec<f64>,
    treatments: Vec<usize>,
    outcomes: Vec<f64>,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        values: Vec<f64>,
        treatments: Vec<usize>,
        outcomes: Vec<f64>,
    ) -> Result<Self> {
        schema.validate()?;
        let n = treatments.len();
        let p = schema.p();
        if n == 0 {
            return Err(Error::validation("dataset", "at least one row is required"));
        }
        if values.len() != n * p || outcomes.len() != n {
            return Err(Error::validation(
                "dataset",
                format!(
                    "inconsistent sizes: {} values, {} treatments, {} outcomes for p = {p}",
                    values.len(),
                    n,
                    outcomes.len()
                ),
            ));
        }
        for i in 0..n {
            for (f, spec) in schema.characteristics.iter().enumerate() {
                let v = values[i * p + f];
                let ok = match spec.kind {
                    Kind::Real => v.is_finite(),
                    Kind::Binary | Kind::Categorical => {
                        v >= 0.0 && v.fract() == 0.0 && (v as usize) < spec.levels.len()
                    }
                };
                if !ok {
                    return Err(Error::validation(
                        format!("row {i}, field `{}`", spec.name),
                        format!("value {v} does not conform to kind {:?}", spec.kind),
                    ));
                }
            }
            if treatments[i] >= schema.m() {
                return Err(Error::validation(
                    format!("row {i}, field `{}`", schema.treatment_column),
                    format!("unknown treatment id {}", treatments[i]),
                ));
            }
            if !outcomes[i].is_finite() {
                return Err(Error::validation(
                    format!("row {i}, field `{}`", schema.outcome_column),
                    "outcome must be finite",
                ));
            }
        }
        Ok(Dataset {
            schema,
            values,
            treatments,
            outcomes,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.treatments.len()
    }

    pub fn p(&self) -> usize {
        self.schema.p()
    }

    pub fn m(&self) -> usize {
        self.schema.m()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.values[i * self.p() + f]
    }

    pub fn column(&self, f: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |i| self.value(i, f))
    }

    pub fn treatment(&self, i: usize) -> usize {
        self.treatments[i]
    }

    pub fn treatments(&self) -> &[usize] {
        &self.treatments
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.outcomes[i]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    /// Parses CSV rows against `schema`. Columns are matched by header name;
    /// extra columns are ignored and empty cells are rejected.
    pub fn from_csv_reader<R: Read>(schema: Schema, reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
                Error::validation(format!("{source}:1"), format!("missing column `{name}`"))
            })
        };
        let feature_cols = schema
            .characteristics
            .iter()
            .map(|c| find(&c.name))
            .collect::<Result<Vec<_>>>()?;
        let treat_col = find(&schema.treatment_column)?;
        let outcome_col = find(&schema.outcome_column)?;

        let mut values = Vec::new();
        let mut treatments = Vec::new();
        let mut outcomes = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let cell = |col: usize, field: &str| -> Result<&str> {
                match record.get(col).map(str::trim) {
                    Some(s) if !s.is_empty() => Ok(s),
                    _ => Err(Error::validation(
                        format!("{source}:{line}, field `{field}`"),
                        "missing value",
                    )),
                }
            };
            for (spec, &col) in schema.characteristics.iter().zip(&feature_cols) {
                let raw = cell(col, &spec.name)?;
                let v = match spec.kind {
                    Kind::Real => raw.parse::<f64>().ok().filter(|v| v.is_finite()),
                    Kind::Binary | Kind::Categorical => spec.level_index(raw).map(|l| l as f64),
                };
                let v = v.ok_or_else(|| {
                    Error::validation(
                        format!("{source}:{line}, field `{}`", spec.name),
                        format!("`{raw}` is not a valid {:?} value", spec.kind),
                    )
                })?;
                values.push(v);
            }
            let raw = cell(treat_col, &schema.treatment_column)?;
            treatments.push(schema.treatment_index(raw).ok_or_else(|| {
                Error::validation(
                    format!("{source}:{line}, field `{}`", schema.treatment_column),
                    format!("unknown treatment `{raw}`"),
                )
            })?);
            let raw = cell(outcome_col, &schema.outcome_column)?;
            outcomes.push(raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(
                || {
                    Error::validation(
                        format!("{source}:{line}, field `{}`", schema.outcome_column),
                        format!("`{raw}` is not a finite number"),
                    )
                },
            )?);
        }
        Dataset::new(schema, values, treatments, outcomes)
    }

    pub fn load(schema: Schema, csv_path: &Path) -> Result<Self> {
        let file = std::fs::File::open(csv_path)?;
        Dataset::from_csv_reader(schema, file, &csv_path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self
            .schema
            .characteristics
            .iter()
            .map(|c| c.name.as_str())
            .collect();
        header.push(&self.schema.treatment_column);
        header.push(&self.schema.outcome_column);
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = self
                .schema
                .characteristics
                .iter()
                .enumerate()
                .map(|(f, spec)| format_value(spec.kind, &spec.levels, self.value(i, f)))
                .collect();
            record.push(self.schema.treatments[self.treatment(i)].name.clone());
            record.push(self.outcome(i).to_string());
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn format_value(kind: Kind, levels: &[String], v: f64) -> String {
    match kind {
        Kind::Real => v.to_string(),
        Kind::Binary | Kind::Categorical => levels[v as usize].clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::schema::{CharacteristicSpec, Treatment};

    fn schema() -> Schema {
        Schema::new(
            vec![
                CharacteristicSpec::real("Age", 1.0),
                CharacteristicSpec::categorical("Cough", &["Low", "Medium", "High"], 1.0),
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
    fn csv_round_trip() {
        let ds = Dataset::new(
            schema(),
            vec![45.0, 2.0, 30.5, 0.0],
            vec![1, 0],
            vec![100.0, 33.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("Age,Cough,treatment,outcome\n45,High,C,100\n"));
        let back = Dataset::from_csv_reader(schema(), &buf[..], "mem").unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn columns_matched_by_name() {
        let text = "outcome,Cough,extra,treatment,Age\n66,Low,zzz,Q,50\n";
        let ds = Dataset::from_csv_reader(schema(), text.as_bytes(), "mem").unwrap();
        assert_eq!(ds.row(0), &[50.0, 0.0]);
        assert_eq!(ds.treatment(0), 0);
        assert_eq!(ds.outcome(0), 66.0);
    }

    #[test]
    fn missing_value_reports_line_and_field() {
        let text = "Age,Cough,treatment,outcome\n45,High,C,100\n,Low,Q,0\n";
        let err = Dataset::from_csv_reader(schema(), text.as_bytes(), "data.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("data.csv:3"), "{msg}");
        assert!(msg.contains("Age"), "{msg}");
        assert!(msg.contains("missing"), "{msg}");
    }

    #[test]
    fn unknown_level_and_treatment_rejected() {
        let bad_level = "Age,Cough,treatment,outcome\n45,Severe,C,100\n";
        assert!(Dataset::from_csv_reader(schema(), bad_level.as_bytes(), "m").is_err());
        let bad_treat = "Age,Cough,treatment,outcome\n45,High,X,100\n";
        assert!(Dataset::from_csv_reader(schema(), bad_treat.as_bytes(), "m").is_err());
        let missing_col = "Age,treatment,outcome\n45,C,100\n";
        assert!(Dataset::from_csv_reader(schema(), missing_col.as_bytes(), "m").is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let text = "Age,Cough,treatment,outcome\n";
        assert!(Dataset::from_csv_reader(schema(), text.as_bytes(), "m").is_err());
    }
}
