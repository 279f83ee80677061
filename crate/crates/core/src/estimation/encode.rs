use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Kind, Schema};

/// One column of the encoded design matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub feature: usize,
    /// `Some(level)` for a one-hot indicator, `None` for a standardized real.
    pub level: Option<usize>,
    pub mean: f64,
    pub scale: f64,
}

/// Maps raw characteristic rows to numeric model inputs: one-hot indicators
/// for binary/categorical features (first level dropped as reference) and
/// standardized reals. Column order follows the schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<EncodedColumn>,
}

/// Dense row-major matrix without an intercept column.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl FeatureEncoder {
    pub fn fit(ds: &Dataset) -> Self {
        let schema = ds.schema();
        let n = ds.n() as f64;
        let mut columns = Vec::new();
        for (f, spec) in schema.characteristics.iter().enumerate() {
            match spec.kind {
                Kind::Real => {
                    let mean = ds.column(f).sum::<f64>() / n;
                    let var = ds.column(f).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    // constant column: shift only
                    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                    columns.push(EncodedColumn {
                        name: spec.name.clone(),
                        feature: f,
                        level: None,
                        mean,
                        scale,
                    });
                }
                Kind::Binary | Kind::Categorical => {
                    for (l, level) in spec.levels.iter().enumerate().skip(1) {
                        columns.push(EncodedColumn {
                            name: format!("{}={}", spec.name, level),
                            feature: f,
                            level: Some(l),
                            mean: 0.0,
                            scale: 1.0,
                        });
                    }
                }
            }
        }
        FeatureEncoder { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn encode_row_into(&self, row: &[f64], out: &mut [f64]) {
        for (slot, col) in out.iter_mut().zip(&self.columns) {
            let v = row[col.feature];
            *slot = match col.level {
                Some(l) => f64::from(u8::from(v == l as f64)),
                None => (v - col.mean) / col.scale,
            };
        }
    }

    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.encode_row_into(row, &mut out);
        out
    }

    pub fn transform(&self, ds: &Dataset) -> DesignMatrix {
        let cols = self.width();
        let mut data = vec![0.0; ds.n() * cols];
        for i in 0..ds.n() {
            self.encode_row_into(ds.row(i), &mut data[i * cols..(i + 1) * cols]);
        }
        DesignMatrix {
            rows: ds.n(),
            cols,
            data,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}

/// Parses an encoded column name back into `(feature, level)` using the schema.
pub fn decode_column_name(schema: &Schema, name: &str) -> Option<(usize, Option<usize>)> {
    if let Some(f) = schema.feature_index(name) {
        if schema.characteristics[f].kind == Kind::Real {
            return Some((f, None));
        }
    }
    name.match_indices('=').find_map(|(pos, _)| {
        let f = schema.feature_index(&name[..pos])?;
        let spec = &schema.characteristics[f];
        if spec.kind == Kind::Real {
            return None;
        }
        spec.level_index(&name[pos + 1..]).map(|l| (f, Some(l)))
    })
}

/// Fits the encoder and builds the design matrix in one step.
pub fn encode_features(ds: &Dataset) -> (FeatureEncoder, DesignMatrix) {
    let enc = FeatureEncoder::fit(ds);
    let x = enc.transform(ds);
    (enc, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CharacteristicSpec, Treatment};
    use proptest::prelude::*;

    fn treatments() -> Vec<Treatment> {
        vec![Treatment { name: "A".into(), cost: 0.0 }]
    }

    #[test]
    fn binary_feature_is_one_column() {
        let schema = Schema::new(
            vec![CharacteristicSpec::binary("Gender", ["F", "M"], 1.0)],
            treatments(),
            "t",
            "y",
        )
        .unwrap();
        let ds = Dataset::new(schema, vec![0.0, 1.0], vec![0, 0], vec![1.0, 2.0]).unwrap();
        let (enc, x) = encode_features(&ds);
        assert_eq!(enc.names(), vec!["Gender=M"]);
        assert_eq!(x.data, vec![0.0, 1.0]);
    }

    #[test]
    fn categorical_uses_reference_level() {
        let schema = Schema::new(
            vec![CharacteristicSpec::categorical("Cough", &["Low", "Medium", "High"], 1.0)],
            treatments(),
            "t",
            "y",
        )
        .unwrap();
        let ds = Dataset::new(schema, vec![0.0, 1.0, 2.0], vec![0; 3], vec![0.0; 3]).unwrap();
        let (enc, x) = encode_features(&ds);
        assert_eq!(enc.width(), 2);
        assert_eq!(x.data, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn reals_are_standardized_and_constants_shifted() {
        let schema = Schema::new(
            vec![CharacteristicSpec::real("Age", 1.0), CharacteristicSpec::real("K", 1.0)],
            treatments(),
            "t",
            "y",
        )
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0, 7.0],
            vec![0; 4],
            vec![0.0; 4],
        )
        .unwrap();
        let (enc, x) = encode_features(&ds);
        let age: Vec<f64> = (0..4).map(|i| x.row(i)[0]).collect();
        let mean: f64 = age.iter().sum::<f64>() / 4.0;
        let var: f64 = age.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(enc.columns[1].scale, 1.0);
        assert!((0..4).all(|i| x.row(i)[1] == 0.0));
    }

    proptest! {
        #[test]
        fn column_names_decode(kinds in proptest::collection::vec(0u8..3, 1..6), nlev in 2usize..5) {
            let specs: Vec<CharacteristicSpec> = kinds
                .iter()
                .enumerate()
                .map(|(f, k)| match k {
                    0 => CharacteristicSpec::real(format!("r{f}"), 1.0),
                    1 => CharacteristicSpec::binary(format!("b={f}"), ["no", "yes"], 1.0),
                    _ => {
                        let levels: Vec<String> = (0..nlev).map(|l| format!("L{l}")).collect();
                        let refs: Vec<&str> = levels.iter().map(String::as_str).collect();
                        CharacteristicSpec::categorical(format!("c{f}"), &refs, 1.0)
                    }
                })
                .collect();
            let schema = Schema::new(specs, treatments(), "t", "y").unwrap();
            let row: Vec<f64> = vec![0.0; schema.p()];
            let ds = Dataset::new(schema.clone(), row, vec![0], vec![0.0]).unwrap();
            let enc = FeatureEncoder::fit(&ds);
            for col in &enc.columns {
                prop_assert_eq!(decode_column_name(&schema, &col.name), Some((col.feature, col.level)));
            }
        }
    }
}
