use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::estimation::encode::FeatureEncoder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutcomeConfig {
    /// Ridge penalty on slopes; the intercept is never penalized.
    pub ridge: f64,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        OutcomeConfig { ridge: 1e-6 }
    }
}

/// Outcome regression `ŷ(x, a)`: one linear model per treatment arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub encoder: FeatureEncoder,
    /// `coefficients[a] = [intercept, slopes...]` on the encoded features.
    pub coefficients: Vec<Vec<f64>>,
}

impl OutcomeModel {
    pub fn predict(&self, row: &[f64], a: usize) -> f64 {
        let z = self.encoder.encode_row(row);
        predict_linear(&self.coefficients[a], &z)
    }

    /// Predictions for every arm.
    pub fn predict_all(&self, row: &[f64]) -> Vec<f64> {
        let z = self.encoder.encode_row(row);
        self.coefficients
            .iter()
            .map(|c| predict_linear(c, &z))
            .collect()
    }
}

fn predict_linear(coef: &[f64], z: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
}

/// Solves `min ||y - b - X w||² + ridge ||w||²` through the normal equations
/// and a Cholesky factorization. Returns `[b, w...]`, or `None` when the
/// system is numerically singular.
pub fn fit_ridge(rows: &[Vec<f64>], targets: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let k = rows.first().map_or(0, Vec::len) + 1;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut aug = vec![0.0; k];
    for (row, &y) in rows.iter().zip(targets) {
        aug[0] = 1.0;
        aug[1..].copy_from_slice(row);
        for r in 0..k {
            rhs[r] += aug[r] * y;
            for c in 0..=r {
                gram[(r, c)] += aug[r] * aug[c];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            gram[(c, r)] = gram[(r, c)];
        }
        if r > 0 {
            gram[(r, r)] += ridge;
        }
    }
    let max_diag = (0..k).map(|r| gram[(r, r)]).fold(0.0, f64::max);
    let chol = gram.cholesky()?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_pivot.is_nan() || min_pivot * min_pivot <= 1e-12 * max_diag {
        return None;
    }
    Some(chol.solve(&rhs).iter().copied().collect())
}

/// Fits `ŷ` arm by arm on the subjects observed under each treatment.
pub fn fit_outcome(ds: &Dataset, config: &OutcomeConfig) -> Result<OutcomeModel> {
    if !(config.ridge >= 0.0 && config.ridge.is_finite()) {
        return Err(Error::Config(format!("ridge = {} must be ≥ 0", config.ridge)));
    }
    let encoder = FeatureEncoder::fit(ds);
    let x = encoder.transform(ds);
    let coefficients = (0..ds.m())
        .map(|a| {
            let idx: Vec<usize> = (0..ds.n()).filter(|&i| ds.treatment(i) == a).collect();
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| ds.outcome(i)).collect();
            if rows.is_empty() {
                return Err(Error::SingularSystem {
                    arm: ds.schema().treatments[a].name.clone(),
                });
            }
            fit_ridge(&rows, &ys, config.ridge).ok_or_else(|| Error::SingularSystem {
                arm: ds.schema().treatments[a].name.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeModel {
        encoder,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CharacteristicSpec, Schema, Treatment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gauss-Jordan inverse of a dense square matrix.
    fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut inv: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| f64::from(u8::from(r == c))).collect())
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            inv.swap(col, piv);
            let d = a[col][col];
            for c in 0..n {
                a[col][c] /= d;
                inv[col][c] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    for c in 0..n {
                        a[r][c] -= f * a[col][c];
                        inv[r][c] -= f * inv[col][c];
                    }
                }
            }
        }
        inv
    }

    fn dense_oracle(rows: &[Vec<f64>], ys: &[f64], ridge: f64) -> Vec<f64> {
        let k = rows[0].len() + 1;
        let aug: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
            .collect();
        let mut xtx = vec![vec![0.0; k]; k];
        let mut xty = vec![0.0; k];
        for (r, y) in aug.iter().zip(ys) {
            for i in 0..k {
                xty[i] += r[i] * y;
                for j in 0..k {
                    xtx[i][j] += r[i] * r[j];
                }
            }
        }
        for (i, row) in xtx.iter_mut().enumerate().skip(1) {
            row[i] += ridge;
        }
        let inv = invert(xtx);
        inv.iter()
            .map(|row| row.iter().zip(&xty).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn exact_line_is_interpolated() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.5]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let coef = fit_ridge(&rows, &ys, 0.0).unwrap();
        assert!((coef[0] - 1.0).abs() <= 1e-8 && (coef[1] - 2.0).abs() <= 1e-8, "{coef:?}");
    }

    #[test]
    fn constant_outcome_gives_flat_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let coef = fit_ridge(&rows, &[5.0; 30], 1e-6).unwrap();
        assert!((coef[0] - 5.0).abs() <= 1e-8);
        assert!(coef[1..].iter().all(|c| c.abs() <= 1e-8));
    }

    #[test]
    fn matches_dense_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let k = 1 + trial % 5;
            let n = 3 * (k + 1) + trial;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let ridge = if trial % 2 == 0 { 0.0 } else { 0.5 };
            let got = fit_ridge(&rows, &ys, ridge).unwrap();
            let want = dense_oracle(&rows, &ys, ridge);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-8, "trial {trial}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn singular_system_detected() {
        // duplicated column, no ridge
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let ys: Vec<f64> = (0..6).map(|i| i as f64).collect();
        assert!(fit_ridge(&rows, &ys, 0.0).is_none());
        assert!(fit_ridge(&rows, &ys, 1e-3).is_some());
    }

    #[test]
    fn per_arm_fit_predicts_line_through_standardization() {
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
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let treat: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let ys: Vec<f64> = xs
            .iter()
            .zip(&treat)
            .map(|(x, &a)| if a == 0 { 2.0 * x + 1.0 } else { -x })
            .collect();
        let ds = Dataset::new(schema, xs, treat, ys).unwrap();
        let om = fit_outcome(&ds, &OutcomeConfig { ridge: 0.0 }).unwrap();
        for v in [0.0, 3.5, 17.0] {
            assert!((om.predict(&[v], 0) - (2.0 * v + 1.0)).abs() <= 1e-8);
            assert!((om.predict(&[v], 1) + v).abs() <= 1e-8);
        }
    }

    #[test]
    fn collinear_arm_without_ridge_errors() {
        let schema = Schema::new(
            vec![CharacteristicSpec::real("x", 1.0), CharacteristicSpec::real("z", 1.0)],
            vec![Treatment { name: "a".into(), cost: 0.0 }],
            "t",
            "y",
        )
        .unwrap();
        let values: Vec<f64> = (0..8).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let ds = Dataset::new(schema, values, vec![0; 8], (0..8).map(f64::from).collect()).unwrap();
        assert!(matches!(
            fit_outcome(&ds, &OutcomeConfig { ridge: 0.0 }),
            Err(Error::SingularSystem { .. })
        ));
    }
}
