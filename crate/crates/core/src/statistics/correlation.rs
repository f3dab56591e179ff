use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pearson correlations of named variables. Entries involving a constant
/// variable are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// One square of a Hinton diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HintonCell {
    pub row: String,
    pub column: String,
    pub magnitude: f64,
    pub sign: i8,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.values[i][j]
    }

    /// Magnitude and sign of every defined entry.
    pub fn hinton(&self) -> Vec<HintonCell> {
        let mut cells = Vec::new();
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    cells.push(HintonCell {
                        row: self.names[i].clone(),
                        column: self.names[j].clone(),
                        magnitude: v.abs(),
                        sign: if *v < 0.0 { -1 } else { 1 },
                    });
                }
            }
        }
        cells
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(",{}\n", self.names.join(","));
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            s.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        s
    }
}

/// Pearson correlation matrix of equally long named sample vectors.
pub fn correlation_matrix(variables: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix> {
    let n = variables.first().map_or(0, |(_, v)| v.len());
    if n < 2 {
        return Err(Error::InvalidArgument("correlations need at least two samples".into()));
    }
    if let Some((name, v)) = variables.iter().find(|(_, v)| v.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "variable `{name}` has {} samples, expected {n}",
            v.len()
        )));
    }
    let centred: Vec<(Vec<f64>, f64)> = variables
        .iter()
        .map(|(_, v)| {
            let mean = v.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            // treat round-off level spread as constant
            let norm = if norm <= 1e-14 * scale * (n as f64).sqrt() {
                0.0
            } else {
                norm
            };
            (c, norm)
        })
        .collect();
    let k = variables.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (ci, ni) = &centred[i];
            let (cj, nj) = &centred[j];
            if *ni == 0.0 || *nj == 0.0 {
                continue;
            }
            let r = if i == j {
                1.0
            } else {
                (ci.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() / (ni * nj)).clamp(-1.0, 1.0)
            };
            values[i][j] = Some(r);
            values[j][i] = Some(r);
        }
    }
    Ok(CorrelationMatrix {
        names: variables.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn named(v: Vec<Vec<f64>>) -> Vec<(String, Vec<f64>)> {
        v.into_iter().enumerate().map(|(i, x)| (format!("v{i}"), x)).collect()
    }

    #[test]
    fn identities_and_constants() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let y = x.clone();
        let z: Vec<f64> = x.iter().map(|v| -3.0 * v + 1e-12 * v * v).collect();
        let c = vec![2.0; 50];
        let m = correlation_matrix(&named(vec![x, y, z, c])).unwrap();
        assert!((m.values[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!((m.values[0][2].unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(m.values[0][3], None);
        assert_eq!(m.values[3][3], None);
        assert_eq!(m.hinton().len(), 9);
    }

    #[test]
    fn independent_normals_are_uncorrelated() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let mut draw = || -> Vec<f64> { (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let m = correlation_matrix(&named(vec![draw(), draw()])).unwrap();
        assert!(m.values[0][1].unwrap().abs() <= 0.05);
    }

    proptest! {
        #[test]
        fn affine_invariance_and_sign_flip(
            data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 3..40),
            a in 0.1f64..10.0,
            b in -10.0f64..10.0,
        ) {
            let x: Vec<f64> = data.iter().map(|t| t.0).collect();
            let y: Vec<f64> = data.iter().map(|t| t.1 + 0.5 * t.0).collect();
            let z: Vec<f64> = data.iter().map(|t| t.2).collect();
            let base = correlation_matrix(&named(vec![x.clone(), y.clone(), z.clone()])).unwrap();
            let scaled = correlation_matrix(&named(vec![x.iter().map(|v| a * v + b).collect(), y.clone(), z.clone()])).unwrap();
            let flipped = correlation_matrix(&named(vec![x.iter().map(|v| -v).collect(), y, z])).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if let (Some(p), Some(q), Some(r)) = (base.values[i][j], scaled.values[i][j], flipped.values[i][j]) {
                        prop_assert!((p - q).abs() < 1e-9);
                        let sign = if (i == 0) != (j == 0) { -1.0 } else { 1.0 };
                        prop_assert!((sign * p - r).abs() < 1e-9);
                        prop_assert!((-1.0..=1.0).contains(&p));
                        prop_assert!(base.values[j][i] == Some(p));
                    }
                }
            }
        }
    }
}
