use std::collections::BTreeMap;

use crate::matrix::{ColumnKind, FeatureMatrix};

use super::ModelError;

/// Dense, fully observed design matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row(i)).collect()
    }
}

/// Fill values learned from a training partition: the mode for binary
/// columns, the mean for numeric ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub fill: Vec<f64>,
}

impl Imputer {
    /// Fits on the rows `train` of `m`.
    pub fn fit(m: &FeatureMatrix, train: &[usize]) -> Result<Imputer, ModelError> {
        let mut fill = Vec::with_capacity(m.n_cols());
        for (j, col) in m.columns.iter().enumerate() {
            let observed: Vec<f64> = train.iter().filter_map(|&i| m.rows[i].values[j]).collect();
            if observed.is_empty() {
                return Err(ModelError::FullyMissingColumn(col.name.clone()));
            }
            let v = match col.kind {
                ColumnKind::Numeric => observed.iter().sum::<f64>() / observed.len() as f64,
                ColumnKind::Binary => mode(&observed),
            };
            fill.push(v);
        }
        Ok(Imputer { fill })
    }

    /// Dense copy of rows `idx` with missing cells replaced.
    pub fn transform(&self, m: &FeatureMatrix, idx: &[usize]) -> Dataset {
        let columns = (0..m.n_cols())
            .map(|j| {
                idx.iter()
                    .map(|&i| m.rows[i].values[j].unwrap_or(self.fill[j]))
                    .collect()
            })
            .collect();
        Dataset {
            names: m.columns.iter().map(|c| c.name.clone()).collect(),
            columns,
            labels: idx.iter().map(|&i| m.rows[i].label).collect(),
        }
    }
}

/// Most frequent value; ties go to the smaller value.
fn mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        // order-preserving key for finite floats
        let bits = v.to_bits();
        let key = if v.is_sign_negative() {
            !bits
        } else {
            bits | (1 << 63)
        };
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    let mut best = (f64::NAN, 0usize);
    for (_, (v, n)) in counts {
        if n > best.1 {
            best = (v, n);
        }
    }
    best.0
}
