//! Labeled user × feature table with explicit missing cells.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv header must end with user_id,label")]
    BadHeader,
    #[error("row {row}: column {column}: cannot parse {value:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name {0}")]
    DuplicateColumn(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Credibility,
    Initiative,
    Adaptability,
    /// Lexicon-derived and externally joined columns.
    Psycholinguistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub group: FeatureGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user_id: String,
    pub label: u8,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<Column>,
    pub rows: Vec<FeatureRow>,
}

pub const LABEL_CONSPIRACY: u8 = 1;
pub const LABEL_CONTROL: u8 = 0;

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn value(&self, user_id: &str, column: &str) -> Option<f64> {
        let j = self.column_index(column)?;
        self.rows
            .iter()
            .find(|r| r.user_id == user_id)
            .and_then(|r| r.values[j])
    }

    /// Subset of columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    user_id: r.user_id.clone(),
                    label: r.label,
                    values: idx.iter().map(|&j| r.values[j]).collect(),
                })
                .collect(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn columns_in_groups(&self, groups: &[FeatureGroup]) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| groups.contains(&self.columns[j].group))
            .collect()
    }

    /// Appends columns; `values` maps user id to one cell per new column.
    /// Users absent from `values` receive missing cells.
    pub fn append_columns(
        &mut self,
        columns: Vec<Column>,
        values: &HashMap<String, Vec<Option<f64>>>,
    ) -> Result<(), MatrixError> {
        let mut names: HashSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(MatrixError::DuplicateColumn(c.name.clone()));
            }
        }
        let width = columns.len();
        for r in &mut self.rows {
            match values.get(&r.user_id) {
                Some(v) => r.values.extend(v.iter().copied()),
                None => r.values.extend(std::iter::repeat_n(None, width)),
            }
        }
        self.columns.extend(columns);
        Ok(())
    }

    /// CSV: feature columns, then `user_id`, then `label`. Missing cells are
    /// empty; numbers use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.column_names();
        header.push("user_id");
        header.push("label");
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r
                .values
                .iter()
                .map(|v| v.map(|x| format!("{x:?}")).unwrap_or_default())
                .collect();
            rec.push(r.user_id.clone());
            rec.push(r.label.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads [`write_csv`](Self::write_csv) output. Column kinds and groups
    /// come from `schema` when given, else from the built-in column catalog.
    pub fn read_csv<R: Read>(
        r: R,
        schema: Option<&[Column]>,
    ) -> Result<FeatureMatrix, MatrixError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let n = header.len();
        if n < 2 || header[n - 2] != "user_id" || header[n - 1] != "label" {
            return Err(MatrixError::BadHeader);
        }
        let by_name: BTreeMap<&str, &Column> = schema
            .unwrap_or(&[])
            .iter()
            .map(|c| (c.name.as_str(), c))
            .collect();
        let columns: Vec<Column> = header[..n - 2]
            .iter()
            .map(|name| match by_name.get(name.as_str()) {
                Some(c) => (*c).clone(),
                None => crate::features::describe_column(name),
            })
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != n {
                return Err(MatrixError::Ragged {
                    row: i + 1,
                    expected: n,
                    found: rec.len(),
                });
            }
            let mut values = Vec::with_capacity(n - 2);
            for (j, cell) in rec.iter().take(n - 2).enumerate() {
                values.push(parse_cell(cell).ok_or_else(|| MatrixError::BadCell {
                    row: i + 1,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?);
            }
            let label = rec[n - 1].parse::<u8>().map_err(|_| MatrixError::BadCell {
                row: i + 1,
                column: "label".into(),
                value: rec[n - 1].to_string(),
            })?;
            rows.push(FeatureRow {
                user_id: rec[n - 2].to_string(),
                label,
                values,
            });
        }
        Ok(FeatureMatrix { columns, rows })
    }
}

/// `Some(None)` for an empty (missing) cell, `None` when unparseable.
fn parse_cell(cell: &str) -> Option<Option<f64>> {
    if cell.is_empty() {
        return Some(None);
    }
    cell.parse::<f64>().ok().map(Some)
}
