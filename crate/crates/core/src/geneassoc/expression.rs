use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{MltError, Result};

/// Region x gene expression, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    values: DMatrix<f64>,
    gene_names: Vec<String>,
}

impl ExpressionMatrix {
    pub fn new(values: DMatrix<f64>, gene_names: Vec<String>) -> Result<Self> {
        if values.ncols() != gene_names.len() {
            return Err(MltError::Dimension {
                what: "gene names vs expression columns".into(),
                expected: values.ncols(),
                got: gene_names.len(),
            });
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = gene_names.iter().find(|g| !seen.insert(g.as_str())) {
            return Err(MltError::Invariant(format!("duplicate gene name '{dup}'")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(MltError::Invariant(format!("expression value {v} outside [0, 1]")));
        }
        Ok(ExpressionMatrix { values, gene_names })
    }

    /// Min-max scale every gene to `[0, 1]` before validation; constant genes
    /// map to 0.
    pub fn from_raw(raw: DMatrix<f64>, gene_names: Vec<String>) -> Result<Self> {
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(MltError::NonFinite("raw expression".into()));
        }
        let mut values = raw;
        for mut col in values.column_iter_mut() {
            let (lo, hi) = (col.min(), col.max());
            if hi > lo {
                col.apply(|v| *v = (*v - lo) / (hi - lo));
            } else {
                col.fill(0.0);
            }
        }
        ExpressionMatrix::new(values, gene_names)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn n_regions(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_genes(&self) -> usize {
        self.values.ncols()
    }

    /// Rows at the given region indices (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.n_genes(), |i, j| self.values[(rows[i], j)])
    }
}
