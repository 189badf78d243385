use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{read_text, write_atomic};
use crate::control::CostWeights;
use crate::error::{MltError, Result};
use crate::model::{Ablation, GainSource, TransportParameters};

pub const PARAMS_FORMAT: &str = "mlt-params-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GainJson {
    Learned { k_s: Vec<f64>, k_f: Vec<f64> },
    Riccati,
}

/// JSON form of [`TransportParameters`]; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    format: String,
    n: usize,
    ablation: Ablation,
    c: f64,
    lambda_s: f64,
    lambda_f: f64,
    h_s: Vec<f64>,
    h_f: Vec<f64>,
    gate: Vec<f64>,
    m_s: Vec<Vec<f64>>,
    m_f: Vec<Vec<f64>>,
    gain: GainJson,
    cost: CostWeights,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(what: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(MltError::Dimension {
            what: format!("{what} rows"),
            expected: n,
            got: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(MltError::Dimension {
            what: format!("{what} row length"),
            expected: n,
            got: r.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ParamsFile {
    pub fn from_params(p: &TransportParameters) -> Self {
        ParamsFile {
            format: PARAMS_FORMAT.into(),
            n: p.n(),
            ablation: p.ablation,
            c: p.c,
            lambda_s: p.lambda_s,
            lambda_f: p.lambda_f,
            h_s: p.h_s.clone(),
            h_f: p.h_f.clone(),
            gate: p.gate.clone(),
            m_s: rows(&p.m_s),
            m_f: rows(&p.m_f),
            gain: match &p.k_source {
                GainSource::Learned { k_s, k_f } => GainJson::Learned {
                    k_s: k_s.clone(),
                    k_f: k_f.clone(),
                },
                GainSource::Riccati => GainJson::Riccati,
            },
            cost: p.cost.clone(),
        }
    }

    pub fn into_params(self) -> Result<TransportParameters> {
        if self.format != PARAMS_FORMAT {
            return Err(MltError::Validation(format!(
                "parameter format '{}', expected '{PARAMS_FORMAT}'",
                self.format
            )));
        }
        if self.h_s.len() != self.n {
            return Err(MltError::Dimension {
                what: "h_s".into(),
                expected: self.n,
                got: self.h_s.len(),
            });
        }
        let p = TransportParameters {
            m_s: from_rows("m_s", &self.m_s, self.n)?,
            m_f: from_rows("m_f", &self.m_f, self.n)?,
            h_s: self.h_s,
            h_f: self.h_f,
            gate: self.gate,
            lambda_s: self.lambda_s,
            lambda_f: self.lambda_f,
            c: self.c,
            k_source: match self.gain {
                GainJson::Learned { k_s, k_f } => GainSource::Learned { k_s, k_f },
                GainJson::Riccati => GainSource::Riccati,
            },
            cost: self.cost,
            ablation: self.ablation,
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn write_params(path: impl AsRef<Path>, p: &TransportParameters) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&ParamsFile::from_params(p))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_params(path: impl AsRef<Path>) -> Result<TransportParameters> {
    let path = path.as_ref();
    let file: ParamsFile = serde_json::from_str(&read_text(path)?).map_err(|e| MltError::Parse {
        source_name: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    file.into_params()
}
