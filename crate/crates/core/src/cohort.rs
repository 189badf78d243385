//! Longitudinal scan records, subject covariates and the pairing of
//! consecutive scans into training samples.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};
use crate::graph::LayeredConnectome;
use crate::model::{Sample, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Apoe4 {
    Carrier,
    Noncarrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    CN,
    SMC,
    EMCI,
    LMCI,
    AD,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 5] = [
        Diagnosis::CN,
        Diagnosis::SMC,
        Diagnosis::EMCI,
        Diagnosis::LMCI,
        Diagnosis::AD,
    ];

    /// True for the impaired group (LMCI, AD).
    pub fn is_impaired(&self) -> bool {
        matches!(self, Diagnosis::LMCI | Diagnosis::AD)
    }
}

/// Missing values are explicit nulls; an absent key is a schema error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectCovariates {
    pub age: f64,
    pub sex: Sex,
    pub apoe4: Apoe4,
    /// CSF amyloid-beta in pg/mL.
    #[serde(deserialize_with = "Option::deserialize")]
    pub abeta_pgml: Option<f64>,
    pub diagnosis: Diagnosis,
    #[serde(deserialize_with = "Option::deserialize")]
    pub mmse: Option<u8>,
}

impl SubjectCovariates {
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.mmse {
            if m > 30 {
                return Err(MltError::Invariant(format!("MMSE {m} outside 0..=30")));
            }
        }
        if let Some(a) = self.abeta_pgml {
            if !(a.is_finite() && a >= 0.0) {
                return Err(MltError::Invariant(format!("amyloid-beta {a} is not a nonnegative number")));
            }
        }
        if !self.age.is_finite() {
            return Err(MltError::Invariant("age is not finite".into()));
        }
        Ok(())
    }
}

/// One PET scan of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRecord {
    pub subject_id: String,
    pub age: f64,
    pub suvr: Vec<f64>,
    pub covariates: SubjectCovariates,
}

impl ScanRecord {
    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(MltError::Invariant("empty subject id".into()));
        }
        if !(self.age.is_finite() && (18.0..=120.0).contains(&self.age)) {
            return Err(MltError::Invariant(format!(
                "subject {}: age {} outside [18, 120]",
                self.subject_id, self.age
            )));
        }
        if let Some((i, v)) = self.suvr.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(MltError::Invariant(format!(
                "subject {}: SUVR {v} at region {i} must be positive and finite",
                self.subject_id
            )));
        }
        self.covariates.validate()
    }
}

/// Scans grouped by subject in subject-id order, each subject's scans sorted
/// by age.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    subjects: Vec<(String, Vec<ScanRecord>)>,
    n: usize,
}

impl Cohort {
    pub fn new(scans: Vec<ScanRecord>) -> Result<Self> {
        let n = scans.first().map(|s| s.suvr.len()).unwrap_or(0);
        let mut by: BTreeMap<String, Vec<ScanRecord>> = BTreeMap::new();
        for s in scans {
            s.validate()?;
            if s.suvr.len() != n {
                return Err(MltError::Dimension {
                    what: format!("SUVR length for subject {}", s.subject_id),
                    expected: n,
                    got: s.suvr.len(),
                });
            }
            by.entry(s.subject_id.clone()).or_default().push(s);
        }
        let mut subjects = Vec::with_capacity(by.len());
        for (id, mut v) in by {
            v.sort_by(|a, b| a.age.total_cmp(&b.age));
            if let Some(w) = v.windows(2).find(|w| w[0].age == w[1].age) {
                return Err(MltError::Validation(format!(
                    "subject {id} has two scans at age {}",
                    w[0].age
                )));
            }
            subjects.push((id, v));
        }
        Ok(Cohort { subjects, n })
    }

    pub fn n_regions(&self) -> usize {
        self.n
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn subjects(&self) -> &[(String, Vec<ScanRecord>)] {
        &self.subjects
    }

    pub fn scans(&self) -> impl Iterator<Item = &ScanRecord> {
        self.subjects.iter().flat_map(|(_, v)| v.iter())
    }

    /// Baseline record of every subject.
    pub fn baselines(&self) -> Vec<&ScanRecord> {
        self.subjects.iter().map(|(_, v)| &v[0]).collect()
    }

    /// Consecutive scan pairs of every subject with at least two scans, all
    /// referring to one connectome.
    pub fn training_set(&self, connectome: &LayeredConnectome) -> Result<TrainingSet> {
        if connectome.n() != self.n {
            return Err(MltError::Dimension {
                what: "connectome vs scan regions".into(),
                expected: self.n,
                got: connectome.n(),
            });
        }
        let mut samples = Vec::new();
        for (id, scans) in &self.subjects {
            for w in scans.windows(2) {
                samples.push(Sample {
                    subject: id.clone(),
                    x0: DVector::from_column_slice(&w[0].suvr),
                    x1: DVector::from_column_slice(&w[1].suvr),
                    dt: w[1].age - w[0].age,
                    connectome: 0,
                });
            }
        }
        TrainingSet::new(vec![connectome.clone()], samples)
    }
}
