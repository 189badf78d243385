use serde::{Deserialize, Serialize};

use crate::cohort::{Apoe4, Cohort, Sex, SubjectCovariates};
use crate::error::{MltError, Result};

/// Amyloid-positive below this CSF concentration.
pub const ABETA_THRESHOLD_PGML: f64 = 192.0;

/// Age strata: `(-inf, 60)`, `[60, 75]`, `(75, 85]`, `(85, inf)`.
pub const AGE_BINS: [&str; 4] = ["<60", "61-75", "76-85", ">85"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    AgeBins,
    Sex,
    Apoe4,
    Abeta,
    DiagnosisBinary,
}

impl StratifyKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            StratifyKey::AgeBins => "age_bins",
            StratifyKey::Sex => "sex",
            StratifyKey::Apoe4 => "apoe4",
            StratifyKey::Abeta => "abeta",
            StratifyKey::DiagnosisBinary => "diagnosis_binary",
        }
    }

    /// Stratum labels in presentation order.
    pub fn strata(&self) -> &'static [&'static str] {
        match self {
            StratifyKey::AgeBins => &AGE_BINS,
            StratifyKey::Sex => &["female", "male"],
            StratifyKey::Apoe4 => &["carrier", "noncarrier"],
            StratifyKey::Abeta => &["abeta_pos", "abeta_neg"],
            StratifyKey::DiagnosisBinary => &["cn_group", "ad_group"],
        }
    }
}

impl std::str::FromStr for StratifyKey {
    type Err = MltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "age_bins" | "age" => Ok(StratifyKey::AgeBins),
            "sex" => Ok(StratifyKey::Sex),
            "apoe4" => Ok(StratifyKey::Apoe4),
            "abeta" => Ok(StratifyKey::Abeta),
            "diagnosis_binary" | "diagnosis" => Ok(StratifyKey::DiagnosisBinary),
            other => Err(MltError::Validation(format!("unknown stratification key {other:?}"))),
        }
    }
}

pub fn age_bin(age: f64) -> &'static str {
    if age < 60.0 {
        AGE_BINS[0]
    } else if age <= 75.0 {
        AGE_BINS[1]
    } else if age <= 85.0 {
        AGE_BINS[2]
    } else {
        AGE_BINS[3]
    }
}

/// Stratum of one covariate record, `None` when the key's covariate is missing.
pub fn stratum_of(cov: &SubjectCovariates, key: StratifyKey) -> Option<&'static str> {
    match key {
        StratifyKey::AgeBins => Some(age_bin(cov.age)),
        StratifyKey::Sex => Some(match cov.sex {
            Sex::Female => "female",
            Sex::Male => "male",
        }),
        StratifyKey::Apoe4 => Some(match cov.apoe4 {
            Apoe4::Carrier => "carrier",
            Apoe4::Noncarrier => "noncarrier",
        }),
        StratifyKey::Abeta => cov
            .abeta_pgml
            .map(|a| if a < ABETA_THRESHOLD_PGML { "abeta_pos" } else { "abeta_neg" }),
        StratifyKey::DiagnosisBinary => Some(if cov.diagnosis.is_impaired() { "ad_group" } else { "cn_group" }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub key: StratifyKey,
    /// Every stratum of the key in presentation order, possibly empty.
    pub groups: Vec<(String, Vec<String>)>,
    /// Subjects without the key's covariate.
    pub omitted: usize,
}

/// Partition subjects by their baseline covariates.
pub fn stratify(cohort: &Cohort, key: StratifyKey) -> Stratification {
    let mut groups: Vec<(String, Vec<String>)> =
        key.strata().iter().map(|s| (s.to_string(), Vec::new())).collect();
    let mut omitted = 0;
    for (id, scans) in cohort.subjects() {
        match stratum_of(&scans[0].covariates, key) {
            Some(s) => {
                let g = groups.iter_mut().find(|(l, _)| l == s).expect("known stratum");
                g.1.push(id.clone());
            }
            None => omitted += 1,
        }
    }
    if omitted > 0 {
        log::info!("{omitted} subjects omitted from {} strata (missing covariate)", key.as_str());
    }
    Stratification { key, groups, omitted }
}
