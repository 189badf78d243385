use super::{RegionalStatMap, StatKind};
use crate::cohort::{Cohort, ScanRecord};
use crate::error::{MltError, Result};

/// Per-region mean of `ΔSUVR / Δage` over consecutive scan pairs.
pub fn subject_rate(scans: &[ScanRecord]) -> Result<RegionalStatMap> {
    if scans.len() < 2 {
        return Err(MltError::Validation(format!("rate needs at least two scans, got {}", scans.len())));
    }
    let n = scans[0].suvr.len();
    let mut acc = vec![0.0; n];
    for w in scans.windows(2) {
        let dt = w[1].age - w[0].age;
        if dt <= 0.0 {
            return Err(MltError::Validation(format!(
                "subject {}: ages must strictly increase ({} then {})",
                w[0].subject_id, w[0].age, w[1].age
            )));
        }
        if w[1].suvr.len() != n {
            return Err(MltError::Dimension {
                what: format!("SUVR length for subject {}", w[1].subject_id),
                expected: n,
                got: w[1].suvr.len(),
            });
        }
        for i in 0..n {
            acc[i] += (w[1].suvr[i] - w[0].suvr[i]) / dt;
        }
    }
    let pairs = (scans.len() - 1) as f64;
    RegionalStatMap::new(acc.into_iter().map(|v| v / pairs).collect(), StatKind::RatePerYear)
}

/// Rates of every subject with at least two scans, keyed by subject, with the
/// age at the subject's first scan.
pub fn cohort_rates(cohort: &Cohort) -> Result<Vec<(String, f64, RegionalStatMap)>> {
    cohort
        .subjects()
        .iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(id, s)| Ok((id.clone(), s[0].age, subject_rate(s)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Apoe4, Diagnosis, Sex, SubjectCovariates};

    fn scan(age: f64, v: f64) -> ScanRecord {
        ScanRecord {
            subject_id: "a".into(),
            age,
            suvr: vec![v, 1.0],
            covariates: SubjectCovariates {
                age,
                sex: Sex::Female,
                apoe4: Apoe4::Noncarrier,
                abeta_pgml: None,
                diagnosis: Diagnosis::CN,
                mmse: None,
            },
        }
    }

    #[test]
    fn examples() {
        let r = subject_rate(&[scan(70.0, 1.0), scan(72.0, 1.2)]).unwrap();
        assert!((r.values()[0] - 0.1).abs() < 1e-12);
        assert_eq!(r.values()[1], 0.0);
        let r = subject_rate(&[scan(70.0, 1.0), scan(71.0, 1.1), scan(72.0, 1.4)]).unwrap();
        assert!((r.values()[0] - 0.2).abs() < 1e-12);
        assert!(subject_rate(&[scan(70.0, 1.0), scan(70.0, 1.1)]).is_err());
    }
}
