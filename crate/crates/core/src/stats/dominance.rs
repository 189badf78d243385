use serde::{Deserialize, Serialize};

use super::{mean, sample_sd, t_upper};
use crate::atlas::ParcellationAtlas;
use crate::error::{MltError, Result};
use crate::model::PropagationDecomposition;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Which layer carries more of the change in a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominanceLabel {
    SC,
    FC,
    None,
}

impl DominanceLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DominanceLabel::SC => "sc",
            DominanceLabel::FC => "fc",
            DominanceLabel::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum DominanceScope<'a> {
    Region,
    /// Per-subject lobe means of the paired difference.
    Lobe(&'a ParcellationAtlas),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceResult {
    pub scope: String,
    pub label: DominanceLabel,
    pub t: f64,
    /// One-sided p for `u_s > u_f`.
    pub p_sc: f64,
    /// One-sided p for `u_f > u_s`.
    pub p_fc: f64,
    pub mean_diff: f64,
    pub effect: f64,
}

fn paired(scope: String, d: &[f64], alpha: f64) -> Result<DominanceResult> {
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(MltError::NonFinite(format!("{scope}: paired difference of subject {i}")));
    }
    let m = mean(d);
    let sd = sample_sd(d);
    let df = d.len() as f64 - 1.0;
    let t = if sd > 0.0 {
        m / (sd / (d.len() as f64).sqrt())
    } else if d.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        return Err(MltError::Degenerate {
            scope,
            reason: "paired differences have zero variance".into(),
        });
    };
    let p_sc = t_upper(t, df);
    let p_fc = t_upper(-t, df);
    let label = if p_sc < alpha {
        DominanceLabel::SC
    } else if p_fc < alpha {
        DominanceLabel::FC
    } else {
        DominanceLabel::None
    };
    Ok(DominanceResult {
        scope,
        label,
        t,
        p_sc,
        p_fc,
        mean_diff: m,
        effect: m.abs(),
    })
}

/// One-sided paired t-tests of `u_s − u_f` across subjects.
pub fn dominance_test(
    decomps: &[PropagationDecomposition],
    scope: DominanceScope,
    alpha: f64,
) -> Result<Vec<DominanceResult>> {
    if decomps.len() < 3 {
        return Err(MltError::Validation(format!(
            "dominance test needs at least 3 subjects, got {}",
            decomps.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MltError::Validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = decomps[0].contribution_s.len();
    for d in decomps {
        if d.contribution_s.len() != n || d.contribution_f.len() != n {
            return Err(MltError::Dimension {
                what: format!("decomposition of subject {}", d.subject),
                expected: n,
                got: d.contribution_s.len().min(d.contribution_f.len()),
            });
        }
    }
    let diff = |d: &PropagationDecomposition, i: usize| d.contribution_s[i] - d.contribution_f[i];
    match scope {
        DominanceScope::Region => (0..n)
            .map(|i| {
                let d: Vec<f64> = decomps.iter().map(|s| diff(s, i)).collect();
                paired(format!("region {i}"), &d, alpha)
            })
            .collect(),
        DominanceScope::Lobe(atlas) => {
            if atlas.len() != n {
                return Err(MltError::Dimension {
                    what: "atlas vs decomposition".into(),
                    expected: n,
                    got: atlas.len(),
                });
            }
            atlas
                .lobes()
                .into_iter()
                .map(|lobe| {
                    let members = atlas.lobe_members(lobe);
                    let d: Vec<f64> = decomps
                        .iter()
                        .map(|s| members.iter().map(|&i| diff(s, i)).sum::<f64>() / members.len() as f64)
                        .collect();
                    paired(lobe.as_str().to_string(), &d, alpha)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decomp(s: &[f64], f: &[f64]) -> PropagationDecomposition {
        PropagationDecomposition {
            subject: "s".into(),
            contribution_s: s.to_vec(),
            contribution_f: f.to_vec(),
        }
    }

    #[test]
    fn hand_example() {
        let d: Vec<_> = [1.0, 2.0, 3.0, 2.0].iter().map(|v| decomp(&[*v], &[0.0])).collect();
        let r = &dominance_test(&d, DominanceScope::Region, 0.05).unwrap()[0];
        assert!((r.t - 4.898979485566356).abs() < 1e-12);
        assert!((r.p_sc - 0.0081).abs() < 1e-4, "{}", r.p_sc);
        assert_eq!(r.label, DominanceLabel::SC);
    }

    #[test]
    fn equal_layers_give_none() {
        let d: Vec<_> = (0..5).map(|k| decomp(&[k as f64], &[k as f64])).collect();
        let r = &dominance_test(&d, DominanceScope::Region, 0.05).unwrap()[0];
        assert_eq!((r.t, r.label), (0.0, DominanceLabel::None));
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        let d: Vec<_> = (0..5).map(|k| decomp(&[k as f64 + 1.0], &[k as f64])).collect();
        let e = dominance_test(&d, DominanceScope::Region, 0.05).unwrap_err();
        assert!(e.to_string().contains("region 0"), "{e}");
    }

    #[test]
    fn too_few_subjects() {
        let d = vec![decomp(&[1.0], &[0.0]); 2];
        assert!(dominance_test(&d, DominanceScope::Region, 0.05).is_err());
    }
}
