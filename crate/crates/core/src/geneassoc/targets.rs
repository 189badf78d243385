use crate::error::{MltError, Result};
use crate::stats::{DominanceLabel, RegionalStatMap, StatKind};

/// `−log₁₀ p` per region.
pub fn neglog10p_target(p_values: &[f64]) -> Result<RegionalStatMap> {
    let v = p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if !(p > 0.0 && p <= 1.0) {
                return Err(MltError::Validation(format!("p-value {p} at region {i} outside (0, 1]")));
            }
            Ok(if p == 1.0 { 0.0 } else { -p.log10() })
        })
        .collect::<Result<Vec<_>>>()?;
    RegionalStatMap::new(v, StatKind::Neglog10p)
}

/// `+1` for SC-dominant and `−1` for FC-dominant regions. With
/// `significant_only` unlabeled regions are dropped, otherwise they carry 0.
/// Returns the target and the region index of every entry.
pub fn dominance_target(labels: &[DominanceLabel], significant_only: bool) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut y = Vec::new();
    let mut idx = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let v = match l {
            DominanceLabel::SC => 1.0,
            DominanceLabel::FC => -1.0,
            DominanceLabel::None if significant_only => continue,
            DominanceLabel::None => 0.0,
        };
        y.push(v);
        idx.push(i);
    }
    if significant_only && y.is_empty() {
        return Err(MltError::Validation("no significant regions".into()));
    }
    Ok((y, idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neglog10p_examples() {
        let m = neglog10p_target(&[0.01, 1.0, 0.05]).unwrap();
        assert!((m.values()[0] - 2.0).abs() < 1e-12);
        assert_eq!(m.values()[1], 0.0);
        assert!((m.values()[2] - 1.30103).abs() < 1e-5);
        assert!(neglog10p_target(&[0.0]).is_err());
    }

    #[test]
    fn dominance_examples() {
        use DominanceLabel::*;
        assert_eq!(dominance_target(&[SC, SC], true).unwrap(), (vec![1.0, 1.0], vec![0, 1]));
        assert_eq!(dominance_target(&[SC, None, FC], true).unwrap(), (vec![1.0, -1.0], vec![0, 2]));
        assert_eq!(dominance_target(&[SC, None, FC], false).unwrap().0, vec![1.0, 0.0, -1.0]);
        assert!(dominance_target(&[None, None], true).is_err());
    }
}
