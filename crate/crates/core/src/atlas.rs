//! Parcellation metadata: region labels, lobe membership and spherical
//! coordinates used by the spin nulls.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lobe {
    Frontal,
    Insula,
    Temporal,
    Occipital,
    Parietal,
    Limbic,
    Subcortical,
}

impl Lobe {
    pub const ALL: [Lobe; 7] = [
        Lobe::Frontal,
        Lobe::Insula,
        Lobe::Temporal,
        Lobe::Occipital,
        Lobe::Parietal,
        Lobe::Limbic,
        Lobe::Subcortical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Lobe::Frontal => "frontal",
            Lobe::Insula => "insula",
            Lobe::Temporal => "temporal",
            Lobe::Occipital => "occipital",
            Lobe::Parietal => "parietal",
            Lobe::Limbic => "limbic",
            Lobe::Subcortical => "subcortical",
        }
    }
}

impl fmt::Display for Lobe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lobe {
    type Err = MltError;

    fn from_str(s: &str) -> Result<Self> {
        Lobe::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MltError::Validation(format!("unknown lobe '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: usize,
    pub label: String,
    pub lobe: Lobe,
    pub sphere_xyz: [f64; 3],
}

impl Region {
    /// Hemisphere from the label prefix (`lh_`, `rh_`, `Left-`, `Right-`,
    /// `L_`, `R_`), falling back to the sign of the x coordinate.
    pub fn hemisphere(&self) -> Hemisphere {
        let l = self.label.to_ascii_lowercase();
        let left = ["lh_", "lh.", "lh-", "left-", "left_", "l_", "ctx_lh_", "ctx-lh-"];
        let right = ["rh_", "rh.", "rh-", "right-", "right_", "r_", "ctx_rh_", "ctx-rh-"];
        if left.iter().any(|p| l.starts_with(p)) {
            Hemisphere::Left
        } else if right.iter().any(|p| l.starts_with(p)) {
            Hemisphere::Right
        } else if self.sphere_xyz[0] < 0.0 {
            Hemisphere::Left
        } else {
            Hemisphere::Right
        }
    }
}

/// Tolerance on `‖sphere_xyz‖ = 1`.
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcellationAtlas {
    regions: Vec<Region>,
}

impl ParcellationAtlas {
    /// Validates the region table. Regions may be given in any order; they
    /// are stored sorted by index.
    pub fn new(mut regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(MltError::Invariant("atlas has no regions".into()));
        }
        regions.sort_by_key(|r| r.index);
        for (pos, r) in regions.iter().enumerate() {
            if r.index != pos {
                return Err(MltError::Invariant(format!(
                    "region indices must be a permutation of 0..{}; found index {} at sorted position {}",
                    regions.len(),
                    r.index,
                    pos
                )));
            }
            if r.sphere_xyz.iter().any(|v| !v.is_finite()) {
                return Err(MltError::Invariant(format!(
                    "region {} ({}) has non-finite coordinates",
                    r.index, r.label
                )));
            }
            let norm = r.sphere_xyz.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(MltError::Invariant(format!(
                    "region {} ({}) sphere coordinate has norm {norm}, expected 1",
                    r.index, r.label
                )));
            }
        }
        Ok(ParcellationAtlas { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, i: usize) -> Result<&Region> {
        self.regions.get(i).ok_or(MltError::IndexOutOfRange {
            index: i,
            len: self.regions.len(),
        })
    }

    pub fn lobe_of(&self, i: usize) -> Lobe {
        self.regions[i].lobe
    }

    /// Lobes present in the atlas, in [`Lobe::ALL`] order.
    pub fn lobes(&self) -> Vec<Lobe> {
        Lobe::ALL
            .into_iter()
            .filter(|l| self.regions.iter().any(|r| r.lobe == *l))
            .collect()
    }

    /// Region indices belonging to `lobe`, ascending.
    pub fn lobe_members(&self, lobe: Lobe) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| r.lobe == lobe)
            .map(|r| r.index)
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.label.clone()).collect()
    }

    /// Apply a rotation matrix (row-major 3x3) to every coordinate.
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Result<Self> {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let p = r.sphere_xyz;
                let mut q = [0.0; 3];
                for (i, qi) in q.iter_mut().enumerate() {
                    *qi = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2];
                }
                Region {
                    sphere_xyz: q,
                    ..r.clone()
                }
            })
            .collect();
        ParcellationAtlas::new(regions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(index: usize, xyz: [f64; 3]) -> Region {
        Region {
            index,
            label: format!("lh_r{index}"),
            lobe: Lobe::Frontal,
            sphere_xyz: xyz,
        }
    }

    #[test]
    fn rejects_gap_in_indices() {
        let err = ParcellationAtlas::new(vec![region(0, [1.0, 0.0, 0.0]), region(2, [0.0, 1.0, 0.0])]);
        assert!(matches!(err, Err(MltError::Invariant(_))));
    }

    #[test]
    fn rejects_non_unit_coordinates() {
        let err = ParcellationAtlas::new(vec![region(0, [1.0, 1e-4, 0.0])]);
        assert!(err.is_err());
        let ok = ParcellationAtlas::new(vec![region(0, [1.0, 1e-5, 0.0])]);
        assert!(ok.is_ok());
    }

    #[test]
    fn sorts_by_index() {
        let atlas =
            ParcellationAtlas::new(vec![region(1, [0.0, 1.0, 0.0]), region(0, [1.0, 0.0, 0.0])])
                .unwrap();
        assert_eq!(atlas.regions()[0].index, 0);
    }

    #[test]
    fn hemisphere_from_label() {
        let mut r = region(0, [1.0, 0.0, 0.0]);
        assert_eq!(r.hemisphere(), Hemisphere::Left);
        r.label = "Right-Putamen".into();
        assert_eq!(r.hemisphere(), Hemisphere::Right);
        r.label = "unlabelled".into();
        r.sphere_xyz = [-1.0, 0.0, 0.0];
        assert_eq!(r.hemisphere(), Hemisphere::Left);
    }

    #[test]
    fn lobe_parse_roundtrip() {
        for l in Lobe::ALL {
            assert_eq!(l.as_str().parse::<Lobe>().unwrap(), l);
        }
        assert!("cerebellum".parse::<Lobe>().is_err());
    }
}
