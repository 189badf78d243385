//! Statistical battery: mixed-effects extent maps, neighbour means,
//! correlation, spin permutation nulls, dominance tests, stratification,
//! penalized-spline age curves and propagation rates.

mod autocorr;
mod dominance;
mod gam;
mod mixed;
mod rates;
mod spin;
mod stratify;

use serde::{Deserialize, Serialize};

use crate::error::{MltError, Result};

pub use autocorr::{autocorrelation, neighbor_mean_map, pearson, Correlation, NeighborAggregate, NeighborMeans};
pub use dominance::{dominance_test, DominanceLabel, DominanceResult, DominanceScope, DEFAULT_ALPHA};
pub use gam::{gam_derivative, gam_fit, GamFit, GamOptions};
pub use mixed::{extent_map, mixed_effects_t, MixedDesign, MixedFit};
pub use rates::{cohort_rates, subject_rate};
pub use spin::{
    permutation_from_rotation, random_rotation, spin_permutation_test, spin_permutations, SpinGroupResult,
    SpinOptions,
};
pub use stratify::{age_bin, stratify, stratum_of, Stratification, StratifyKey, AGE_BINS, ABETA_THRESHOLD_PGML};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    TValue,
    ZScore,
    RatePerYear,
    Neglog10p,
}

impl StatKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatKind::TValue => "t_value",
            StatKind::ZScore => "z_score",
            StatKind::RatePerYear => "rate_per_year",
            StatKind::Neglog10p => "neglog10p",
        }
    }
}

impl std::str::FromStr for StatKind {
    type Err = MltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t_value" => Ok(StatKind::TValue),
            "z_score" => Ok(StatKind::ZScore),
            "rate_per_year" => Ok(StatKind::RatePerYear),
            "neglog10p" => Ok(StatKind::Neglog10p),
            other => Err(MltError::Validation(format!("unknown statistic kind {other:?}"))),
        }
    }
}

/// One value per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalStatMap {
    values: Vec<f64>,
    kind: StatKind,
}

impl RegionalStatMap {
    pub fn new(values: Vec<f64>, kind: StatKind) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MltError::Invariant(format!("{} map value at region {i} is not finite", kind.as_str())));
        }
        Ok(RegionalStatMap { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1).
pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Upper tail `P(T > t)` of Student's t.
pub(crate) fn t_upper(t: f64, df: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    dist.sf(t)
}

/// Two-sided p-value of Student's t.
pub(crate) fn t_two_sided(t: f64, df: f64) -> f64 {
    (2.0 * t_upper(t.abs(), df)).min(1.0)
}
