use serde::{Deserialize, Serialize};

use super::{t_two_sided, RegionalStatMap};
use crate::error::{MltError, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborAggregate {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMeans {
    /// Isolated regions carry 0.
    pub map: RegionalStatMap,
    pub isolated: Vec<usize>,
}

impl NeighborMeans {
    pub fn connected(&self) -> Vec<usize> {
        (0..self.map.len()).filter(|i| self.isolated.binary_search(i).is_err()).collect()
    }
}

/// Average (or sum) of each region's directly connected neighbours.
pub fn neighbor_mean_map(values: &RegionalStatMap, g: &WeightedGraph, agg: NeighborAggregate) -> Result<NeighborMeans> {
    let n = g.n();
    if values.len() != n {
        return Err(MltError::Dimension {
            what: "map vs graph".into(),
            expected: n,
            got: values.len(),
        });
    }
    let v = values.values();
    let mut out = vec![0.0; n];
    let mut isolated = Vec::new();
    for (i, o) in out.iter_mut().enumerate() {
        let nb = g.neighborhood(i, 0.0)?;
        if nb.is_empty() {
            isolated.push(i);
            continue;
        }
        let s: f64 = nb.iter().map(|&j| v[j]).sum();
        *o = match agg {
            NeighborAggregate::Mean => s / nb.len() as f64,
            NeighborAggregate::Sum => s,
        };
    }
    if isolated.len() == n {
        return Err(MltError::Degenerate {
            scope: "graph".into(),
            reason: "every node is isolated".into(),
        });
    }
    Ok(NeighborMeans {
        map: RegionalStatMap::new(out, values.kind())?,
        isolated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from `t = r √((n−2)/(1−r²))`.
    pub p: f64,
    pub n: usize,
    /// Adjusted R² of the univariate regression.
    pub adj_r2: f64,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(MltError::Dimension {
            what: "correlation inputs".into(),
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(MltError::Validation(format!("correlation needs at least 3 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(MltError::Degenerate {
            scope: "correlation".into(),
            reason: "zero variance".into(),
        });
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    let adj_r2 = 1.0 - (1.0 - r * r) * (n as f64 - 1.0) / df;
    Ok(Correlation { r, p, n, adj_r2 })
}

/// Correlation of a map with its neighbour means over non-isolated regions.
pub fn autocorrelation(values: &RegionalStatMap, g: &WeightedGraph) -> Result<(NeighborMeans, Correlation)> {
    let nm = neighbor_mean_map(values, g, NeighborAggregate::Mean)?;
    let keep = nm.connected();
    let x: Vec<f64> = keep.iter().map(|&i| values.values()[i]).collect();
    let y: Vec<f64> = keep.iter().map(|&i| nm.map.values()[i]).collect();
    let c = pearson(&x, &y)?;
    Ok((nm, c))
}
