//! Weighted graphs over parcellation regions, their Laplacians and the
//! paired structural/functional connectome.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::atlas::ParcellationAtlas;
use crate::error::{MltError, Result};

/// Symmetric, nonnegative, zero-diagonal weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `D - W`
    #[default]
    Combinatorial,
    /// `D^{-1/2} (D - W) D^{-1/2}`, isolated nodes get an all-zero row.
    SymNormalized,
}

/// Transformation applied to raw connectivity before building a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    #[default]
    Raw,
    /// Every positive weight becomes 1.
    Binarize,
    /// `w -> ln(1 + w)`
    Log1p,
    /// Divide by the largest weight.
    MaxScaled,
}

impl WeightedGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(MltError::Dimension {
                what: "weight matrix columns".into(),
                expected: n,
                got: weights.ncols(),
            });
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(MltError::Invariant(format!(
                    "nonzero diagonal weight {} at node {i}",
                    weights[(i, i)]
                )));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(MltError::Invariant(format!(
                        "weight ({i},{j}) = {w} is not a finite nonnegative number"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(MltError::Invariant(format!(
                        "weights not symmetric at ({i},{j}): {w} vs {}",
                        weights[(j, i)]
                    )));
                }
            }
        }
        Ok(WeightedGraph { weights })
    }

    /// Ingest a correlation-style matrix: negatives are clipped to zero, the
    /// diagonal is cleared, and the matrix is symmetrized by averaging.
    /// Returns the graph and the number of clipped negative entries.
    pub fn from_correlations(m: &DMatrix<f64>) -> Result<(Self, usize)> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(MltError::Dimension {
                what: "correlation matrix columns".into(),
                expected: n,
                got: m.ncols(),
            });
        }
        let mut clipped = 0usize;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if !v.is_finite() {
                    return Err(MltError::Invariant(format!(
                        "non-finite connectivity at ({i},{j})"
                    )));
                }
                if v < 0.0 {
                    clipped += 1;
                } else {
                    w[(i, j)] = v;
                }
            }
        }
        if clipped > 0 {
            log::warn!("clipped {clipped} negative connectivity entries to zero");
        }
        Ok((WeightedGraph { weights: w }, clipped))
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.weights.row_iter().map(|r| r.sum()).collect()
    }

    pub fn preprocess(&self, kind: Preprocessing) -> WeightedGraph {
        let weights = match kind {
            Preprocessing::Raw => self.weights.clone(),
            Preprocessing::Binarize => self.weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 }),
            Preprocessing::Log1p => self.weights.map(f64::ln_1p),
            Preprocessing::MaxScaled => {
                let max = self.weights.max();
                if max > 0.0 {
                    self.weights.map(|w| w / max)
                } else {
                    self.weights.clone()
                }
            }
        };
        WeightedGraph { weights }
    }

    pub fn laplacian(&self, kind: LaplacianKind) -> DMatrix<f64> {
        build_laplacian(self, kind)
    }

    pub fn neighborhood(&self, i: usize, threshold: f64) -> Result<BTreeSet<usize>> {
        neighborhood(self, i, threshold)
    }
}

/// Graph Laplacian of the requested kind.
pub fn build_laplacian(g: &WeightedGraph, kind: LaplacianKind) -> DMatrix<f64> {
    let n = g.n();
    let w = &g.weights;
    let deg = g.degrees();
    let mut lap = -w.clone();
    for i in 0..n {
        lap[(i, i)] = deg[i];
    }
    match kind {
        LaplacianKind::Combinatorial => lap,
        LaplacianKind::SymNormalized => {
            let inv_sqrt: Vec<f64> = deg
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            DMatrix::from_fn(n, n, |i, j| lap[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
        }
    }
}

/// `{ j != i : w_ij > threshold }`
pub fn neighborhood(g: &WeightedGraph, i: usize, threshold: f64) -> Result<BTreeSet<usize>> {
    if i >= g.n() {
        return Err(MltError::IndexOutOfRange { index: i, len: g.n() });
    }
    Ok((0..g.n())
        .filter(|&j| j != i && g.weights[(i, j)] > threshold)
        .collect())
}

/// Keep the strongest `keep_density` fraction of the `n(n-1)/2` node pairs.
/// Ties are broken in favour of the lexicographically smaller `(i, j)`.
pub fn backbone_threshold(g: &WeightedGraph, keep_density: f64) -> Result<WeightedGraph> {
    if !(keep_density > 0.0 && keep_density <= 1.0) {
        return Err(MltError::Validation(format!(
            "keep_density must lie in (0, 1], got {keep_density}"
        )));
    }
    let n = g.n();
    if n < 2 {
        return Err(MltError::Validation("backbone of an empty graph".into()));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((g.weights[(i, j)], i, j));
        }
    }
    if pairs.iter().all(|p| p.0 == 0.0) {
        return Err(MltError::Validation("backbone of a graph without edges".into()));
    }
    let keep = ((keep_density * pairs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut w = DMatrix::zeros(n, n);
    for &(v, i, j) in pairs.iter().take(keep) {
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    Ok(WeightedGraph { weights: w })
}

/// Structural and functional graphs over one atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredConnectome {
    pub atlas: ParcellationAtlas,
    pub sc: WeightedGraph,
    pub fc: WeightedGraph,
}

impl LayeredConnectome {
    pub fn new(atlas: ParcellationAtlas, sc: WeightedGraph, fc: WeightedGraph) -> Result<Self> {
        let n = atlas.len();
        for (name, g) in [("SC", &sc), ("FC", &fc)] {
            if g.n() != n {
                return Err(MltError::Dimension {
                    what: format!("{name} graph size vs atlas"),
                    expected: n,
                    got: g.n(),
                });
            }
        }
        Ok(LayeredConnectome { atlas, sc, fc })
    }

    pub fn n(&self) -> usize {
        self.atlas.len()
    }

    pub fn with_fc(&self, fc: WeightedGraph) -> Result<Self> {
        LayeredConnectome::new(self.atlas.clone(), self.sc.clone(), fc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> WeightedGraph {
        WeightedGraph::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ))
        .unwrap()
    }

    #[test]
    fn two_node_laplacian() {
        let g = WeightedGraph::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let l = build_laplacian(&g, LaplacianKind::Combinatorial);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn path_laplacian() {
        let l = build_laplacian(&path3(), LaplacianKind::Combinatorial);
        let want = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, want);
    }

    #[test]
    fn normalized_laplacian_isolated_node_row_is_zero() {
        let g = WeightedGraph::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        let l = build_laplacian(&g, LaplacianKind::SymNormalized);
        assert_eq!(l.row(2).iter().filter(|v| **v != 0.0).count(), 0);
        assert!((l[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((l[(0, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_negative() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(WeightedGraph::new(asym), Err(MltError::Invariant(_))));
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(matches!(WeightedGraph::new(neg), Err(MltError::Invariant(_))));
    }

    #[test]
    fn correlation_ingestion_clips_negatives() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.2, 0.5, 1.0, 0.1, -0.2, 0.1, 1.0]);
        let (g, clipped) = WeightedGraph::from_correlations(&m).unwrap();
        assert_eq!(clipped, 2);
        assert_eq!(g.weight(0, 2), 0.0);
        assert_eq!(g.weight(0, 0), 0.0);
        assert_eq!(g.weight(1, 2), 0.1);
    }

    #[test]
    fn neighborhoods() {
        let g = path3();
        assert_eq!(neighborhood(&g, 1, 0.0).unwrap(), BTreeSet::from([0, 2]));
        assert!(neighborhood(&g, 1, 5.0).unwrap().is_empty());
        assert!(matches!(
            neighborhood(&g, 3, 0.0),
            Err(MltError::IndexOutOfRange { .. })
        ));
        let iso = WeightedGraph::new(DMatrix::zeros(2, 2)).unwrap();
        assert!(neighborhood(&iso, 0, 0.0).unwrap().is_empty());
    }

    #[test]
    fn backbone_keeps_max_edge() {
        let g = WeightedGraph::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 3.0, 1.0, 0.0, 2.0, 3.0, 2.0, 0.0],
        ))
        .unwrap();
        let b = backbone_threshold(&g, 1.0 / 3.0).unwrap();
        assert_eq!(b.weight(0, 2), 3.0);
        assert_eq!(b.weight(0, 1), 0.0);
        assert_eq!(b.weight(1, 2), 0.0);
        assert_eq!(backbone_threshold(&g, 1.0).unwrap(), g);
    }

    #[test]
    fn backbone_tie_break_is_lexicographic() {
        // Enumerate the rule on a 4-node graph: pairs in lexicographic order
        // (0,1) (0,2) (0,3) (1,2) (1,3) (2,3) with weights 5,2,2,2,1,2.
        // Keeping 3 of 6: 5 at (0,1), then the two smallest pairs of weight 2:
        // (0,2) and (0,3).
        let w = [[0.0, 5.0, 2.0, 2.0], [5.0, 0.0, 2.0, 1.0], [2.0, 2.0, 0.0, 2.0], [2.0, 1.0, 2.0, 0.0]];
        let g = WeightedGraph::new(DMatrix::from_fn(4, 4, |i, j| w[i][j])).unwrap();
        let b = backbone_threshold(&g, 0.5).unwrap();
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if b.weight(i, j) > 0.0 {
                    kept.push((i, j));
                }
            }
        }
        assert_eq!(kept, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn backbone_errors() {
        let g = path3();
        assert!(backbone_threshold(&g, 0.0).is_err());
        assert!(backbone_threshold(&g, 1.5).is_err());
        let empty = WeightedGraph::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(backbone_threshold(&empty, 0.5).is_err());
    }
}
