use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{init_latent, phi_inverse, Ablation, GainSource, TransportParameters};
use crate::control::solve_lqr;
use crate::error::{MltError, Result};
use crate::graph::{LaplacianKind, LayeredConnectome};
use crate::linalg::matrix_exponential;
use crate::transport::{assemble_block_operator, OVERFLOW_GUARD};

/// One baseline/follow-up pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subject: String,
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    /// Inter-scan interval in years.
    pub dt: f64,
    /// Index into [`TrainingSet::connectomes`].
    pub connectome: usize,
}

/// Scan pairs together with the connectomes they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub connectomes: Vec<LayeredConnectome>,
    pub samples: Vec<Sample>,
}

impl TrainingSet {
    pub fn new(connectomes: Vec<LayeredConnectome>, samples: Vec<Sample>) -> Result<Self> {
        if connectomes.is_empty() {
            return Err(MltError::Validation("no connectome supplied".into()));
        }
        let n = connectomes[0].n();
        if let Some(c) = connectomes.iter().find(|c| c.n() != n) {
            return Err(MltError::Dimension {
                what: "connectome region count".into(),
                expected: n,
                got: c.n(),
            });
        }
        for s in &samples {
            if s.connectome >= connectomes.len() {
                return Err(MltError::IndexOutOfRange {
                    index: s.connectome,
                    len: connectomes.len(),
                });
            }
            if s.x0.len() != n || s.x1.len() != n {
                return Err(MltError::Dimension {
                    what: format!("scan length for subject {}", s.subject),
                    expected: n,
                    got: if s.x0.len() != n { s.x0.len() } else { s.x1.len() },
                });
            }
            if !(s.dt > 0.0 && s.dt.is_finite()) {
                return Err(MltError::Validation(format!(
                    "interval for subject {} must be positive, got {}",
                    s.subject, s.dt
                )));
            }
            if !s.x0.iter().chain(s.x1.iter()).all(|v| v.is_finite()) {
                return Err(MltError::NonFinite(format!("scan values of subject {}", s.subject)));
            }
        }
        Ok(TrainingSet {
            connectomes,
            samples,
        })
    }

    pub fn n(&self) -> usize {
        self.connectomes[0].n()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples at the given positions, sharing the connectome list.
    pub fn subset(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            connectomes: self.connectomes.clone(),
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Distinct subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        self.samples
            .iter()
            .filter(|s| seen.insert(s.subject.clone()))
            .map(|s| s.subject.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub x_hat1: DVector<f64>,
    pub u_s_traj_end: DVector<f64>,
    pub u_f_traj_end: DVector<f64>,
    pub contribution_s: DVector<f64>,
    pub contribution_f: DVector<f64>,
}

/// Per-subject, per-region layer contributions in SUVR-change units.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationDecomposition {
    pub subject: String,
    pub contribution_s: Vec<f64>,
    pub contribution_f: Vec<f64>,
}

pub(crate) fn laplacians(c: &LayeredConnectome) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        c.sc.laplacian(LaplacianKind::Combinatorial),
        c.fc.laplacian(LaplacianKind::Combinatorial),
    )
}

/// `-c L - M diag(k)`
pub(crate) fn layer_generator(lap: &DMatrix<f64>, m: &DMatrix<f64>, k: &[f64], c: f64) -> DMatrix<f64> {
    let n = lap.nrows();
    DMatrix::from_fn(n, n, |i, j| -c * lap[(i, j)] - m[(i, j)] * k[j])
}

/// The generator actually integrated for `params`: `2N x 2N` for the coupled
/// model, `N x N` for a single-layer ablation. Feedback is already folded in.
pub fn closed_loop_generator(params: &TransportParameters, connectome: &LayeredConnectome) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.n();
    if connectome.n() != n {
        return Err(MltError::Dimension {
            what: "connectome vs parameters".into(),
            expected: n,
            got: connectome.n(),
        });
    }
    let (lap_s, lap_f) = laplacians(connectome);
    let c = params.c;
    match (&params.k_source, params.ablation) {
        (GainSource::Learned { k_s, .. }, Ablation::ScOnly) => Ok(layer_generator(&lap_s, &params.m_s, k_s, c)),
        (GainSource::Learned { k_f, .. }, Ablation::FcOnly) => Ok(layer_generator(&lap_f, &params.m_f, k_f, c)),
        (GainSource::Learned { k_s, k_f }, Ablation::ScFc) => {
            let mut a = DMatrix::zeros(2 * n, 2 * n);
            a.view_mut((0, 0), (n, n)).copy_from(&layer_generator(&lap_s, &params.m_s, k_s, c));
            a.view_mut((0, n), (n, n)).copy_from(&(&params.m_s * params.lambda_s));
            a.view_mut((n, 0), (n, n)).copy_from(&(&params.m_f * params.lambda_f));
            a.view_mut((n, n), (n, n)).copy_from(&layer_generator(&lap_f, &params.m_f, k_f, c));
            Ok(a)
        }
        (GainSource::Riccati, Ablation::ScOnly) => {
            single_layer_riccati(&(&lap_s * -c), &params.m_s, &params.cost.q, &params.cost.r)
        }
        (GainSource::Riccati, Ablation::FcOnly) => {
            single_layer_riccati(&(&lap_f * -c), &params.m_f, &params.cost.r, &params.cost.r)
        }
        (GainSource::Riccati, Ablation::ScFc) => {
            let op = assemble_block_operator(
                connectome,
                &params.m_s,
                &params.m_f,
                params.lambda_s,
                params.lambda_f,
                c,
            )?;
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&params.m_s);
            m.view_mut((n, n), (n, n)).copy_from(&params.m_f);
            let cost = params.cost.state_cost();
            let r = params.cost.stacked_r();
            let p = solve_lqr(op.matrix(), &m, &r, &cost)?;
            let k = crate::control::gain_from_value(&p, &m, &r);
            Ok(op.matrix() - &m * k)
        }
    }
}

fn single_layer_riccati(a: &DMatrix<f64>, m: &DMatrix<f64>, q: &[f64], r: &[f64]) -> Result<DMatrix<f64>> {
    let cost = DMatrix::from_diagonal(&DVector::from_column_slice(q));
    let p = solve_lqr(a, m, r, &cost)?;
    let k = crate::control::gain_from_value(&p, m, r);
    Ok(a - m * k)
}

fn propagator(a: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let unstable = || MltError::Unstable {
        abscissa: crate::linalg::spectral_abscissa(a).unwrap_or(f64::NAN),
        guard: OVERFLOW_GUARD,
    };
    let e = match matrix_exponential(&(a * dt)) {
        Ok(e) => e,
        Err(MltError::ExpmOverflow { .. }) => return Err(unstable()),
        Err(err) => return Err(err),
    };
    if !(e.amax() <= OVERFLOW_GUARD) {
        return Err(unstable());
    }
    Ok(e)
}

fn predict_with(
    x0: &DVector<f64>,
    params: &TransportParameters,
    e: &DMatrix<f64>,
) -> Result<PredictionOutput> {
    let n = params.n();
    let h = params.scale();
    let state = init_latent(x0, params)?;
    let (u_s0, u_f0, y_s, y_f) = match params.ablation {
        Ablation::ScFc => {
            let y = e * state.stacked();
            (state.u_s, state.u_f, y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
        }
        Ablation::ScOnly => {
            let u = super::params::phi(x0, params);
            let y = e * &u;
            (u, DVector::zeros(n), y, DVector::zeros(n))
        }
        Ablation::FcOnly => {
            let u = super::params::phi(x0, params);
            let y = e * &u;
            (DVector::zeros(n), u, DVector::zeros(n), y)
        }
    };
    let x_hat1 = phi_inverse(&(&y_s + &y_f), params);
    if !(x_hat1.iter().all(|v| v.is_finite()) && x_hat1.amax() <= OVERFLOW_GUARD) {
        return Err(MltError::Unstable {
            abscissa: f64::NAN,
            guard: OVERFLOW_GUARD,
        });
    }
    let contribution_s = (&y_s - &u_s0).component_div(&h);
    let contribution_f = (&y_f - &u_f0).component_div(&h);
    Ok(PredictionOutput {
        x_hat1,
        u_s_traj_end: y_s,
        u_f_traj_end: y_f,
        contribution_s,
        contribution_f,
    })
}

/// Predict the follow-up scan `dt` years after `x0`.
pub fn forward_predict(
    x0: &DVector<f64>,
    dt: f64,
    connectome: &LayeredConnectome,
    params: &TransportParameters,
) -> Result<PredictionOutput> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MltError::Validation(format!("interval must be positive, got {dt}")));
    }
    let a = closed_loop_generator(params, connectome)?;
    predict_with(x0, params, &propagator(&a, dt)?)
}

/// Predictions for every sample, reusing one generator per connectome and one
/// propagator per distinct interval.
pub fn predict_all(set: &TrainingSet, params: &TransportParameters) -> Result<Vec<PredictionOutput>> {
    let mut generators: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
    let mut props: BTreeMap<(usize, u64), DMatrix<f64>> = BTreeMap::new();
    let mut out = Vec::with_capacity(set.len());
    for s in &set.samples {
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(MltError::Validation(format!("interval must be positive, got {}", s.dt)));
        }
        if !generators.contains_key(&s.connectome) {
            let a = closed_loop_generator(params, &set.connectomes[s.connectome])?;
            generators.insert(s.connectome, a);
        }
        let key = (s.connectome, s.dt.to_bits());
        if !props.contains_key(&key) {
            let e = propagator(&generators[&s.connectome], s.dt)?;
            props.insert(key, e);
        }
        out.push(predict_with(&s.x0, params, &props[&key])?);
    }
    Ok(out)
}

/// `‖x1 − x̂1‖²`
pub fn loss(x1_observed: &DVector<f64>, x1_predicted: &DVector<f64>) -> Result<f64> {
    if x1_observed.len() != x1_predicted.len() {
        return Err(MltError::Dimension {
            what: "predicted scan length".into(),
            expected: x1_observed.len(),
            got: x1_predicted.len(),
        });
    }
    Ok((x1_observed - x1_predicted).norm_squared())
}

/// Prediction error summaries over a set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean_loss: f64,
    pub mae: f64,
    /// `Σ|x̂ − x1| / Σ|x1|`
    pub relative_mae: f64,
}

pub fn evaluate(set: &TrainingSet, params: &TransportParameters) -> Result<ErrorSummary> {
    if set.is_empty() {
        return Err(MltError::Validation("no samples to evaluate".into()));
    }
    let preds = predict_all(set, params)?;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut mass = 0.0;
    let mut count = 0usize;
    for (s, p) in set.samples.iter().zip(&preds) {
        sq += (&s.x1 - &p.x_hat1).norm_squared();
        abs += (&s.x1 - &p.x_hat1).abs().sum();
        mass += s.x1.abs().sum();
        count += s.x1.len();
    }
    Ok(ErrorSummary {
        mean_loss: sq / set.len() as f64,
        mae: abs / count as f64,
        relative_mae: abs / mass,
    })
}

/// Layer contributions for every subject, averaged over that subject's
/// intervals. Subjects appear in order of first appearance.
pub fn decompose(set: &TrainingSet, params: &TransportParameters) -> Result<Vec<PropagationDecomposition>> {
    let preds = predict_all(set, params)?;
    let n = set.n();
    let mut out: Vec<(PropagationDecomposition, usize)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (s, p) in set.samples.iter().zip(&preds) {
        let slot = *index.entry(s.subject.clone()).or_insert_with(|| {
            out.push((
                PropagationDecomposition {
                    subject: s.subject.clone(),
                    contribution_s: vec![0.0; n],
                    contribution_f: vec![0.0; n],
                },
                0,
            ));
            out.len() - 1
        });
        let (d, count) = &mut out[slot];
        for i in 0..n {
            d.contribution_s[i] += p.contribution_s[i];
            d.contribution_f[i] += p.contribution_f[i];
        }
        *count += 1;
    }
    Ok(out
        .into_iter()
        .map(|(mut d, count)| {
            if count > 1 {
                let k = count as f64;
                d.contribution_s.iter_mut().for_each(|v| *v /= k);
                d.contribution_f.iter_mut().for_each(|v| *v /= k);
            }
            d
        })
        .collect())
}
