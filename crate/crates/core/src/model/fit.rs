//! Training: loss and exact gradient over unconstrained coordinates, the
//! optimizer loop, and subject-level cross-validation.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::flow;
use super::params::{Ablation, GainSource, TransportParameters};
use super::predict::{evaluate, laplacians, layer_generator, ErrorSummary, TrainingSet};
use crate::error::{MltError, Result};
use crate::rng;

/// Unconstrained coordinates, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    LogHs,
    LogHf,
    LogitGate,
    LogC,
    LambdaS,
    LambdaF,
    Ms,
    Mf,
    Ks,
    Kf,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 10] = [
        ParamGroup::LogHs,
        ParamGroup::LogHf,
        ParamGroup::LogitGate,
        ParamGroup::LogC,
        ParamGroup::LambdaS,
        ParamGroup::LambdaF,
        ParamGroup::Ms,
        ParamGroup::Mf,
        ParamGroup::Ks,
        ParamGroup::Kf,
    ];

    fn len(&self, n: usize) -> usize {
        match self {
            ParamGroup::LogC | ParamGroup::LambdaS | ParamGroup::LambdaF => 1,
            ParamGroup::Ms | ParamGroup::Mf => n * n,
            _ => n,
        }
    }

    /// Whether the group is trained under `ablation`.
    pub fn trained(&self, ablation: Ablation) -> bool {
        use ParamGroup::*;
        match ablation {
            Ablation::ScFc => true,
            Ablation::ScOnly => matches!(self, LogHs | LogHf | LogC | Ms | Ks),
            Ablation::FcOnly => matches!(self, LogHs | LogHf | LogC | Mf | Kf),
        }
    }
}

/// Offsets of each group in the flat coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    n: usize,
    offsets: Vec<usize>,
    dim: usize,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        let mut offsets = Vec::with_capacity(ParamGroup::ALL.len());
        let mut at = 0;
        for g in ParamGroup::ALL {
            offsets.push(at);
            at += g.len(n);
        }
        Layout { n, offsets, dim: at }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self, g: ParamGroup) -> std::ops::Range<usize> {
        let i = ParamGroup::ALL.iter().position(|x| *x == g).expect("known group");
        self.offsets[i]..self.offsets[i] + g.len(self.n)
    }

    pub fn group_of(&self, index: usize) -> ParamGroup {
        let i = self.offsets.iter().rposition(|&o| o <= index).expect("index in range");
        ParamGroup::ALL[i]
    }

    pub fn mask(&self, ablation: Ablation) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for g in ParamGroup::ALL {
            if g.trained(ablation) {
                for i in self.range(g) {
                    m[i] = true;
                }
            }
        }
        m
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean squared prediction loss over a training set as a function of the
/// unconstrained coordinates.
pub struct Objective<'a> {
    set: &'a TrainingSet,
    template: TransportParameters,
    layout: Layout,
    base_step: f64,
    laplacians: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    groups: Vec<Vec<usize>>,
}

impl<'a> Objective<'a> {
    /// `template` supplies the ablation, the cost weights and the starting
    /// point; it must carry learned gains.
    pub fn new(set: &'a TrainingSet, template: &TransportParameters, base_step: f64) -> Result<Self> {
        template.validate()?;
        if set.is_empty() {
            return Err(MltError::Validation("empty training cohort".into()));
        }
        if set.n() != template.n() {
            return Err(MltError::Dimension {
                what: "cohort regions vs parameters".into(),
                expected: template.n(),
                got: set.n(),
            });
        }
        if !matches!(template.k_source, GainSource::Learned { .. }) {
            return Err(MltError::Validation(
                "training needs learned gains; solver-derived gains are forward-only".into(),
            ));
        }
        if !(base_step > 0.0 && base_step.is_finite()) {
            return Err(MltError::Validation(format!("base step must be positive, got {base_step}")));
        }
        let mut groups = vec![Vec::new(); set.connectomes.len()];
        for (i, s) in set.samples.iter().enumerate() {
            groups[s.connectome].push(i);
        }
        // Only the Laplacians the ablation uses are built; the other layer's
        // graph is never read.
        let laplacians = set
            .connectomes
            .iter()
            .zip(&groups)
            .map(|(c, g)| {
                if g.is_empty() {
                    return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
                }
                match template.ablation {
                    Ablation::ScFc => laplacians(c),
                    Ablation::ScOnly => (laplacians_one(&c.sc), DMatrix::zeros(0, 0)),
                    Ablation::FcOnly => (DMatrix::zeros(0, 0), laplacians_one(&c.fc)),
                }
            })
            .collect();
        Ok(Objective {
            set,
            template: template.clone(),
            layout: Layout::new(template.n()),
            base_step,
            laplacians,
            groups,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn ablation(&self) -> Ablation {
        self.template.ablation
    }

    pub fn pack(&self, p: &TransportParameters) -> Vec<f64> {
        let n = p.n();
        let mut th = Vec::with_capacity(self.dim());
        th.extend(p.h_s.iter().map(|v| v.ln()));
        th.extend(p.h_f.iter().map(|v| v.ln()));
        th.extend(p.gate.iter().map(|v| logit(*v)));
        th.push(p.c.max(1e-300).ln());
        th.push(p.lambda_s);
        th.push(p.lambda_f);
        for i in 0..n {
            for j in 0..n {
                th.push(p.m_s[(i, j)]);
            }
        }
        for i in 0..n {
            for j in 0..n {
                th.push(p.m_f[(i, j)]);
            }
        }
        match &p.k_source {
            GainSource::Learned { k_s, k_f } => {
                th.extend(k_s);
                th.extend(k_f);
            }
            GainSource::Riccati => th.extend(std::iter::repeat_n(0.0, 2 * n)),
        }
        th
    }

    pub fn unpack(&self, th: &[f64]) -> TransportParameters {
        let n = self.template.n();
        let l = &self.layout;
        let slice = |g: ParamGroup| &th[l.range(g)];
        let mat = |g: ParamGroup| DMatrix::from_row_slice(n, n, slice(g));
        TransportParameters {
            h_s: slice(ParamGroup::LogHs).iter().map(|v| v.exp()).collect(),
            h_f: slice(ParamGroup::LogHf).iter().map(|v| v.exp()).collect(),
            gate: slice(ParamGroup::LogitGate).iter().map(|v| sigmoid(*v)).collect(),
            c: slice(ParamGroup::LogC)[0].exp(),
            lambda_s: slice(ParamGroup::LambdaS)[0],
            lambda_f: slice(ParamGroup::LambdaF)[0],
            m_s: mat(ParamGroup::Ms),
            m_f: mat(ParamGroup::Mf),
            k_source: GainSource::Learned {
                k_s: slice(ParamGroup::Ks).to_vec(),
                k_f: slice(ParamGroup::Kf).to_vec(),
            },
            cost: self.template.cost.clone(),
            ablation: self.template.ablation,
        }
    }

    fn check_finite(p: &TransportParameters) -> Result<()> {
        let ok = p.h_s.iter().chain(&p.h_f).all(|v| v.is_finite() && *v > 0.0)
            && p.gate.iter().all(|v| *v > 0.0 && *v < 1.0)
            && p.c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(MltError::NonFinite("parameters left their valid range".into()))
        }
    }

    /// Mean loss only.
    pub fn value(&self, th: &[f64]) -> Result<f64> {
        self.evaluate(th, false).map(|(v, _)| v)
    }

    /// Mean loss and its gradient with respect to every coordinate; groups
    /// the ablation does not train get a zero gradient.
    pub fn value_and_gradient(&self, th: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluate(th, true).map(|(v, g)| (v, g.expect("gradient requested")))
    }

    fn evaluate(&self, th: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        if th.len() != self.dim() {
            return Err(MltError::Dimension {
                what: "parameter vector".into(),
                expected: self.dim(),
                got: th.len(),
            });
        }
        let p = self.unpack(th);
        Self::check_finite(&p)?;
        let n = p.n();
        let ablation = p.ablation;
        let (k_s, k_f) = match &p.k_source {
            GainSource::Learned { k_s, k_f } => (k_s, k_f),
            GainSource::Riccati => unreachable!("objective always unpacks learned gains"),
        };
        let h = p.scale();
        let total = self.set.len() as f64;
        let mut loss = 0.0;

        let mut hbar = DVector::<f64>::zeros(n);
        let mut gbar = DVector::<f64>::zeros(n);
        let mut cbar = 0.0;
        let mut ls_bar = 0.0;
        let mut lf_bar = 0.0;
        let mut ms_bar = DMatrix::<f64>::zeros(n, n);
        let mut mf_bar = DMatrix::<f64>::zeros(n, n);
        let mut ks_bar = vec![0.0; n];
        let mut kf_bar = vec![0.0; n];

        for (ci, idx) in self.groups.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let (lap_s, lap_f) = &self.laplacians[ci];
            let a = match ablation {
                Ablation::ScOnly => layer_generator(lap_s, &p.m_s, k_s, p.c),
                Ablation::FcOnly => layer_generator(lap_f, &p.m_f, k_f, p.c),
                Ablation::ScFc => {
                    let mut a = DMatrix::zeros(2 * n, 2 * n);
                    a.view_mut((0, 0), (n, n)).copy_from(&layer_generator(lap_s, &p.m_s, k_s, p.c));
                    a.view_mut((0, n), (n, n)).copy_from(&(&p.m_s * p.lambda_s));
                    a.view_mut((n, 0), (n, n)).copy_from(&(&p.m_f * p.lambda_f));
                    a.view_mut((n, n), (n, n)).copy_from(&layer_generator(lap_f, &p.m_f, k_f, p.c));
                    a
                }
            };
            let d = a.nrows();
            let mut v0 = DMatrix::zeros(d, idx.len());
            let dts: Vec<f64> = idx.iter().map(|&i| self.set.samples[i].dt).collect();
            for (col, &i) in idx.iter().enumerate() {
                let x0 = &self.set.samples[i].x0;
                for r in 0..n {
                    let u = h[r] * x0[r];
                    match ablation {
                        Ablation::ScFc => {
                            v0[(r, col)] = p.gate[r] * u;
                            v0[(n + r, col)] = u - p.gate[r] * u;
                        }
                        _ => v0[(r, col)] = u,
                    }
                }
            }
            let (vend, tape) = flow::forward(&a, self.base_step, &v0, &dts)?;
            let mut wend = DMatrix::zeros(d, idx.len());
            for (col, &i) in idx.iter().enumerate() {
                let x1 = &self.set.samples[i].x1;
                for r in 0..n {
                    let y = if ablation == Ablation::ScFc {
                        vend[(r, col)] + vend[(n + r, col)]
                    } else {
                        vend[(r, col)]
                    };
                    let xhat = y / h[r];
                    let res = xhat - x1[r];
                    loss += res * res / total;
                    let xbar = 2.0 * res / total;
                    hbar[r] -= xbar * xhat / h[r];
                    wend[(r, col)] = xbar / h[r];
                    if ablation == Ablation::ScFc {
                        wend[(n + r, col)] = xbar / h[r];
                    }
                }
            }
            if !loss.is_finite() {
                return Err(MltError::NonFinite("training loss".into()));
            }
            if !want_grad {
                continue;
            }
            let (abar, w0) = flow::backward(&tape, &a, &wend)?;
            for (col, &i) in idx.iter().enumerate() {
                let x0 = &self.set.samples[i].x0;
                for r in 0..n {
                    match ablation {
                        Ablation::ScFc => {
                            let (ws, wf) = (w0[(r, col)], w0[(n + r, col)]);
                            hbar[r] += (p.gate[r] * ws + (1.0 - p.gate[r]) * wf) * x0[r];
                            gbar[r] += (ws - wf) * h[r] * x0[r];
                        }
                        _ => hbar[r] += w0[(r, col)] * x0[r],
                    }
                }
            }
            // A_ss = -c L_s - M_s diag(k_s), A_sf = λ_s M_s, and mirrored.
            let mut layer = |g: &DMatrix<f64>, lap: &DMatrix<f64>, m: &DMatrix<f64>, k: &[f64], mbar: &mut DMatrix<f64>, kbar: &mut [f64]| {
                cbar -= g.dot(lap);
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        mbar[(i, j)] -= g[(i, j)] * k[j];
                        acc += g[(i, j)] * m[(i, j)];
                    }
                    kbar[j] -= acc;
                }
            };
            match ablation {
                Ablation::ScOnly => layer(&abar, lap_s, &p.m_s, k_s, &mut ms_bar, &mut ks_bar),
                Ablation::FcOnly => layer(&abar, lap_f, &p.m_f, k_f, &mut mf_bar, &mut kf_bar),
                Ablation::ScFc => {
                    let g_ss = abar.view((0, 0), (n, n)).into_owned();
                    let g_sf = abar.view((0, n), (n, n)).into_owned();
                    let g_fs = abar.view((n, 0), (n, n)).into_owned();
                    let g_ff = abar.view((n, n), (n, n)).into_owned();
                    layer(&g_ss, lap_s, &p.m_s, k_s, &mut ms_bar, &mut ks_bar);
                    layer(&g_ff, lap_f, &p.m_f, k_f, &mut mf_bar, &mut kf_bar);
                    ls_bar += g_sf.dot(&p.m_s);
                    lf_bar += g_fs.dot(&p.m_f);
                    ms_bar += &g_sf * p.lambda_s;
                    mf_bar += &g_fs * p.lambda_f;
                }
            }
        }
        if !want_grad {
            return Ok((loss, None));
        }

        let l = &self.layout;
        let mut grad = vec![0.0; self.dim()];
        for (off, i) in l.range(ParamGroup::LogHs).zip(0..n) {
            grad[off] = hbar[i] * p.h_s[i];
        }
        for (off, i) in l.range(ParamGroup::LogHf).zip(0..n) {
            grad[off] = hbar[i] * p.h_f[i];
        }
        for (off, i) in l.range(ParamGroup::LogitGate).zip(0..n) {
            grad[off] = gbar[i] * p.gate[i] * (1.0 - p.gate[i]);
        }
        grad[l.range(ParamGroup::LogC).start] = cbar * p.c;
        grad[l.range(ParamGroup::LambdaS).start] = ls_bar;
        grad[l.range(ParamGroup::LambdaF).start] = lf_bar;
        for (off, v) in l.range(ParamGroup::Ms).zip(row_major(&ms_bar)) {
            grad[off] = v;
        }
        for (off, v) in l.range(ParamGroup::Mf).zip(row_major(&mf_bar)) {
            grad[off] = v;
        }
        for (off, v) in l.range(ParamGroup::Ks).zip(ks_bar) {
            grad[off] = v;
        }
        for (off, v) in l.range(ParamGroup::Kf).zip(kf_bar) {
            grad[off] = v;
        }
        let mask = l.mask(ablation);
        for (g, m) in grad.iter_mut().zip(&mask) {
            if !m {
                *g = 0.0;
            }
        }
        Ok((loss, Some(grad)))
    }
}

fn laplacians_one(g: &crate::graph::WeightedGraph) -> DMatrix<f64> {
    g.laplacian(crate::graph::LaplacianKind::Combinatorial)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Heavy-ball gradient descent.
    Momentum { momentum: f64 },
    /// Adam with the usual bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Momentum { momentum: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once the relative change in loss between iterations drops below this.
    pub tol: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub optimizer: Optimizer,
    /// Whole-step length in years used by the propagation engine.
    pub base_step: f64,
    /// Per-group multipliers on `lr`; groups not listed use 1 and a
    /// multiplier of 0 holds the group at its starting value.
    #[serde(default)]
    pub group_lr: BTreeMap<ParamGroup, f64>,
}

impl FitOptions {
    /// Adam with a short budget; the coupling matrices step a hundred times
    /// slower than everything else.
    pub fn adam() -> Self {
        FitOptions {
            lr: 2e-2,
            max_iters: 300,
            optimizer: Optimizer::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            group_lr: BTreeMap::from([(ParamGroup::Ms, 0.01), (ParamGroup::Mf, 0.01)]),
            ..FitOptions::default()
        }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lr: 1e-2,
            max_iters: 2000,
            tol: 1e-8,
            seed: 0,
            ablation: Ablation::ScFc,
            optimizer: Optimizer::default(),
            base_step: 1.0 / 12.0,
            group_lr: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Parameters at the lowest loss seen.
    pub params: TransportParameters,
    /// Mean training loss at every evaluated iterate.
    pub trace: Vec<f64>,
    pub best_iteration: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        self.trace[self.best_iteration]
    }
}

/// Gradient-based training of every group the ablation enables.
///
/// A step that produces a non-finite loss or an unstable flow is undone and
/// retried with half the learning rate.
pub fn fit(set: &TrainingSet, params0: &TransportParameters, opts: &FitOptions) -> Result<FitResult> {
    if set.is_empty() {
        return Err(MltError::Validation("empty training cohort".into()));
    }
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(MltError::Validation(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let mut template = params0.clone();
    template.ablation = opts.ablation;
    let obj = Objective::new(set, &template, opts.base_step)?;
    let mask = obj.layout().mask(opts.ablation);
    let mut scale = vec![1.0; obj.dim()];
    for (g, m) in &opts.group_lr {
        if !(m.is_finite() && *m >= 0.0) {
            return Err(MltError::Validation(format!("learning-rate multiplier for {g:?} must be nonnegative, got {m}")));
        }
        for i in obj.layout().range(*g) {
            scale[i] = *m;
        }
    }
    let mut theta = obj.pack(&template);
    let mut best_theta = theta.clone();
    let mut best = f64::INFINITY;
    let mut best_iteration = 0;
    let mut trace = Vec::new();
    let mut lr = opts.lr;
    let mut first = vec![0.0; theta.len()];
    let mut second = vec![0.0; theta.len()];
    let mut adam_t = 0i32;
    let mut converged = false;
    let mut halvings = 0;

    let mut iter = 0;
    while iter < opts.max_iters {
        let (loss, grad) = match obj.value_and_gradient(&theta) {
            Ok(v) => v,
            Err(e) if trace.is_empty() => return Err(e),
            Err(MltError::Validation(m)) => return Err(MltError::Validation(m)),
            Err(e) => {
                log::warn!("iteration {iter}: {e}; halving the learning rate");
                lr *= 0.5;
                halvings += 1;
                if halvings > 40 {
                    return Err(e);
                }
                theta.clone_from(&best_theta);
                first.iter_mut().for_each(|v| *v = 0.0);
                second.iter_mut().for_each(|v| *v = 0.0);
                adam_t = 0;
                iter += 1;
                continue;
            }
        };
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            return Err(MltError::NonFinite(format!(
                "gradient coordinate {bad} at iteration {iter}"
            )));
        }
        let prev = trace.last().copied();
        trace.push(loss);
        if loss < best {
            best = loss;
            best_theta.clone_from(&theta);
            best_iteration = trace.len() - 1;
        }
        if let Some(prev) = prev {
            if (prev - loss).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        match opts.optimizer {
            Optimizer::Momentum { momentum } => {
                for i in 0..theta.len() {
                    if mask[i] {
                        first[i] = momentum * first[i] - lr * scale[i] * grad[i];
                        theta[i] += first[i];
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                adam_t += 1;
                let c1 = 1.0 - beta1.powi(adam_t);
                let c2 = 1.0 - beta2.powi(adam_t);
                for i in 0..theta.len() {
                    if mask[i] {
                        first[i] = beta1 * first[i] + (1.0 - beta1) * grad[i];
                        second[i] = beta2 * second[i] + (1.0 - beta2) * grad[i] * grad[i];
                        theta[i] -= lr * scale[i] * (first[i] / c1) / ((second[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        iter += 1;
    }
    if trace.is_empty() {
        let loss = obj.value(&theta)?;
        trace.push(loss);
    }
    Ok(FitResult {
        params: obj.unpack(&best_theta),
        trace,
        best_iteration,
        converged,
    })
}


/// Subject-level fold assignment: subjects are shuffled with `seed` and dealt
/// round-robin; returns per-fold sample indices.
pub fn subject_folds(set: &TrainingSet, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut subjects = set.subjects();
    if folds < 2 || folds > subjects.len() {
        return Err(MltError::Validation(format!(
            "need 2 <= folds <= subjects ({}), got {folds}",
            subjects.len()
        )));
    }
    subjects.sort();
    subjects.shuffle(&mut rng::stream(seed, &[0xf01d]));
    let fold_of: std::collections::BTreeMap<&str, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i % folds))
        .collect();
    let mut out = vec![Vec::new(); folds];
    for (i, s) in set.samples.iter().enumerate() {
        out[fold_of[s.subject.as_str()]].push(i);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train: ErrorSummary,
    pub test: ErrorSummary,
    pub fit: FitResult,
    pub test_indices: Vec<usize>,
}

/// k-fold cross-validation; every fold starts from `params0`.
pub fn cross_validate(
    set: &TrainingSet,
    params0: &TransportParameters,
    opts: &FitOptions,
    folds: usize,
) -> Result<Vec<FoldResult>> {
    let assignment = subject_folds(set, folds, opts.seed)?;
    let mut out = Vec::with_capacity(folds);
    for (k, test_idx) in assignment.iter().enumerate() {
        let train_idx: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let mut train_idx = train_idx;
        train_idx.sort_unstable();
        let train = set.subset(&train_idx);
        let test = set.subset(test_idx);
        let fitted = fit(&train, params0, opts)?;
        out.push(FoldResult {
            fold: k,
            train: evaluate(&train, &fitted.params)?,
            test: evaluate(&test, &fitted.params)?,
            fit: fitted,
            test_indices: test_idx.clone(),
        });
    }
    Ok(out)
}
