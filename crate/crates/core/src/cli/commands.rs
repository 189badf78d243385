use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{pretty, Ctx, DataArgs, ATLAS_FILE, EXPRESSION_FILE, FC_FILE, SCANS_FILE, SC_FILE};
use crate::error::{MltError, Result};
use crate::geneassoc::{bootstrap_selection, dominance_target, neglog10p_target, BootstrapOptions, ExpressionMatrix};
use crate::io::{self, fmt_f64, ParamsFile};
use crate::linalg::matrix_exponential;
use crate::mediation::{mediation_scan, MediationData, MediationDirection, MediationOptions, MediationScan};
use crate::model::{
    closed_loop_generator, cross_validate, decompose as decompose_all, evaluate, fit as fit_model, init_latent, phi,
    predict_all, Ablation, ErrorSummary, FitOptions, TransportParameters,
};
use crate::stats::{dominance_test, DominanceScope, DEFAULT_ALPHA};
use crate::synth::{generate_cohort, ConnectomeProfile, SynthConfig};

pub(crate) fn parse_with<T: FromStr<Err = MltError>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: MltError| e.to_string())
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_regions: Option<usize>,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    DistanceDecay,
    Modular,
}

/// Planted structure written next to a synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthReport {
    pub planted_dominance: Vec<String>,
    pub planted_mediation: Vec<usize>,
    pub planted_genes: Vec<String>,
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut cfg = ctx.options(SynthConfig::default())?;
    if let Some(n) = a.n_regions {
        cfg.n_regions = n;
    }
    if let Some(n) = a.n_subjects {
        cfg.n_subjects = n;
    }
    if let Some(p) = a.profile {
        cfg.profile = match p {
            ProfileArg::DistanceDecay => ConnectomeProfile::DistanceDecay,
            ProfileArg::Modular => ConnectomeProfile::Modular,
        };
    }
    if let Some(s) = a.noise_sd {
        cfg.noise_sd = s;
    }
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let mut m = ctx.manifest("synth", &cfg, cfg.seed)?;
    let c = generate_cohort(&cfg)?;
    let out = &ctx.out;
    m.write_output(out, ATLAS_FILE, io::atlas_to_csv(&c.atlas).as_bytes())?;
    m.write_output(out, SC_FILE, io::matrix_to_csv(c.connectome.sc.weights()).as_bytes())?;
    m.write_output(out, FC_FILE, io::matrix_to_csv(c.connectome.fc.weights()).as_bytes())?;
    m.write_output(out, SCANS_FILE, io::scans_to_jsonl(&c.scans)?.as_bytes())?;
    m.write_output(out, EXPRESSION_FILE, io::expression_to_csv(&c.expression).as_bytes())?;
    m.write_output(out, "truth_params.json", &pretty(&ParamsFile::from_params(&c.ground_truth))?)?;
    m.write_output(
        out,
        "truth_decomposition.json",
        io::decompositions_to_json(&c.decompositions)?.as_bytes(),
    )?;
    let truth = TruthReport {
        planted_dominance: c.planted_dominance.iter().map(|l| l.as_str().to_string()).collect(),
        planted_mediation: c.planted_mediation.clone(),
        planted_genes: c
            .planted_genes
            .iter()
            .map(|&g| c.expression.gene_names()[g].clone())
            .collect(),
    };
    m.write_output(out, "truth.json", &pretty(&truth)?)?;
    m.write_output(out, "synth_config.json", &pretty(&cfg)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Adam, 300 iterations, slow coupling matrices.
    Adam,
    /// Heavy-ball descent, 2000 iterations.
    Momentum,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// sc, fc or scfc; defaults to the config's ablation.
    #[arg(long, value_parser = parse_with::<Ablation>)]
    pub ablation: Option<Ablation>,
    /// Cross-validation folds over subjects; 0 or 1 skips cross-validation.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value = "adam")]
    pub preset: Preset,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Starting parameters; the default start is drawn from the seed.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train: ErrorSummary,
    pub test: ErrorSummary,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_iteration: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub ablation: Ablation,
    pub options: FitOptions,
    pub n_subjects: usize,
    pub n_samples: usize,
    pub folds: Vec<FoldReport>,
    /// Mean and sample sd of the per-fold test relative MAE.
    pub cv_test_relative_mae: Option<(f64, f64)>,
    pub train: ErrorSummary,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_iteration: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub fn fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let base = match a.preset {
        Preset::Adam => FitOptions::adam(),
        Preset::Momentum => FitOptions::default(),
    };
    let mut opts = ctx.options(base)?;
    if let Some(ab) = a.ablation {
        opts.ablation = ab;
    }
    if let Some(n) = a.max_iters {
        opts.max_iters = n;
    }
    if let Some(lr) = a.lr {
        opts.lr = lr;
    }
    if let Some(s) = ctx.seed {
        opts.seed = s;
    }
    let effective = serde_json::json!({ "options": &opts, "folds": a.folds });
    let mut m = ctx.manifest("fit", &effective, opts.seed)?;
    let data = a.data.load(&mut m)?;
    let set = data.cohort.training_set(&data.connectome)?;
    let mut p0 = match &a.init {
        Some(path) => {
            m.add_input(path)?;
            io::read_params(path)?
        }
        None => TransportParameters::initial(set.n(), opts.seed),
    };
    p0.ablation = opts.ablation;

    let mut folds = Vec::new();
    if a.folds >= 2 {
        for f in cross_validate(&set, &p0, &opts, a.folds)? {
            folds.push(FoldReport {
                fold: f.fold,
                n_train: set.len() - f.test_indices.len(),
                n_test: f.test_indices.len(),
                train: f.train,
                test: f.test,
                initial_loss: f.fit.initial_loss(),
                final_loss: f.fit.final_loss(),
                best_iteration: f.fit.best_iteration,
            });
        }
    }
    let cv = (!folds.is_empty()).then(|| {
        let v: Vec<f64> = folds.iter().map(|f| f.test.relative_mae).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        (mean, sd)
    });
    let full = fit_model(&set, &p0, &opts)?;
    let report = FitReport {
        ablation: opts.ablation,
        n_subjects: set.subjects().len(),
        n_samples: set.len(),
        folds,
        cv_test_relative_mae: cv,
        train: evaluate(&set, &full.params)?,
        initial_loss: full.initial_loss(),
        final_loss: full.final_loss(),
        best_iteration: full.best_iteration,
        converged: full.converged,
        trace: full.trace.clone(),
        options: opts,
    };
    m.write_output(&ctx.out, "params.json", &pretty(&ParamsFile::from_params(&full.params))?)?;
    m.write_output(&ctx.out, "fit.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- predict / decompose

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub params: PathBuf,
    /// Also write the latent trajectory over this subject's first interval.
    #[arg(long)]
    pub trajectory: Option<String>,
    /// Time points of the trajectory after the start.
    #[arg(long, default_value_t = 12)]
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredictReport {
    ablation: Ablation,
    n_samples: usize,
    errors: ErrorSummary,
}

pub fn predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let effective = serde_json::json!({ "trajectory": &a.trajectory, "steps": a.steps });
    let mut m = ctx.manifest("predict", &effective, ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    m.add_input(&a.params)?;
    let params = io::read_params(&a.params)?;
    let set = data.cohort.training_set(&data.connectome)?;
    let preds = predict_all(&set, &params)?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = [
        "subject",
        "start_age",
        "end_age",
        "region_index",
        "observed",
        "predicted",
        "contribution_s",
        "contribution_f",
    ];
    w.write_record(header).map_err(csv_fail)?;
    let pairs = data
        .cohort
        .subjects()
        .iter()
        .flat_map(|(id, scans)| scans.windows(2).map(move |p| (id, p[0].age, p[1].age, &p[1].suvr)));
    for ((id, t0, t1, x1), p) in pairs.zip(&preds) {
        for i in 0..x1.len() {
            w.write_record([
                id.clone(),
                fmt_f64(t0),
                fmt_f64(t1),
                i.to_string(),
                fmt_f64(x1[i]),
                fmt_f64(p.x_hat1[i]),
                fmt_f64(p.contribution_s[i]),
                fmt_f64(p.contribution_f[i]),
            ])
            .map_err(csv_fail)?;
        }
    }
    m.write_output(&ctx.out, "predictions.csv", &w.into_inner().map_err(|e| csv_fail(e.into_error()))?)?;
    let report = PredictReport {
        ablation: params.ablation,
        n_samples: set.len(),
        errors: evaluate(&set, &params)?,
    };
    m.write_output(&ctx.out, "errors.json", &pretty(&report)?)?;

    if let Some(subject) = &a.trajectory {
        let bytes = trajectory_csv(&data, &params, subject, a.steps)?;
        m.write_output(&ctx.out, "trajectory.csv", &bytes)?;
    }
    ctx.finish(&m)
}

fn csv_fail(e: impl std::fmt::Display) -> MltError {
    MltError::Validation(format!("CSV output: {e}"))
}

/// `time, u_s[0..N], u_f[0..N]` over the subject's first interval.
fn trajectory_csv(data: &io::LoadedCohort, params: &TransportParameters, subject: &str, steps: usize) -> Result<Vec<u8>> {
    let (_, scans) = data
        .cohort
        .subjects()
        .iter()
        .find(|(id, _)| id == subject)
        .ok_or_else(|| MltError::Validation(format!("subject {subject} not in cohort")))?;
    if scans.len() < 2 {
        return Err(MltError::Validation(format!("subject {subject} has a single scan")));
    }
    if steps == 0 {
        return Err(MltError::Validation("trajectory needs at least one step".into()));
    }
    let n = params.n();
    let x0 = DVector::from_column_slice(&scans[0].suvr);
    let dt = scans[1].age - scans[0].age;
    let a = closed_loop_generator(params, &data.connectome)?;
    let v0 = match params.ablation {
        Ablation::ScFc => init_latent(&x0, params)?.stacked(),
        _ => phi(&x0, params),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend((0..n).map(|i| format!("u_s_{i}")));
    header.extend((0..n).map(|i| format!("u_f_{i}")));
    w.write_record(&header).map_err(csv_fail)?;
    for k in 0..=steps {
        let t = dt * k as f64 / steps as f64;
        let v = matrix_exponential(&(&a * t))? * &v0;
        let (us, uf): (Vec<f64>, Vec<f64>) = match params.ablation {
            Ablation::ScFc => (v.rows(0, n).iter().copied().collect(), v.rows(n, n).iter().copied().collect()),
            Ablation::ScOnly => (v.iter().copied().collect(), vec![0.0; n]),
            Ablation::FcOnly => (vec![0.0; n], v.iter().copied().collect()),
        };
        let row: Vec<String> = std::iter::once(t).chain(us).chain(uf).map(fmt_f64).collect();
        w.write_record(&row).map_err(csv_fail)?;
    }
    w.into_inner().map_err(|e| csv_fail(e.into_error()))
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub params: PathBuf,
}

pub fn decompose(ctx: &Ctx, a: &DecomposeArgs) -> Result<()> {
    let mut m = ctx.manifest("decompose", &serde_json::json!({}), ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    m.add_input(&a.params)?;
    let params = io::read_params(&a.params)?;
    let set = data.cohort.training_set(&data.connectome)?;
    let d = decompose_all(&set, &params)?;
    m.write_output(&ctx.out, "decomposition.json", io::decompositions_to_json(&d)?.as_bytes())?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- lasso

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LassoTarget {
    /// −log10 p of the SC-dominance test per region.
    Sc,
    /// −log10 p of the FC-dominance test per region.
    Fc,
    /// +1 for SC-dominant, −1 for FC-dominant regions.
    Dominance,
}

#[derive(Debug, Args)]
pub struct LassoArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Layer decomposition file from `decompose`.
    #[arg(long)]
    pub decomp: PathBuf,
    #[arg(long, value_enum, default_value = "sc")]
    pub target: LassoTarget,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// For the dominance target, drop regions without a significant label.
    #[arg(long)]
    pub significant_only: bool,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneSelection {
    pub gene: String,
    pub s_j: f64,
    /// Selection frequency at every λ of `lambdas`.
    pub path: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub target: LassoTarget,
    pub alpha: f64,
    pub significant_only: bool,
    pub n_regions: usize,
    pub reference_lambda: f64,
    pub genes: Vec<GeneSelection>,
    pub lambdas: Vec<f64>,
    pub cv_mse: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub options: BootstrapOptions,
}

pub fn lasso(ctx: &Ctx, a: &LassoArgs) -> Result<()> {
    let mut opts = ctx.options(BootstrapOptions::default())?;
    if let Some(b) = a.n_boot {
        opts.n_boot = b;
    }
    if let Some(s) = ctx.seed {
        opts.seed = s;
    }
    let effective = serde_json::json!({
        "options": &opts, "target": a.target, "alpha": a.alpha, "significant_only": a.significant_only,
    });
    let mut m = ctx.manifest("lasso", &effective, opts.seed)?;
    let expr = a.data.load_expression(&mut m)?;
    m.add_input(&a.decomp)?;
    let decomps = io::read_decompositions(&a.decomp)?;
    let tests = dominance_test(&decomps, DominanceScope::Region, a.alpha)?;
    let (y, rows) = match a.target {
        LassoTarget::Sc => {
            let p: Vec<f64> = tests.iter().map(|t| t.p_sc).collect();
            (neglog10p_target(&p)?.values().to_vec(), (0..p.len()).collect())
        }
        LassoTarget::Fc => {
            let p: Vec<f64> = tests.iter().map(|t| t.p_fc).collect();
            (neglog10p_target(&p)?.values().to_vec(), (0..p.len()).collect())
        }
        LassoTarget::Dominance => {
            let labels: Vec<_> = tests.iter().map(|t| t.label).collect();
            dominance_target(&labels, a.significant_only)?
        }
    };
    let x = if rows.len() == expr.n_regions() {
        expr
    } else {
        ExpressionMatrix::new(expr.select_rows(&rows), expr.gene_names().to_vec())?
    };
    let prof = bootstrap_selection(&y, &x, &opts)?;
    let report = SelectionReport {
        target: a.target,
        alpha: a.alpha,
        significant_only: a.significant_only,
        n_regions: rows.len(),
        reference_lambda: prof.reference_lambda,
        genes: prof
            .gene_names
            .iter()
            .enumerate()
            .map(|(g, name)| GeneSelection {
                gene: name.clone(),
                s_j: prof.frequency[g],
                path: prof.path[g].clone(),
            })
            .collect(),
        lambdas: prof.lambdas.clone(),
        cv_mse: prof.cv_mse.clone(),
        cv_se: prof.cv_se.clone(),
        options: opts,
    };
    m.write_output(&ctx.out, "selection.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- mediate

#[derive(Debug, Args)]
pub struct MediateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub decomp: PathBuf,
    /// uf_via_us or us_via_uf.
    #[arg(long, default_value = "uf_via_us", value_parser = parse_with::<MediationDirection>)]
    pub direction: MediationDirection,
    #[arg(long)]
    pub n_boot: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediationReport {
    pub n_subjects: usize,
    pub n_boot: usize,
    pub scan: MediationScan,
}

pub fn mediate(ctx: &Ctx, a: &MediateArgs) -> Result<()> {
    let mut opts = ctx.options(MediationOptions::default())?;
    if let Some(b) = a.n_boot {
        opts.n_boot = b;
    }
    if let Some(s) = ctx.seed {
        opts.seed = s;
    }
    let effective = serde_json::json!({ "options": &opts, "direction": a.direction });
    let mut m = ctx.manifest("mediate", &effective, opts.seed)?;
    let data = a.data.load(&mut m)?;
    m.add_input(&a.decomp)?;
    let decomps = io::read_decompositions(&a.decomp)?;
    let md = MediationData::from_cohort(&data.cohort, &decomps)?;
    let scan = mediation_scan(&md, a.direction, &opts)?;
    let report = MediationReport {
        n_subjects: md.subjects.len(),
        n_boot: opts.n_boot,
        scan,
    };
    m.write_output(&ctx.out, "mediation.json", &pretty(&report)?)?;
    ctx.finish(&m)
}
