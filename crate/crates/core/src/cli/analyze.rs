use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{pretty, Ctx, DataArgs};
use crate::error::{MltError, Result};
use crate::io::{self, fmt_f64, LoadedCohort};
use crate::stats::{
    autocorrelation, cohort_rates, dominance_test, extent_map, gam_fit, neighbor_mean_map, pearson, spin_permutation_test,
    stratify, Correlation, DominanceResult, DominanceScope, GamOptions, NeighborAggregate, RegionalStatMap,
    SpinGroupResult, SpinOptions, StatKind, StratifyKey, DEFAULT_ALPHA,
};

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Correlation of a regional map with its graph-neighbour mean.
    Autocorr(AutocorrArgs),
    /// Spin permutation test of lobe means of the extent map.
    Spin(SpinArgs),
    /// Paired one-sided tests of SC vs FC contributions.
    Dominance(DominanceArgs),
    /// Annualized SUVR change, overall and per stratum.
    Rates(RatesArgs),
    /// Penalized spline of SUVR against age per region.
    Gam(GamArgs),
}

pub fn run(ctx: &Ctx, cmd: &AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Autocorr(a) => autocorr(ctx, a),
        AnalyzeCommand::Spin(a) => spin(ctx, a),
        AnalyzeCommand::Dominance(a) => dominance(ctx, a),
        AnalyzeCommand::Rates(a) => rates(ctx, a),
        AnalyzeCommand::Gam(a) => gam(ctx, a),
    }
}

fn mean_rate_map(data: &LoadedCohort, subjects: Option<&[String]>) -> Result<(RegionalStatMap, usize)> {
    let rates = cohort_rates(&data.cohort)?;
    let n = data.cohort.n_regions();
    let mut sum = vec![0.0; n];
    let mut count = 0;
    for (id, _, r) in &rates {
        if subjects.is_some_and(|s| !s.contains(id)) {
            continue;
        }
        for (acc, v) in sum.iter_mut().zip(r.values()) {
            *acc += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(MltError::Validation("no subject with two or more scans".into()));
    }
    let mean = sum.into_iter().map(|s| s / count as f64).collect();
    Ok((RegionalStatMap::new(mean, StatKind::RatePerYear)?, count))
}

// ---------------------------------------------------------------- autocorr

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateArg {
    Mean,
    Sum,
}

#[derive(Debug, Args)]
pub struct AutocorrArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocorrEntry {
    /// `extent` (group t-values) or `rate` (mean annual change).
    pub map: String,
    pub layer: String,
    pub correlation: Correlation,
    pub isolated: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocorrReport {
    pub aggregate: AggregateArg,
    pub entries: Vec<AutocorrEntry>,
}

fn autocorr(ctx: &Ctx, a: &AutocorrArgs) -> Result<()> {
    let mut m = ctx.manifest("analyze autocorr", &a.aggregate, ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    let extent = extent_map(&data.cohort)?;
    let (rate, _) = mean_rate_map(&data, None)?;
    let agg = match a.aggregate {
        AggregateArg::Mean => NeighborAggregate::Mean,
        AggregateArg::Sum => NeighborAggregate::Sum,
    };
    let mut entries = Vec::new();
    for (name, map) in [("extent", &extent), ("rate", &rate)] {
        for (layer, g) in [("sc", &data.connectome.sc), ("fc", &data.connectome.fc)] {
            let (nm, corr) = match agg {
                NeighborAggregate::Mean => autocorrelation(map, g)?,
                NeighborAggregate::Sum => {
                    let nm = neighbor_mean_map(map, g, agg)?;
                    let idx = nm.connected();
                    let x: Vec<f64> = idx.iter().map(|&i| map.values()[i]).collect();
                    let y: Vec<f64> = idx.iter().map(|&i| nm.map.values()[i]).collect();
                    let c = pearson(&x, &y)?;
                    (nm, c)
                }
            };
            entries.push(AutocorrEntry {
                map: name.into(),
                layer: layer.into(),
                correlation: corr,
                isolated: nm.isolated,
            });
        }
    }
    m.write_output(
        &ctx.out,
        "extent_map.csv",
        io::stat_map_to_csv(&extent, data.atlas())?.as_bytes(),
    )?;
    m.write_output(&ctx.out, "rate_map.csv", io::stat_map_to_csv(&rate, data.atlas())?.as_bytes())?;
    let report = AutocorrReport {
        aggregate: a.aggregate,
        entries,
    };
    m.write_output(&ctx.out, "autocorr.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- spin

#[derive(Debug, Args)]
pub struct SpinArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub n_perm: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinReport {
    pub map: String,
    pub options: SpinOptions,
    pub groups: Vec<SpinGroupResult>,
}

fn spin(ctx: &Ctx, a: &SpinArgs) -> Result<()> {
    let mut opts = ctx.options(SpinOptions::default())?;
    if let Some(n) = a.n_perm {
        opts.n_perm = n;
    }
    if let Some(s) = ctx.seed {
        opts.seed = s;
    }
    let mut m = ctx.manifest("analyze spin", &opts, opts.seed)?;
    let data = a.data.load(&mut m)?;
    let extent = extent_map(&data.cohort)?;
    let atlas = data.atlas();
    let groups = spin_permutation_test(&extent, atlas, |i| Some(atlas.lobe_of(i)), &opts)?;
    let report = SpinReport {
        map: "extent".into(),
        options: opts,
        groups,
    };
    m.write_output(&ctx.out, "spin.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- dominance

#[derive(Debug, Args)]
pub struct DominanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub decomp: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    pub alpha: f64,
    pub n_subjects: usize,
    pub counts: BTreeMap<String, usize>,
    pub regions: Vec<DominanceResult>,
    pub lobes: Vec<DominanceResult>,
}

fn dominance(ctx: &Ctx, a: &DominanceArgs) -> Result<()> {
    let mut m = ctx.manifest("analyze dominance", &a.alpha, ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    m.add_input(&a.decomp)?;
    let decomps = io::read_decompositions(&a.decomp)?;
    let regions = dominance_test(&decomps, DominanceScope::Region, a.alpha)?;
    let lobes = dominance_test(&decomps, DominanceScope::Lobe(data.atlas()), a.alpha)?;
    let mut counts = BTreeMap::new();
    for r in &regions {
        *counts.entry(r.label.as_str().to_string()).or_insert(0) += 1;
    }
    let t = RegionalStatMap::new(regions.iter().map(|r| r.t).collect(), StatKind::TValue)?;
    m.write_output(&ctx.out, "dominance_map.csv", io::stat_map_to_csv(&t, data.atlas())?.as_bytes())?;
    let report = DominanceReport {
        alpha: a.alpha,
        n_subjects: decomps.len(),
        counts,
        regions,
        lobes,
    };
    m.write_output(&ctx.out, "dominance.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratumRates {
    pub key: String,
    pub stratum: String,
    pub n_subjects: usize,
    /// Mean over regions of the mean rate map.
    pub global_mean: Option<f64>,
    pub mean_rate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesReport {
    pub n_subjects: usize,
    pub strata: Vec<StratumRates>,
}

const RATE_KEYS: [StratifyKey; 5] = [
    StratifyKey::AgeBins,
    StratifyKey::Sex,
    StratifyKey::Apoe4,
    StratifyKey::Abeta,
    StratifyKey::DiagnosisBinary,
];

fn rates(ctx: &Ctx, a: &RatesArgs) -> Result<()> {
    let mut m = ctx.manifest("analyze rates", &RATE_KEYS, ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    let (all, n_all) = mean_rate_map(&data, None)?;
    let summarize = |key: &str, stratum: &str, map: Option<(RegionalStatMap, usize)>| match map {
        Some((r, n)) => StratumRates {
            key: key.into(),
            stratum: stratum.into(),
            n_subjects: n,
            global_mean: Some(r.values().iter().sum::<f64>() / r.len() as f64),
            mean_rate: Some(r.values().to_vec()),
        },
        None => StratumRates {
            key: key.into(),
            stratum: stratum.into(),
            n_subjects: 0,
            global_mean: None,
            mean_rate: None,
        },
    };
    let mut strata = vec![summarize("all", "all", Some((all.clone(), n_all)))];
    for key in RATE_KEYS {
        for (label, ids) in stratify(&data.cohort, key).groups {
            let map = match mean_rate_map(&data, Some(&ids)) {
                Ok(v) => Some(v),
                Err(MltError::Validation(_)) => None,
                Err(e) => return Err(e),
            };
            strata.push(summarize(key.as_str(), &label, map));
        }
    }
    m.write_output(&ctx.out, "rate_map.csv", io::stat_map_to_csv(&all, data.atlas())?.as_bytes())?;
    let report = RatesReport {
        n_subjects: n_all,
        strata,
    };
    m.write_output(&ctx.out, "rates.json", &pretty(&report)?)?;
    ctx.finish(&m)
}

// ---------------------------------------------------------------- gam

#[derive(Debug, Args)]
pub struct GamArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Fit each stratum of this key separately (age_bins, sex, apoe4, abeta, diagnosis_binary).
    #[arg(long, value_parser = super::commands::parse_with::<StratifyKey>)]
    pub stratify: Option<StratifyKey>,
    /// Evaluation ages per fit, evenly spaced over the data range.
    #[arg(long, default_value_t = 25)]
    pub grid: usize,
}

fn gam(ctx: &Ctx, a: &GamArgs) -> Result<()> {
    let opts = ctx.options(GamOptions::default())?;
    if a.grid < 2 {
        return Err(MltError::Validation("gam grid needs at least 2 points".into()));
    }
    let effective = serde_json::json!({ "options": &opts, "stratify": a.stratify, "grid": a.grid });
    let mut m = ctx.manifest("analyze gam", &effective, ctx.seed.unwrap_or(0))?;
    let data = a.data.load(&mut m)?;
    let groups: Vec<(String, Option<Vec<String>>)> = match a.stratify {
        None => vec![("all".into(), None)],
        Some(k) => stratify(&data.cohort, k)
            .groups
            .into_iter()
            .map(|(l, ids)| (l, Some(ids)))
            .collect(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| MltError::Validation(format!("CSV output: {e}"));
    w.write_record(["stratum", "region_index", "label", "age", "fit", "ci_low", "ci_high", "derivative"])
        .map_err(fail)?;
    for (label, ids) in &groups {
        let scans: Vec<_> = data
            .cohort
            .subjects()
            .iter()
            .filter(|(id, _)| ids.as_ref().is_none_or(|s| s.contains(id)))
            .flat_map(|(_, s)| s.iter())
            .collect();
        let ages: Vec<f64> = scans.iter().map(|s| s.age).collect();
        let distinct = {
            let mut v = ages.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        if distinct < 10 {
            log::warn!("gam: stratum {label} has {distinct} distinct ages; skipped");
            continue;
        }
        for (i, region) in data.atlas().regions().iter().enumerate() {
            let ys: Vec<f64> = scans.iter().map(|s| s.suvr[i]).collect();
            let f = gam_fit(&ages, &ys, &opts)?;
            for k in 0..a.grid {
                let x = f.x_min + (f.x_max - f.x_min) * k as f64 / (a.grid - 1) as f64;
                let (y, lo, hi) = f.eval_with_ci(x)?;
                let d = f.derivative(x)?;
                w.write_record([
                    label.clone(),
                    i.to_string(),
                    region.label.clone(),
                    fmt_f64(x),
                    fmt_f64(y),
                    fmt_f64(lo),
                    fmt_f64(hi),
                    fmt_f64(d),
                ])
                .map_err(fail)?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| MltError::Validation(format!("CSV output: {}", e.error())))?;
    m.write_output(&ctx.out, "gam.csv", &bytes)?;
    ctx.finish(&m)
}
