use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;

use super::analyze::{AutocorrReport, DominanceReport, RatesReport};
use super::commands::{FitReport, SelectionReport};
use super::{display, Ctx};
use crate::error::{MltError, Result};
use crate::io::fmt_f64;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories searched (recursively) for analysis outputs.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
}

/// Table file name and the analysis output it is built from.
pub const TABLES: [(&str, &str); 5] = [
    ("autocorrelation.csv", "autocorr.json"),
    ("rates.csv", "rates.json"),
    ("dominance.csv", "dominance.json"),
    ("gene_selection.csv", "selection.json"),
    ("ablation.csv", "fit.json"),
];

struct Table {
    w: csv::Writer<Vec<u8>>,
    rows: usize,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header).map_err(fail)?;
        Ok(Table { w, rows: 0 })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.rows += 1;
        self.w.write_record(fields).map_err(fail)
    }

    fn bytes(self) -> Result<Vec<u8>> {
        self.w.into_inner().map_err(|e| fail(e.into_error()))
    }
}

fn fail(e: impl std::fmt::Display) -> MltError {
    MltError::Validation(format!("CSV output: {e}"))
}

fn find(inputs: &[PathBuf], name: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for dir in inputs {
        if !dir.is_dir() {
            return Err(MltError::Validation(format!("report input {} is not a directory", dir.display())));
        }
        for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| MltError::Validation(format!("walking {}: {e}", dir.display())))?;
            if entry.file_type().is_file() && entry.file_name() == name {
                out.push(entry.into_path());
            }
        }
    }
    Ok(out)
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| MltError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| MltError::Parse {
        source_name: display(path),
        line: e.line(),
        message: e.to_string(),
    })
}

fn source_of(path: &Path) -> String {
    path.parent().map(display).unwrap_or_default()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn run(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let mut m = ctx.manifest("report", &TABLES, ctx.seed.unwrap_or(0))?;
    let mut found = 0;

    let mut t = Table::new(&["source", "map", "layer", "r", "p", "n", "adj_r2", "isolated"])?;
    for p in find(&a.inputs, TABLES[0].1)? {
        m.add_input(&p)?;
        let r: AutocorrReport = load(&p)?;
        for e in r.entries {
            t.row(vec![
                source_of(&p),
                e.map,
                e.layer,
                fmt_f64(e.correlation.r),
                fmt_f64(e.correlation.p),
                e.correlation.n.to_string(),
                fmt_f64(e.correlation.adj_r2),
                e.isolated.len().to_string(),
            ])?;
        }
    }
    found += t.rows;
    m.write_output(&ctx.out, TABLES[0].0, &t.bytes()?)?;

    let mut t = Table::new(&["source", "key", "stratum", "n_subjects", "global_mean_rate"])?;
    for p in find(&a.inputs, TABLES[1].1)? {
        m.add_input(&p)?;
        let r: RatesReport = load(&p)?;
        for s in r.strata {
            t.row(vec![source_of(&p), s.key, s.stratum, s.n_subjects.to_string(), opt(s.global_mean)])?;
        }
    }
    found += t.rows;
    m.write_output(&ctx.out, TABLES[1].0, &t.bytes()?)?;

    let mut t = Table::new(&["source", "level", "scope", "label", "t", "p_sc", "p_fc", "mean_diff"])?;
    for p in find(&a.inputs, TABLES[2].1)? {
        m.add_input(&p)?;
        let r: DominanceReport = load(&p)?;
        for (level, rows) in [("region", r.regions), ("lobe", r.lobes)] {
            for d in rows {
                t.row(vec![
                    source_of(&p),
                    level.into(),
                    d.scope,
                    d.label.as_str().into(),
                    fmt_f64(d.t),
                    fmt_f64(d.p_sc),
                    fmt_f64(d.p_fc),
                    fmt_f64(d.mean_diff),
                ])?;
            }
        }
    }
    found += t.rows;
    m.write_output(&ctx.out, TABLES[2].0, &t.bytes()?)?;

    let mut t = Table::new(&["source", "target", "gene", "s_j", "reference_lambda"])?;
    for p in find(&a.inputs, TABLES[3].1)? {
        m.add_input(&p)?;
        let r: SelectionReport = load(&p)?;
        let target = serde_json::to_value(r.target)?.as_str().unwrap_or_default().to_string();
        for g in r.genes {
            t.row(vec![
                source_of(&p),
                target.clone(),
                g.gene,
                fmt_f64(g.s_j),
                fmt_f64(r.reference_lambda),
            ])?;
        }
    }
    found += t.rows;
    m.write_output(&ctx.out, TABLES[3].0, &t.bytes()?)?;

    let mut t = Table::new(&["source", "ablation", "fold", "train_relative_mae", "test_relative_mae"])?;
    for p in find(&a.inputs, TABLES[4].1)? {
        m.add_input(&p)?;
        let r: FitReport = load(&p)?;
        let ab = r.ablation.as_str().to_string();
        for f in &r.folds {
            t.row(vec![
                source_of(&p),
                ab.clone(),
                f.fold.to_string(),
                fmt_f64(f.train.relative_mae),
                fmt_f64(f.test.relative_mae),
            ])?;
        }
        t.row(vec![
            source_of(&p),
            ab,
            "all".into(),
            fmt_f64(r.train.relative_mae),
            opt(r.cv_test_relative_mae.map(|c| c.0)),
        ])?;
    }
    found += t.rows;
    m.write_output(&ctx.out, TABLES[4].0, &t.bytes()?)?;

    if found == 0 {
        return Err(MltError::Validation("no analysis outputs found under the report inputs".into()));
    }
    ctx.finish(&m)
}
