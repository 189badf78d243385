use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{fmt_f64, read_text};
use crate::atlas::{Lobe, ParcellationAtlas, Region};
use crate::cohort::ScanRecord;
use crate::error::{MltError, Result};
use crate::geneassoc::ExpressionMatrix;
use crate::model::PropagationDecomposition;
use crate::stats::RegionalStatMap;

const DECOMPOSITION_FORMAT: &str = "mlt-decomposition-v1";

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> MltError {
    MltError::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(source: &str, e: csv::Error) -> MltError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    parse_err(source, line, e.to_string())
}

fn parse_float(source: &str, line: usize, field: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(source, line, format!("{field}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(source, line, format!("{field}: '{s}' is not finite")));
    }
    Ok(v)
}

fn name_of(path: &Path) -> String {
    path.display().to_string()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

// ---------------------------------------------------------------- atlas

const ATLAS_HEADER: [&str; 6] = ["index", "label", "lobe", "x", "y", "z"];

pub fn atlas_to_csv(atlas: &ParcellationAtlas) -> String {
    let mut w = csv_writer();
    w.write_record(ATLAS_HEADER).expect("in-memory write");
    for r in atlas.regions() {
        let [x, y, z] = r.sphere_xyz;
        w.write_record([
            r.index.to_string(),
            r.label.clone(),
            r.lobe.as_str().to_string(),
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(z),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn parse_atlas_csv(text: &str, source: &str) -> Result<ParcellationAtlas> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    if header.iter().map(str::trim).ne(ATLAS_HEADER.iter().copied()) {
        return Err(parse_err(
            source,
            1,
            format!("expected header {}", ATLAS_HEADER.join(",")),
        ));
    }
    let mut regions = Vec::new();
    let mut labels = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let index: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(source, line, format!("index: '{}' is not a region index", &rec[0])))?;
        let label = rec[1].to_string();
        if label.trim().is_empty() {
            return Err(parse_err(source, line, "label: empty"));
        }
        if !labels.insert(label.clone()) {
            return Err(parse_err(source, line, format!("label: duplicate '{label}'")));
        }
        let lobe: Lobe = rec[2]
            .parse()
            .map_err(|e: MltError| parse_err(source, line, format!("lobe: {e}")))?;
        let x = parse_float(source, line, "x", &rec[3])?;
        let y = parse_float(source, line, "y", &rec[4])?;
        let z = parse_float(source, line, "z", &rec[5])?;
        regions.push(Region {
            index,
            label,
            lobe,
            sphere_xyz: [x, y, z],
        });
    }
    ParcellationAtlas::new(regions)
}

pub fn read_atlas(path: impl AsRef<Path>) -> Result<ParcellationAtlas> {
    let path = path.as_ref();
    parse_atlas_csv(&read_text(path)?, &name_of(path))
}

// ---------------------------------------------------------------- matrices

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut w = csv_writer();
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).expect("in-memory write");
    }
    finish(w)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    n: usize,
    rows: Vec<Vec<f64>>,
}

/// Dense square matrix from headerless CSV or from JSON `{n, rows}`.
pub fn parse_matrix(text: &str, source: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = if text.trim_start().starts_with('{') {
        let m: MatrixJson = serde_json::from_str(text).map_err(|e| parse_err(source, e.line(), e.to_string()))?;
        if m.rows.len() != m.n {
            return Err(MltError::Dimension {
                what: format!("{source}: row count"),
                expected: m.n,
                got: m.rows.len(),
            });
        }
        m.rows
    } else {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(source, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, s)| parse_float(source, line, &format!("column {j}"), s))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        rows
    };
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(source, 0, "empty matrix"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(parse_err(
                source,
                i + 1,
                format!("row has {} values, expected {n}", r.len()),
            ));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_matrix(&read_text(path)?, &name_of(path))
}

// ---------------------------------------------------------------- scans

pub fn scans_to_jsonl<'a>(scans: impl IntoIterator<Item = &'a ScanRecord>) -> Result<String> {
    let mut out = String::new();
    for s in scans {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

/// One record per non-blank line, each validated on its own line.
pub fn parse_scans_jsonl(text: &str, source: &str) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScanRecord = serde_json::from_str(line).map_err(|e| parse_err(source, k + 1, e.to_string()))?;
        rec.validate().map_err(|e| parse_err(source, k + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_scans(path: impl AsRef<Path>) -> Result<Vec<ScanRecord>> {
    let path = path.as_ref();
    parse_scans_jsonl(&read_text(path)?, &name_of(path))
}

// ---------------------------------------------------------------- expression

pub fn expression_to_csv(x: &ExpressionMatrix) -> String {
    let mut w = csv_writer();
    w.write_record(x.gene_names()).expect("in-memory write");
    for row in x.values().row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).expect("in-memory write");
    }
    finish(w)
}

pub fn parse_expression_csv(text: &str, source: &str) -> Result<ExpressionMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(source, e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if names.iter().any(|n| n.trim().is_empty()) {
        return Err(parse_err(source, 1, "empty gene name"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .zip(&names)
            .map(|(s, g)| parse_float(source, line, g, s))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(source, 1, "no region rows"));
    }
    let values = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    ExpressionMatrix::new(values, names)
}

pub fn read_expression(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    parse_expression_csv(&read_text(path)?, &name_of(path))
}

// ---------------------------------------------------------------- stat maps

/// `region_index,label,value,kind` rows.
pub fn stat_map_to_csv(map: &RegionalStatMap, atlas: &ParcellationAtlas) -> Result<String> {
    if map.len() != atlas.len() {
        return Err(MltError::Dimension {
            what: "stat map vs atlas".into(),
            expected: atlas.len(),
            got: map.len(),
        });
    }
    let mut w = csv_writer();
    w.write_record(["region_index", "label", "value", "kind"]).expect("in-memory write");
    for (r, v) in atlas.regions().iter().zip(map.values()) {
        w.write_record([r.index.to_string(), r.label.clone(), fmt_f64(*v), map.kind().as_str().to_string()])
            .expect("in-memory write");
    }
    Ok(finish(w))
}

// ---------------------------------------------------------------- decompositions

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionRow {
    subject: String,
    contribution_s: Vec<f64>,
    contribution_f: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionFile {
    format: String,
    n_regions: usize,
    subjects: Vec<DecompositionRow>,
}

pub fn decompositions_to_json(d: &[PropagationDecomposition]) -> Result<String> {
    let file = DecompositionFile {
        format: DECOMPOSITION_FORMAT.into(),
        n_regions: d.first().map(|x| x.contribution_s.len()).unwrap_or(0),
        subjects: d
            .iter()
            .map(|x| DecompositionRow {
                subject: x.subject.clone(),
                contribution_s: x.contribution_s.clone(),
                contribution_f: x.contribution_f.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn decompositions_from_json(text: &str, source: &str) -> Result<Vec<PropagationDecomposition>> {
    let file: DecompositionFile = serde_json::from_str(text).map_err(|e| parse_err(source, e.line(), e.to_string()))?;
    if file.format != DECOMPOSITION_FORMAT {
        return Err(parse_err(
            source,
            0,
            format!("format '{}', expected '{DECOMPOSITION_FORMAT}'", file.format),
        ));
    }
    let n = file.n_regions;
    let mut out = Vec::with_capacity(file.subjects.len());
    for row in file.subjects {
        for (what, v) in [("contribution_s", &row.contribution_s), ("contribution_f", &row.contribution_f)] {
            if v.len() != n {
                return Err(MltError::Dimension {
                    what: format!("{source}: {what} of subject {}", row.subject),
                    expected: n,
                    got: v.len(),
                });
            }
        }
        out.push(PropagationDecomposition {
            subject: row.subject,
            contribution_s: row.contribution_s,
            contribution_f: row.contribution_f,
        });
    }
    Ok(out)
}

pub fn read_decompositions(path: impl AsRef<Path>) -> Result<Vec<PropagationDecomposition>> {
    let path = path.as_ref();
    decompositions_from_json(&read_text(path)?, &name_of(path))
}
