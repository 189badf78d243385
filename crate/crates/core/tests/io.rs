mod common;

use mlt::cohort::Cohort;
use mlt::io::{
    atlas_to_csv, decompositions_from_json, decompositions_to_json, expression_to_csv, load_cohort, matrix_to_csv,
    parse_atlas_csv, parse_expression_csv, parse_matrix, parse_scans_jsonl, read_params, scans_to_jsonl, write_params,
};
use mlt::model::GainSource;
use mlt::MltError;
use proptest::prelude::*;

fn mutate(text: &str, kind: u8, pos: usize, byte: u8) -> String {
    let mut b = text.as_bytes().to_vec();
    if b.is_empty() {
        return String::new();
    }
    let i = pos % b.len();
    match kind % 4 {
        0 => {
            b.remove(i);
        }
        1 => b.insert(i, byte),
        2 => b[i] = byte,
        _ => {
            let lines: Vec<&str> = text.lines().collect();
            let k = pos % lines.len();
            let mut out: Vec<&str> = lines.clone();
            out.insert(k, lines[k]);
            return out.join("\n");
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

fn printable() -> impl Strategy<Value = u8> {
    prop_oneof![Just(b','), Just(b'\n'), Just(b'"'), Just(b'-'), Just(b'.'), Just(b'e'), Just(b' '), 0x20u8..0x7f]
}

#[test]
fn tables_round_trip_exactly() {
    let (syn, _) = common::small_cohort(20, 8, 1);
    let atlas = parse_atlas_csv(&atlas_to_csv(&syn.atlas), "atlas").unwrap();
    assert_eq!(atlas, syn.atlas);
    let w = syn.connectome.sc.weights();
    assert_eq!(&parse_matrix(&matrix_to_csv(w), "sc").unwrap(), w);
    let scans = parse_scans_jsonl(&scans_to_jsonl(&syn.scans).unwrap(), "scans").unwrap();
    assert_eq!(scans, syn.scans);
    let ex = parse_expression_csv(&expression_to_csv(&syn.expression), "expr").unwrap();
    assert_eq!(ex, syn.expression);
    let d = decompositions_from_json(&decompositions_to_json(&syn.decompositions).unwrap(), "d").unwrap();
    assert_eq!(d, syn.decompositions);
}

#[test]
fn params_file_round_trips_both_gain_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    let mut p = common::random_params(9, 4);
    write_params(&path, &p).unwrap();
    assert_eq!(read_params(&path).unwrap(), p);
    p.k_source = GainSource::Riccati;
    write_params(&path, &p).unwrap();
    assert_eq!(read_params(&path).unwrap(), p);
}

#[test]
fn scrambled_scan_order_loads_identically() {
    let (syn, _) = common::small_cohort(16, 10, 2);
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("atlas.csv"), atlas_to_csv(&syn.atlas)).unwrap();
    std::fs::write(d.join("sc.csv"), matrix_to_csv(syn.connectome.sc.weights())).unwrap();
    std::fs::write(d.join("fc.csv"), matrix_to_csv(syn.connectome.fc.weights())).unwrap();
    let mut rev = syn.scans.clone();
    rev.reverse();
    std::fs::write(d.join("fwd.jsonl"), scans_to_jsonl(&syn.scans).unwrap()).unwrap();
    std::fs::write(d.join("rev.jsonl"), scans_to_jsonl(&rev).unwrap()).unwrap();
    let a = load_cohort(d.join("fwd.jsonl"), d.join("sc.csv"), d.join("fc.csv"), d.join("atlas.csv")).unwrap();
    let b = load_cohort(d.join("rev.jsonl"), d.join("sc.csv"), d.join("fc.csv"), d.join("atlas.csv")).unwrap();
    assert_eq!(a.cohort, b.cohort);
    assert_eq!(a.cohort, Cohort::new(syn.scans.clone()).unwrap());
}

#[test]
fn nonpositive_suvr_is_rejected_with_location() {
    let (syn, _) = common::small_cohort(16, 4, 3);
    let mut scans = syn.scans.clone();
    scans[2].suvr[5] = 0.0;
    let text = scans_to_jsonl(&scans).unwrap();
    let err = parse_scans_jsonl(&text, "scans.jsonl").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, MltError::Parse { line: 3, .. }), "{msg}");
    assert!(msg.contains(&scans[2].subject_id) && msg.contains('5'), "{msg}");
}

#[test]
fn schema_violations_are_rejected() {
    let (syn, _) = common::small_cohort(16, 2, 4);
    let line = serde_json::to_string(&syn.scans[0]).unwrap();
    let extra = line.replacen('{', "{\"extra\":1,", 1);
    assert!(parse_scans_jsonl(&extra, "s").is_err());
    let missing = line.replace("\"mmse\":", "\"mmse_x\":");
    assert!(parse_scans_jsonl(&missing, "s").is_err());
    let mut v: serde_json::Value = serde_json::from_str(&line).unwrap();
    v["covariates"].as_object_mut().unwrap().remove("abeta_pgml");
    assert!(parse_scans_jsonl(&v.to_string(), "s").is_err());
    let atlas = atlas_to_csv(&syn.atlas);
    assert!(parse_atlas_csv(&atlas.replacen("index,", "idx,", 1), "a").is_err());
    let dup = {
        let mut lines: Vec<&str> = atlas.lines().collect();
        lines.push(lines[1]);
        lines.join("\n")
    };
    assert!(parse_atlas_csv(&dup, "a").is_err());
    assert!(parse_matrix("1,2\n3", "m").is_err());
    assert!(parse_matrix("0,NaN\nNaN,0", "m").is_err());
}

#[test]
fn formatting_variants_keep_semantics() {
    let (syn, _) = common::small_cohort(16, 4, 5);
    let atlas = atlas_to_csv(&syn.atlas);
    let crlf = atlas.replace('\n', "\r\n");
    assert_eq!(parse_atlas_csv(&crlf, "a").unwrap(), syn.atlas);
    let mut lines: Vec<&str> = atlas.lines().collect();
    lines[1..].reverse();
    assert_eq!(parse_atlas_csv(&lines.join("\n"), "a").unwrap(), syn.atlas);
    let scans = scans_to_jsonl(&syn.scans).unwrap();
    assert_eq!(parse_scans_jsonl(&format!("\n{scans}\n\n"), "s").unwrap(), syn.scans);
    let w = syn.connectome.fc.weights();
    let json = serde_json::json!({"n": w.nrows(), "rows": w.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()});
    assert_eq!(&parse_matrix(&json.to_string(), "m").unwrap(), w);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mutated_atlas_is_rejected_or_consistent(kind in 0u8..4, pos in 0usize..100_000, byte in printable()) {
        let atlas = mlt::synth::generate_atlas(14, 0).unwrap();
        let text = mutate(&atlas_to_csv(&atlas), kind, pos, byte);
        if let Ok(parsed) = parse_atlas_csv(&text, "fuzz") {
            prop_assert_eq!(parse_atlas_csv(&atlas_to_csv(&parsed), "again").unwrap(), parsed.clone());
            prop_assert_eq!(parsed.len(), text.lines().skip(1).filter(|l| !l.trim().is_empty()).count());
        }
    }

    #[test]
    fn mutated_scans_are_rejected_or_consistent(kind in 0u8..4, pos in 0usize..100_000, byte in printable()) {
        let (syn, _) = common::small_cohort(14, 3, 6);
        let text = mutate(&scans_to_jsonl(&syn.scans).unwrap(), kind, pos, byte);
        if let Ok(parsed) = parse_scans_jsonl(&text, "fuzz") {
            for s in &parsed {
                prop_assert!(s.suvr.iter().all(|v| *v > 0.0 && v.is_finite()));
            }
            prop_assert_eq!(parse_scans_jsonl(&scans_to_jsonl(&parsed).unwrap(), "again").unwrap(), parsed.clone());
            if let Ok(c) = Cohort::new(parsed.clone()) {
                prop_assert_eq!(c.scans().count(), parsed.len());
            }
        }
    }

    #[test]
    fn mutated_matrix_is_rejected_or_consistent(kind in 0u8..4, pos in 0usize..100_000, byte in printable()) {
        let (syn, _) = common::small_cohort(14, 2, 7);
        let text = mutate(&matrix_to_csv(syn.connectome.sc.weights()), kind, pos, byte);
        if let Ok(m) = parse_matrix(&text, "fuzz") {
            prop_assert!(m.iter().all(|v| v.is_finite()));
            prop_assert_eq!(m.nrows(), m.ncols());
            prop_assert_eq!(parse_matrix(&matrix_to_csv(&m), "again").unwrap(), m);
        }
    }
}
