mod common;

use std::fmt::Write as _;

use celltype_ot::io::report::{report_from_str, report_to_string};
use celltype_ot::io::{
    parse_dataset, parse_dataset_str, read_report, render_heatmap, write_report, AnalysisConfig,
    AnalysisReport,
};
use celltype_ot::pipeline::analyze;
use celltype_ot::Error;
use common::{fixture, random_plan, rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn three_type_fixture_marginals_are_exact() {
    let data = parse_dataset(&fixture("three_types.csv")).unwrap();
    assert_eq!(data.labels.names(), &["1", "2", "3"]);
    assert_eq!(data.times, vec![0.0, 1.0, 2.0, 3.0]);
    let got: Vec<Vec<f64>> = data
        .marginals()
        .unwrap()
        .into_iter()
        .map(|m| m.into_inner())
        .collect();
    assert_eq!(
        got,
        vec![
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.0, 0.75],
            vec![0.0, 0.5, 0.5],
            vec![0.25, 0.5, 0.25],
        ]
    );
}

#[test]
fn three_type_fixture_analysis_shape() {
    let data = parse_dataset(&fixture("three_types.csv")).unwrap();
    let a = analyze(&data, &AnalysisConfig::default()).unwrap();
    assert_eq!(a.plans.len(), 3);
    assert_eq!(a.report.pairs.len(), 3);
    assert_eq!(a.report.w_values().len(), 3);
    for (t, p) in a.report.pairs.iter().enumerate() {
        assert_eq!(p.t, t);
        assert!(p.w.is_finite() && p.w >= 0.0);
        // Columns match the target marginal even where it has zeros.
        let plan = p.plan.to_matrix().unwrap();
        for k in 0..3 {
            assert!((plan.column(k).sum() - a.report.marginals[t + 1][k]).abs() < 1e-8);
        }
    }
    // Type 2 is absent at t = 1: no conditioning mass in H^{0|1}.
    assert_eq!(a.report.pairs[0].backward_degenerate, vec![1]);
}

#[test]
fn one_time_point_is_rejected_downstream() {
    let data = parse_dataset_str("time,cell_type,x\n0,A,1\n0,B,2\n").unwrap();
    let err = analyze(&data, &AnalysisConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
    assert!(err.to_string().contains("need ≥ 2 time points"));
}

fn synthetic_table(types: usize, times: usize, per_time: usize, seed: u64) -> String {
    let mut r = rng(seed);
    let mut s = String::from("time,cell_type,a,b,c\n");
    for t in 0..times {
        for i in 0..per_time {
            // Every type appears at every time; the rest is random.
            let j = if i < types {
                i
            } else {
                r.random_range(0..types)
            };
            let centre = j as f64;
            let _ = writeln!(
                s,
                "{t},T{j},{},{},{}",
                centre + r.random::<f64>() * 0.3,
                -centre + r.random::<f64>() * 0.3,
                r.random::<f64>() / 3.0
            );
        }
    }
    s
}

fn seven_type_report() -> AnalysisReport {
    let data = parse_dataset_str(&synthetic_table(7, 37, 40, 9)).unwrap();
    let a = analyze(&data, &AnalysisConfig::default()).unwrap();
    assert_eq!(a.report.labels.len(), 7);
    assert_eq!(a.report.pairs.len(), 36);
    a.report
}

fn assert_bitwise(a: &AnalysisReport, b: &AnalysisReport) {
    assert_eq!(a, b);
    let bits = |r: &AnalysisReport| -> Vec<u64> {
        let mut v: Vec<u64> = r.times.iter().map(|x| x.to_bits()).collect();
        v.extend(r.marginals.iter().flatten().map(|x| x.to_bits()));
        v.extend(r.cost.data.iter().map(|x| x.to_bits()));
        for p in &r.pairs {
            v.push(p.w.to_bits());
            for m in [&p.plan, &p.forward, &p.backward] {
                v.extend(m.data.iter().map(|x| x.to_bits()));
            }
        }
        v
    };
    assert_eq!(bits(a), bits(b));
}

#[test]
fn report_round_trip_is_lossless() {
    let report = seven_type_report();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    write_report(&report, &path).unwrap();
    let back = read_report(&path).unwrap();
    assert_bitwise(&report, &back);
    // Re-serializing is byte-identical.
    assert_eq!(
        report_to_string(&back).unwrap(),
        report_to_string(&report).unwrap()
    );
}

#[test]
fn empty_change_point_set_round_trips() {
    let mut report = seven_type_report();
    report.change_points.detected.clear();
    report.change_points.threshold_used = None;
    let back = report_from_str(&report_to_string(&report).unwrap()).unwrap();
    assert!(back.change_points.detected.is_empty());
    assert_eq!(back.change_points.threshold_used, None);
    assert_bitwise(&report, &back);
}

#[test]
fn truncated_report_is_a_parse_error() {
    let text = report_to_string(&seven_type_report()).unwrap();
    for cut in [text.len() / 3, text.len() / 2, text.len() - 3] {
        match report_from_str(&text[..cut]) {
            Err(Error::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn truncated_dataset_is_a_parse_error() {
    let text = synthetic_table(3, 2, 5, 1);
    // Cut the last row before its final field.
    let cut = &text[..text.trim_end().rfind(',').unwrap()];
    match parse_dataset_str(cut) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
        other => panic!("{other:?}"),
    }
}

struct Cell {
    row: usize,
    col: usize,
    value: f64,
    fill: String,
}

fn cells(svg: &str) -> Vec<Cell> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("cell"))
        .map(|n| Cell {
            row: n.attribute("data-row").unwrap().parse().unwrap(),
            col: n.attribute("data-col").unwrap().parse().unwrap(),
            value: n.attribute("data-value").unwrap().parse().unwrap(),
            fill: n.attribute("fill").unwrap().to_owned(),
        })
        .collect()
}

/// Sum of the RGB channels: strictly darker means a larger value.
fn lightness(fill: &str) -> u32 {
    (1..7)
        .step_by(2)
        .map(|i| u32::from_str_radix(&fill[i..i + 2], 16).unwrap())
        .sum()
}

#[test]
fn heatmap_is_well_formed_and_rank_faithful() {
    let mut r = rng(77);
    let plan = random_plan(&mut r, 6);
    let labels: Vec<String> = (0..6).map(|j| format!("type <{j}> & co")).collect();
    let svg = render_heatmap(&plan, &labels, "plan \"0\" → 1");
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let count = |class: &str| {
        doc.descendants()
            .filter(|n| n.attribute("class") == Some(class))
            .count()
    };
    assert_eq!(count("cell"), 36);
    assert_eq!(count("row-label"), 6);
    assert_eq!(count("col-label"), 6);
    assert_eq!(count("row-marginal"), 1);
    assert_eq!(count("col-marginal"), 1);
    assert_eq!(count("bar"), 12);
    assert!(doc.descendants().any(|n| n.text() == Some("type <3> & co")));

    let cs = cells(&svg);
    for c in &cs {
        assert_eq!(c.value, plan.get(c.row, c.col));
    }
    for a in &cs {
        for b in &cs {
            if a.value < b.value {
                assert!(lightness(&a.fill) >= lightness(&b.fill));
            }
        }
    }
    let max = cs
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap();
    assert_eq!(max.fill, "#08306b");
    // Deterministic.
    assert_eq!(svg, render_heatmap(&plan, &labels, "plan \"0\" → 1"));
}

#[test]
fn diagonal_plan_has_blank_off_diagonal() {
    let plan = common::plan_from(DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.25, 0.5, 0.25,
    ])));
    let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    for c in cells(&render_heatmap(&plan, &labels, "diag")) {
        if c.row != c.col {
            assert_eq!(c.fill, "#ffffff");
        } else {
            assert_ne!(c.fill, "#ffffff");
        }
    }
}
