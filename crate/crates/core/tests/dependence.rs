mod common;

use std::collections::HashSet;

use common::*;
use rsf_core::dataset::quantile_cuts;
use rsf_core::dependence::*;
use rsf_core::forest::{Node, Split, SplitRule, Terminal, TerminalCurve, Tree};
use rsf_core::inference::predict_oob;
use rsf_core::{grow, Error, Forest, Frame, GroupAssignment, GrowConfig};

fn fitted(seed: u64) -> (Frame, Forest) {
    let frame = synthetic(60, 300 + seed, 0.1);
    let config = GrowConfig {
        ntree: 30,
        nsplit: 4,
        nodesize: 2,
        seed,
        ..GrowConfig::default()
    };
    let forest = grow(&frame, &config).unwrap();
    (frame, forest)
}

fn leaf(depth: u32, index: Vec<u32>, survival: Vec<f64>) -> Node {
    let cum_hazard = survival.iter().map(|s| -s.ln()).collect();
    Node::Terminal {
        depth,
        terminal: Terminal {
            members: Vec::new(),
            curve: TerminalCurve {
                index,
                survival,
                cum_hazard,
                mortality: 0.0,
            },
        },
    }
}

/// One tree splitting x1 at `cut`: left survives at 0.875 then 0.75, right
/// at 0.5 then 0.25 (grid indices 1 and 3). Dyadic values keep population
/// averages exact.
fn two_leaf(frame: &Frame, cut: f64) -> Forest {
    let mut event_times: Vec<f64> = frame
        .time()
        .iter()
        .zip(frame.status())
        .filter_map(|(&t, &s)| s.then_some(t))
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let root = Node::Split {
        depth: 0,
        split: Split {
            variable: 0,
            rule: SplitRule::Threshold { value: cut },
            left: 1,
            right: 2,
            donors_left: 1,
            donors_right: 1,
        },
    };
    Forest {
        config: GrowConfig {
            ntree: 1,
            ..GrowConfig::default()
        },
        variables: frame.variables().to_vec(),
        event_times,
        response: frame.response().clone(),
        trees: vec![Tree {
            nodes: vec![root, leaf(1, vec![1, 3], vec![0.875, 0.75]), leaf(1, vec![1, 3], vec![0.5, 0.25])],
        }],
        inbag: vec![vec![1; frame.n()]],
    }
}

#[test]
fn two_leaf_partial_dependence_is_a_step() {
    let frame = synthetic(25, 7, 0.0);
    let forest = two_leaf(&frame, 2.0);
    let times = [forest.event_times[0], forest.event_times[1], forest.event_times[3]];
    let pd = partial_dependence(&forest, &frame, "x1", &times, 5).unwrap();
    assert_eq!(pd.records.len(), 15);
    for r in &pd.records {
        let x = r.x.unwrap();
        let k = forest.grid_index(r.time).unwrap();
        let want = match (x <= 2.0, k) {
            (_, 0) => 1.0,
            (true, 1 | 2) => 0.875,
            (true, _) => 0.75,
            (false, 1 | 2) => 0.5,
            (false, _) => 0.25,
        };
        assert_eq!(r.yhat, want, "x {x} t {}", r.time);
    }
    // x2 never splits, so its curve is flat at the population average
    let flat = partial_dependence(&forest, &frame, "x2", &times[2..], 5).unwrap();
    let left = (0..frame.n()).filter(|&r| frame.value(r, 0) <= 2.0).count() as f64;
    let want = (left * 0.75 + (frame.n() as f64 - left) * 0.25) / frame.n() as f64;
    for r in &flat.records {
        assert!((r.yhat - want).abs() < 1e-12);
        assert_eq!(r.yhat, flat.records[0].yhat);
    }
}

#[test]
fn constant_forest_gives_flat_grids() {
    let frame = synthetic(30, 9, 0.1);
    let forest = grow(
        &frame,
        &GrowConfig {
            ntree: 5,
            nodesize: 1000,
            ..GrowConfig::default()
        },
    )
    .unwrap();
    let vd = variable_dependence(&forest, &frame, &["x1"], &[1.0]).unwrap();
    let pd = partial_dependence(&forest, &frame, "x1", &[1.0], 8).unwrap();
    let ys: HashSet<u64> = pd.records.iter().map(|r| r.yhat.to_bits()).collect();
    assert_eq!(ys.len(), 1);
    // OOB averages of identical-shaped stumps differ only by which trees vote
    assert!(vd.records.iter().all(|r| (0.0..=1.0).contains(&r.yhat)));
    let surface = partial_surface(
        &forest,
        &frame,
        "x1",
        6,
        &SurfaceAxis::Variable {
            name: "x2".into(),
            count: 6,
            time: 1.0,
        },
    )
    .unwrap();
    let ys: HashSet<u64> = surface.records.iter().map(|r| r.yhat.to_bits()).collect();
    assert_eq!(ys.len(), 1);
}

#[test]
fn variable_dependence_is_the_oob_curve() {
    let (frame, forest) = fitted(1);
    let times = [0.5, 1.0, 3.0];
    let vd = variable_dependence(&forest, &frame, &["x1", "g"], &times).unwrap();
    let oob = predict_oob(&forest, &frame).unwrap();
    let predicted = oob.curves.iter().filter(|c| c.is_some()).count();
    assert_eq!(vd.records.len(), 2 * times.len() * predicted);
    for r in &vd.records {
        let row = r.row_id.unwrap();
        assert_eq!(Some(r.yhat), oob.survival_at(row, r.time));
        assert_eq!(r.status, Some(frame.status()[row]));
        assert_eq!(r.kind, DependenceKind::Variable);
    }
    // later times never raise a row's survival
    let by_key = |xvar: &str, t: f64, row: usize| {
        vd.records
            .iter()
            .find(|r| r.xvar == xvar && r.time == t && r.row_id == Some(row))
            .map(|r| r.yhat)
    };
    for row in 0..frame.n() {
        if let (Some(a), Some(b)) = (by_key("x1", 1.0, row), by_key("x1", 3.0, row)) {
            assert!(b <= a);
        }
    }
}

#[test]
fn coplot_with_one_group_is_partial_dependence() {
    let (frame, forest) = fitted(2);
    let all = GroupAssignment::single("all", frame.n());
    let co = partial_coplot(&forest, &frame, "x1", &all, 1.0, 6).unwrap();
    let pd = partial_dependence(&forest, &frame, "x1", &[1.0], 6).unwrap();
    assert_eq!(co.records.len(), pd.records.len());
    for (a, b) in co.records.iter().zip(&pd.records) {
        assert_eq!((a.x, a.yhat), (b.x, b.yhat));
        assert_eq!(a.group.as_deref(), Some("all"));
    }
}

#[test]
fn coplot_groups_partition_the_rows() {
    let (frame, forest) = fitted(3);
    let groups = quantile_cuts("x2", frame.column(1), 3).unwrap();
    let observed = (0..frame.n()).filter(|&r| !frame.is_missing(r, 1)).count();
    assert_eq!(groups.sizes().iter().sum::<usize>(), observed);

    let co = partial_coplot(&forest, &frame, "x1", &groups, 1.0, 5).unwrap();
    let labels: HashSet<&str> = co.records.iter().filter_map(|r| r.group.as_deref()).collect();
    assert_eq!(labels.len(), 3);
    // each group's curve is the literal average over its own rows
    let grid = [forest.grid_index(1.0)];
    for (g, members) in groups.members().iter().enumerate() {
        let recs: Vec<_> = co.records.iter().filter(|r| r.group.as_deref() == Some(&groups.labels[g])).collect();
        for r in recs {
            let x = r.x.unwrap();
            let rows: Vec<usize> = members.iter().copied().filter(|&m| !frame.is_missing(m, 0)).collect();
            let mut acc = 0.0;
            for &m in &rows {
                acc += oracle_predict(&forest, &|v| if v == 0 { x } else { frame.value(m, v) }, m, &grid)[0];
            }
            assert_eq!(r.yhat, acc / rows.len() as f64);
        }
    }

    let vc = variable_coplot_data(&forest, &frame, "x1", &groups, &[1.0, 2.0]).unwrap();
    let vd = variable_dependence(&forest, &frame, &["x1"], &[1.0, 2.0]).unwrap();
    assert_eq!(vc.records.len(), vd.records.len());
    for (a, b) in vc.records.iter().zip(&vd.records) {
        assert_eq!(a.yhat, b.yhat);
        assert_eq!(a.group.as_deref(), groups.label_of(a.row_id.unwrap()));
    }
}

#[test]
fn time_surface_slices_match_partial_curves() {
    let (frame, forest) = fitted(4);
    let surface = partial_surface(
        &forest,
        &frame,
        "x1",
        10,
        &SurfaceAxis::Time {
            count: 12,
            max_time: None,
            include: vec![1.0, 3.0],
        },
    )
    .unwrap();
    let slice_times: Vec<f64> = {
        let mut t: Vec<f64> = surface.records.iter().map(|r| r.time).collect();
        t.dedup();
        t
    };
    assert_eq!(slice_times.len(), 12);
    assert_eq!(surface.records.len(), 12 * 10);
    for label in ["1 Year", "3 Years"] {
        let slice: Vec<_> = surface.records.iter().filter(|r| r.time_label == label).collect();
        assert_eq!(slice.len(), 10, "{label}");
        let t = if label == "1 Year" { 1.0 } else { 3.0 };
        let pd = partial_dependence(&forest, &frame, "x1", &[t], 10).unwrap();
        for (a, b) in slice.iter().zip(&pd.records) {
            assert_eq!((a.x, a.yhat), (b.x, b.yhat));
        }
    }
    // survival never rises along time at a fixed x
    for x in surface.records.iter().map(|r| r.x.unwrap().to_bits()).collect::<HashSet<_>>() {
        let ys: Vec<f64> = surface.records.iter().filter(|r| r.x.unwrap().to_bits() == x).map(|r| r.yhat).collect();
        assert!(ys.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn variable_surface_matches_literal_loop() {
    let (frame, forest) = fitted(5);
    let surface = partial_surface(
        &forest,
        &frame,
        "x1",
        4,
        &SurfaceAxis::Variable {
            name: "g".into(),
            count: 4,
            time: 1.0,
        },
    )
    .unwrap();
    assert_eq!(surface.records.len(), 4 * 3);
    let rows: Vec<usize> = (0..frame.n()).filter(|&r| !frame.is_missing(r, 0) && !frame.is_missing(r, 2)).collect();
    let grid = [forest.grid_index(1.0)];
    for rec in &surface.records {
        let x = rec.x.unwrap();
        let level = frame.variable(2).levels.iter().position(|l| Some(l) == rec.level2.as_ref()).unwrap() as f64;
        let mut acc = 0.0;
        for &r in &rows {
            let value = |v: usize| match v {
                0 => x,
                2 => level,
                _ => frame.value(r, v),
            };
            acc += oracle_predict(&forest, &value, r, &grid)[0];
        }
        assert_eq!(rec.yhat, acc / rows.len() as f64);
    }
}

#[test]
fn categorical_partial_dependence_emits_boxes() {
    let (frame, forest) = fitted(6);
    let pd = partial_dependence(&forest, &frame, "g", &[1.0, 2.0], 25).unwrap();
    assert_eq!(pd.records.len(), 6);
    assert_eq!(pd.boxes.len(), 6);
    for b in &pd.boxes {
        assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
    }
    let keys: HashSet<(String, String)> = pd
        .records
        .iter()
        .map(|r| (r.level.clone().unwrap(), r.time_label.clone()))
        .collect();
    assert_eq!(keys.len(), 6);
}

#[test]
fn times_are_validated_and_clamped() {
    let (frame, forest) = fitted(7);
    assert!(matches!(
        partial_dependence(&forest, &frame, "x1", &[0.0], 5),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        variable_dependence(&forest, &frame, &["x1"], &[f64::NAN]),
        Err(Error::Validation(_))
    ));
    let late = partial_dependence(&forest, &frame, "x1", &[1e6], 5).unwrap();
    assert!(late.warnings.iter().any(|w| w.contains("clamped")));
    let last = *forest.event_times.last().unwrap();
    assert!(late.records.iter().all(|r| r.time == last));
    match partial_dependence(&forest, &frame, "nope", &[1.0], 5) {
        Err(Error::Validation(msg)) => assert!(msg.contains("x1") && msg.contains("g")),
        other => panic!("{other:?}"),
    }
    let many = partial_dependence(&forest, &frame, "x1", &[1.0], 10_000).unwrap();
    assert!(many.warnings.iter().any(|w| w.contains("distinct")));
}
