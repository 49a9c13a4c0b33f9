mod common;

use common::*;
use proptest::prelude::*;
use rsf_core::dataset::Response;
use rsf_core::forest::{deserialize, logrank_statistic, serialize, serialize_gzip, FOREST_SCHEMA_VERSION};
use rsf_core::importance::{interactions, minimal_depth, tree_minimal_depths, vimp};
use rsf_core::inference::{concordance_error, error_curve, predict_inbag, predict_oob, predict_test};
use rsf_core::km::estimate;
use rsf_core::util::even_indices;
use rsf_core::{grow, Error, Frame, GrowConfig, VariableSpec};

fn small_config(seed: u64) -> GrowConfig {
    GrowConfig {
        ntree: 40,
        nsplit: 4,
        nodesize: 2,
        seed,
        ..GrowConfig::default()
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn output_bytes_do_not_depend_on_thread_count() {
    let frame = synthetic(80, 5, 0.1);
    let config = small_config(9);
    let one = with_threads(1, || serialize(&grow(&frame, &config).unwrap()).unwrap());
    let four = with_threads(4, || serialize(&grow(&frame, &config).unwrap()).unwrap());
    assert_eq!(one, four);
    let forest = deserialize(&one).unwrap();
    let v1 = with_threads(1, || vimp(&forest, &frame, 3).unwrap());
    let v4 = with_threads(4, || vimp(&forest, &frame, 3).unwrap());
    assert_eq!(
        serde_json::to_string(&v1).unwrap(),
        serde_json::to_string(&v4).unwrap()
    );
}

#[test]
fn same_seed_same_forest_different_seed_different_forest() {
    let frame = synthetic(60, 2, 0.0);
    let a = serialize(&grow(&frame, &small_config(1)).unwrap()).unwrap();
    let b = serialize(&grow(&frame, &small_config(1)).unwrap()).unwrap();
    let c = serialize(&grow(&frame, &small_config(2)).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn inbag_distinct_fraction_is_bootstrap() {
    let frame = synthetic(312, 8, 0.0);
    let config = GrowConfig {
        ntree: 1000,
        nodesize: 200,
        ..GrowConfig::default()
    };
    let forest = grow(&frame, &config).unwrap();
    let mean = forest
        .inbag
        .iter()
        .map(|row| row.iter().filter(|&&m| m > 0).count() as f64 / 312.0)
        .sum::<f64>()
        / 1000.0;
    assert!((mean - 0.632).abs() <= 0.01, "{mean}");
    assert!(forest.inbag.iter().all(|row| row.iter().sum::<u32>() == 312));
}

#[test]
fn unused_variable_has_zero_vimp() {
    let base = synthetic(70, 4, 0.05);
    let mut vars = base.variables().to_vec();
    vars.push(VariableSpec::continuous("flat"));
    let mut cols = base.columns().to_vec();
    cols.push(vec![1.5; base.n()]);
    let frame = Frame::new(vars, cols, base.response().clone()).unwrap();
    let forest = grow(&frame, &small_config(3)).unwrap();
    let table = vimp(&forest, &frame, 11).unwrap();
    assert_eq!(table.get("flat").unwrap().vimp, 0.0);
    assert!(!table.get("flat").unwrap().positive);
    // and it never splits, so it carries the full penalty in every tree
    let depth = minimal_depth(&forest);
    let expected = forest.trees.iter().map(|t| f64::from(t.max_depth() + 1)).sum::<f64>() / 40.0;
    assert_eq!(depth.get("flat").unwrap().depth, expected);
}

#[test]
fn vimp_is_reproducible_for_a_fixed_seed() {
    let frame = synthetic(60, 12, 0.0);
    let forest = grow(&frame, &small_config(5)).unwrap();
    let a = vimp(&forest, &frame, 99).unwrap();
    let b = vimp(&forest, &frame, 99).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn monotone_transform_keeps_topology() {
    let frame = synthetic(90, 21, 0.1);
    let forest = grow(&frame, &small_config(6)).unwrap();
    for (name, f) in [("exp", f64::exp as fn(f64) -> f64), ("cube", |x: f64| x * x * x + 2.0 * x)] {
        let col: Vec<f64> = frame.column(0).iter().map(|&x| f(x)).collect();
        let moved = frame.with_column(0, col).unwrap();
        let other = grow(&moved, &small_config(6)).unwrap();
        same_topology(&forest, &other, 0, f);
        let (d0, d1) = (minimal_depth(&forest), minimal_depth(&other));
        assert_eq!(d0.entries, d1.entries, "{name}");
    }
}

#[test]
fn error_curve_prefixes_match_truncated_forests() {
    let frame = synthetic(70, 31, 0.05);
    let forest = grow(&frame, &small_config(8)).unwrap();
    let curve = error_curve(&forest, &frame).unwrap();
    assert_eq!(curve.tree_counts, (1..=40).collect::<Vec<_>>());
    for b in [7, 19, 33] {
        let e = predict_oob(&forest.truncate(b), &frame).unwrap().error().unwrap();
        assert_eq!(curve.error[b - 1], e, "prefix {b}");
    }
    let full = predict_oob(&forest, &frame).unwrap().error().unwrap();
    assert_eq!(*curve.error.last().unwrap(), full);
}

#[test]
fn serialization_round_trips() {
    let frame = synthetic(50, 41, 0.1);
    let forest = grow(&frame, &small_config(4)).unwrap();
    let plain = serialize(&forest).unwrap();
    assert_eq!(deserialize(&plain).unwrap(), forest);
    let gz = serialize_gzip(&forest).unwrap();
    assert_eq!(gz, serialize_gzip(&forest).unwrap());
    assert_eq!(deserialize(&gz).unwrap(), forest);
    assert!(gz.len() < plain.len());
}

#[test]
fn version_and_corruption_are_reported() {
    let frame = synthetic(30, 42, 0.0);
    let forest = grow(&frame, &GrowConfig { ntree: 3, ..small_config(1) }).unwrap();
    let mut doc: serde_json::Value = serde_json::from_slice(&serialize(&forest).unwrap()).unwrap();
    doc["version"] = serde_json::json!(FOREST_SCHEMA_VERSION + 1);
    match deserialize(&serde_json::to_vec(&doc).unwrap()) {
        Err(Error::Version { found, expected }) => {
            assert_eq!((found, expected), (FOREST_SCHEMA_VERSION + 1, FOREST_SCHEMA_VERSION))
        }
        other => panic!("{other:?}"),
    }
    doc["version"] = serde_json::json!(FOREST_SCHEMA_VERSION);
    doc["config"]["ntree"] = serde_json::json!(4);
    assert!(matches!(deserialize(&serde_json::to_vec(&doc).unwrap()), Err(Error::Document(_))));
    assert!(matches!(deserialize(b"{not json"), Err(Error::Document(_))));
}

#[test]
fn ensemble_survival_is_monotone_in_time() {
    let frame = synthetic(60, 51, 0.1);
    let forest = grow(&frame, &small_config(2)).unwrap();
    for ens in [predict_oob(&forest, &frame).unwrap(), predict_inbag(&forest, &frame).unwrap()] {
        for curve in ens.curves.iter().flatten() {
            assert!(curve.windows(2).all(|w| w[1] <= w[0]));
            assert!(curve.iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }
}

#[test]
fn test_prediction_skips_incomplete_rows_without_imputation() {
    let train = synthetic(60, 61, 0.0);
    let forest = grow(&train, &small_config(3)).unwrap();
    let test = synthetic(20, 62, 0.2);
    let incomplete = (0..20).filter(|&r| (0..3).any(|v| test.is_missing(r, v))).count();
    assert!(incomplete > 0);
    let off = predict_test(&forest, &test, false).unwrap();
    assert_eq!(off.curves.iter().filter(|c| c.is_none()).count(), incomplete);
    let on = predict_test(&forest, &test, true).unwrap();
    assert!(on.curves.iter().all(Option::is_some));
    // complete rows get the same prediction either way
    for r in 0..20 {
        if let Some(c) = &off.curves[r] {
            assert_eq!(Some(c), on.curves[r].as_ref());
        }
    }
}

#[test]
fn interactions_are_bounded_with_minimal_diagonal() {
    let frame = synthetic(80, 71, 0.05);
    let forest = grow(&frame, &small_config(7)).unwrap();
    let m = interactions(&forest);
    let per_tree = tree_minimal_depths(&forest);
    for (i, row) in m.values.iter().enumerate() {
        assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(row.iter().all(|&v| v >= row[i]));
        // diagonal is the per-tree minimal depth over the same ceiling
        let v = forest.variable_index(&m.variables[i]).unwrap();
        let want = per_tree
            .iter()
            .zip(&forest.trees)
            .map(|(d, t)| d[v] / f64::from(t.max_depth() + 1))
            .sum::<f64>()
            / forest.ntree() as f64;
        assert!((row[i] - want).abs() < 1e-12);
    }
}

#[test]
fn stumps_give_penalty_everywhere() {
    let frame = synthetic(20, 81, 0.0);
    let forest = grow(&frame, &GrowConfig { nodesize: 100, ..small_config(1) }).unwrap();
    assert!(forest.trees.iter().all(|t| t.nodes.len() == 1));
    let m = interactions(&forest);
    assert!(m.values.iter().flatten().all(|&v| v == 1.0));
    let d = minimal_depth(&forest);
    assert!(d.entries.iter().all(|e| e.depth == 1.0));
    assert_eq!(d.threshold, 0.0);
}

#[test]
fn frames_with_wrong_response_are_rejected() {
    let frame = synthetic(30, 91, 0.0);
    let forest = grow(&frame, &GrowConfig { ntree: 3, ..small_config(1) }).unwrap();
    let mut time = frame.time().to_vec();
    time[0] += 1.0;
    let other = Frame::new(
        frame.variables().to_vec(),
        frame.columns().to_vec(),
        Response {
            time,
            status: frame.status().to_vec(),
        },
    )
    .unwrap();
    assert!(matches!(predict_oob(&forest, &other), Err(Error::Validation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn km_is_a_survival_curve(data in prop::collection::vec((1u8..20, any::<bool>()), 1..40)) {
        let t: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
        let s: Vec<bool> = data.iter().map(|d| d.1).collect();
        let c = estimate(&t, &s, Some(1.96));
        prop_assert!(c.survival.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(c.survival.iter().all(|v| (0.0..1.0).contains(v)));
        prop_assert!(c.cum_hazard.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(c.n_event.iter().sum::<usize>(), s.iter().filter(|&&e| e).count());
        for ((lo, hi), sv) in c.band_lo.unwrap().iter().zip(c.band_hi.unwrap()).zip(&c.survival) {
            prop_assert!(*lo <= *sv + 1e-12 && *sv <= hi + 1e-12);
        }
    }

    #[test]
    fn logrank_flips_sign_with_sides(data in prop::collection::vec((1u8..10, any::<bool>(), any::<bool>()), 2..30)) {
        let t: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
        let s: Vec<bool> = data.iter().map(|d| d.1).collect();
        let l: Vec<bool> = data.iter().map(|d| d.2).collect();
        let r: Vec<bool> = l.iter().map(|x| !x).collect();
        let a = logrank_statistic(&t, &s, &l);
        let b = logrank_statistic(&t, &s, &r);
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        let o = oracle_logrank(&t, &s, &l);
        prop_assert!((a - o).abs() <= 1e-12 * (1.0 + o.abs()));
    }

    #[test]
    fn concordance_error_lies_in_unit_interval(data in prop::collection::vec((0u8..5, 1u8..10, any::<bool>()), 2..30)) {
        let m: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
        let t: Vec<f64> = data.iter().map(|d| f64::from(d.1)).collect();
        let s: Vec<bool> = data.iter().map(|d| d.2).collect();
        let got = concordance_error(&m, &t, &s).ok();
        prop_assert_eq!(got, oracle_concordance(&m, &t, &s));
        if let Some(e) = got {
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn even_indices_are_sorted_and_cover_ends(len in 1usize..200, count in 1usize..80) {
        let idx = even_indices(len, count);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(idx[0], 0);
        prop_assert!(idx.len() <= count.min(len));
        if count >= 2 {
            prop_assert_eq!(*idx.last().unwrap(), len - 1);
        }
    }
}
