use rsf_core::dataset::pbc;
use rsf_core::dependence::partial_dependence;
use rsf_core::{grow, GrowConfig};
use rsf_wasm::Session;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn km_by_level_and_by_quartile() {
    let s = Session::default();
    let v = parse(&s.km_json("stage", 0.95).unwrap());
    let curves = v["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 4);
    assert_eq!(curves[0]["group"], "1");
    let v = parse(&s.km_json("bili", 0.95).unwrap());
    assert_eq!(v["curves"].as_array().unwrap().len(), 4);
    let v = parse(&s.km_json("", 0.9).unwrap());
    assert_eq!(v["curves"].as_array().unwrap().len(), 1);
    assert!(s.km_json("nosuch", 0.95).unwrap_err().contains("nosuch"));
}

#[test]
fn partial_needs_a_forest() {
    let s = Session::default();
    assert!(s.partial_json("bili", 1.0, 10).is_err());
}

#[test]
fn grow_then_partial_matches_library() {
    let mut s = Session::default();
    let v = parse(&s.grow_json(30, 3, 7).unwrap());
    assert_eq!(v["ntree"], 30);
    assert_eq!(v["error_curve"]["error"].as_array().unwrap().len(), v["error_curve"]["tree_counts"].as_array().unwrap().len());
    assert_eq!(v["depth"]["entries"].as_array().unwrap().len(), 17);
    assert_eq!(v["vimp"]["entries"].as_array().unwrap().len(), 17);

    let got = parse(&s.partial_json("bili", 1.0, 8).unwrap());
    let trial = pbc::trial();
    let config = GrowConfig { ntree: 30, seed: 7, ..GrowConfig::default() };
    let forest = grow(&trial, &config).unwrap();
    let want = partial_dependence(&forest, &trial, "bili", &[1.0], 8).unwrap();
    let records = got["records"].as_array().unwrap();
    assert_eq!(records.len(), want.records.len());
    for (g, w) in records.iter().zip(&want.records) {
        assert_eq!(g["yhat"].as_f64().unwrap(), w.yhat);
    }
}
