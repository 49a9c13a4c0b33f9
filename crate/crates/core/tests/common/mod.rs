#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsf_core::dataset::Response;
use rsf_core::forest::{Node, SplitRule};
use rsf_core::{Forest, Frame, VariableKind, VariableSpec};

/// Synthetic censored data: two continuous predictors (the first drives the
/// hazard), one three-level factor, optional missing cells.
pub fn synthetic(n: usize, seed: u64, missing: f64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.gen_range(0.0..4.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let c = rng.gen_range(0..3) as f64;
        let rate = (0.6 * a + 0.3 * c - 1.5).exp();
        let u: f64 = rng.gen_range(1e-9..1.0);
        let event = -u.ln() / rate;
        let cens: f64 = rng.gen_range(0.5..6.0);
        // round to create some tied times
        let t = (event.min(cens) * 20.0).ceil() / 20.0;
        time.push(t);
        status.push(event <= cens);
        let mut hide = |v: f64| if rng.gen::<f64>() < missing { f64::NAN } else { v };
        x1.push(hide((a * 100.0).round() / 100.0));
        x2.push(hide((b * 100.0).round() / 100.0));
        g.push(hide(c));
    }
    if !status.iter().any(|&s| s) {
        status[0] = true;
    }
    Frame::new(
        vec![
            VariableSpec::continuous("x1"),
            VariableSpec::continuous("x2"),
            VariableSpec::categorical("g", VariableKind::Unordered, ["a", "b", "c"]),
        ],
        vec![x1, x2, g],
        Response { time, status },
    )
    .unwrap()
}

/// Frame from continuous columns.
pub fn continuous_frame(names: &[&str], columns: Vec<Vec<f64>>, time: Vec<f64>, status: Vec<bool>) -> Frame {
    Frame::new(
        names.iter().map(|n| VariableSpec::continuous(*n)).collect(),
        columns,
        Response { time, status },
    )
    .unwrap()
}

/// Standardized log-rank statistic written straight from the textbook:
/// walk distinct times upward, tracking who is still at risk.
pub fn oracle_logrank(times: &[f64], status: &[bool], left: &[bool]) -> f64 {
    let mut distinct: Vec<f64> = times.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let (mut num, mut var) = (0.0, 0.0);
    for &t in &distinct {
        let at = |pick: &dyn Fn(usize) -> bool| (0..times.len()).filter(|&i| pick(i)).count() as f64;
        let n = at(&|i| times[i] >= t);
        let nl = at(&|i| times[i] >= t && left[i]);
        let d = at(&|i| times[i] == t && status[i]);
        let dl = at(&|i| times[i] == t && status[i] && left[i]);
        if d == 0.0 {
            continue;
        }
        num += dl - d * nl / n;
        if n > 1.0 {
            var += d * (nl / n) * (1.0 - nl / n) * (n - d) / (n - 1.0);
        }
    }
    if var > 0.0 {
        num / var.sqrt()
    } else {
        0.0
    }
}

/// Harrell concordance error by enumerating unordered pairs.
pub fn oracle_concordance(score: &[f64], time: &[f64], status: &[bool]) -> Option<f64> {
    let (mut pairs, mut halves) = (0u64, 0u64);
    for i in 0..score.len() {
        for j in i + 1..score.len() {
            let (early, late) = if time[i] < time[j] {
                (i, j)
            } else if time[j] < time[i] {
                (j, i)
            } else {
                continue;
            };
            if !status[early] {
                continue;
            }
            pairs += 1;
            halves += match score[early].partial_cmp(&score[late]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (pairs > 0).then(|| 1.0 - (halves as f64 / 2.0) / pairs as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleRule {
    Threshold(f64),
    Levels(Vec<usize>),
}

/// Best root split found by trying every threshold and every level
/// bipartition over the bootstrap multiset. Returns the winner and the gap
/// in |statistic| to the runner-up on a different partition.
pub fn oracle_root_split(frame: &Frame, inbag: &[u32]) -> Option<(usize, OracleRule, f64)> {
    let mut rows = Vec::new();
    for (r, &m) in inbag.iter().enumerate() {
        for _ in 0..m {
            rows.push(r);
        }
    }
    let t: Vec<f64> = rows.iter().map(|&r| frame.time()[r]).collect();
    let s: Vec<bool> = rows.iter().map(|&r| frame.status()[r]).collect();
    let mut scored: Vec<(f64, usize, OracleRule, Vec<bool>)> = Vec::new();
    for v in 0..frame.p() {
        let x: Vec<f64> = rows.iter().map(|&r| frame.value(r, v)).collect();
        let mut vals = x.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        if frame.variable(v).kind.is_categorical() {
            let levels: Vec<usize> = vals.iter().map(|&l| l as usize).collect();
            let k = levels.len();
            for code in 0..(1u64 << (k - 1)) - 1 {
                let mut left_set = vec![levels[0]];
                for (i, &l) in levels[1..].iter().enumerate() {
                    if code & (1 << i) != 0 {
                        left_set.push(l);
                    }
                }
                let left: Vec<bool> = x.iter().map(|&l| left_set.contains(&(l as usize))).collect();
                let stat = oracle_logrank(&t, &s, &left).abs();
                scored.push((stat, v, OracleRule::Levels(left_set), left));
            }
        } else {
            for &c in &vals[..vals.len() - 1] {
                let left: Vec<bool> = x.iter().map(|&a| a <= c).collect();
                let stat = oracle_logrank(&t, &s, &left).abs();
                scored.push((stat, v, OracleRule::Threshold(c), left));
            }
        }
    }
    // candidates are in variable order; the first maximum wins, so a
    // partition reachable from two variables goes to the earlier one
    let best = scored
        .iter()
        .fold(None::<&(f64, usize, OracleRule, Vec<bool>)>, |b, c| match b {
            Some(b) if c.0 <= b.0 => Some(b),
            _ => Some(c),
        })?
        .clone();
    let runner = scored
        .iter()
        .filter(|c| c.3 != best.3)
        .map(|c| c.0)
        .fold(0.0, f64::max);
    Some((best.1, best.2, best.0 - runner))
}

/// Ensemble survival of one synthetic row, walking every tree by hand.
/// `value(v)` supplies the row's (possibly overwritten) cells.
pub fn oracle_predict(
    forest: &Forest,
    value: &dyn Fn(usize) -> f64,
    row_id: usize,
    grid: &[Option<usize>],
) -> Vec<f64> {
    let mut sums = vec![0.0; grid.len()];
    for (t, tree) in forest.trees.iter().enumerate() {
        let coin = forest.coin(t, row_id);
        let mut id = 0;
        let curve = loop {
            match &tree.nodes[id] {
                Node::Terminal { terminal, .. } => break &terminal.curve,
                Node::Split { split, .. } => {
                    let x = value(split.variable);
                    let go = if x.is_nan() {
                        None
                    } else {
                        match &split.rule {
                            SplitRule::Threshold { value } => Some(x <= *value),
                            SplitRule::Levels { left, seen } => {
                                let bit = 1u64 << (x as u64);
                                (seen & bit != 0).then_some(left & bit != 0)
                            }
                        }
                    };
                    let left = go.unwrap_or_else(|| coin.goes_left(id, split.donors_left, split.donors_right));
                    id = if left { split.left } else { split.right };
                }
            }
        };
        for (sum, g) in sums.iter_mut().zip(grid) {
            *sum += match g {
                None => 1.0,
                Some(k) => {
                    // last jump at or before k
                    let j = curve.index.partition_point(|&i| i as usize <= *k);
                    if j == 0 {
                        1.0
                    } else {
                        curve.survival[j - 1]
                    }
                }
            };
        }
    }
    sums.iter().map(|s| s / forest.ntree() as f64).collect()
}

/// Literal evaluation of the partial-dependence average: for each x, set
/// the variable to x in every population row, predict, and average.
pub fn oracle_partial(
    forest: &Forest,
    frame: &Frame,
    var: usize,
    xs: &[f64],
    grid: &[Option<usize>],
) -> Vec<Vec<f64>> {
    let rows: Vec<usize> = (0..frame.n()).filter(|&r| !frame.is_missing(r, var)).collect();
    xs.iter()
        .map(|&x| {
            let mut acc = vec![0.0; grid.len()];
            for &r in &rows {
                let value = |v: usize| if v == var { x } else { frame.value(r, v) };
                for (a, y) in acc.iter_mut().zip(oracle_predict(forest, &value, r, grid)) {
                    *a += y;
                }
            }
            acc.iter().map(|a| a / rows.len() as f64).collect()
        })
        .collect()
}

/// Assert two forests have identical structure, with thresholds on `var`
/// related by `map`.
pub fn same_topology(a: &Forest, b: &Forest, var: usize, map: impl Fn(f64) -> f64) {
    assert_eq!(a.inbag, b.inbag);
    for (ta, tb) in a.trees.iter().zip(&b.trees) {
        assert_eq!(ta.nodes.len(), tb.nodes.len());
        for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
            match (na, nb) {
                (Node::Split { depth: da, split: sa }, Node::Split { depth: db, split: sb }) => {
                    assert_eq!(da, db);
                    assert_eq!(
                        (sa.variable, sa.left, sa.right, sa.donors_left, sa.donors_right),
                        (sb.variable, sb.left, sb.right, sb.donors_left, sb.donors_right)
                    );
                    match (&sa.rule, &sb.rule) {
                        (SplitRule::Threshold { value: x }, SplitRule::Threshold { value: y }) => {
                            let want = if sa.variable == var { map(*x) } else { *x };
                            assert_eq!(want, *y);
                        }
                        (ra, rb) => assert_eq!(ra, rb),
                    }
                }
                (Node::Terminal { .. }, Node::Terminal { .. }) => assert_eq!(na, nb),
                _ => panic!("node kinds differ"),
            }
        }
    }
}
