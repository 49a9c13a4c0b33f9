//! Ensemble prediction, concordance error and grouped survival summaries.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{Frame, GroupAssignment};
use crate::error::{Error, Result};
use crate::forest::{align_frame, Forest};
use crate::km::z_for_level;
use crate::par;
use crate::util::{mix_keys, quantile_sorted};

const BOOT_TAG: u64 = 0x424F_4F54;

/// Per-row ensemble survival over the forest's event-time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSurvival {
    pub event_times: Vec<f64>,
    /// `None` for rows no tree could predict (e.g. never out-of-bag).
    pub curves: Vec<Option<Vec<f64>>>,
    /// Mean over trees of the terminal cumulative hazard summed over the grid.
    pub mortality: Vec<Option<f64>>,
    pub oob: bool,
    pub time: Vec<f64>,
    pub status: Vec<bool>,
    /// Trees contributing to each row.
    pub tree_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl EnsembleSurvival {
    pub fn n(&self) -> usize {
        self.curves.len()
    }

    /// Right-continuous survival of `row` at time `t`.
    pub fn survival_at(&self, row: usize, t: f64) -> Option<f64> {
        let k = self.event_times.partition_point(|&s| s <= t);
        self.curves[row]
            .as_ref()
            .map(|c| if k == 0 { 1.0 } else { c[k - 1] })
    }

    /// Concordance error over rows with a prediction.
    pub fn error(&self) -> Result<f64> {
        let rows: Vec<usize> = (0..self.n()).filter(|&r| self.mortality[r].is_some()).collect();
        let m: Vec<f64> = rows.iter().map(|&r| self.mortality[r].unwrap()).collect();
        let t: Vec<f64> = rows.iter().map(|&r| self.time[r]).collect();
        let s: Vec<bool> = rows.iter().map(|&r| self.status[r]).collect();
        concordance_error(&m, &t, &s)
    }
}

/// Which trees vote for a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Only trees where the row was out-of-bag.
    OutOfBag,
    /// Every tree.
    All,
}

/// Ensemble over `frame`, whose columns must already match the forest.
/// Rows for which `usable(row)` is false get no prediction.
pub(crate) fn ensemble(
    forest: &Forest,
    frame: &Frame,
    scope: Scope,
    usable: impl Fn(usize) -> bool + Sync,
) -> EnsembleSurvival {
    let g = forest.event_times.len();
    let rows: Vec<(Option<Vec<f64>>, Option<f64>, usize)> = par::map_range(frame.n(), |r| {
        if !usable(r) {
            return (None, None, 0);
        }
        let mut sums = vec![0.0; g];
        let mut mort = 0.0;
        let mut count = 0usize;
        for (t, tree) in forest.trees.iter().enumerate() {
            if scope == Scope::OutOfBag && !forest.is_oob(t, r) {
                continue;
            }
            let curve = tree.terminal_curve(tree.route(|v| frame.value(r, v), forest.coin(t, r)));
            let mut level = 1.0;
            let mut j = 0;
            for (k, s) in sums.iter_mut().enumerate() {
                if j < curve.index.len() && curve.index[j] as usize == k {
                    level = curve.survival[j];
                    j += 1;
                }
                *s += level;
            }
            mort += curve.mortality;
            count += 1;
        }
        if count == 0 {
            return (None, None, 0);
        }
        let c = count as f64;
        sums.iter_mut().for_each(|s| *s /= c);
        (Some(sums), Some(mort / c), count)
    });

    let mut out = EnsembleSurvival {
        event_times: forest.event_times.clone(),
        curves: Vec::with_capacity(rows.len()),
        mortality: Vec::with_capacity(rows.len()),
        oob: scope == Scope::OutOfBag,
        time: frame.time().to_vec(),
        status: frame.status().to_vec(),
        tree_counts: Vec::with_capacity(rows.len()),
        warnings: Vec::new(),
    };
    for (curve, mort, count) in rows {
        out.curves.push(curve);
        out.mortality.push(mort);
        out.tree_counts.push(count);
    }
    out
}

/// Out-of-bag ensemble survival for the training frame.
pub fn predict_oob(forest: &Forest, frame: &Frame) -> Result<EnsembleSurvival> {
    forest.check_training_frame(frame)?;
    let mut out = ensemble(forest, frame, Scope::OutOfBag, |_| true);
    let never: Vec<usize> = (0..out.n()).filter(|&r| out.curves[r].is_none()).collect();
    if !never.is_empty() {
        out.warnings.push(format!(
            "{} rows were in-bag in every tree and have no OOB prediction",
            never.len()
        ));
    }
    Ok(out)
}

/// Full-ensemble survival for the training frame (every tree votes).
pub fn predict_inbag(forest: &Forest, frame: &Frame) -> Result<EnsembleSurvival> {
    forest.check_frame(frame)?;
    Ok(ensemble(forest, frame, Scope::All, |_| true))
}

/// Predict new data. Columns are matched to the forest by name. With
/// `impute`, missing values are routed by draws from the in-node training
/// donors; without it, rows with any missing predictor are skipped.
pub fn predict_test(forest: &Forest, newdata: &Frame, impute: bool) -> Result<EnsembleSurvival> {
    let (frame, unseen) = align_frame(forest, newdata)?;
    let p = frame.p();
    let complete = |r: usize| (0..p).all(|v| !frame.is_missing(r, v));
    let mut out = if impute {
        ensemble(forest, &frame, Scope::All, |_| true)
    } else {
        ensemble(forest, &frame, Scope::All, complete)
    };
    out.oob = false;
    if unseen > 0 {
        out.warnings.push(format!(
            "{unseen} cells hold categorical levels unseen in training; routed at random"
        ));
    }
    let skipped = out.curves.iter().filter(|c| c.is_none()).count();
    if skipped > 0 {
        out.warnings
            .push(format!("{skipped} rows with missing values skipped (imputation off)"));
    }
    Ok(out)
}

/// Harrell-type concordance error `1 - C` of risk scores against censored
/// times. A pair is usable when the shorter time is an event; it is
/// concordant when that member has the higher score, and a score tie counts
/// one half.
pub fn concordance_error(mortality: &[f64], times: &[f64], status: &[bool]) -> Result<f64> {
    let n = mortality.len();
    if times.len() != n || status.len() != n {
        return Err(Error::Validation("score, time and status lengths differ".into()));
    }
    let mut pairs = 0.0;
    let mut concordant = 0.0;
    for i in 0..n {
        if !status[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                pairs += 1.0;
                if mortality[i] > mortality[j] {
                    concordant += 1.0;
                } else if mortality[i] == mortality[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if pairs == 0.0 {
        return Err(Error::Domain("no permissible pairs for concordance".into()));
    }
    Ok(1.0 - concordant / pairs)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorCurve {
    pub tree_counts: Vec<usize>,
    /// OOB concordance error of the first `b` trees; `NaN` when no
    /// permissible pair exists yet.
    pub error: Vec<f64>,
}

/// OOB error as trees are added one at a time.
pub fn error_curve(forest: &Forest, frame: &Frame) -> Result<ErrorCurve> {
    forest.check_training_frame(frame)?;
    let n = frame.n();
    let ntree = forest.ntree();
    // per row: (tree, terminal mortality) for its OOB trees, in tree order
    let per_row: Vec<Vec<(usize, f64)>> = par::map_range(n, |r| {
        (0..ntree)
            .filter(|&t| forest.is_oob(t, r))
            .map(|t| {
                let tree = &forest.trees[t];
                let leaf = tree.route(|v| frame.value(r, v), forest.coin(t, r));
                (t, tree.terminal_curve(leaf).mortality)
            })
            .collect()
    });
    let mut by_tree: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ntree];
    for (r, list) in per_row.iter().enumerate() {
        for &(t, m) in list {
            by_tree[t].push((r, m));
        }
    }

    let time = frame.time();
    let status = frame.status();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut error = Vec::with_capacity(ntree);
    for list in &by_tree {
        for &(r, m) in list {
            sums[r] += m;
            counts[r] += 1;
        }
        let rows: Vec<usize> = (0..n).filter(|&r| counts[r] > 0).collect();
        let m: Vec<f64> = rows.iter().map(|&r| sums[r] / counts[r] as f64).collect();
        let t: Vec<f64> = rows.iter().map(|&r| time[r]).collect();
        let s: Vec<bool> = rows.iter().map(|&r| status[r]).collect();
        error.push(concordance_error(&m, &t, &s).unwrap_or(f64::NAN));
    }
    Ok(ErrorCurve {
        tree_counts: (1..=ntree).collect(),
        error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupedCurve {
    pub group: String,
    pub times: Vec<f64>,
    pub median: Vec<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupedSurvival {
    pub curves: Vec<GroupedCurve>,
    pub warnings: Vec<String>,
}

fn median_curve(curves: &[&Vec<f64>], rows: &[usize], g: usize, buf: &mut Vec<f64>) -> Vec<f64> {
    (0..g)
        .map(|k| {
            buf.clear();
            buf.extend(rows.iter().map(|&r| curves[r][k]));
            buf.sort_by(f64::total_cmp);
            quantile_sorted(buf, 0.5)
        })
        .collect()
}

/// Per-group median survival with a percentile bootstrap band.
/// `bs_samples` defaults to the group size.
pub fn grouped_survival(
    ens: &EnsembleSurvival,
    by: &GroupAssignment,
    conf_level: f64,
    bs_samples: Option<usize>,
    seed: u64,
) -> Result<GroupedSurvival> {
    z_for_level(conf_level)?;
    if by.membership.len() != ens.n() {
        return Err(Error::Validation(format!(
            "group assignment covers {} rows, ensemble has {}",
            by.membership.len(),
            ens.n()
        )));
    }
    let g = ens.event_times.len();
    let alpha = (1.0 - conf_level) / 2.0;
    let mut out = GroupedSurvival {
        curves: Vec::new(),
        warnings: Vec::new(),
    };
    for (gi, members) in by.members().into_iter().enumerate() {
        let label = by.labels[gi].clone();
        let curves: Vec<&Vec<f64>> = members.iter().filter_map(|&r| ens.curves[r].as_ref()).collect();
        if curves.is_empty() {
            out.warnings.push(format!("group '{label}' has no predicted rows; omitted"));
            continue;
        }
        let m = curves.len();
        let all: Vec<usize> = (0..m).collect();
        let mut buf = Vec::with_capacity(m);
        let median = median_curve(&curves, &all, g, &mut buf);
        let (lo, hi) = if m < 2 {
            out.warnings
                .push(format!("group '{label}' has fewer than 2 rows; band omitted"));
            (None, None)
        } else {
            let b = bs_samples.unwrap_or(m).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(&[seed, BOOT_TAG, gi as u64]));
            let mut reps: Vec<Vec<f64>> = vec![Vec::with_capacity(b); g];
            let mut pick = vec![0usize; m];
            for _ in 0..b {
                pick.iter_mut().for_each(|x| *x = rng.gen_range(0..m));
                let med = median_curve(&curves, &pick, g, &mut buf);
                for (k, v) in med.into_iter().enumerate() {
                    reps[k].push(v);
                }
            }
            let mut lo = Vec::with_capacity(g);
            let mut hi = Vec::with_capacity(g);
            for mut r in reps {
                r.sort_by(f64::total_cmp);
                lo.push(quantile_sorted(&r, alpha));
                hi.push(quantile_sorted(&r, 1.0 - alpha));
            }
            (Some(lo), Some(hi))
        };
        out.curves.push(GroupedCurve {
            group: label,
            times: ens.event_times.clone(),
            median,
            lo,
            hi,
            rows: m,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking_has_zero_error() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let s = [true; 4];
        let m = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(concordance_error(&m, &t, &s).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_give_half() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let s = [true, false, true, false];
        assert_eq!(concordance_error(&[1.0; 4], &t, &s).unwrap(), 0.5);
    }

    #[test]
    fn no_pairs_is_error() {
        let t = [1.0, 2.0];
        let s = [false, false];
        assert!(concordance_error(&[1.0, 2.0], &t, &s).is_err());
    }
}
