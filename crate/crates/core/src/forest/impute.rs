use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Forest;
use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::par;
use crate::util::mix_keys;

const FINAL_TAG: u64 = 0x494D_5055;

/// Fill the missing (`NaN`) cells of one node's candidate column with
/// uniform draws from the node's non-missing values. Returns `None` when
/// every value is missing, in which case the candidate is skipped.
pub fn impute_at_node<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Option<Vec<f64>> {
    let donors: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if donors.is_empty() {
        return None;
    }
    Some(
        values
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    donors[rng.gen_range(0..donors.len())]
                } else {
                    v
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ImputedCell {
    pub row: usize,
    pub variable: String,
    pub value: f64,
    pub draws: usize,
}

#[derive(Debug, Clone)]
pub struct ImputationResult {
    /// Copy of the input with imputed cells filled.
    pub frame: Frame,
    pub imputed: Vec<ImputedCell>,
    /// Cells that never shared a terminal node with an OOB donor.
    pub unresolved: Vec<(usize, String)>,
}

/// Forest-level imputation of the training frame's missing cells. For each
/// tree where a row is in-bag, one value is drawn from the out-of-bag rows
/// sharing its terminal node; draws are averaged (continuous) or voted
/// (categorical, ties to the lowest level) across trees. The input frame is
/// not modified.
pub fn finalize_imputation(forest: &Forest, frame: &Frame) -> Result<ImputationResult> {
    if !forest.config.impute {
        return Err(Error::Config(
            "forest was grown without imputation".into(),
        ));
    }
    forest.check_training_frame(frame)?;
    let n = frame.n();
    let p = frame.p();
    let missing_vars: Vec<usize> = (0..p).filter(|&j| frame.missing_count(j) > 0).collect();

    // per tree: draws[(row, var)] for in-bag rows with missing cells
    let per_tree: Vec<Vec<(usize, usize, f64)>> = par::map_range(forest.ntree(), |t| {
        let tree = &forest.trees[t];
        let mut oob_in: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        for r in 0..n {
            if forest.is_oob(t, r) {
                let leaf = tree.route(|v| frame.value(r, v), forest.coin(t, r));
                oob_in[leaf].push(r);
            }
        }
        let mut draws = Vec::new();
        for (leaf, term) in tree.terminals() {
            let mut rows = term.members.clone();
            rows.dedup();
            for &r in &rows {
                let r = r as usize;
                for &v in &missing_vars {
                    if !frame.is_missing(r, v) {
                        continue;
                    }
                    let donors: Vec<f64> = oob_in[leaf]
                        .iter()
                        .map(|&d| frame.value(d, v))
                        .filter(|x| !x.is_nan())
                        .collect();
                    if donors.is_empty() {
                        continue;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(&[
                        forest.config.seed,
                        FINAL_TAG,
                        t as u64,
                        r as u64,
                        v as u64,
                    ]));
                    draws.push((r, v, donors[rng.gen_range(0..donors.len())]));
                }
            }
        }
        draws
    });

    let mut collected: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); p]; n];
    for tree_draws in per_tree {
        for (r, v, x) in tree_draws {
            collected[r][v].push(x);
        }
    }

    let mut columns: Vec<Vec<f64>> = frame.columns().to_vec();
    let mut imputed = Vec::new();
    let mut unresolved = Vec::new();
    for &v in &missing_vars {
        let spec = frame.variable(v);
        for r in 0..n {
            if !frame.is_missing(r, v) {
                continue;
            }
            let draws = &collected[r][v];
            if draws.is_empty() {
                unresolved.push((r, spec.name.clone()));
                continue;
            }
            let value = if spec.kind.is_categorical() {
                let mut counts = vec![0usize; spec.levels.len()];
                for &d in draws {
                    counts[d as usize] += 1;
                }
                let top = *counts.iter().max().expect("at least one level");
                counts.iter().position(|&c| c == top).expect("max exists") as f64
            } else {
                draws.iter().sum::<f64>() / draws.len() as f64
            };
            columns[v][r] = value;
            imputed.push(ImputedCell {
                row: r,
                variable: spec.name.clone(),
                value,
                draws: draws.len(),
            });
        }
    }

    Ok(ImputationResult {
        frame: Frame::new(frame.variables().to_vec(), columns, frame.response().clone())?,
        imputed,
        unresolved,
    })
}
