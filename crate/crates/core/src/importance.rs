//! Permutation importance, minimal depth, and maximal-subtree interactions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::forest::{Forest, Node, Tree};
use crate::inference::concordance_error;
use crate::par;
use crate::util::mix_keys;

const VIMP_TAG: u64 = 0x5649_4D50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VimpEntry {
    pub variable: String,
    pub vimp: f64,
    pub rank: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VimpTable {
    pub baseline: f64,
    /// One entry per variable, in forest variable order.
    pub entries: Vec<VimpEntry>,
}

impl VimpTable {
    pub fn get(&self, name: &str) -> Option<&VimpEntry> {
        self.entries.iter().find(|e| e.variable == name)
    }

    /// Entries sorted by rank.
    pub fn ranked(&self) -> Vec<&VimpEntry> {
        let mut out: Vec<&VimpEntry> = self.entries.iter().collect();
        out.sort_by_key(|e| e.rank);
        out
    }
}

/// OOB error with column `permuted` replaced by a seeded shuffle of itself.
/// `None` gives the unpermuted baseline.
fn oob_error_with(forest: &Forest, frame: &Frame, permuted: Option<usize>, seed: u64) -> Result<f64> {
    let n = frame.n();
    let shuffled: Option<(usize, Vec<f64>)> = permuted.map(|v| {
        let mut vals = frame.column(v).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(&[seed, VIMP_TAG, v as u64]));
        vals.shuffle(&mut rng);
        (v, vals)
    });
    let per_row: Vec<(f64, usize)> = par::map_range(n, |r| {
        let mut sum = 0.0;
        let mut count = 0;
        for (t, tree) in forest.trees.iter().enumerate() {
            if !forest.is_oob(t, r) {
                continue;
            }
            let leaf = match &shuffled {
                Some((v, vals)) => tree.route(
                    |u| if u == *v { vals[r] } else { frame.value(r, u) },
                    forest.coin(t, r),
                ),
                None => tree.route(|u| frame.value(r, u), forest.coin(t, r)),
            };
            sum += tree.terminal_curve(leaf).mortality;
            count += 1;
        }
        (sum, count)
    });
    let rows: Vec<usize> = (0..n).filter(|&r| per_row[r].1 > 0).collect();
    let m: Vec<f64> = rows.iter().map(|&r| per_row[r].0 / per_row[r].1 as f64).collect();
    let t: Vec<f64> = rows.iter().map(|&r| frame.time()[r]).collect();
    let s: Vec<bool> = rows.iter().map(|&r| frame.status()[r]).collect();
    concordance_error(&m, &t, &s)
}

/// Permutation importance: increase in OOB concordance error when a
/// variable's column is shuffled across rows (one permutation per variable,
/// seeded by `(seed, variable)`) and every row is re-predicted by its OOB
/// trees. Negative values are kept.
pub fn vimp(forest: &Forest, frame: &Frame, seed: u64) -> Result<VimpTable> {
    forest.check_training_frame(frame)?;
    let baseline = oob_error_with(forest, frame, None, seed)?;
    let mut values = Vec::with_capacity(forest.p());
    for v in 0..forest.p() {
        values.push(oob_error_with(forest, frame, Some(v), seed)? - baseline);
    }
    let ranks = ranks_by(&values, |a, b| b.total_cmp(a));
    Ok(VimpTable {
        baseline,
        entries: forest
            .variables
            .iter()
            .zip(values)
            .zip(ranks)
            .map(|((spec, vimp), rank)| VimpEntry {
                variable: spec.name.clone(),
                vimp,
                rank,
                positive: vimp > 0.0,
            })
            .collect(),
    })
}

/// 1-based ranks under `cmp`, ties broken by position.
fn ranks_by(values: &[f64], cmp: impl Fn(&f64, &f64) -> std::cmp::Ordering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| cmp(&values[a], &values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (k, &i) in order.iter().enumerate() {
        ranks[i] = k + 1;
    }
    ranks
}

/// Depth of each variable's shallowest split in a tree, `None` if unused.
pub fn first_split_depths(tree: &Tree, p: usize) -> Vec<Option<u32>> {
    let mut out: Vec<Option<u32>> = vec![None; p];
    for node in &tree.nodes {
        if let Node::Split { depth, split } = node {
            let slot = &mut out[split.variable];
            if slot.is_none_or(|d| *depth < d) {
                *slot = Some(*depth);
            }
        }
    }
    out
}

/// Per-tree minimal depth with the never-split penalty applied: a variable
/// that does not split in a tree gets that tree's deepest terminal depth
/// plus one. Indexed `[tree][variable]`.
pub fn tree_minimal_depths(forest: &Forest) -> Vec<Vec<f64>> {
    forest
        .trees
        .iter()
        .map(|tree| {
            let penalty = f64::from(tree.max_depth() + 1);
            first_split_depths(tree, forest.p())
                .into_iter()
                .map(|d| d.map_or(penalty, f64::from))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthEntry {
    pub variable: String,
    pub depth: f64,
    pub rank: usize,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthTable {
    /// One entry per variable, in forest variable order.
    pub entries: Vec<DepthEntry>,
    pub threshold: f64,
    pub model_size: usize,
    pub ntree: usize,
    pub mtry: usize,
    pub nsplit: usize,
    pub nodesize: usize,
}

impl DepthTable {
    pub fn get(&self, name: &str) -> Option<&DepthEntry> {
        self.entries.iter().find(|e| e.variable == name)
    }

    pub fn ranked(&self) -> Vec<&DepthEntry> {
        let mut out: Vec<&DepthEntry> = self.entries.iter().collect();
        out.sort_by_key(|e| e.rank);
        out
    }
}

/// Mean minimal depth of a noise variable along a root-to-terminal path of
/// `length` splits, when each split picks the variable with probability
/// `1/p`; a path that never picks it contributes `length`.
pub fn null_path_depth(length: u32, p: usize) -> f64 {
    let q = 1.0 - 1.0 / p as f64;
    // sum over d < length of P(no pick among the first d+1 splits)
    (1..=length).map(|k| q.powi(k as i32)).sum()
}

/// Forest-averaged minimal depth with its selection threshold. The
/// threshold is the mean of the null minimal-depth distribution over the
/// forest's paths: every terminal node contributes
/// [`null_path_depth`] of its depth, and the contributions are averaged.
pub fn minimal_depth(forest: &Forest) -> DepthTable {
    let p = forest.p();
    let ntree = forest.ntree() as f64;
    let per_tree = tree_minimal_depths(forest);
    let depths: Vec<f64> = (0..p)
        .map(|v| per_tree.iter().map(|row| row[v]).sum::<f64>() / ntree)
        .collect();

    let mut leaves_at: Vec<f64> = Vec::new();
    for tree in &forest.trees {
        for (id, _) in tree.terminals() {
            let d = tree.nodes[id].depth() as usize;
            if leaves_at.len() <= d {
                leaves_at.resize(d + 1, 0.0);
            }
            leaves_at[d] += 1.0;
        }
    }
    let total: f64 = leaves_at.iter().sum();
    let threshold = leaves_at
        .iter()
        .enumerate()
        .map(|(d, &w)| w * null_path_depth(d as u32, p))
        .sum::<f64>()
        / total;

    let ranks = ranks_by(&depths, |a, b| a.total_cmp(b));
    let entries: Vec<DepthEntry> = forest
        .variables
        .iter()
        .zip(&depths)
        .zip(ranks)
        .map(|((spec, &depth), rank)| DepthEntry {
            variable: spec.name.clone(),
            depth,
            rank,
            selected: depth <= threshold,
        })
        .collect();
    let model_size = entries.iter().filter(|e| e.selected).count();
    DepthTable {
        entries,
        threshold,
        model_size,
        ntree: forest.ntree(),
        mtry: forest.mtry(),
        nsplit: forest.config.nsplit,
        nodesize: forest.config.nodesize,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankComparison {
    pub variable: String,
    pub depth: f64,
    pub vimp: f64,
    pub depth_rank: usize,
    pub vimp_rank: usize,
}

/// Join minimal-depth and VIMP ranks, ordered by depth rank.
pub fn depth_vimp_compare(depth: &DepthTable, vimp: &VimpTable) -> Result<Vec<RankComparison>> {
    let mut a: Vec<&str> = depth.entries.iter().map(|e| e.variable.as_str()).collect();
    let mut b: Vec<&str> = vimp.entries.iter().map(|e| e.variable.as_str()).collect();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::Validation(
            "depth and VIMP tables cover different variables".into(),
        ));
    }
    let mut out: Vec<RankComparison> = depth
        .entries
        .iter()
        .map(|d| {
            let v = vimp.get(&d.variable).expect("same variable sets");
            RankComparison {
                variable: d.variable.clone(),
                depth: d.depth,
                vimp: v.vimp,
                depth_rank: d.rank,
                vimp_rank: v.rank,
            }
        })
        .collect();
    out.sort_by_key(|r| r.depth_rank);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionMatrix {
    /// Row/column labels, sorted by minimal depth.
    pub variables: Vec<String>,
    /// `values[i][j]`: normalized minimal depth of `j` inside the maximal
    /// subtrees of `i`; the diagonal is `i`'s own normalized minimal depth.
    pub values: Vec<Vec<f64>>,
}

impl InteractionMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == row)?;
        let j = self.variables.iter().position(|v| v == col)?;
        Some(self.values[i][j])
    }
}

/// Shallowest absolute depth of a split on each variable within the
/// subtree rooted at `root`.
fn subtree_first_depths(tree: &Tree, root: usize, p: usize) -> Vec<Option<u32>> {
    let mut out: Vec<Option<u32>> = vec![None; p];
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if let Node::Split { depth, split } = &tree.nodes[id] {
            let slot = &mut out[split.variable];
            if slot.is_none_or(|d| *depth < d) {
                *slot = Some(*depth);
            }
            stack.push(split.left);
            stack.push(split.right);
        }
    }
    out
}

/// Roots of the maximal subtrees of each variable: split nodes on `v` with
/// no ancestor splitting on `v`.
fn maximal_subtree_roots(tree: &Tree, p: usize) -> Vec<Vec<usize>> {
    fn walk(tree: &Tree, id: usize, above: &mut [bool], roots: &mut [Vec<usize>]) {
        if let Node::Split { split, .. } = &tree.nodes[id] {
            let v = split.variable;
            let fresh = !above[v];
            if fresh {
                roots[v].push(id);
                above[v] = true;
            }
            walk(tree, split.left, above, roots);
            walk(tree, split.right, above, roots);
            if fresh {
                above[v] = false;
            }
        }
    }
    let mut roots = vec![Vec::new(); p];
    walk(tree, 0, &mut vec![false; p], &mut roots);
    roots
}

/// Pairwise maximal-subtree interaction matrix.
///
/// Per tree `t` with deepest terminal depth `D`, depths are normalized by
/// `D + 1`, the never-split penalty, so values lie in `[0, 1]`:
///
/// * diagonal `(i, i)`: `i`'s minimal depth in `t` (penalty if unused);
/// * `(i, j)`: the absolute depth of `j`'s shallowest split inside any
///   maximal subtree of `i` (penalty if `j` splits in none of them); 1 if
///   `i` never splits in `t`.
///
/// Entries are averaged over all trees. A split on `j` inside a maximal
/// subtree of `i` lies strictly below that subtree's root, so every entry
/// of row `i` is at least the diagonal.
pub fn interactions(forest: &Forest) -> InteractionMatrix {
    let p = forest.p();
    let ntree = forest.ntree() as f64;
    let per_tree: Vec<Vec<Vec<f64>>> = par::map_range(forest.ntree(), |t| {
        let tree = &forest.trees[t];
        let ceiling = f64::from(tree.max_depth() + 1);
        let first = first_split_depths(tree, p);
        let roots = maximal_subtree_roots(tree, p);
        let mut m = vec![vec![1.0; p]; p];
        for i in 0..p {
            m[i][i] = first[i].map_or(ceiling, f64::from) / ceiling;
            if roots[i].is_empty() {
                continue;
            }
            let mut best: Vec<Option<u32>> = vec![None; p];
            for &root in &roots[i] {
                for (b, d) in best.iter_mut().zip(subtree_first_depths(tree, root, p)) {
                    if let Some(d) = d {
                        *b = Some(b.map_or(d, |x| x.min(d)));
                    }
                }
            }
            for j in 0..p {
                if j != i {
                    m[i][j] = best[j].map_or(ceiling, f64::from) / ceiling;
                }
            }
        }
        m
    });
    let mut values = vec![vec![0.0; p]; p];
    for m in &per_tree {
        for i in 0..p {
            for j in 0..p {
                values[i][j] += m[i][j];
            }
        }
    }
    values
        .iter_mut()
        .flatten()
        .for_each(|x| *x /= ntree);

    // order rows and columns by minimal depth
    let depth = minimal_depth(forest);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by_key(|&v| depth.entries[v].rank);
    InteractionMatrix {
        variables: order.iter().map(|&v| forest.variables[v].name.clone()).collect(),
        values: order
            .iter()
            .map(|&i| order.iter().map(|&j| values[i][j]).collect())
            .collect(),
    }
}
