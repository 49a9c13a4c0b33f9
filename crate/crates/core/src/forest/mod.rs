//! Random survival forest: configuration, tree structure, growing and routing.

mod grow;
mod impute;
mod logrank;
mod serialize;

pub use grow::grow;
pub use impute::{finalize_imputation, impute_at_node, ImputationResult};
pub use logrank::logrank_statistic;
pub use serialize::{deserialize, serialize, serialize_gzip, FOREST_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::dataset::{Frame, Response, VariableSpec};
use crate::error::{Error, Result};
use crate::util::mix_keys;

const ROUTE_TAG: u64 = 0x524F_5554;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowConfig {
    pub ntree: usize,
    /// Candidate variables per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Random split points per candidate; 0 searches every split.
    pub nsplit: usize,
    /// Nodes with fewer than `2 * nodesize` in-bag members (counting
    /// bootstrap repeats) are not split.
    pub nodesize: usize,
    pub seed: u64,
    pub impute: bool,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self {
            ntree: 1000,
            mtry: None,
            nsplit: 10,
            nodesize: 3,
            seed: 42,
            impute: true,
        }
    }
}

impl GrowConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().ceil() as usize).max(1))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.ntree == 0 {
            return Err(Error::Config("ntree must be at least 1".into()));
        }
        if self.nodesize == 0 {
            return Err(Error::Config("nodesize must be at least 1".into()));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(Error::Config(format!(
                "mtry = {mtry} must lie in 1..={p}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SplitRule {
    /// Left when `value <= threshold`.
    Threshold { value: f64 },
    /// Left when the level bit is set in `left`. Levels absent from `seen`
    /// were not in the node at grow time and are routed at random.
    Levels { left: u64, seen: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub variable: usize,
    pub rule: SplitRule,
    pub left: usize,
    pub right: usize,
    /// In-node non-missing training members sent left / right. A row with a
    /// missing split value goes left with probability
    /// `donors_left / (donors_left + donors_right)`, which equals routing by a
    /// uniform draw from the in-node donors.
    pub donors_left: u32,
    pub donors_right: u32,
}

/// Terminal-node estimates at the forest grid indices where the node's
/// own curves jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalCurve {
    pub index: Vec<u32>,
    pub survival: Vec<f64>,
    pub cum_hazard: Vec<f64>,
    /// Sum of the cumulative hazard over the whole event-time grid.
    pub mortality: f64,
}

impl TerminalCurve {
    #[inline]
    fn jump_before(&self, k: usize) -> Option<usize> {
        let pos = self.index.partition_point(|&i| i as usize <= k);
        pos.checked_sub(1)
    }

    /// Survival at grid index `k`.
    #[inline]
    pub fn survival_at(&self, k: usize) -> f64 {
        self.jump_before(k).map_or(1.0, |j| self.survival[j])
    }

    #[inline]
    pub fn cum_hazard_at(&self, k: usize) -> f64 {
        self.jump_before(k).map_or(0.0, |j| self.cum_hazard[j])
    }

    pub fn dense_survival(&self, grid_len: usize) -> Vec<f64> {
        (0..grid_len).map(|k| self.survival_at(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    /// In-bag rows routed here, repeated by bootstrap multiplicity.
    pub members: Vec<u32>,
    pub curve: TerminalCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split { depth: u32, split: Split },
    Terminal { depth: u32, terminal: Terminal },
}

impl Node {
    pub fn depth(&self) -> u32 {
        match self {
            Node::Split { depth, .. } | Node::Terminal { depth, .. } => *depth,
        }
    }

    pub fn split(&self) -> Option<&Split> {
        match self {
            Node::Split { split, .. } => Some(split),
            Node::Terminal { .. } => None,
        }
    }

    pub fn terminal(&self) -> Option<&Terminal> {
        match self {
            Node::Terminal { terminal, .. } => Some(terminal),
            Node::Split { .. } => None,
        }
    }
}

/// Deterministic per-(tree, row, node) coin for rows whose split value is
/// missing or unseen. Keying on the node makes every routing decision a
/// pure function, so batch and row-at-a-time evaluation agree exactly.
#[derive(Debug, Clone, Copy)]
pub struct Coin {
    key: u64,
}

impl Coin {
    pub fn new(seed: u64, tree: usize, row: usize) -> Self {
        Self {
            key: mix_keys(&[seed, ROUTE_TAG, tree as u64, row as u64]),
        }
    }

    #[inline]
    pub fn goes_left(&self, node: usize, donors_left: u32, donors_right: u32) -> bool {
        let u = (mix_keys(&[self.key, node as u64]) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u * f64::from(donors_left + donors_right) < f64::from(donors_left)
    }
}

/// Which way a concrete value goes at a split. `None` means the value is
/// missing or an unseen level and the coin decides.
#[inline]
pub fn direction(rule: &SplitRule, value: f64) -> Option<bool> {
    if value.is_nan() {
        return None;
    }
    match rule {
        SplitRule::Threshold { value: c } => Some(value <= *c),
        SplitRule::Levels { left, seen } => {
            let level = value as u64;
            if level >= 64 || seen & (1u64 << level) == 0 {
                None
            } else {
                Some(left & (1u64 << level) != 0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the terminal node reached by a row.
    #[inline]
    pub fn route(&self, value: impl Fn(usize) -> f64, coin: Coin) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Terminal { .. } => return id,
                Node::Split { split, .. } => {
                    let left = direction(&split.rule, value(split.variable)).unwrap_or_else(|| {
                        coin.goes_left(id, split.donors_left, split.donors_right)
                    });
                    id = if left { split.left } else { split.right };
                }
            }
        }
    }

    pub fn terminal_curve(&self, id: usize) -> &TerminalCurve {
        &self.nodes[id]
            .terminal()
            .expect("route ends at a terminal")
            .curve
    }

    /// Deepest terminal depth.
    pub fn max_depth(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| n.terminal().is_some())
            .map(Node::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn terminals(&self) -> impl Iterator<Item = (usize, &Terminal)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.terminal().map(|t| (i, t)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub config: GrowConfig,
    pub variables: Vec<VariableSpec>,
    pub event_times: Vec<f64>,
    pub response: Response,
    pub trees: Vec<Tree>,
    /// Bootstrap multiplicity per tree per training row.
    pub inbag: Vec<Vec<u32>>,
}

impl Forest {
    pub fn ntree(&self) -> usize {
        self.trees.len()
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.variables.len()
    }

    pub fn mtry(&self) -> usize {
        self.config.resolved_mtry(self.p())
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
            Error::Validation(format!(
                "unknown variable '{name}'; known variables: {}",
                known.join(", ")
            ))
        })
    }

    pub fn coin(&self, tree: usize, row: usize) -> Coin {
        Coin::new(self.config.seed, tree, row)
    }

    pub fn is_oob(&self, tree: usize, row: usize) -> bool {
        self.inbag[tree][row] == 0
    }

    /// Forest made of the first `b` trees.
    pub fn truncate(&self, b: usize) -> Forest {
        let b = b.min(self.ntree());
        Forest {
            config: GrowConfig {
                ntree: b,
                ..self.config.clone()
            },
            variables: self.variables.clone(),
            event_times: self.event_times.clone(),
            response: self.response.clone(),
            trees: self.trees[..b].to_vec(),
            inbag: self.inbag[..b].to_vec(),
        }
    }

    /// Largest grid index whose event time does not exceed `t`; `None`
    /// before the first event time.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        self.event_times.partition_point(|&s| s <= t).checked_sub(1)
    }

    /// Ensemble survival of one row at the given grid indices, averaged over
    /// all trees in order. `None` indices (before the first event) give 1.
    pub fn predict_row_at(
        &self,
        value: impl Fn(usize) -> f64 + Copy,
        row_id: usize,
        grid: &[Option<usize>],
    ) -> Vec<f64> {
        let mut sums = vec![0.0; grid.len()];
        for (t, tree) in self.trees.iter().enumerate() {
            let curve = tree.terminal_curve(tree.route(value, self.coin(t, row_id)));
            for (s, g) in sums.iter_mut().zip(grid) {
                *s += g.map_or(1.0, |k| curve.survival_at(k));
            }
        }
        let nt = self.ntree() as f64;
        sums.iter().map(|s| s / nt).collect()
    }

    /// Check that `frame` has this forest's variables, in order and with
    /// compatible kinds.
    pub fn check_frame(&self, frame: &Frame) -> Result<()> {
        if frame.p() != self.p() {
            return Err(Error::Validation(format!(
                "frame has {} variables, forest expects {}",
                frame.p(),
                self.p()
            )));
        }
        for (a, b) in frame.variables().iter().zip(&self.variables) {
            if a.name != b.name || a.kind != b.kind {
                return Err(Error::Validation(format!(
                    "frame variable '{}' does not match forest variable '{}'",
                    a.name, b.name
                )));
            }
        }
        Ok(())
    }

    /// Check that `frame` is the frame the forest was grown on.
    pub fn check_training_frame(&self, frame: &Frame) -> Result<()> {
        self.check_frame(frame)?;
        if frame.response() != &self.response {
            return Err(Error::Validation(
                "frame response differs from the forest's training response".into(),
            ));
        }
        Ok(())
    }
}

/// Reorder and relabel a new frame's columns to match the forest. Columns
/// are matched by name; categorical labels are mapped onto the forest's
/// level indices, and labels the forest never saw get indices past the end
/// (they route at random). Returns the aligned frame and the number of
/// cells with unseen labels.
pub fn align_frame(forest: &Forest, frame: &Frame) -> Result<(Frame, usize)> {
    let mut variables = Vec::with_capacity(forest.p());
    let mut columns = Vec::with_capacity(forest.p());
    let mut unseen = 0;
    for spec in &forest.variables {
        let j = frame.require(&spec.name)?;
        let src = frame.variable(j);
        let col = frame.column(j);
        if spec.kind.is_categorical() != src.kind.is_categorical() {
            return Err(Error::Validation(format!(
                "variable '{}' is {:?} in the forest but {:?} in the data",
                spec.name, spec.kind, src.kind
            )));
        }
        let mut out_spec = spec.clone();
        let values = if spec.kind.is_categorical() {
            let mut map = Vec::with_capacity(src.levels.len());
            for label in &src.levels {
                match out_spec.levels.iter().position(|l| l == label) {
                    Some(k) => map.push(k),
                    None => {
                        out_spec.levels.push(label.clone());
                        map.push(out_spec.levels.len() - 1);
                    }
                }
            }
            let known = spec.levels.len();
            col.iter()
                .map(|&v| {
                    if v.is_nan() {
                        v
                    } else {
                        let k = map[v as usize];
                        if k >= known {
                            unseen += 1;
                        }
                        k as f64
                    }
                })
                .collect()
        } else {
            col.to_vec()
        };
        variables.push(out_spec);
        columns.push(values);
    }
    Ok((Frame::new(variables, columns, frame.response().clone())?, unseen))
}
