use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::impute::impute_at_node;
use super::logrank::logrank_sorted;
use super::{direction, Forest, GrowConfig, Node, Split, SplitRule, Terminal, TerminalCurve, Tree};
use crate::dataset::{Frame, VariableKind};
use crate::error::{Error, Result};
use crate::par;
use crate::util::mix_keys;

const GROW_TAG: u64 = 0x4752_4F57;
/// Exhaustive categorical search is capped at this many in-node levels;
/// above it a fixed number of random bipartitions is drawn instead.
const MAX_EXHAUSTIVE_LEVELS: u32 = 16;
const FALLBACK_BIPARTITIONS: usize = 256;

/// Grow a forest. Each tree draws from its own ChaCha8 stream seeded by
/// `(seed, tree index)`, so the result does not depend on thread count.
pub fn grow(frame: &Frame, config: &GrowConfig) -> Result<Forest> {
    let n = frame.n();
    let p = frame.p();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 rows, got {n}")));
    }
    if p == 0 {
        return Err(Error::Domain("no predictor variables".into()));
    }
    if frame.response().events() == 0 {
        return Err(Error::Domain("training data has no events".into()));
    }
    config.validate(p)?;
    for spec in frame.variables() {
        if spec.kind.is_categorical() && spec.levels.len() > 64 {
            return Err(Error::Config(format!(
                "variable '{}' has {} levels; at most 64 are supported",
                spec.name,
                spec.levels.len()
            )));
        }
    }
    if !config.impute {
        if let Some(j) = (0..p).find(|&j| frame.missing_count(j) > 0) {
            return Err(Error::Validation(format!(
                "variable '{}' has missing values; enable imputation",
                frame.variable(j).name
            )));
        }
    }

    let mut event_times: Vec<f64> = frame
        .time()
        .iter()
        .zip(frame.status())
        .filter_map(|(&t, &s)| s.then_some(t))
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut time_order: Vec<u32> = (0..n as u32).collect();
    time_order.sort_by(|&a, &b| frame.time()[a as usize].total_cmp(&frame.time()[b as usize]));

    let mut config = config.clone();
    config.mtry = Some(config.resolved_mtry(p));
    let shared = Shared {
        frame,
        config: &config,
        grid: &event_times,
        time_order: &time_order,
    };
    let grown: Vec<(Tree, Vec<u32>)> = par::map_range(config.ntree, |t| shared.grow_tree(t));
    let (trees, inbag) = grown.into_iter().unzip();

    Ok(Forest {
        config,
        variables: frame.variables().to_vec(),
        event_times,
        response: frame.response().clone(),
        trees,
        inbag,
    })
}

struct Shared<'a> {
    frame: &'a Frame,
    config: &'a GrowConfig,
    grid: &'a [f64],
    time_order: &'a [u32],
}

impl Shared<'_> {
    fn grow_tree(&self, t: usize) -> (Tree, Vec<u32>) {
        let n = self.frame.n();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(&[self.config.seed, GROW_TAG, t as u64]));
        let mut inbag = vec![0u32; n];
        for _ in 0..n {
            inbag[rng.gen_range(0..n)] += 1;
        }
        let members: Vec<u32> = self
            .time_order
            .iter()
            .flat_map(|&r| std::iter::repeat_n(r, inbag[r as usize] as usize))
            .collect();
        let mut builder = Builder {
            shared: self,
            rng,
            nodes: Vec::new(),
        };
        builder.build(members, 0);
        (Tree { nodes: builder.nodes }, inbag)
    }
}

struct Candidate {
    variable: usize,
    rule: SplitRule,
    stat: f64,
}

struct Builder<'s, 'a> {
    shared: &'s Shared<'a>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn build(&mut self, members: Vec<u32>, depth: u32) -> usize {
        let status = self.shared.frame.status();
        let has_event = members.iter().any(|&r| status[r as usize]);
        // only nodes with at least twice nodesize in-bag members are split
        if members.len() < 2 * self.shared.config.nodesize || !has_event {
            return self.terminal(members, depth);
        }
        let Some(best) = self.best_split(&members) else {
            return self.terminal(members, depth);
        };
        let (left, right, donors_left, donors_right) = self.partition(&members, &best);
        let id = self.nodes.len();
        self.nodes.push(Node::Terminal {
            depth,
            terminal: Terminal {
                members: Vec::new(),
                curve: TerminalCurve {
                    index: Vec::new(),
                    survival: Vec::new(),
                    cum_hazard: Vec::new(),
                    mortality: 0.0,
                },
            },
        });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            depth,
            split: Split {
                variable: best.variable,
                rule: best.rule,
                left: l,
                right: r,
                donors_left,
                donors_right,
            },
        };
        id
    }

    fn terminal(&mut self, members: Vec<u32>, depth: u32) -> usize {
        let curve = terminal_curve(
            self.shared.frame.time(),
            self.shared.frame.status(),
            &members,
            self.shared.grid,
        );
        self.nodes.push(Node::Terminal {
            depth,
            terminal: Terminal { members, curve },
        });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, members: &[u32]) -> Option<Candidate> {
        let frame = self.shared.frame;
        let cfg = self.shared.config;
        let p = frame.p();
        let mtry = cfg.mtry.expect("resolved before growing");
        let mut candidates = index::sample(&mut self.rng, p, mtry).into_vec();
        candidates.sort_unstable();

        let time = frame.time();
        let status = frame.status();
        let mut best: Option<Candidate> = None;
        for v in candidates {
            let col = frame.column(v);
            let rules = match frame.variable(v).kind {
                VariableKind::Continuous | VariableKind::Ordered => {
                    self.threshold_rules(col, members, cfg.nsplit)
                }
                VariableKind::Unordered | VariableKind::Boolean => {
                    self.level_rules(col, members, cfg.nsplit)
                }
            };
            for rule in rules {
                let stat = logrank_sorted(time, status, members, |k| {
                    direction(&rule, col[members[k] as usize])
                });
                if best.as_ref().is_none_or(|b| stat.abs() > b.stat.abs()) {
                    best = Some(Candidate {
                        variable: v,
                        rule,
                        stat,
                    });
                }
            }
        }
        best
    }

    /// Thresholds drawn from the distinct in-node values, maximum excluded.
    fn threshold_rules(&mut self, col: &[f64], members: &[u32], nsplit: usize) -> Vec<SplitRule> {
        let mut values: Vec<f64> = members
            .iter()
            .map(|&r| col[r as usize])
            .filter(|v| !v.is_nan())
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.len() < 2 {
            return Vec::new();
        }
        values.pop();
        let picked: Vec<f64> = if nsplit > 0 && values.len() > nsplit {
            let mut idx = index::sample(&mut self.rng, values.len(), nsplit).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| values[i]).collect()
        } else {
            values
        };
        picked
            .into_iter()
            .map(|value| SplitRule::Threshold { value })
            .collect()
    }

    /// Bipartitions of the in-node levels. Every bipartition is represented
    /// once, by the side holding the lowest present level.
    fn level_rules(&mut self, col: &[f64], members: &[u32], nsplit: usize) -> Vec<SplitRule> {
        let seen = members
            .iter()
            .map(|&r| col[r as usize])
            .filter(|v| !v.is_nan())
            .fold(0u64, |m, v| m | (1u64 << v as u64));
        let k = seen.count_ones();
        if k < 2 {
            return Vec::new();
        }
        let levels: Vec<u32> = (0..64).filter(|b| seen & (1u64 << b) != 0).collect();
        let total: u64 = (1u64 << (k - 1)) - 1;
        let to_mask = |code: u64| {
            let mut mask = 1u64 << levels[0];
            for (i, &lv) in levels[1..].iter().enumerate() {
                if code & (1u64 << i) != 0 {
                    mask |= 1u64 << lv;
                }
            }
            SplitRule::Levels { left: mask, seen }
        };
        let exhaustive = (nsplit == 0 && k <= MAX_EXHAUSTIVE_LEVELS) || total <= nsplit as u64;
        if exhaustive {
            (0..total).map(to_mask).collect()
        } else {
            let draws = if nsplit == 0 { FALLBACK_BIPARTITIONS } else { nsplit };
            (0..draws)
                .map(|_| to_mask(self.rng.gen_range(0..total)))
                .collect()
        }
    }

    /// Send members to daughters. Missing split values are filled by draws
    /// from the in-node donors, used for this routing only.
    fn partition(&mut self, members: &[u32], best: &Candidate) -> (Vec<u32>, Vec<u32>, u32, u32) {
        let col = self.shared.frame.column(best.variable);
        let values: Vec<f64> = members.iter().map(|&r| col[r as usize]).collect();
        let completed = if values.iter().any(|v| v.is_nan()) {
            impute_at_node(&values, &mut self.rng).expect("winning variable has donors")
        } else {
            values.clone()
        };
        let mut left = Vec::new();
        let mut right = Vec::new();
        let (mut dl, mut dr) = (0u32, 0u32);
        for (k, &r) in members.iter().enumerate() {
            let goes_left = direction(&best.rule, completed[k]).expect("completed value routes");
            if !values[k].is_nan() {
                if goes_left {
                    dl += 1;
                } else {
                    dr += 1;
                }
            }
            if goes_left {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        (left, right, dl, dr)
    }
}

/// Kaplan–Meier and Nelson–Aalen estimates of `members` (ascending time,
/// duplicates counted) at the grid indices where they jump.
pub(crate) fn terminal_curve(
    time: &[f64],
    status: &[bool],
    members: &[u32],
    grid: &[f64],
) -> TerminalCurve {
    let mut curve = TerminalCurve {
        index: Vec::new(),
        survival: Vec::new(),
        cum_hazard: Vec::new(),
        mortality: 0.0,
    };
    let mut at_risk = members.len() as f64;
    let (mut surv, mut haz) = (1.0, 0.0);
    let mut i = 0;
    while i < members.len() {
        let t = time[members[i] as usize];
        let mut j = i;
        let mut d = 0.0;
        while j < members.len() && time[members[j] as usize] == t {
            if status[members[j] as usize] {
                d += 1.0;
            }
            j += 1;
        }
        if d > 0.0 {
            surv *= 1.0 - d / at_risk;
            haz += d / at_risk;
            let k = grid.partition_point(|&g| g < t);
            debug_assert!(grid[k] == t);
            curve.index.push(k as u32);
            curve.survival.push(surv);
            curve.cum_hazard.push(haz);
        }
        at_risk -= (j - i) as f64;
        i = j;
    }
    let g = grid.len();
    for (j, &k) in curve.index.iter().enumerate() {
        let next = curve.index.get(j + 1).map_or(g, |&x| x as usize);
        curve.mortality += curve.cum_hazard[j] * (next - k as usize) as f64;
    }
    curve
}
