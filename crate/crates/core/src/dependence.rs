//! Variable dependence, partial dependence, coplots and dependence surfaces.
//!
//! Partial dependence at a point `x` is the in-bag ensemble survival with
//! the variable overwritten by `x` in every row of the population, averaged
//! over the population. Evaluation never re-routes a row once per grid
//! point: for each (row, tree) the tree is walked once with the overwritten
//! variables left free, which yields the terminal reached by every grid
//! point at once. The arithmetic (trees summed in order per row, divided by
//! the tree count, then rows summed in order and divided by the row count)
//! is exactly that of evaluating the forest at each grid point in turn.

use serde::Serialize;

use crate::dataset::{Frame, GroupAssignment};
use crate::error::{Error, Result};
use crate::forest::{direction, Forest, Node};
use crate::inference::predict_oob;
use crate::par;
use crate::util::{even_indices, format_sig, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceKind {
    Variable,
    Partial,
}

impl DependenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DependenceKind::Variable => "variable",
            DependenceKind::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceRecord {
    pub kind: DependenceKind,
    pub xvar: String,
    /// Continuous value, or `None` for categorical points and missing cells.
    pub x: Option<f64>,
    pub level: Option<String>,
    pub x2var: Option<String>,
    pub x2: Option<f64>,
    pub level2: Option<String>,
    pub time: f64,
    pub time_label: String,
    pub group: Option<String>,
    pub yhat: f64,
    pub row_id: Option<usize>,
    pub status: Option<bool>,
}

/// Five-number summary of per-row partial predictions at one categorical
/// level, for box plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSummary {
    pub xvar: String,
    pub level: String,
    pub time: f64,
    pub time_label: String,
    pub group: Option<String>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DependenceGrid {
    pub records: Vec<DependenceRecord>,
    pub boxes: Vec<BoxSummary>,
    pub warnings: Vec<String>,
}

impl DependenceGrid {
    fn extend(&mut self, other: DependenceGrid) {
        self.records.extend(other.records);
        self.boxes.extend(other.boxes);
        self.warnings.extend(other.warnings);
    }
}

/// "1 Year", "3 Years", "0.5 Years".
pub fn time_label(t: f64) -> String {
    if t == 1.0 {
        "1 Year".to_string()
    } else {
        format!("{} Years", format_sig(t, 3))
    }
}

/// A requested time mapped onto the forest's event-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePoint {
    /// Time as requested (after clamping).
    pub time: f64,
    pub label: String,
    /// Largest grid index whose event time does not exceed `time`; `None`
    /// before the first event, where survival is 1.
    pub index: Option<usize>,
}

/// Map requested times to the largest event time not exceeding each.
/// Times past the last event time are clamped to it with a warning.
pub fn resolve_times(forest: &Forest, times: &[f64]) -> Result<(Vec<TimePoint>, Vec<String>)> {
    if times.is_empty() {
        return Err(Error::Validation("at least one time is required".into()));
    }
    let last = *forest
        .event_times
        .last()
        .ok_or_else(|| Error::Domain("forest has no event times".into()))?;
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Validation(format!("times must be positive, got {t}")));
        }
        let time = if t > last {
            warnings.push(format!("time {t} is past the last event time {last}; clamped"));
            last
        } else {
            t
        };
        out.push(TimePoint {
            time,
            label: time_label(time),
            index: forest.grid_index(time),
        });
    }
    Ok((out, warnings))
}

/// Per-row OOB survival at each time, paired with the row's value of each
/// `xvar`. One record per (xvar, time, row), rows without an OOB
/// prediction skipped.
pub fn variable_dependence(
    forest: &Forest,
    frame: &Frame,
    xvars: &[&str],
    times: &[f64],
) -> Result<DependenceGrid> {
    variable_records(forest, frame, xvars, times, None)
}

/// [`variable_dependence`] records tagged with each row's group.
pub fn variable_coplot_data(
    forest: &Forest,
    frame: &Frame,
    xvar: &str,
    groups: &GroupAssignment,
    times: &[f64],
) -> Result<DependenceGrid> {
    if groups.membership.len() != frame.n() {
        return Err(Error::Validation(format!(
            "group assignment covers {} rows, frame has {}",
            groups.membership.len(),
            frame.n()
        )));
    }
    variable_records(forest, frame, &[xvar], times, Some(groups))
}

fn variable_records(
    forest: &Forest,
    frame: &Frame,
    xvars: &[&str],
    times: &[f64],
    groups: Option<&GroupAssignment>,
) -> Result<DependenceGrid> {
    let vars: Vec<usize> = xvars
        .iter()
        .map(|name| forest.variable_index(name))
        .collect::<Result<_>>()?;
    let (points, mut warnings) = resolve_times(forest, times)?;
    let ens = predict_oob(forest, frame)?;
    warnings.extend(ens.warnings.iter().cloned());
    let mut records = Vec::with_capacity(vars.len() * points.len() * frame.n());
    for &v in &vars {
        let spec = frame.variable(v);
        for tp in &points {
            for r in 0..frame.n() {
                let Some(curve) = &ens.curves[r] else { continue };
                let value = frame.value(r, v);
                let (x, level) = point_fields(spec.kind.is_categorical(), &spec.levels, value);
                records.push(DependenceRecord {
                    kind: DependenceKind::Variable,
                    xvar: spec.name.clone(),
                    x,
                    level,
                    x2var: None,
                    x2: None,
                    level2: None,
                    time: tp.time,
                    time_label: tp.label.clone(),
                    group: groups.and_then(|g| g.label_of(r)).map(str::to_string),
                    yhat: tp.index.map_or(1.0, |k| curve[k]),
                    row_id: Some(r),
                    status: Some(frame.status()[r]),
                });
            }
        }
    }
    Ok(DependenceGrid {
        records,
        boxes: Vec::new(),
        warnings,
    })
}

fn point_fields(categorical: bool, levels: &[String], value: f64) -> (Option<f64>, Option<String>) {
    if value.is_nan() {
        (None, None)
    } else if categorical {
        (None, levels.get(value as usize).cloned())
    } else {
        (Some(value), None)
    }
}

/// Grid of values at which a variable is overwritten.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub variable: usize,
    pub values: Vec<f64>,
    pub categorical: bool,
}

/// Evaluation points for one variable: every level for categorical
/// variables; otherwise `npts` values picked at evenly spaced positions of
/// the sorted distinct non-missing values (all of them when there are
/// fewer, with a warning).
pub fn axis_points(frame: &Frame, var: usize, npts: usize) -> Result<(Axis, Vec<String>)> {
    let spec = frame.variable(var);
    let mut warnings = Vec::new();
    if spec.kind.is_categorical() {
        return Ok((
            Axis {
                variable: var,
                values: (0..spec.levels.len()).map(|k| k as f64).collect(),
                categorical: true,
            },
            warnings,
        ));
    }
    if npts < 2 {
        return Err(Error::Validation(format!("npts must be at least 2, got {npts}")));
    }
    let mut distinct: Vec<f64> = frame.column(var).iter().copied().filter(|v| !v.is_nan()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.is_empty() {
        return Err(Error::Domain(format!("'{}' has no observed values", spec.name)));
    }
    if npts > distinct.len() {
        warnings.push(format!(
            "'{}' has {} distinct values; npts reduced from {npts}",
            spec.name,
            distinct.len()
        ));
    }
    let values = even_indices(distinct.len(), npts)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    Ok((
        Axis {
            variable: var,
            values,
            categorical: false,
        },
        warnings,
    ))
}

/// Per-row partial predictions over a grid of one or two free variables.
/// Returns, for every population row (in the order given), a flat vector
/// indexed `[a][b][k]` of ensemble survival with the free variables set to
/// `axes[0].values[a]` (and `axes[1].values[b]`), at grid index `grid[k]`.
fn row_predictions(forest: &Forest, frame: &Frame, rows: &[usize], axes: &[&Axis], grid: &[Option<usize>]) -> Vec<Vec<f64>> {
    debug_assert!(!axes.is_empty() && axes.len() <= 2);
    let na = axes[0].values.len();
    let nb = axes.get(1).map_or(1, |a| a.values.len());
    let nk = grid.len();
    let ntree = forest.ntree() as f64;
    par::map_range(rows.len(), |i| {
        let r = rows[i];
        let mut acc = vec![0.0; na * nb * nk];
        let mut leaf_vals = vec![0.0; nk];
        let all_a: Vec<u32> = (0..na as u32).collect();
        let all_b: Vec<u32> = (0..nb as u32).collect();
        for (t, tree) in forest.trees.iter().enumerate() {
            let coin = forest.coin(t, r);
            let mut stack: Vec<(usize, Vec<u32>, Vec<u32>)> = vec![(0, all_a.clone(), all_b.clone())];
            while let Some((id, pa, pb)) = stack.pop() {
                match &tree.nodes[id] {
                    Node::Terminal { terminal, .. } => {
                        for (slot, g) in leaf_vals.iter_mut().zip(grid) {
                            *slot = g.map_or(1.0, |k| terminal.curve.survival_at(k));
                        }
                        for &a in &pa {
                            for &b in &pb {
                                let base = (a as usize * nb + b as usize) * nk;
                                for (s, v) in acc[base..base + nk].iter_mut().zip(&leaf_vals) {
                                    *s += v;
                                }
                            }
                        }
                    }
                    Node::Split { split, .. } => {
                        let goes_left = |value: f64| {
                            direction(&split.rule, value).unwrap_or_else(|| {
                                coin.goes_left(id, split.donors_left, split.donors_right)
                            })
                        };
                        let free = axes.iter().position(|ax| ax.variable == split.variable);
                        match free {
                            None => {
                                let next = if goes_left(frame.value(r, split.variable)) {
                                    split.left
                                } else {
                                    split.right
                                };
                                stack.push((next, pa, pb));
                            }
                            Some(0) => {
                                let (l, rt): (Vec<u32>, Vec<u32>) =
                                    pa.iter().partition(|&&a| goes_left(axes[0].values[a as usize]));
                                if !rt.is_empty() {
                                    stack.push((split.right, rt, pb.clone()));
                                }
                                if !l.is_empty() {
                                    stack.push((split.left, l, pb));
                                }
                            }
                            Some(_) => {
                                let (l, rt): (Vec<u32>, Vec<u32>) =
                                    pb.iter().partition(|&&b| goes_left(axes[1].values[b as usize]));
                                if !rt.is_empty() {
                                    stack.push((split.right, pa.clone(), rt));
                                }
                                if !l.is_empty() {
                                    stack.push((split.left, pa, l));
                                }
                            }
                        }
                    }
                }
            }
        }
        acc.iter_mut().for_each(|s| *s /= ntree);
        acc
    })
}

/// Population average of [`row_predictions`]: rows summed in order, then
/// divided by the row count.
fn average(per_row: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for row in per_row {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let m = per_row.len() as f64;
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Rows with every listed variable observed, optionally restricted to a
/// subset.
fn population(frame: &Frame, vars: &[usize], subset: Option<&[usize]>) -> Vec<usize> {
    let keep = |r: &usize| vars.iter().all(|&v| !frame.is_missing(*r, v));
    match subset {
        Some(rows) => rows.iter().copied().filter(keep).collect(),
        None => (0..frame.n()).filter(keep).collect(),
    }
}

fn partial_records(
    forest: &Forest,
    frame: &Frame,
    axis: &Axis,
    points: &[TimePoint],
    rows: &[usize],
    group: Option<&str>,
) -> DependenceGrid {
    let spec = frame.variable(axis.variable);
    let grid: Vec<Option<usize>> = points.iter().map(|p| p.index).collect();
    let nk = grid.len();
    let na = axis.values.len();
    let per_row = row_predictions(forest, frame, rows, &[axis], &grid);
    let mean = average(&per_row, na * nk);
    let mut out = DependenceGrid::default();
    for (k, tp) in points.iter().enumerate() {
        for (a, &value) in axis.values.iter().enumerate() {
            let (x, level) = point_fields(axis.categorical, &spec.levels, value);
            out.records.push(DependenceRecord {
                kind: DependenceKind::Partial,
                xvar: spec.name.clone(),
                x,
                level: level.clone(),
                x2var: None,
                x2: None,
                level2: None,
                time: tp.time,
                time_label: tp.label.clone(),
                group: group.map(str::to_string),
                yhat: mean[a * nk + k],
                row_id: None,
                status: None,
            });
            if axis.categorical {
                let mut vals: Vec<f64> = per_row.iter().map(|row| row[a * nk + k]).collect();
                vals.sort_by(f64::total_cmp);
                out.boxes.push(BoxSummary {
                    xvar: spec.name.clone(),
                    level: level.unwrap_or_default(),
                    time: tp.time,
                    time_label: tp.label.clone(),
                    group: group.map(str::to_string),
                    min: vals[0],
                    q1: quantile_sorted(&vals, 0.25),
                    median: quantile_sorted(&vals, 0.5),
                    q3: quantile_sorted(&vals, 0.75),
                    max: vals[vals.len() - 1],
                });
            }
        }
    }
    out
}

/// Partial dependence of `xvar` at each time. Categorical variables get
/// one point per level plus box summaries of the per-row predictions.
pub fn partial_dependence(
    forest: &Forest,
    frame: &Frame,
    xvar: &str,
    times: &[f64],
    npts: usize,
) -> Result<DependenceGrid> {
    forest.check_frame(frame)?;
    let v = forest.variable_index(xvar)?;
    let (points, mut warnings) = resolve_times(forest, times)?;
    let (axis, w) = axis_points(frame, v, npts)?;
    warnings.extend(w);
    let rows = population(frame, &[v], None);
    if rows.is_empty() {
        return Err(Error::Domain(format!("no rows with '{xvar}' observed")));
    }
    let mut grid = partial_records(forest, frame, &axis, &points, &rows, None);
    grid.warnings.splice(0..0, warnings);
    Ok(grid)
}

/// Partial dependence at one time computed separately within each group:
/// the averaging population is restricted to the group's rows, while the
/// evaluation points come from the whole frame.
pub fn partial_coplot(
    forest: &Forest,
    frame: &Frame,
    xvar: &str,
    groups: &GroupAssignment,
    time: f64,
    npts: usize,
) -> Result<DependenceGrid> {
    forest.check_frame(frame)?;
    if groups.membership.len() != frame.n() {
        return Err(Error::Validation(format!(
            "group assignment covers {} rows, frame has {}",
            groups.membership.len(),
            frame.n()
        )));
    }
    let v = forest.variable_index(xvar)?;
    let (points, warnings) = resolve_times(forest, &[time])?;
    let (axis, w) = axis_points(frame, v, npts)?;
    let mut out = DependenceGrid {
        warnings,
        ..Default::default()
    };
    out.warnings.extend(w);
    for (g, members) in groups.members().iter().enumerate() {
        let label = &groups.labels[g];
        let rows = population(frame, &[v], Some(members));
        if rows.is_empty() {
            out.warnings
                .push(format!("group '{label}' has no rows with '{xvar}' observed; omitted"));
            continue;
        }
        out.extend(partial_records(forest, frame, &axis, &points, &rows, Some(label)));
    }
    Ok(out)
}

/// Second axis of a partial-dependence surface.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceAxis {
    /// `count` event times evenly spread over the grid up to `max_time`;
    /// each of `include` replaces the nearest selected time, so slices at
    /// those times line up with ordinary partial-dependence curves.
    Time {
        count: usize,
        max_time: Option<f64>,
        include: Vec<f64>,
    },
    /// A second variable overwritten jointly, evaluated at `time`.
    Variable {
        name: String,
        count: usize,
        time: f64,
    },
}

/// Event-time grid indices for the time axis of a surface.
pub fn surface_times(forest: &Forest, count: usize, max_time: Option<f64>, include: &[f64]) -> Result<Vec<usize>> {
    if count < 2 {
        return Err(Error::Validation(format!("time axis needs at least 2 points, got {count}")));
    }
    let limit = match max_time {
        Some(t) => forest
            .grid_index(t)
            .ok_or_else(|| Error::Validation(format!("max time {t} precedes the first event")))?,
        None => forest
            .event_times
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Domain("forest has no event times".into()))?,
    };
    let mut picked = even_indices(limit + 1, count);
    let (points, _) = resolve_times(forest, include)
        .unwrap_or((Vec::new(), Vec::new()));
    let pinned: Vec<usize> = points.iter().filter_map(|p| p.index).filter(|&k| k <= limit).collect();
    let mut fixed = vec![false; picked.len()];
    for k in pinned {
        if let Some(pos) = picked.iter().position(|&x| x == k) {
            fixed[pos] = true;
            continue;
        }
        let nearest = (0..picked.len())
            .filter(|&i| !fixed[i])
            .min_by_key(|&i| picked[i].abs_diff(k));
        if let Some(i) = nearest {
            picked[i] = k;
            fixed[i] = true;
        }
    }
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

/// Partial-dependence surface of `xvar` against time or a second variable.
pub fn partial_surface(
    forest: &Forest,
    frame: &Frame,
    xvar: &str,
    npts: usize,
    axis2: &SurfaceAxis,
) -> Result<DependenceGrid> {
    forest.check_frame(frame)?;
    let v = forest.variable_index(xvar)?;
    let (axis, mut warnings) = axis_points(frame, v, npts)?;
    let spec = frame.variable(v);
    match axis2 {
        SurfaceAxis::Time {
            count,
            max_time,
            include,
        } => {
            let indices = surface_times(forest, *count, *max_time, include)?;
            let points: Vec<TimePoint> = indices
                .iter()
                .map(|&k| {
                    let time = forest.event_times[k];
                    // requested times keep their own label
                    let label = include
                        .iter()
                        .find(|&&t| forest.grid_index(t) == Some(k))
                        .map_or_else(|| time_label(time), |&t| time_label(t));
                    TimePoint {
                        time,
                        label,
                        index: Some(k),
                    }
                })
                .collect();
            let rows = population(frame, &[v], None);
            if rows.is_empty() {
                return Err(Error::Domain(format!("no rows with '{xvar}' observed")));
            }
            let mut grid = partial_records(forest, frame, &axis, &points, &rows, None);
            grid.warnings.splice(0..0, warnings);
            Ok(grid)
        }
        SurfaceAxis::Variable { name, count, time } => {
            let v2 = forest.variable_index(name)?;
            if v2 == v {
                return Err(Error::Validation("surface needs two distinct variables".into()));
            }
            let spec2 = frame.variable(v2);
            let (axis_b, w) = axis_points(frame, v2, *count)?;
            warnings.extend(w);
            let (points, w) = resolve_times(forest, &[*time])?;
            warnings.extend(w);
            let tp = &points[0];
            let rows = population(frame, &[v, v2], None);
            if rows.is_empty() {
                return Err(Error::Domain(format!("no rows with '{xvar}' and '{name}' observed")));
            }
            let nb = axis_b.values.len();
            let per_row = row_predictions(forest, frame, &rows, &[&axis, &axis_b], &[tp.index]);
            let mean = average(&per_row, axis.values.len() * nb);
            let mut records = Vec::with_capacity(mean.len());
            for (a, &xa) in axis.values.iter().enumerate() {
                let (x, level) = point_fields(axis.categorical, &spec.levels, xa);
                for (b, &xb) in axis_b.values.iter().enumerate() {
                    let (x2, level2) = point_fields(axis_b.categorical, &spec2.levels, xb);
                    records.push(DependenceRecord {
                        kind: DependenceKind::Partial,
                        xvar: spec.name.clone(),
                        x,
                        level: level.clone(),
                        x2var: Some(spec2.name.clone()),
                        x2,
                        level2,
                        time: tp.time,
                        time_label: tp.label.clone(),
                        group: None,
                        yhat: mean[a * nb + b],
                        row_id: None,
                        status: None,
                    });
                }
            }
            Ok(DependenceGrid {
                records,
                boxes: Vec::new(),
                warnings,
            })
        }
    }
}
