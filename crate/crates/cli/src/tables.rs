//! Conversions from library results to long-format tables.

use rsf_core::dataset::CensusRecord;
use rsf_core::dependence::DependenceGrid;
use rsf_core::importance::{DepthTable, InteractionMatrix, VimpTable};
use rsf_core::inference::{EnsembleSurvival, ErrorCurve, GroupedSurvival};
use rsf_core::km::Estimates;
use rsf_core::table::{Cell, Table};

pub fn census(records: &[CensusRecord]) -> Table {
    let mut t = Table::new(["variable", "missing"]);
    for r in records {
        t.push(vec![r.variable.as_str().into(), r.count.into()]);
    }
    t
}

pub fn curves(est: &Estimates) -> Table {
    let mut t = Table::new([
        "group", "time", "n_risk", "n_event", "survival", "cum_hazard", "lower", "upper",
    ]);
    for c in &est.curves {
        for k in 0..c.len() {
            t.push(vec![
                c.group.clone().into(),
                c.times[k].into(),
                c.n_risk[k].into(),
                c.n_event[k].into(),
                c.survival[k].into(),
                c.cum_hazard[k].into(),
                c.band_lo.as_ref().map(|b| b[k]).into(),
                c.band_hi.as_ref().map(|b| b[k]).into(),
            ]);
        }
    }
    t
}

/// One row per (row, event time).
pub fn survival(ens: &EnsembleSurvival) -> Table {
    let mut t = Table::new(["row_id", "time", "survival"]);
    for (r, curve) in ens.curves.iter().enumerate() {
        let Some(curve) = curve else { continue };
        for (time, s) in ens.event_times.iter().zip(curve) {
            t.push(vec![r.into(), (*time).into(), (*s).into()]);
        }
    }
    t
}

pub fn row_summary(ens: &EnsembleSurvival) -> Table {
    let mut t = Table::new(["row_id", "time", "status", "mortality", "trees"]);
    for r in 0..ens.n() {
        t.push(vec![
            r.into(),
            ens.time[r].into(),
            ens.status[r].into(),
            ens.mortality[r].into(),
            ens.tree_counts[r].into(),
        ]);
    }
    t
}

pub fn grouped(g: &GroupedSurvival) -> Table {
    let mut t = Table::new(["group", "time", "median", "lower", "upper", "rows"]);
    for c in &g.curves {
        for k in 0..c.times.len() {
            t.push(vec![
                c.group.as_str().into(),
                c.times[k].into(),
                c.median[k].into(),
                c.lo.as_ref().map(|b| b[k]).into(),
                c.hi.as_ref().map(|b| b[k]).into(),
                c.rows.into(),
            ]);
        }
    }
    t
}

pub fn error_curve(curve: &ErrorCurve) -> Table {
    let mut t = Table::new(["ntree", "error"]);
    for (b, e) in curve.tree_counts.iter().zip(&curve.error) {
        t.push(vec![(*b).into(), (*e).into()]);
    }
    t
}

pub fn vimp(v: &VimpTable) -> Table {
    let mut t = Table::new(["variable", "vimp", "rank", "positive"]);
    for e in v.ranked() {
        t.push(vec![e.variable.as_str().into(), e.vimp.into(), e.rank.into(), e.positive.into()]);
    }
    t
}

pub fn depth(d: &DepthTable, v: Option<&VimpTable>) -> Table {
    let mut cols = vec!["variable", "depth", "rank", "selected"];
    if v.is_some() {
        cols.extend(["vimp", "vimp_rank"]);
    }
    let mut t = Table::new(cols);
    for e in d.ranked() {
        let mut row: Vec<Cell> = vec![e.variable.as_str().into(), e.depth.into(), e.rank.into(), e.selected.into()];
        if let Some(v) = v {
            let ve = v.get(&e.variable).expect("same variables");
            row.extend([ve.vimp.into(), ve.rank.into()]);
        }
        t.push(row);
    }
    t
}

pub fn depth_summary(d: &DepthTable, oob_error: Option<f64>) -> Table {
    let mut t = Table::new(["threshold", "model_size", "ntree", "mtry", "nsplit", "nodesize", "oob_error"]);
    t.push(vec![
        d.threshold.into(),
        d.model_size.into(),
        d.ntree.into(),
        d.mtry.into(),
        d.nsplit.into(),
        d.nodesize.into(),
        oob_error.into(),
    ]);
    t
}

/// Dense matrix with the row variable in the first column.
pub fn interactions(m: &InteractionMatrix) -> Table {
    let mut t = Table::new(std::iter::once("variable").chain(m.variables.iter().map(String::as_str)));
    for (name, row) in m.variables.iter().zip(&m.values) {
        let mut cells: Vec<Cell> = vec![name.as_str().into()];
        cells.extend(row.iter().map(|&x| Cell::from(x)));
        t.push(cells);
    }
    t
}

pub fn dependence(g: &DependenceGrid) -> Table {
    let mut t = Table::new([
        "kind", "xvar", "x", "level", "x2var", "x2", "level2", "time", "time_label", "group", "yhat", "row_id", "status",
    ]);
    for r in &g.records {
        t.push(vec![
            r.kind.as_str().into(),
            r.xvar.as_str().into(),
            r.x.into(),
            r.level.clone().into(),
            r.x2var.clone().into(),
            r.x2.into(),
            r.level2.clone().into(),
            r.time.into(),
            r.time_label.as_str().into(),
            r.group.clone().into(),
            r.yhat.into(),
            r.row_id.into(),
            r.status.into(),
        ]);
    }
    t
}

pub fn boxes(g: &DependenceGrid) -> Table {
    let mut t = Table::new(["xvar", "level", "time", "time_label", "group", "min", "q1", "median", "q3", "max"]);
    for b in &g.boxes {
        t.push(vec![
            b.xvar.as_str().into(),
            b.level.as_str().into(),
            b.time.into(),
            b.time_label.as_str().into(),
            b.group.clone().into(),
            b.min.into(),
            b.q1.into(),
            b.median.into(),
            b.q3.into(),
            b.max.into(),
        ]);
    }
    t
}
