//! Columnar survival data: loading, typing, missingness census and grouping.
//!
//! Predictor cells are stored as `f64`. Missing cells are `NaN`; categorical
//! cells hold the level index. The response (follow-up time and event
//! indicator) is never missing.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{format_sig, quantile_sorted};

/// Offset subtracted from the lowest quantile break so the minimum value
/// lands inside the first left-open interval.
pub const LOWEST_BREAK_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Ordered,
    Unordered,
    Boolean,
}

impl VariableKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, VariableKind::Continuous)
    }

    /// Kinds whose splits are a threshold on the stored value.
    pub fn is_ordinal(self) -> bool {
        matches!(self, VariableKind::Continuous | VariableKind::Ordered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            levels: Vec::new(),
        }
    }

    pub fn categorical(
        name: impl Into<String>,
        kind: VariableKind,
        levels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind.is_categorical() == self.levels.is_empty() {
            return Err(Error::Validation(format!(
                "variable '{}': levels must be non-empty exactly when the kind is categorical",
                self.name
            )));
        }
        Ok(())
    }

    /// Display label for a stored cell value.
    pub fn label(&self, value: f64) -> String {
        if value.is_nan() {
            "NA".to_string()
        } else if self.kind.is_categorical() {
            self.levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("<level {value}>"))
        } else {
            format!("{value}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub time: Vec<f64>,
    pub status: Vec<bool>,
}

impl Response {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn events(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    variables: Vec<VariableSpec>,
    columns: Vec<Vec<f64>>,
    response: Response,
}

impl Frame {
    pub fn new(
        variables: Vec<VariableSpec>,
        columns: Vec<Vec<f64>>,
        response: Response,
    ) -> Result<Self> {
        let n = response.time.len();
        if response.status.len() != n {
            return Err(Error::Validation(
                "response time and status lengths differ".into(),
            ));
        }
        if variables.len() != columns.len() {
            return Err(Error::Validation(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let mut seen = HashMap::new();
        for (j, spec) in variables.iter().enumerate() {
            spec.validate()?;
            if seen.insert(spec.name.clone(), j).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate variable name '{}'",
                    spec.name
                )));
            }
            let col = &columns[j];
            if col.len() != n {
                return Err(Error::Validation(format!(
                    "column '{}' has {} cells, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            if spec.kind.is_categorical() {
                let k = spec.levels.len() as f64;
                if let Some(bad) = col
                    .iter()
                    .find(|v| !v.is_nan() && (v.fract() != 0.0 || **v < 0.0 || **v >= k))
                {
                    return Err(Error::Validation(format!(
                        "column '{}' holds {bad}, not a valid level index",
                        spec.name
                    )));
                }
            }
        }
        if let Some((i, t)) = response
            .time
            .iter()
            .enumerate()
            .find(|(_, t)| !t.is_finite() || **t < 0.0)
        {
            return Err(Error::Validation(format!(
                "response time {t} at row {} is not a non-negative number",
                i + 1
            )));
        }
        Ok(Self {
            variables,
            columns,
            response,
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &VariableSpec {
        &self.variables[index]
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn time(&self) -> &[f64] {
        &self.response.time
    }

    pub fn status(&self) -> &[bool] {
        &self.response.status
    }

    pub fn value(&self, row: usize, var: usize) -> f64 {
        self.columns[var][row]
    }

    pub fn is_missing(&self, row: usize, var: usize) -> bool {
        self.columns[var][row].is_nan()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Resolve a variable name, listing the known names on failure.
    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| {
            let known: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
            Error::Validation(format!(
                "unknown variable '{name}'; known variables: {}",
                known.join(", ")
            ))
        })
    }

    /// Copy of the frame restricted to `rows`, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Frame {
        Frame {
            variables: self.variables.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            response: Response {
                time: rows.iter().map(|&r| self.response.time[r]).collect(),
                status: rows.iter().map(|&r| self.response.status[r]).collect(),
            },
        }
    }

    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Frame {
        let rows: Vec<usize> = (0..self.n()).filter(|&r| keep(r)).collect();
        self.take_rows(&rows)
    }

    /// Replace one column, keeping the variable spec.
    pub fn with_column(&self, var: usize, values: Vec<f64>) -> Result<Frame> {
        let mut columns = self.columns.clone();
        columns[var] = values;
        Frame::new(self.variables.clone(), columns, self.response.clone())
    }

    pub fn missing_count(&self, var: usize) -> usize {
        self.columns[var].iter().filter(|v| v.is_nan()).count()
    }

    /// Write as delimited text with the response columns first.
    pub fn write_delimited<W: Write>(&self, writer: W, opts: &LoadOptions) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(opts.delimiter)
            .from_writer(writer);
        let mut header = vec![opts.time_col.clone(), opts.status_col.clone()];
        header.extend(self.variables.iter().map(|v| v.name.clone()));
        w.write_record(&header)?;
        for r in 0..self.n() {
            let mut rec = vec![
                format!("{}", self.response.time[r]),
                if self.response.status[r] { "TRUE" } else { "FALSE" }.to_string(),
            ];
            for (j, spec) in self.variables.iter().enumerate() {
                let v = self.columns[j][r];
                rec.push(if v.is_nan() {
                    opts.na_token.clone()
                } else {
                    spec.label(v)
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How to read a delimited file.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub schema: Option<Vec<VariableSpec>>,
    pub na_token: String,
    pub delimiter: u8,
    pub time_col: String,
    pub status_col: String,
    /// Append unseen categorical labels to the schema's levels instead of
    /// failing. Used when aligning new data to a grown forest.
    pub extend_levels: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            schema: None,
            na_token: "NA".to_string(),
            delimiter: b',',
            time_col: "years".to_string(),
            status_col: "status".to_string(),
            extend_levels: false,
        }
    }
}

const TRUE_TOKENS: [&str; 4] = ["true", "t", "1", "yes"];
const FALSE_TOKENS: [&str; 4] = ["false", "f", "0", "no"];

fn parse_bool(token: &str) -> Option<bool> {
    let t = token.trim().to_ascii_lowercase();
    if TRUE_TOKENS.contains(&t.as_str()) {
        Some(true)
    } else if FALSE_TOKENS.contains(&t.as_str()) {
        Some(false)
    } else {
        None
    }
}

fn parse_number(token: &str) -> Option<f64> {
    token.trim().parse::<f64>().ok()
}

pub fn load_frame(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Frame> {
    let file = std::fs::File::open(path)?;
    read_frame(file, opts)
}

pub fn read_frame<R: Read>(reader: R, opts: &LoadOptions) -> Result<Frame> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let ncol = header.len();

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); ncol];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        if rec.len() != ncol {
            return Err(Error::Parse {
                row,
                line,
                message: format!("expected {ncol} fields, found {}", rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            cells[j].push(field.trim().to_string());
        }
    }
    let n = cells.first().map_or(0, Vec::len);
    let line_of = |row: usize| row + 1;

    let find = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Validation(format!(
                "response column '{name}' not found in header ({})",
                header.join(", ")
            ))
        })
    };
    let tcol = find(&opts.time_col)?;
    let scol = find(&opts.status_col)?;

    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for r in 0..n {
        let t = &cells[tcol][r];
        let s = &cells[scol][r];
        if *t == opts.na_token || *s == opts.na_token || t.is_empty() || s.is_empty() {
            return Err(Error::Validation(format!(
                "missing response value at row {}",
                r + 1
            )));
        }
        time.push(parse_number(t).ok_or_else(|| Error::Parse {
            row: r + 1,
            line: line_of(r + 1),
            message: format!("time column '{}' holds non-numeric '{t}'", opts.time_col),
        })?);
        status.push(parse_bool(s).ok_or_else(|| Error::Parse {
            row: r + 1,
            line: line_of(r + 1),
            message: format!("status column '{}' holds non-boolean '{s}'", opts.status_col),
        })?);
    }

    let predictor_cols: Vec<usize> = (0..ncol).filter(|&j| j != tcol && j != scol).collect();
    let specs: Vec<(usize, VariableSpec)> = match &opts.schema {
        Some(schema) => {
            let mut out = Vec::with_capacity(schema.len());
            for spec in schema {
                let j = header.iter().position(|h| *h == spec.name).ok_or_else(|| {
                    Error::Validation(format!("schema variable '{}' not in header", spec.name))
                })?;
                out.push((j, spec.clone()));
            }
            let extra: Vec<&str> = predictor_cols
                .iter()
                .filter(|&&j| !schema.iter().any(|s| s.name == header[j]))
                .map(|&j| header[j].as_str())
                .collect();
            if !extra.is_empty() {
                return Err(Error::Validation(format!(
                    "header columns not in schema: {}",
                    extra.join(", ")
                )));
            }
            out
        }
        None => predictor_cols
            .iter()
            .map(|&j| (j, infer_spec(&header[j], &cells[j], &opts.na_token)))
            .collect(),
    };

    let mut variables = Vec::with_capacity(specs.len());
    let mut columns = Vec::with_capacity(specs.len());
    for (j, mut spec) in specs {
        let mut col = Vec::with_capacity(n);
        for (r, tok) in cells[j].iter().enumerate() {
            if *tok == opts.na_token || tok.is_empty() {
                col.push(f64::NAN);
                continue;
            }
            let bad = |what: &str| Error::Parse {
                row: r + 1,
                line: line_of(r + 1),
                message: format!("column '{}': {what} '{tok}'", spec.name),
            };
            let v = match spec.kind {
                VariableKind::Continuous => {
                    let v = parse_number(tok).ok_or_else(|| bad("non-numeric token"))?;
                    if v.is_nan() {
                        f64::NAN
                    } else {
                        v
                    }
                }
                _ => match spec.levels.iter().position(|l| l == tok) {
                    Some(k) => k as f64,
                    None => {
                        let as_bool = if spec.kind == VariableKind::Boolean {
                            parse_bool(tok).and_then(|b| {
                                let want = if b { "TRUE" } else { "FALSE" };
                                spec.levels.iter().position(|l| l == want)
                            })
                        } else {
                            None
                        };
                        match as_bool {
                            Some(k) => k as f64,
                            None if opts.extend_levels => {
                                spec.levels.push(tok.clone());
                                (spec.levels.len() - 1) as f64
                            }
                            None => return Err(bad("unknown level")),
                        }
                    }
                },
            };
            col.push(v);
        }
        variables.push(spec);
        columns.push(col);
    }

    Frame::new(variables, columns, Response { time, status })
}

fn infer_spec(name: &str, cells: &[String], na: &str) -> VariableSpec {
    let present: Vec<&String> = cells.iter().filter(|c| *c != na && !c.is_empty()).collect();
    if present.iter().all(|c| parse_number(c).is_some()) {
        return VariableSpec::continuous(name);
    }
    let mut levels: Vec<String> = Vec::new();
    for c in &present {
        if !levels.contains(c) {
            levels.push((*c).clone());
        }
    }
    if levels.len() == 2 {
        let bools: Vec<Option<bool>> = levels.iter().map(|l| parse_bool(l)).collect();
        if let [Some(a), Some(b)] = bools[..] {
            if a != b {
                let (f, t) = if a {
                    (levels[1].clone(), levels[0].clone())
                } else {
                    (levels[0].clone(), levels[1].clone())
                };
                return VariableSpec::categorical(name, VariableKind::Boolean, [f, t]);
            }
        }
        return VariableSpec::categorical(name, VariableKind::Boolean, levels);
    }
    VariableSpec::categorical(name, VariableKind::Unordered, levels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusRecord {
    pub variable: String,
    pub count: usize,
}

/// Variables with at least one missing cell, by descending count then
/// input order.
pub fn missing_census(frame: &Frame) -> Vec<CensusRecord> {
    let mut out: Vec<CensusRecord> = (0..frame.p())
        .map(|j| CensusRecord {
            variable: frame.variable(j).name.clone(),
            count: frame.missing_count(j),
        })
        .filter(|r| r.count > 0)
        .collect();
    out.sort_by_key(|c| std::cmp::Reverse(c.count));
    out
}

/// Per-row group membership derived from one variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAssignment {
    pub variable: String,
    /// Ascending cut points for interval groups; empty for level groups.
    pub breaks: Vec<f64>,
    pub labels: Vec<String>,
    pub membership: Vec<Option<usize>>,
}

impl GroupAssignment {
    pub fn groups(&self) -> usize {
        self.labels.len()
    }

    /// Row indices of each group, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (r, m) in self.membership.iter().enumerate() {
            if let Some(g) = m {
                out[*g].push(r);
            }
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }

    pub fn label_of(&self, row: usize) -> Option<&str> {
        self.membership[row].map(|g| self.labels[g].as_str())
    }

    /// One group per level of a categorical variable.
    pub fn from_levels(frame: &Frame, var: usize) -> Result<Self> {
        let spec = frame.variable(var);
        if !spec.kind.is_categorical() {
            return Err(Error::Domain(format!(
                "'{}' is continuous; use quantile or explicit cuts",
                spec.name
            )));
        }
        Ok(Self {
            variable: spec.name.clone(),
            breaks: Vec::new(),
            labels: spec.levels.clone(),
            membership: frame
                .column(var)
                .iter()
                .map(|v| (!v.is_nan()).then_some(*v as usize))
                .collect(),
        })
    }

    /// Every row in a single group.
    pub fn single(label: impl Into<String>, n: usize) -> Self {
        Self {
            variable: String::new(),
            breaks: Vec::new(),
            labels: vec![label.into()],
            membership: vec![Some(0); n],
        }
    }

    fn from_breaks(variable: &str, values: &[f64], breaks: Vec<f64>) -> Self {
        let labels = breaks
            .windows(2)
            .map(|w| format!("({},{}]", format_sig(w[0], 3), format_sig(w[1], 3)))
            .collect();
        let membership = values.iter().map(|&v| interval_of(&breaks, v)).collect();
        Self {
            variable: variable.to_string(),
            breaks,
            labels,
            membership,
        }
    }
}

/// Left-open right-closed interval index of `v`, `None` when outside.
fn interval_of(breaks: &[f64], v: f64) -> Option<usize> {
    if v.is_nan() || breaks.len() < 2 || v <= breaks[0] || v > breaks[breaks.len() - 1] {
        return None;
    }
    // first break >= v closes the interval
    let k = breaks.partition_point(|&b| b < v);
    Some(k - 1)
}

/// Cut `values` into `groups` intervals at type-7 empirical quantiles.
pub fn quantile_cuts(variable: &str, values: &[f64], groups: usize) -> Result<GroupAssignment> {
    if groups < 2 {
        return Err(Error::Domain("quantile cuts need at least 2 groups".into()));
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < groups {
        return Err(Error::Domain(format!(
            "'{variable}' has {} distinct values, fewer than {groups} groups",
            distinct.len()
        )));
    }
    let mut breaks: Vec<f64> = (0..=groups)
        .map(|k| quantile_sorted(&sorted, k as f64 / groups as f64))
        .collect();
    breaks.dedup();
    if breaks.len() < 3 {
        return Err(Error::Domain(format!(
            "'{variable}' quantiles collapse to fewer than 2 groups"
        )));
    }
    breaks[0] -= LOWEST_BREAK_EPSILON;
    Ok(GroupAssignment::from_breaks(variable, values, breaks))
}

/// Cut `values` at explicit ascending breaks into left-open right-closed
/// intervals. Values outside the outer breaks get no group.
pub fn cut_with_breaks(variable: &str, values: &[f64], breaks: &[f64]) -> Result<GroupAssignment> {
    if breaks.len() < 3 {
        return Err(Error::Domain("need at least 3 breaks (2 groups)".into()));
    }
    if breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!(
            "breaks must be strictly ascending: {breaks:?}"
        )));
    }
    Ok(GroupAssignment::from_breaks(variable, values, breaks.to_vec()))
}

/// The PBC data bundled with the crate.
pub mod pbc {
    use super::*;

    pub const CSV: &str = include_str!("../data/pbc.csv");
    pub const SCHEMA: &str = include_str!("../data/pbc.schema.json");

    pub fn schema() -> Vec<VariableSpec> {
        serde_json::from_str(SCHEMA).expect("bundled schema is valid")
    }

    pub fn options() -> LoadOptions {
        LoadOptions {
            schema: Some(schema()),
            ..LoadOptions::default()
        }
    }

    /// All 418 rows.
    pub fn full() -> Frame {
        read_frame(CSV.as_bytes(), &options()).expect("bundled data is valid")
    }

    /// The randomized-trial rows: those with a recorded treatment arm.
    pub fn trial() -> Frame {
        let f = full();
        let t = f.index_of("treatment").expect("treatment column");
        f.filter_rows(|r| !f.is_missing(r, t))
    }

    /// The non-trial rows held out for prediction.
    pub fn test() -> Frame {
        let f = full();
        let t = f.index_of("treatment").expect("treatment column");
        f.filter_rows(|r| f.is_missing(r, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions {
            time_col: "time".into(),
            ..LoadOptions::default()
        }
    }

    #[test]
    fn header_only_gives_empty_frame() {
        let f = read_frame("time,status,x\n".as_bytes(), &opts()).unwrap();
        assert_eq!(f.n(), 0);
        assert_eq!(f.p(), 1);
    }

    #[test]
    fn non_numeric_token_names_row() {
        let mut text = String::from("time,status,x\n");
        for i in 1..=9 {
            let x = if i == 7 { "abc".to_string() } else { i.to_string() };
            text.push_str(&format!("{i},1,{x}\n"));
        }
        let schema = vec![VariableSpec::continuous("x")];
        let err = read_frame(
            text.as_bytes(),
            &LoadOptions {
                schema: Some(schema),
                ..opts()
            },
        )
        .unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 7),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn inferred_non_numeric_column_becomes_categorical() {
        let text = "time,status,x\n1,1,a\n2,0,b\n3,1,c\n";
        let f = read_frame(text.as_bytes(), &opts()).unwrap();
        assert_eq!(f.variable(0).kind, VariableKind::Unordered);
        assert_eq!(f.variable(0).levels, vec!["a", "b", "c"]);
    }

    #[test]
    fn column_count_mismatch_is_parse_error() {
        let text = "time,status,x\n1,1,2\n2,0\n";
        let err = read_frame(text.as_bytes(), &opts()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_response_is_validation_error() {
        let text = "time,status,x\n1,NA,2\n";
        let err = read_frame(text.as_bytes(), &opts()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn type_inference_rules() {
        let text = "time,status,num,flag,cat\n1,TRUE,1.5,yes,a\n2,FALSE,NA,no,b\n3,T,2,yes,c\n";
        let f = read_frame(text.as_bytes(), &opts()).unwrap();
        assert_eq!(f.variable(0).kind, VariableKind::Continuous);
        assert!(f.is_missing(1, 0));
        assert_eq!(f.variable(1).kind, VariableKind::Boolean);
        assert_eq!(f.variable(1).levels, vec!["no", "yes"]);
        assert_eq!(f.variable(2).kind, VariableKind::Unordered);
        assert_eq!(f.status(), &[true, false, true]);
    }

    #[test]
    fn census_orders_by_count() {
        let text = "time,status,a,b,c\n1,1,NA,1,NA\n2,0,1,2,NA\n3,1,NA,3,1\n";
        let f = read_frame(text.as_bytes(), &opts()).unwrap();
        let c = missing_census(&f);
        assert_eq!(
            c,
            vec![
                CensusRecord { variable: "a".into(), count: 2 },
                CensusRecord { variable: "c".into(), count: 2 },
            ]
        );
    }

    #[test]
    fn census_of_complete_frame_is_empty() {
        let text = "time,status,a\n1,1,1\n2,0,2\n";
        let f = read_frame(text.as_bytes(), &opts()).unwrap();
        assert!(missing_census(&f).is_empty());
    }

    #[test]
    fn quantile_cuts_uniform_values() {
        let v: Vec<f64> = (1..=12).map(f64::from).collect();
        let g = quantile_cuts("v", &v, 6).unwrap();
        assert_eq!(g.sizes(), vec![2; 6]);
        assert!(g.membership.iter().all(Option::is_some));
    }

    #[test]
    fn quantile_cuts_too_few_distinct() {
        let v = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0];
        assert!(matches!(quantile_cuts("v", &v, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn explicit_breaks_are_right_closed() {
        let breaks = [0.0, 0.8, 1.3, 3.4, 29.0];
        let g = cut_with_breaks("bili", &[0.8, 0.81, 30.0, 29.0, f64::NAN], &breaks).unwrap();
        assert_eq!(g.membership, vec![Some(0), Some(1), None, Some(3), None]);
        assert_eq!(g.labels[0], "(0,0.8]");
    }

    #[test]
    fn non_ascending_breaks_rejected() {
        assert!(matches!(
            cut_with_breaks("x", &[1.0], &[0.0, 2.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = Frame::new(
            vec![VariableSpec::continuous("a"), VariableSpec::continuous("a")],
            vec![vec![1.0], vec![2.0]],
            Response {
                time: vec![1.0],
                status: vec![true],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
