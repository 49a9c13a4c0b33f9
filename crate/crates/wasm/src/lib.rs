//! Browser bindings over the bundled PBC data. Every call returns a JSON
//! string; the page in `www/` draws it on a canvas.

use rsf_core::dataset::{pbc, quantile_cuts};
use rsf_core::dependence::partial_dependence;
use rsf_core::importance::{minimal_depth, vimp, DepthTable, VimpTable};
use rsf_core::inference::{error_curve, predict_oob, ErrorCurve};
use rsf_core::km::kaplan_meier;
use rsf_core::{grow, Forest, Frame, GroupAssignment, GrowConfig, VariableSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct GrowSummary<'a> {
    ntree: usize,
    mtry: usize,
    oob_error: Option<f64>,
    error_curve: &'a ErrorCurve,
    depth: &'a DepthTable,
    vimp: &'a VimpTable,
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Training data plus the most recently grown forest.
#[wasm_bindgen]
pub struct Session {
    frame: Frame,
    forest: Option<Forest>,
}

impl Default for Session {
    fn default() -> Self {
        Self {
            frame: pbc::trial(),
            forest: None,
        }
    }
}

impl Session {
    pub fn variables_json(&self) -> Result<String, String> {
        let specs: &[VariableSpec] = self.frame.variables();
        json(&specs)
    }

    /// Kaplan-Meier curves by `group_var`: levels for categorical variables,
    /// quartiles otherwise. An empty name gives one pooled curve.
    pub fn km_json(&self, group_var: &str, conf: f64) -> Result<String, String> {
        let by = if group_var.is_empty() {
            None
        } else {
            let v = self.frame.require(group_var).map_err(|e| e.to_string())?;
            let groups = if self.frame.variable(v).kind.is_categorical() {
                GroupAssignment::from_levels(&self.frame, v)
            } else {
                quantile_cuts(group_var, self.frame.column(v), 4)
            };
            Some(groups.map_err(|e| e.to_string())?)
        };
        let est = kaplan_meier(&self.frame, by.as_ref(), conf).map_err(|e| e.to_string())?;
        json(&est)
    }

    pub fn grow_json(&mut self, ntree: usize, nodesize: usize, seed: u64) -> Result<String, String> {
        let config = GrowConfig {
            ntree,
            nodesize,
            seed,
            ..GrowConfig::default()
        };
        let forest = grow(&self.frame, &config).map_err(|e| e.to_string())?;
        let oob = predict_oob(&forest, &self.frame).map_err(|e| e.to_string())?;
        let curve = error_curve(&forest, &self.frame).map_err(|e| e.to_string())?;
        let depth = minimal_depth(&forest);
        let importance = vimp(&forest, &self.frame, seed).map_err(|e| e.to_string())?;
        let out = json(&GrowSummary {
            ntree: forest.ntree(),
            mtry: forest.mtry(),
            oob_error: oob.error().ok(),
            error_curve: &curve,
            depth: &depth,
            vimp: &importance,
        })?;
        self.forest = Some(forest);
        Ok(out)
    }

    pub fn partial_json(&self, xvar: &str, time: f64, npts: usize) -> Result<String, String> {
        let forest = self.forest.as_ref().ok_or("grow a forest first")?;
        let grid = partial_dependence(forest, &self.frame, xvar, &[time], npts).map_err(|e| e.to_string())?;
        json(&grid)
    }
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Session {
        Session::default()
    }

    /// Variable specs of the training data.
    pub fn variables(&self) -> Result<String, JsError> {
        self.variables_json().map_err(|e| JsError::new(&e))
    }

    pub fn km(&self, group_var: &str, conf: f64) -> Result<String, JsError> {
        self.km_json(group_var, conf).map_err(|e| JsError::new(&e))
    }

    /// Grow on the trial rows and report error curve, minimal depth and VIMP.
    pub fn grow(&mut self, ntree: usize, nodesize: usize, seed: u32) -> Result<String, JsError> {
        self.grow_json(ntree, nodesize, seed as u64).map_err(|e| JsError::new(&e))
    }

    pub fn partial(&self, xvar: &str, time: f64, npts: usize) -> Result<String, JsError> {
        self.partial_json(xvar, time, npts).map_err(|e| JsError::new(&e))
    }
}
