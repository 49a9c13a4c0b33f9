//! Product-limit survival and Nelson–Aalen cumulative hazard estimates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{Frame, GroupAssignment};
use crate::error::{Error, Result};

/// Estimates reported at each distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub cum_hazard: Vec<f64>,
    pub n_risk: Vec<usize>,
    pub n_event: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl StepCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Right-continuous survival at `t` (1 before the first event).
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    pub fn cum_hazard_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cum_hazard[k - 1]
        }
    }
}

/// Result of a (possibly grouped) estimate. Empty groups are skipped and
/// noted in `warnings`.
#[derive(Debug, Clone, Serialize)]
pub struct Estimates {
    pub curves: Vec<StepCurve>,
    pub warnings: Vec<String>,
}

/// Two-sided standard normal quantile for a confidence level.
pub fn z_for_level(conf_level: f64) -> Result<f64> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0,1), got {conf_level}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + conf_level / 2.0))
}

/// Single-sample estimate over rows given by `(time, status)` pairs.
/// `z` adds log-scale Greenwood bands when present.
pub fn estimate(times: &[f64], status: &[bool], z: Option<f64>) -> StepCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut curve = StepCurve {
        times: Vec::new(),
        survival: Vec::new(),
        cum_hazard: Vec::new(),
        n_risk: Vec::new(),
        n_event: Vec::new(),
        band_lo: z.map(|_| Vec::new()),
        band_hi: z.map(|_| Vec::new()),
        group: None,
    };

    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut hazard = 0.0;
    let mut greenwood = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0usize;
        while j < order.len() && times[order[j]] == t {
            if status[order[j]] {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            let n = at_risk as f64;
            let df = d as f64;
            surv *= 1.0 - df / n;
            hazard += df / n;
            if d < at_risk {
                greenwood += df / (n * (n - df));
            } else {
                greenwood = f64::INFINITY;
            }
            curve.times.push(t);
            curve.survival.push(surv);
            curve.cum_hazard.push(hazard);
            curve.n_risk.push(at_risk);
            curve.n_event.push(d);
            if let Some(z) = z {
                let (lo, hi) = if surv <= 0.0 || !greenwood.is_finite() {
                    (0.0, 0.0)
                } else {
                    let se = greenwood.sqrt();
                    (
                        (surv * (-z * se).exp()).clamp(0.0, 1.0),
                        (surv * (z * se).exp()).clamp(0.0, 1.0),
                    )
                };
                curve.band_lo.as_mut().unwrap().push(lo);
                curve.band_hi.as_mut().unwrap().push(hi);
            }
        }
        at_risk -= j - i;
        i = j;
    }
    curve
}

fn grouped(frame: &Frame, by: Option<&GroupAssignment>, z: Option<f64>) -> Result<Estimates> {
    let time = frame.time();
    let status = frame.status();
    let mut out = Estimates {
        curves: Vec::new(),
        warnings: Vec::new(),
    };
    match by {
        None => {
            if frame.n() == 0 {
                out.warnings.push("empty frame: no curve estimated".into());
            } else {
                out.curves.push(estimate(time, status, z));
            }
        }
        Some(groups) => {
            if groups.membership.len() != frame.n() {
                return Err(Error::Validation(format!(
                    "group assignment covers {} rows, frame has {}",
                    groups.membership.len(),
                    frame.n()
                )));
            }
            for (g, rows) in groups.members().into_iter().enumerate() {
                let label = groups.labels[g].clone();
                if rows.is_empty() {
                    out.warnings.push(format!("group '{label}' is empty; omitted"));
                    continue;
                }
                let t: Vec<f64> = rows.iter().map(|&r| time[r]).collect();
                let s: Vec<bool> = rows.iter().map(|&r| status[r]).collect();
                let mut c = estimate(&t, &s, z);
                c.group = Some(label);
                out.curves.push(c);
            }
        }
    }
    Ok(out)
}

/// Kaplan–Meier curves with log-scale Greenwood bands at `conf_level`.
pub fn kaplan_meier(
    frame: &Frame,
    by: Option<&GroupAssignment>,
    conf_level: f64,
) -> Result<Estimates> {
    let z = z_for_level(conf_level)?;
    grouped(frame, by, Some(z))
}

/// Nelson–Aalen cumulative hazard curves (no bands).
pub fn nelson_aalen(frame: &Frame, by: Option<&GroupAssignment>) -> Result<Estimates> {
    grouped(frame, by, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_censoring_product_limit() {
        let c = estimate(&[1.0, 2.0, 3.0], &[true, true, true], None);
        assert_eq!(c.times, vec![1.0, 2.0, 3.0]);
        let s1 = 1.0 - 1.0 / 3.0;
        assert_eq!(c.survival, vec![s1, s1 * (1.0 - 1.0 / 2.0), 0.0]);
        assert_eq!(c.cum_hazard, vec![1.0 / 3.0, 1.0 / 3.0 + 1.0 / 2.0, 1.0 / 3.0 + 1.0 / 2.0 + 1.0]);
        assert_eq!(c.n_risk, vec![3, 2, 1]);
    }

    #[test]
    fn censored_middle_row() {
        let c = estimate(&[1.0, 2.0, 3.0], &[true, false, true], None);
        assert_eq!(c.times, vec![1.0, 3.0]);
        assert_eq!(c.survival, vec![1.0 - 1.0 / 3.0, 0.0]);
        assert_eq!(c.cum_hazard, vec![1.0 / 3.0, 4.0 / 3.0]);
        assert_eq!(c.n_risk, vec![3, 1]);
    }

    #[test]
    fn events_precede_censoring_at_ties() {
        // event and censoring both at t=2: censored row still at risk
        let c = estimate(&[1.0, 2.0, 2.0, 4.0], &[true, true, false, true], None);
        assert_eq!(c.n_risk, vec![4, 3, 1]);
        assert_eq!(c.survival[1], 0.75 * (2.0 / 3.0));
    }

    #[test]
    fn bands_bracket_estimate() {
        let z = z_for_level(0.95).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-9);
        let t: Vec<f64> = (1..=20).map(f64::from).collect();
        let s: Vec<bool> = (0..20).map(|i| i % 3 != 0).collect();
        let c = estimate(&t, &s, Some(z));
        let lo = c.band_lo.as_ref().unwrap();
        let hi = c.band_hi.as_ref().unwrap();
        for k in 0..c.len() {
            assert!(lo[k] <= c.survival[k] && c.survival[k] <= hi[k]);
            assert!((0.0..=1.0).contains(&lo[k]) && (0.0..=1.0).contains(&hi[k]));
        }
    }

    #[test]
    fn bad_level_rejected() {
        assert!(z_for_level(1.0).is_err());
        assert!(z_for_level(0.0).is_err());
    }

    #[test]
    fn step_lookup_is_right_continuous() {
        let c = estimate(&[1.0, 2.0, 3.0], &[true, true, true], None);
        assert_eq!(c.survival_at(0.5), 1.0);
        assert_eq!(c.survival_at(1.0), 1.0 - 1.0 / 3.0);
        assert_eq!(c.survival_at(2.5), c.survival[1]);
    }
}
