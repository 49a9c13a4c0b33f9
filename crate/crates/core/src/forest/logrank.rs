//! Standardized two-sample log-rank statistic used as the split criterion.

/// Running sums for one candidate partition.
#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    numerator: f64,
    variance: f64,
}

impl Accum {
    #[inline]
    fn add(&mut self, at_risk: f64, at_risk_left: f64, deaths: f64, deaths_left: f64) {
        if deaths == 0.0 {
            return;
        }
        let frac = at_risk_left / at_risk;
        self.numerator += deaths_left - deaths * frac;
        if at_risk > 1.0 {
            self.variance += deaths * frac * (1.0 - frac) * (at_risk - deaths) / (at_risk - 1.0);
        }
    }

    fn finish(self) -> f64 {
        if self.variance > 0.0 {
            self.numerator / self.variance.sqrt()
        } else {
            0.0
        }
    }
}

/// Log-rank statistic over members listed in ascending time order.
///
/// `side(k)` gives the daughter of the `k`-th member (`Some(true)` for left)
/// or `None` to leave it out entirely. Each listed member counts once, so
/// bootstrap duplicates are listed repeatedly.
pub(crate) fn logrank_sorted(
    times: &[f64],
    status: &[bool],
    members: &[u32],
    side: impl Fn(usize) -> Option<bool>,
) -> f64 {
    let mut acc = Accum::default();
    let mut at_risk = 0.0;
    let mut at_risk_left = 0.0;
    let mut k = members.len();
    while k > 0 {
        let t = times[members[k - 1] as usize];
        let (mut deaths, mut deaths_left) = (0.0, 0.0);
        while k > 0 && times[members[k - 1] as usize] == t {
            k -= 1;
            let row = members[k] as usize;
            if let Some(left) = side(k) {
                at_risk += 1.0;
                if left {
                    at_risk_left += 1.0;
                }
                if status[row] {
                    deaths += 1.0;
                    if left {
                        deaths_left += 1.0;
                    }
                }
            }
        }
        acc.add(at_risk, at_risk_left, deaths, deaths_left);
    }
    acc.finish()
}

/// Standardized log-rank statistic comparing rows with `left[i] == true`
/// against the rest. Positive values mean more deaths on the left than
/// expected under no difference. Returns 0 when the variance vanishes.
pub fn logrank_statistic(times: &[f64], status: &[bool], left: &[bool]) -> f64 {
    assert_eq!(times.len(), status.len());
    assert_eq!(times.len(), left.len());
    let mut order: Vec<u32> = (0..times.len() as u32).collect();
    order.sort_by(|&a, &b| times[a as usize].total_cmp(&times[b as usize]));
    logrank_sorted(times, status, &order, |k| Some(left[order[k] as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups_give_zero() {
        let t = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let s = [true, false, true, true, false, true];
        let l = [true, true, true, false, false, false];
        assert_eq!(logrank_statistic(&t, &s, &l), 0.0);
    }

    #[test]
    fn single_side_has_zero_variance() {
        let t = [1.0, 2.0];
        let s = [true, true];
        assert_eq!(logrank_statistic(&t, &s, &[true, true]), 0.0);
    }

    #[test]
    fn sign_follows_excess_left_deaths() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let s = [true; 4];
        assert!(logrank_statistic(&t, &s, &[true, true, false, false]) > 0.0);
        assert!(logrank_statistic(&t, &s, &[false, false, true, true]) < 0.0);
    }
}
