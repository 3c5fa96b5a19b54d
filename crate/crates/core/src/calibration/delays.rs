use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search box for the delays in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayBounds {
    pub tau2_max: f64,
    pub tau3_max: f64,
    /// Grid spacing of the series.
    pub step: f64,
}

impl Default for DelayBounds {
    fn default() -> Self {
        Self {
            tau2_max: 5.0,
            tau3_max: 25.0,
            step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub tau2: f64,
    pub tau3: f64,
    pub objective: f64,
}

fn steps(max: f64, step: f64) -> Result<i64> {
    if !(max >= 0.0 && max.is_finite()) {
        return Err(Error::domain(format!("delay bound {max} must be nonnegative")));
    }
    Ok((max / step + 1e-9).floor() as i64)
}

/// RMS of `f1(t) + f2(t + tau2) - f3(t + tau3)` over the samples where all
/// three shifted series are defined, for shifts given in grid steps.
fn objective(f1: &[f64], f2: &[f64], f3: &[f64], k2: i64, k3: i64) -> Option<f64> {
    let n = f1.len().min(f2.len()).min(f3.len()) as i64;
    let start = 0.max(-k2).max(-k3);
    let end = n.min(n - k2).min(n - k3);
    if end <= start {
        return None;
    }
    let mut sum = 0.0;
    for i in start..end {
        let r = f1[i as usize] + f2[(i + k2) as usize] - f3[(i + k3) as usize];
        sum += r * r;
    }
    Some((sum / (end - start) as f64).sqrt())
}

/// Exhaustive grid search for the delays `(tau2, tau3)` that best align the
/// incoming flux series with the outgoing one. Among exactly equal
/// objective values the smallest `|tau3|` wins, then the smallest `|tau2|`,
/// then the smaller values.
pub fn estimate_delays(f1: &[f64], f2: &[f64], f3: &[f64], bounds: &DelayBounds) -> Result<DelayEstimate> {
    if !(bounds.step > 0.0 && bounds.step.is_finite()) {
        return Err(Error::domain("delay grid step must be positive"));
    }
    if f1.len() != f2.len() || f1.len() != f3.len() {
        return Err(Error::contract(format!(
            "flux series lengths differ: {}, {}, {}",
            f1.len(),
            f2.len(),
            f3.len()
        )));
    }
    let m2 = steps(bounds.tau2_max, bounds.step)?;
    let m3 = steps(bounds.tau3_max, bounds.step)?;
    let mut best: Option<(f64, i64, i64)> = None;
    let key = |k2: i64, k3: i64| (k3.abs(), k2.abs(), k3, k2);
    for k3 in -m3..=m3 {
        for k2 in -m2..=m2 {
            let value = objective(f1, f2, f3, k2, k3).ok_or_else(|| {
                Error::domain(format!(
                    "series of length {} too short for shifts ({k2}, {k3}) steps",
                    f1.len()
                ))
            })?;
            let better = match best {
                None => true,
                Some((v, b2, b3)) => value < v || (value == v && key(k2, k3) < key(b2, b3)),
            };
            if better {
                best = Some((value, k2, k3));
            }
        }
    }
    let (value, k2, k3) = best.expect("grid is nonempty");
    Ok(DelayEstimate {
        tau2: k2 as f64 * bounds.step,
        tau3: k3 as f64 * bounds.step,
        objective: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(t: f64, center: f64, width: f64, height: f64) -> f64 {
        height * (-(t - center).powi(2) / (2.0 * width * width)).exp()
    }

    #[test]
    fn recovers_constructed_shift() {
        let n = 2000;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.25).collect();
        let f1: Vec<f64> = t.iter().map(|&s| pulse(s, 150.0, 6.0, 0.4) + pulse(s, 300.0, 3.0, 0.2)).collect();
        let f2: Vec<f64> = t.iter().map(|&s| pulse(s, 200.0, 10.0, 1.0)).collect();
        // f3(t) = f1(t - 9) + f2(t - 9)
        let f3: Vec<f64> = t
            .iter()
            .map(|&s| pulse(s - 9.0, 150.0, 6.0, 0.4) + pulse(s - 9.0, 300.0, 3.0, 0.2) + pulse(s - 9.0, 200.0, 10.0, 1.0))
            .collect();
        let d = estimate_delays(&f1, &f2, &f3, &DelayBounds::default()).unwrap();
        assert_eq!((d.tau2, d.tau3), (0.0, 9.0));
        assert!(d.objective < 1e-12);
    }

    #[test]
    fn zero_series_tie_breaks_to_origin() {
        let z = vec![0.0; 400];
        let d = estimate_delays(&z, &z, &z, &DelayBounds::default()).unwrap();
        assert_eq!((d.tau2, d.tau3, d.objective), (0.0, 0.0, 0.0));
    }

    #[test]
    fn short_series_is_rejected() {
        let z = vec![1.0; 100];
        assert!(estimate_delays(&z, &z, &z, &DelayBounds::default()).is_err());
        assert!(estimate_delays(&z, &z[..50], &z, &DelayBounds::default()).is_err());
    }

    #[test]
    fn negative_shifts_are_found() {
        let n = 1200;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.25).collect();
        let f1: Vec<f64> = t.iter().map(|&s| pulse(s, 100.0, 4.0, 0.5)).collect();
        // f1(t) + f2(t - 4) = f3(t - 3.5)
        let f2: Vec<f64> = t.iter().map(|&s| pulse(s + 2.0, 180.0, 4.0, 0.7)).collect();
        let f3: Vec<f64> = t
            .iter()
            .map(|&s| pulse(s + 3.5, 100.0, 4.0, 0.5) + pulse(s + 3.5 - 2.0, 180.0, 4.0, 0.7))
            .collect();
        let d = estimate_delays(&f1, &f2, &f3, &DelayBounds::default()).unwrap();
        assert_eq!((d.tau2, d.tau3), (-4.0, -3.5));
    }
}
