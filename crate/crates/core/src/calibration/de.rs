//! Self-adaptive differential evolution (rand/1/bin).
//!
//! Every member carries its own scale factor `F` and crossover rate `CR`.
//! Before producing a trial vector each is resampled with probability 0.1
//! (`F` uniform in `[0.1, 1]`, `CR` uniform in `[0, 1]`) and the new values
//! survive together with the trial vector.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU_F: f64 = 0.1;
const TAU_CR: f64 = 0.1;
const F_LOWER: f64 = 0.1;
const F_UPPER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    /// Stop once the spread of the population's objective values drops to
    /// this value. Negative disables the check.
    pub tolerance: f64,
    pub adapt_scale: bool,
    pub adapt_crossover: bool,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 300,
            seed: 0,
            tolerance: -1.0,
            adapt_scale: true,
            adapt_crossover: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Best objective after initialization and after every generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn check(bounds: &[(f64, f64)], config: &DeConfig) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::domain("no parameters to optimize"));
    }
    if config.population < 4 {
        return Err(Error::domain(format!(
            "population {} is below the minimum of 4",
            config.population
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::domain(format!("infeasible bounds [{lo}, {hi}] for parameter {i}")));
        }
    }
    Ok(())
}

/// Minimizes `objective` over the box `bounds`. NaN objective values count
/// as `+inf`. Deterministic for a fixed seed.
pub fn minimize<F>(mut objective: F, bounds: &[(f64, f64)], config: &DeConfig) -> Result<DeResult>
where
    F: FnMut(&[f64]) -> f64,
{
    check(bounds, config)?;
    let dim = bounds.len();
    let np = config.population;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                .collect()
        })
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|x| eval(x)).collect();
    let mut scale = vec![0.5; np];
    let mut cross = vec![0.9; np];
    let mut evaluations = np;

    let best_of = |fit: &[f64]| {
        fit.iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v < fit[b] { i } else { b })
    };
    let mut history = vec![fit[best_of(&fit)]];

    let mut trial = vec![0.0; dim];
    for _ in 0..config.generations {
        let spread = fit.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - fit.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread <= config.tolerance {
            break;
        }
        let mut next = pop.clone();
        for i in 0..np {
            let f = if config.adapt_scale && rng.random::<f64>() < TAU_F {
                F_LOWER + rng.random::<f64>() * (F_UPPER - F_LOWER)
            } else {
                scale[i]
            };
            let cr = if config.adapt_crossover && rng.random::<f64>() < TAU_CR {
                rng.random::<f64>()
            } else {
                cross[i]
            };
            let picks = loop {
                let p = sample(&mut rng, np, 3);
                if !p.iter().any(|k| k == i) {
                    break [p.index(0), p.index(1), p.index(2)];
                }
            };
            let forced = rng.random_range(0..dim);
            for j in 0..dim {
                let (lo, hi) = bounds[j];
                trial[j] = if j == forced || rng.random::<f64>() < cr {
                    let v = pop[picks[0]][j] + f * (pop[picks[1]][j] - pop[picks[2]][j]);
                    v.clamp(lo, hi)
                } else {
                    pop[i][j]
                };
            }
            let value = eval(&trial);
            evaluations += 1;
            if value <= fit[i] {
                next[i].copy_from_slice(&trial);
                fit[i] = value;
                scale[i] = f;
                cross[i] = cr;
            }
        }
        pop = next;
        history.push(fit[best_of(&fit)]);
    }

    let b = best_of(&fit);
    Ok(DeResult {
        best: pop[b].clone(),
        value: fit[b],
        history,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let cfg = DeConfig {
            population: 40,
            generations: 1000,
            seed: 4,
            ..DeConfig::default()
        };
        let r = minimize(rosenbrock, &[(-2.0, 2.0); 3], &cfg).unwrap();
        assert!(r.value < 1e-8, "value {}", r.value);
        for x in &r.best {
            assert!((x - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn stays_in_bounds_and_history_is_monotone() {
        let bounds = [(0.5, 1.5), (-3.0, -1.0), (2.0, 2.0)];
        let mut outside = 0;
        let r = minimize(
            |x| {
                if x.iter().zip(&bounds).any(|(v, (lo, hi))| v < lo || v > hi) {
                    outside += 1;
                }
                x.iter().map(|v| v * v).sum()
            },
            &bounds,
            &DeConfig {
                generations: 50,
                ..DeConfig::default()
            },
        )
        .unwrap();
        assert_eq!(outside, 0);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.best[2], 2.0);
        assert!((r.best[0] - 0.5).abs() < 1e-6 && (r.best[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = DeConfig {
            generations: 20,
            seed: 9,
            ..DeConfig::default()
        };
        let a = minimize(rosenbrock, &[(-2.0, 2.0); 2], &cfg).unwrap();
        let b = minimize(rosenbrock, &[(-2.0, 2.0); 2], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_setup() {
        let f = |x: &[f64]| x[0];
        assert!(minimize(f, &[(1.0, 0.0)], &DeConfig::default()).is_err());
        assert!(minimize(f, &[(0.0, f64::INFINITY)], &DeConfig::default()).is_err());
        let small = DeConfig {
            population: 3,
            ..DeConfig::default()
        };
        assert!(minimize(f, &[(0.0, 1.0)], &small).is_err());
        assert!(minimize(f, &[], &DeConfig::default()).is_err());
    }

    #[test]
    fn nan_objective_is_never_selected() {
        let r = minimize(
            |x| if x[0] > 0.0 { f64::NAN } else { -x[0] },
            &[(-1.0, 1.0)],
            &DeConfig {
                generations: 100,
                ..DeConfig::default()
            },
        )
        .unwrap();
        assert!(r.best[0] <= 0.0 && r.value.is_finite());
    }
}
