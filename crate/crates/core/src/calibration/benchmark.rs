//! Capability benchmark: the ML models learn C1' (flow maximization on unit
//! Greenshields roads with priority 0.5) from a uniform grid of traces.

use std::io::Write;

use log::info;

use super::{train_ml, AmsGradConfig, EvalSchedule, TrainingReport, TrainingSample};
use crate::classical::solve_c1;
use crate::error::{Error, Result};
use crate::junction::{JunctionTraces, RoadDiagrams};
use crate::ml::{MlCouplingModel, NormalizationParams, Variant};

/// Epochs at which the benchmark reports losses.
pub const BENCHMARK_EPOCHS: [usize; 5] = [0, 1, 10, 100, 500];

/// Priority of C1'.
pub const C1_PRIME_BETA: f64 = 0.5;

/// All `n^3` triples of the uniform grid on `[0, 1]^3` (endpoints included)
/// with C1' fluxes as targets.
pub fn generate_c1prime_dataset(points: usize) -> Result<Vec<TrainingSample>> {
    if points < 2 {
        return Err(Error::domain(format!("need at least 2 grid points, got {points}")));
    }
    let fds = RoadDiagrams::unit();
    let h = 1.0 / (points - 1) as f64;
    let mut out = Vec::with_capacity(points.pow(3));
    for i in 0..points {
        for j in 0..points {
            for k in 0..points {
                let t = JunctionTraces::new(i as f64 * h, j as f64 * h, k as f64 * h);
                out.push(TrainingSample::new(t, solve_c1(&t, &fds, C1_PRIME_BETA)?));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub train_points: usize,
    pub test_points: usize,
    pub training: AmsGradConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            seeds: (0..5).collect(),
            train_points: 20,
            test_points: 80,
            training: AmsGradConfig {
                epochs: 500,
                ..AmsGradConfig::default()
            },
        }
    }
}

/// Mean and sample standard deviation over the seeds at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkRow {
    pub variant: Variant,
    pub epoch: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<(Variant, u64, TrainingReport)>,
}

impl BenchmarkReport {
    pub fn row(&self, variant: Variant, epoch: usize) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.variant == variant && r.epoch == epoch)
    }

    /// Writes `variant,epoch,train_mean,train_std,test_mean,test_std`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "epoch", "train_mean", "train_std", "test_mean", "test_std"])?;
        for r in &self.rows {
            w.write_record([
                r.variant.to_string(),
                r.epoch.to_string(),
                format!("{:e}", r.train_mean),
                format!("{:e}", r.train_std),
                format!("{:e}", r.test_mean),
                format!("{:e}", r.test_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_capability_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.seeds.is_empty() {
        return Err(Error::config("benchmark needs at least one seed"));
    }
    let train = generate_c1prime_dataset(config.train_points)?;
    let test = generate_c1prime_dataset(config.test_points)?;
    let fds = RoadDiagrams::unit();
    let norm = NormalizationParams::fit(&fds, train.iter().map(|s| &s.traces))?;
    let epochs: Vec<usize> = BENCHMARK_EPOCHS
        .iter()
        .copied()
        .filter(|&e| e <= config.training.epochs)
        .chain([config.training.epochs])
        .collect();
    let schedule = EvalSchedule::Epochs(epochs.clone());

    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &variant in &config.variants {
        let mut reports = Vec::new();
        for &seed in &config.seeds {
            info!("benchmark {variant} seed {seed}");
            let mut model = MlCouplingModel::initialized(variant, fds, norm, seed);
            let cfg = AmsGradConfig {
                seed,
                ..config.training.clone()
            };
            let report = train_ml(
                &mut model,
                &train,
                &test,
                &cfg,
                variant.consistency_training(),
                &schedule,
            )?;
            reports.push(report.clone());
            runs.push((variant, seed, report));
        }
        let mut seen = Vec::new();
        for &epoch in &epochs {
            if seen.contains(&epoch) {
                continue;
            }
            seen.push(epoch);
            let pick = |f: fn(&super::LossRecord) -> f64| -> Vec<f64> {
                reports
                    .iter()
                    .filter_map(|r| r.at_epoch(epoch).map(f))
                    .collect()
            };
            let (train_mean, train_std) = mean_std(&pick(|r| r.train_loss));
            let (test_mean, test_std) = mean_std(&pick(|r| r.test_loss.unwrap_or(f64::NAN)));
            rows.push(BenchmarkRow {
                variant,
                epoch,
                train_mean,
                train_std,
                test_mean,
                test_std,
            });
        }
    }
    Ok(BenchmarkReport { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_sizes_and_corner() {
        assert_eq!(generate_c1prime_dataset(20).unwrap().len(), 8000);
        let small = generate_c1prime_dataset(2).unwrap();
        assert_eq!(small.len(), 8);
        assert_eq!(small[0].target.as_array(), [0.0; 3]);
        assert_eq!(small[7].traces.as_array(), [1.0; 3]);
        assert!(generate_c1prime_dataset(1).is_err());
    }

    #[test]
    fn grid_is_equidistant() {
        let d = generate_c1prime_dataset(5).unwrap();
        assert_eq!(d[1].traces.rho3, 0.25);
        assert_eq!(d[5].traces.rho2, 0.25);
        assert_eq!(d[25].traces.rho1, 0.25);
    }

    #[test]
    fn short_benchmark_runs() {
        let cfg = BenchmarkConfig {
            variants: vec![Variant::Ml1],
            seeds: vec![0, 1],
            train_points: 5,
            test_points: 7,
            training: AmsGradConfig {
                epochs: 3,
                ..AmsGradConfig::default()
            },
        };
        let r = run_capability_benchmark(&cfg).unwrap();
        let epochs: Vec<usize> = r.rows.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![0, 1, 3]);
        assert!(r.row(Variant::Ml1, 3).unwrap().train_mean < r.row(Variant::Ml1, 0).unwrap().train_mean);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
