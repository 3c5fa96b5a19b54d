//! Run configuration: a flat TOML table whose keys can be overridden on the
//! command line. Every output file records the hash of the effective
//! configuration and the seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{AmsGradConfig, BenchmarkConfig, DeConfig, DelayBounds};
use crate::data::{io::header_line, SynthConfig, KDE_BANDWIDTH_S};
use crate::error::{Error, Result};
use crate::ml::Variant;
use crate::solver::{LambdaMode, SolverConfig};

/// Where the fundamental diagrams used by the coupling models come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramSource {
    /// `fd.toml` written by `fit-fd`.
    #[default]
    Fitted,
    /// The published fits of the on-ramp recordings.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Directory with trajectory files and the manifest.
    pub data: PathBuf,
    /// Directory for fitted parameters and reports.
    pub out: PathBuf,
    pub diagrams: DiagramSource,

    // synthetic corpus
    /// Overrides the recording durations when set.
    pub duration: Option<f64>,
    pub modulation: f64,
    pub period: f64,
    pub speed_noise: f64,
    pub relaxation: f64,
    pub ramp_offset: f64,
    pub merge_delay: f64,

    // delays and smoothing
    pub tau2_max: f64,
    pub tau3_max: f64,
    pub bandwidth: f64,

    // differential evolution
    pub de_population: usize,
    pub de_generations: usize,

    // network training
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub penalty_weight: f64,
    pub benchmark_epochs: usize,
    pub benchmark_runs: usize,
    pub train_points: usize,
    pub test_points: usize,

    // solver
    pub cells: usize,
    pub cfl: f64,
    pub lambda_min: f64,
    pub lambda_mode: LambdaMode,
    pub half_length: f64,
    pub horizon: f64,
    pub output_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let delays = DelayBounds::default();
        let de = DeConfig::default();
        let train = AmsGradConfig::default();
        let solver = SolverConfig::default();
        Self {
            seed: 0,
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
            diagrams: DiagramSource::Fitted,
            duration: None,
            modulation: synth.modulation,
            period: synth.period,
            speed_noise: synth.speed_noise,
            relaxation: synth.relaxation,
            ramp_offset: synth.ramp_offset,
            merge_delay: synth.merge_delay,
            tau2_max: delays.tau2_max,
            tau3_max: delays.tau3_max,
            bandwidth: KDE_BANDWIDTH_S,
            de_population: de.population,
            de_generations: de.generations,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            penalty_weight: train.penalty_weight,
            benchmark_epochs: 500,
            benchmark_runs: 5,
            train_points: 20,
            test_points: 80,
            cells: solver.cells,
            cfl: solver.cfl,
            lambda_min: solver.lambda_min,
            lambda_mode: solver.lambda_mode,
            half_length: solver.half_length,
            horizon: 10.0,
            output_step: 0.25,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("config", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invariant(format!("config serialization failed: {e}")))
    }

    /// First 12 hex digits of the SHA-256 of the canonical TOML form. The
    /// input and output directories do not take part.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self {
            data: PathBuf::new(),
            out: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().take(6).map(|b| format!("{b:02x}")).collect())
    }

    /// Header tags `config=<hash> seed=<n>`.
    pub fn tags(&self) -> Result<Vec<(&'static str, String)>> {
        Ok(vec![("config", self.hash()?), ("seed", self.seed.to_string())])
    }

    /// `# junction-flow <version> <kind> config=<hash> seed=<n>`.
    pub fn header(&self, kind: &str) -> Result<String> {
        Ok(header_line(kind, &self.tags()?))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver().validate()?;
        self.amsgrad(0).validate()?;
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config(format!("duration {d} must be nonnegative")));
            }
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::config("KDE bandwidth must be positive"));
        }
        if !(self.horizon > 0.0 && self.output_step > 0.0) {
            return Err(Error::config("horizon and output step must be positive"));
        }
        if self.benchmark_runs == 0 || self.train_points < 2 || self.test_points < 2 {
            return Err(Error::config("benchmark needs a run and at least two points per axis"));
        }
        Ok(())
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            modulation: self.modulation,
            period: self.period,
            speed_noise: self.speed_noise,
            relaxation: self.relaxation,
            ramp_offset: self.ramp_offset,
            merge_delay: self.merge_delay,
            ..SynthConfig::default()
        }
    }

    pub fn delay_bounds(&self) -> DelayBounds {
        DelayBounds {
            tau2_max: self.tau2_max,
            tau3_max: self.tau3_max,
            ..DelayBounds::default()
        }
    }

    pub fn de(&self) -> DeConfig {
        DeConfig {
            population: self.de_population,
            generations: self.de_generations,
            seed: self.seed,
            ..DeConfig::default()
        }
    }

    /// Training settings for the given run seed.
    pub fn amsgrad(&self, seed: u64) -> AmsGradConfig {
        AmsGradConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            penalty_weight: self.penalty_weight,
            seed,
            ..AmsGradConfig::default()
        }
    }

    pub fn benchmark(&self, variants: Vec<Variant>) -> BenchmarkConfig {
        BenchmarkConfig {
            variants,
            seeds: (0..self.benchmark_runs as u64).map(|k| self.seed * 1000 + k).collect(),
            train_points: self.train_points,
            test_points: self.test_points,
            training: AmsGradConfig {
                epochs: self.benchmark_epochs,
                ..self.amsgrad(self.seed)
            },
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            cells: self.cells,
            cfl: self.cfl,
            lambda_min: self.lambda_min,
            lambda_mode: self.lambda_mode,
            half_length: self.half_length,
            ..SolverConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_and_hash() {
        let c = RunConfig::from_toml("seed = 7\ncells = 100\nlambda_mode = \"min\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.solver().cells, 100);
        assert_eq!(c.solver().lambda_mode, LambdaMode::Min);
        assert_ne!(c.hash().unwrap(), RunConfig::default().hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 12);
        assert!(c.header("report").unwrap().ends_with(&format!("config={} seed=7", c.hash().unwrap())));
        assert!(RunConfig::from_toml("sede = 1").is_err());
    }
}
