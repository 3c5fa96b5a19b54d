//! Command-line front end. Each subcommand reads its inputs from the data
//! and output directories of the run configuration and writes CSV or TOML
//! artifacts that start with a provenance header.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crate::calibration::{
    generate_c1prime_dataset, model_error, run_capability_benchmark, train_ml, EvalSchedule, ModelError,
    TrainingSample,
};
use crate::classical::ClassicalKind;
use crate::config::{DiagramSource, RunConfig};
use crate::coupling::{CouplingModel, ZeroFlux};
use crate::data::io::{load_manifest, load_trajectories, save_manifest_tagged, save_trajectories_tagged};
use crate::data::{
    corpus_configs, crossing_time, recorded_manifest, split_datasets, synth_generate, Dataset, DatasetManifest,
    DatasetSplit, EmpiricalSeries, JunctionGeometry, Split, EXTRAPOLATION_CAP_S,
};
use crate::error::{Error, Result};
use crate::junction::RoadDiagrams;
use crate::ml::{read_model, write_model, MlCouplingModel, NormalizationParams, Variant};
use crate::pipeline::{
    align_dataset, fit_road_diagrams, load_toml, road_lanes, save_toml, simulate_dataset,
    training_samples, AlignedSeries, ClassicalFile, DiagramsFile,
};
use crate::solver::run_riemann_prediction;
use crate::units::mps_to_kmh;

#[derive(Debug, Parser)]
#[command(name = "junction-flow", version, about = "Coupling models for traffic flow at an on-ramp junction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory with the trajectory corpus.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Overrides a configuration key, e.g. `--set cells=400`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a synthetic trajectory corpus shaped like the recordings.
    GenSynth {
        /// Recording length in seconds for every dataset.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Estimates the coupling delays of every dataset.
    FitDelays,
    /// Fits one fundamental diagram per road to the training data.
    FitFd,
    /// Calibrates classical coupling models.
    FitClassical {
        #[arg(long, value_enum, default_value = "all")]
        model: ClassicalArg,
    },
    /// Trains a network coupling model.
    TrainMl {
        #[arg(long, value_enum, default_value = "ml1")]
        variant: VariantArg,
        /// Train on a standard benchmark instead of the corpus.
        #[arg(long, value_enum)]
        benchmark: Option<BenchmarkArg>,
    },
    /// Trains all network models on the flow-maximization benchmark.
    CapabilityTest {
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Boundary-flux experiment on the application datasets.
    Simulate {
        #[arg(long, value_enum, default_value = "all")]
        model: Vec<ModelArg>,
    },
    /// Density profiles after a Riemann problem at the junction.
    Predict {
        #[arg(long, value_enum, default_value = "all")]
        model: Vec<ModelArg>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassicalArg {
    C1,
    C2,
    C3,
    C4,
    All,
}

impl ClassicalArg {
    fn kinds(self) -> Vec<ClassicalKind> {
        match self {
            Self::C1 => vec![ClassicalKind::C1],
            Self::C2 => vec![ClassicalKind::C2],
            Self::C3 => vec![ClassicalKind::C3],
            Self::C4 => vec![ClassicalKind::C4],
            Self::All => ClassicalKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ml1,
    Ml2,
    Ml3,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ml1 => Variant::Ml1,
            VariantArg::Ml2 => Variant::Ml2,
            VariantArg::Ml3 => Variant::Ml3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkArg {
    /// Flow maximization with unit diagrams and priority 1/2.
    C1prime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    C1,
    C2,
    C3,
    C4,
    Ml1,
    Ml2,
    Ml3,
    /// Coupling that never lets vehicles pass; the baseline of the
    /// boundary experiment.
    Zero,
    /// The seven fitted models.
    All,
}

impl ModelArg {
    const FITTED: [ModelArg; 7] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::Ml1, Self::Ml2, Self::Ml3];

    fn id(self) -> &'static str {
        match self {
            Self::C1 => "c1",
            Self::C2 => "c2",
            Self::C3 => "c3",
            Self::C4 => "c4",
            Self::Ml1 => "ml1",
            Self::Ml2 => "ml2",
            Self::Ml3 => "ml3",
            Self::Zero => "zero",
            Self::All => "all",
        }
    }
}

fn expand(models: &[ModelArg]) -> Vec<ModelArg> {
    let mut out = Vec::new();
    for &m in models {
        let add: &[ModelArg] = if m == ModelArg::All { &ModelArg::FITTED } else { std::slice::from_ref(&m) };
        for &a in add {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

/// Applies `key=value` overrides to the flat configuration table. Values
/// are read as TOML and fall back to plain strings.
fn apply_overrides(config: RunConfig, sets: &[String]) -> Result<RunConfig> {
    if sets.is_empty() {
        return Ok(config);
    }
    let mut table: toml::Table = toml::from_str(&config.to_toml()?).map_err(|e| Error::parse("config", e))?;
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{s}' is not of the form key=value")))?;
        let value = format!("v = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.to_string()));
        table.insert(k.trim().to_string(), value);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::config(format!("invalid override: {e}")))
}

impl Cli {
    /// Configuration file, then `--set` overrides, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut c = apply_overrides(base, &self.set)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(d) = &self.data {
            c.data = d.clone();
        }
        if let Some(e) = self.epochs {
            match self.command {
                Command::CapabilityTest { .. } => c.benchmark_epochs = e,
                _ => c.epochs = e,
            }
        }
        if let Command::GenSynth { duration: Some(d) } = self.command {
            c.duration = Some(d);
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    fs::create_dir_all(&cfg.out)?;
    match &cli.command {
        Command::GenSynth { .. } => gen_synth(&cfg),
        Command::FitDelays => fit_delays(&cfg),
        Command::FitFd => fit_fd(&cfg),
        Command::FitClassical { model } => fit_classical_cmd(&cfg, &model.kinds()),
        Command::TrainMl { variant, benchmark } => train_ml_cmd(&cfg, (*variant).into(), *benchmark),
        Command::CapabilityTest { variant } => capability_test(&cfg, *variant),
        Command::Simulate { model } => simulate(&cfg, &expand(model)),
        Command::Predict { model } => predict(&cfg, &expand(model)),
    }
}

/// Creates `path` and writes the provenance header of `kind`.
fn create(cfg: &RunConfig, path: &Path, kind: &str) -> Result<BufWriter<File>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", cfg.header(kind)?)?;
    Ok(f)
}

fn dataset_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("dataset_{id:02}.csv"))
}

fn gen_synth(cfg: &RunConfig) -> Result<()> {
    let base = cfg.synth();
    let mut manifests = recorded_manifest();
    if let Some(d) = cfg.duration {
        for m in &mut manifests {
            m.duration_s = d;
        }
    }
    let tags = cfg.tags()?;
    let mut rows = Vec::new();
    for (synth, m) in corpus_configs(&recorded_manifest(), &base).into_iter().zip(&manifests) {
        let synth = crate::data::SynthConfig {
            duration: m.duration_s,
            ..synth
        };
        let dataset = synth_generate(&synth)?;
        save_trajectories_tagged(&dataset, &tags, dataset_path(&cfg.out, dataset.id))?;
        rows.push(synthetic_manifest(m, &dataset, &synth.geometry, synth.ramp_offset, synth.merge_delay));
    }
    save_manifest_tagged(&rows, &tags, cfg.out.join("manifest.csv"))?;
    println!("wrote {} datasets to {}", rows.len(), cfg.out.display());
    Ok(())
}

/// Manifest row of a generated dataset: counts and mean speeds of the
/// vehicles entering during the recording, and the configured delays.
fn synthetic_manifest(
    template: &DatasetManifest,
    dataset: &Dataset,
    geometry: &JunctionGeometry,
    tau2: f64,
    tau3: f64,
) -> DatasetManifest {
    // (count, speed sum, speed samples) of the ramp and the main lanes
    let mut acc = [(0u32, 0.0f64, 0usize); 2];
    for tr in &dataset.trajectories {
        let Some(t) = crossing_time(tr, geometry.inflow_x, EXTRAPOLATION_CAP_S) else {
            continue;
        };
        if !(0.0..=dataset.duration).contains(&t) {
            continue;
        }
        let (_, y) = tr.extrapolated_position(t);
        let road = if geometry.on_ramp(y) {
            0
        } else if geometry.main_lanes.0 <= y && y <= geometry.main_lanes.1 {
            1
        } else {
            continue;
        };
        acc[road].0 += 1;
        if let Some(v) = tr.speed(t) {
            acc[road].1 += mps_to_kmh(v);
            acc[road].2 += 1;
        }
    }
    let stats = |road: usize| {
        let (n, sum, k) = acc[road];
        (n, if k == 0 { 0.0 } else { sum / k as f64 })
    };
    let (entering_count, entering_speed_kmh) = stats(0);
    let (passing_count, passing_speed_kmh) = stats(1);
    DatasetManifest {
        duration_s: dataset.duration,
        passing_count,
        passing_speed_kmh,
        entering_count,
        entering_speed_kmh,
        tau2,
        tau3,
        ..template.clone()
    }
}

struct Corpus {
    manifests: Vec<DatasetManifest>,
    split: DatasetSplit,
    datasets: BTreeMap<u32, Dataset>,
    geometry: JunctionGeometry,
}

impl Corpus {
    fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.csv");
        if !manifest_path.exists() {
            return Err(Error::config(format!(
                "no manifest in {}; run gen-synth first or pass --data",
                dir.display()
            )));
        }
        let manifests = load_manifest(&manifest_path)?;
        let split = split_datasets(&manifests)?;
        let mut datasets = BTreeMap::new();
        for m in &manifests {
            let d = load_trajectories(dataset_path(dir, m.id))?;
            if d.id != m.id {
                return Err(Error::config(format!("file of dataset {} holds dataset {}", m.id, d.id)));
            }
            datasets.insert(m.id, d);
        }
        Ok(Self {
            manifests,
            split,
            datasets,
            geometry: JunctionGeometry::default(),
        })
    }

    fn ids(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.split.train,
            Split::Test => &self.split.test,
            Split::Application => &self.split.application,
        }
    }

    fn aligned(&self, cfg: &RunConfig, split: Split) -> Result<Vec<(u32, AlignedSeries)>> {
        self.ids(split)
            .iter()
            .map(|id| {
                let a = align_dataset(&self.datasets[id], &self.geometry, &cfg.delay_bounds())
                    .map_err(|e| Error::domain(format!("dataset {id}: {e}")))?;
                Ok((*id, a))
            })
            .collect()
    }

    fn series(&self, cfg: &RunConfig, split: Split) -> Result<Vec<EmpiricalSeries>> {
        Ok(self.aligned(cfg, split)?.into_iter().map(|(_, a)| a.series).collect())
    }
}

fn fit_delays(cfg: &RunConfig) -> Result<()> {
    let corpus = Corpus::load(&cfg.data)?;
    let path = cfg.out.join("delays.csv");
    let mut w = csv::Writer::from_writer(create(cfg, &path, "delays")?);
    w.write_record(["dataset", "split", "tau2", "tau3", "objective"])?;
    for m in &corpus.manifests {
        let a = align_dataset(&corpus.datasets[&m.id], &corpus.geometry, &cfg.delay_bounds())?;
        println!("dataset {:2} ({}): tau2 {:6.2} s, tau3 {:6.2} s", m.id, m.split, a.delays.tau2, a.delays.tau3);
        w.write_record([
            m.id.to_string(),
            m.split.to_string(),
            a.delays.tau2.to_string(),
            a.delays.tau3.to_string(),
            a.delays.objective.to_string(),
        ])?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn fit_fd(cfg: &RunConfig) -> Result<()> {
    let corpus = Corpus::load(&cfg.data)?;
    let series = corpus.series(cfg, Split::Train)?;
    let lanes = road_lanes(&corpus.geometry);
    let fits = fit_road_diagrams(&series, lanes, &cfg.de())?;
    for (k, f) in fits.iter().enumerate() {
        println!(
            "road {}: v_max {:.3} km/h, rho_max {:.3} veh/km{}",
            k + 1,
            f.diagram.v_max(),
            f.diagram.rho_max(),
            if f.bound_active { " (stagnation bound)" } else { "" }
        );
    }
    let path = cfg.out.join("fd.toml");
    save_toml(&path, &cfg.header("diagrams")?, &DiagramsFile::new(&fits, lanes))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn diagrams(cfg: &RunConfig) -> Result<RoadDiagrams> {
    match cfg.diagrams {
        DiagramSource::Reference => Ok(RoadDiagrams::reference_onramp()),
        DiagramSource::Fitted => {
            let file: DiagramsFile = load_toml(cfg.out.join("fd.toml"))
                .map_err(|e| Error::config(format!("{e}; run fit-fd first or set diagrams = \"reference\"")))?;
            file.diagrams()
        }
    }
}

/// Training and test samples of the corpus.
fn corpus_samples(cfg: &RunConfig, fds: &RoadDiagrams) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    let corpus = Corpus::load(&cfg.data)?;
    let train = training_samples(&corpus.series(cfg, Split::Train)?, fds);
    let test = training_samples(&corpus.series(cfg, Split::Test)?, fds);
    Ok((train, test))
}

/// Appends Table-4 style rows `split,road1,road2,road3,total`.
fn write_errors<M: CouplingModel + ?Sized>(
    cfg: &RunConfig,
    id: &str,
    model: &M,
    sets: &[(&str, &[TrainingSample])],
) -> Result<()> {
    let path = cfg.out.join(format!("errors_{id}.csv"));
    let mut w = csv::Writer::from_writer(create(cfg, &path, "model-errors")?);
    w.write_record(["split", "road1", "road2", "road3", "total"])?;
    for (name, samples) in sets {
        if samples.is_empty() {
            continue;
        }
        let ModelError { roads, total } = model_error(model, samples)?;
        println!("  {id} {name:5}: E1 {:.4e}  E2 {:.4e}  E3 {:.4e}  total {:.4e}", roads[0], roads[1], roads[2], total);
        w.write_record([
            name.to_string(),
            roads[0].to_string(),
            roads[1].to_string(),
            roads[2].to_string(),
            total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fit_classical_cmd(cfg: &RunConfig, kinds: &[ClassicalKind]) -> Result<()> {
    let fds = diagrams(cfg)?;
    let (train, test) = corpus_samples(cfg, &fds)?;
    for &kind in kinds {
        let fit = crate::calibration::fit_classical(kind, &fds, &train, None, &cfg.de())?;
        let file = ClassicalFile::new(&fit);
        println!(
            "{kind}: beta {:.4}, markers ({:.2}, {:.2}, {:.2}) km/h",
            file.beta, file.markers.w1, file.markers.w2, file.markers.w3
        );
        let path = cfg.out.join(format!("classical_{}.toml", kind.id()));
        save_toml(&path, &cfg.header("classical")?, &file)?;
        write_errors(cfg, kind.id(), &fit.model, &[("train", &train), ("test", &test)])?;
    }
    Ok(())
}

fn model_meta(cfg: &RunConfig, extra: &[(&str, String)]) -> Result<BTreeMap<String, String>> {
    let mut meta: BTreeMap<String, String> = cfg.tags()?.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    for (k, v) in extra {
        meta.insert(k.to_string(), v.clone());
    }
    Ok(meta)
}

fn train_ml_cmd(cfg: &RunConfig, variant: Variant, benchmark: Option<BenchmarkArg>) -> Result<()> {
    let (fds, train, test, stem) = match benchmark {
        Some(BenchmarkArg::C1prime) => (
            RoadDiagrams::unit(),
            generate_c1prime_dataset(cfg.train_points)?,
            generate_c1prime_dataset(cfg.test_points)?,
            format!("{}_c1prime", variant.id()),
        ),
        None => {
            let fds = diagrams(cfg)?;
            let (train, test) = corpus_samples(cfg, &fds)?;
            (fds, train, test, variant.id().to_string())
        }
    };
    let norm = NormalizationParams::fit(&fds, train.iter().map(|s| &s.traces))?;
    let mut model = MlCouplingModel::initialized(variant, fds, norm, cfg.seed);
    let amsgrad = cfg.amsgrad(cfg.seed);
    info!("training {variant} on {} samples for {} epochs", train.len(), amsgrad.epochs);
    let report = train_ml(
        &mut model,
        &train,
        &test,
        &amsgrad,
        variant.consistency_training(),
        &EvalSchedule::EveryEpoch,
    )?;
    if let Some(last) = report.last() {
        println!(
            "{variant}: epoch {} train loss {:.4e}, test loss {}",
            last.epoch,
            last.train_loss,
            last.test_loss.map_or("-".into(), |v| format!("{v:.4e}"))
        );
    }
    report.write_csv(create(cfg, &cfg.out.join(format!("{stem}_loss.csv")), "loss-history")?)?;
    let meta = model_meta(cfg, &[("epochs", amsgrad.epochs.to_string())])?;
    write_model(cfg.out.join(format!("{stem}.json")), &model, meta)?;
    write_errors(cfg, &stem, &model, &[("train", &train), ("test", &test)])?;
    Ok(())
}

fn capability_test(cfg: &RunConfig, variant: Option<VariantArg>) -> Result<()> {
    let variants = variant.map_or(Variant::ALL.to_vec(), |v| vec![v.into()]);
    let report = run_capability_benchmark(&cfg.benchmark(variants))?;
    println!("variant epoch  train mean   train std    test mean    test std");
    for r in &report.rows {
        println!(
            "{:7} {:5}  {:.4e}  {:.4e}  {:.4e}  {:.4e}",
            r.variant.to_string(),
            r.epoch,
            r.train_mean,
            r.train_std,
            r.test_mean,
            r.test_std
        );
    }
    let path = cfg.out.join("capability.csv");
    report.write_csv(create(cfg, &path, "capability")?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_model(cfg: &RunConfig, m: ModelArg) -> Result<Box<dyn CouplingModel>> {
    let missing = |path: &Path, cmd: &str| {
        Error::config(format!("{} not found; run {cmd} first", path.display()))
    };
    Ok(match m {
        ModelArg::C1 | ModelArg::C2 | ModelArg::C3 | ModelArg::C4 => {
            let path = cfg.out.join(format!("classical_{}.toml", m.id()));
            if !path.exists() {
                return Err(missing(&path, "fit-classical"));
            }
            let file: ClassicalFile = load_toml(&path)?;
            Box::new(file.model()?)
        }
        ModelArg::Ml1 | ModelArg::Ml2 | ModelArg::Ml3 => {
            let path = cfg.out.join(format!("{}.json", m.id()));
            if !path.exists() {
                return Err(missing(&path, "train-ml"));
            }
            Box::new(read_model(&path)?)
        }
        ModelArg::Zero => Box::new(ZeroFlux::new(diagrams(cfg)?)),
        ModelArg::All => unreachable!("expanded before loading"),
    })
}

fn simulate(cfg: &RunConfig, models: &[ModelArg]) -> Result<()> {
    let corpus = Corpus::load(&cfg.data)?;
    let solver = cfg.solver();
    let ids = corpus.ids(Split::Application).to_vec();
    for &m in models {
        let model = load_model(cfg, m)?;
        let path = cfg.out.join(format!("simulate_{}.csv", m.id()));
        let mut w = csv::Writer::from_writer(create(cfg, &path, "boundary-errors")?);
        w.write_record(["dataset", "relative_error"])?;
        let mut errors = Vec::new();
        for &id in &ids {
            let d = &corpus.datasets[&id];
            let e = simulate_dataset(model.as_ref(), d, &corpus.geometry, &solver, cfg.bandwidth, cfg.output_step)?;
            let series = cfg.out.join(format!("simulate_{}_{id:02}.csv", m.id()));
            e.write_csv(create(cfg, &series, "boundary-fluxes")?)?;
            let cell = e.relative_error.map_or(String::new(), |v| v.to_string());
            if let Some(v) = e.relative_error {
                errors.push(v);
            }
            w.write_record([id.to_string(), cell])?;
        }
        let avg = if errors.is_empty() { f64::NAN } else { errors.iter().sum::<f64>() / errors.len() as f64 };
        w.write_record(["average".to_string(), avg.to_string()])?;
        w.flush()?;
        println!("{}: average relative error {avg:.4} over {} datasets", m.id(), errors.len());
    }
    Ok(())
}

fn predict(cfg: &RunConfig, models: &[ModelArg]) -> Result<()> {
    let solver = cfg.solver();
    for &m in models {
        let model = load_model(cfg, m)?;
        let p = run_riemann_prediction(model.as_ref(), &solver, cfg.horizon)?;
        let path = cfg.out.join(format!("predict_{}.csv", m.id()));
        p.write_csv(create(cfg, &path, "density-profiles")?)?;
        println!(
            "{}: t = {} s, {} steps, mass balance defect {:.2e}",
            m.id(),
            p.time,
            p.stats.steps,
            p.balance_defect()
        );
    }
    Ok(())
}
