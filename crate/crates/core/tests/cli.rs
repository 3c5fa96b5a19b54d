use std::fs;
use std::path::Path;

use clap::Parser;
use junction_flow::cli::{run, Cli};
use junction_flow::data::io::{load_manifest, load_trajectories};
use junction_flow::pipeline::{load_toml, ClassicalFile, DiagramsFile};

fn cli(dir: &Path, args: &[&str]) -> junction_flow::Result<()> {
    let d = dir.to_str().unwrap();
    let mut argv = vec!["junction-flow", "--data", d, "--out", d];
    argv.extend_from_slice(args);
    run(&Cli::try_parse_from(argv).unwrap())
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn empty_corpus_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["gen-synth", "--duration", "0"]).unwrap();
    let manifest = load_manifest(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.len(), 31);
    for m in &manifest {
        assert_eq!(m.duration_s, 0.0);
        assert_eq!((m.entering_count, m.passing_count), (0, 0));
        let d = load_trajectories(dir.path().join(format!("dataset_{:02}.csv", m.id))).unwrap();
        assert!(d.trajectories.is_empty());
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cli(a.path(), &["--seed", "3", "gen-synth", "--duration", "30"]).unwrap();
    cli(b.path(), &["--seed", "3", "gen-synth", "--duration", "30"]).unwrap();
    cli(c.path(), &["--seed", "4", "gen-synth", "--duration", "30"]).unwrap();
    let read = |dir: &Path| fs::read(dir.join("dataset_01.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
    let h = header(&a.path().join("manifest.csv"));
    assert!(h.starts_with("# junction-flow ") && h.ends_with(" seed=3"), "{h}");
}

#[test]
fn missing_inputs_name_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    let e = cli(dir.path(), &["fit-delays"]).unwrap_err().to_string();
    assert!(e.contains("run gen-synth first"), "{e}");
    let e = cli(dir.path(), &["predict", "--model", "c2"]).unwrap_err().to_string();
    assert!(e.contains("run fit-classical first"), "{e}");
    let e = cli(dir.path(), &["predict", "--model", "ml1"]).unwrap_err().to_string();
    assert!(e.contains("run train-ml first"), "{e}");
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli(dir.path(), &["--set", "no_such_key=1", "gen-synth"]).is_err());
    assert!(cli(dir.path(), &["--set", "cells=1", "gen-synth"]).is_err());
    assert!(cli(dir.path(), &["--set", "bandwidth", "gen-synth"]).is_err());
    assert!(Cli::try_parse_from(["junction-flow", "simulate", "--model", "c9"]).is_err());
    assert!(Cli::try_parse_from(["junction-flow", "fit-classical", "--model", "ml1"]).is_err());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "seed = 9\nde_generations = 5\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let c = config.to_str().unwrap();
    let parse = |extra: &[&str]| {
        let mut argv = vec!["junction-flow", "--config", c, "--out", d];
        argv.extend_from_slice(extra);
        Cli::try_parse_from(argv).unwrap().run_config().unwrap()
    };
    let cfg = parse(&["fit-fd"]);
    assert_eq!((cfg.seed, cfg.de_generations), (9, 5));
    let cfg = parse(&["--set", "de_generations=7", "--seed", "1", "fit-fd"]);
    assert_eq!((cfg.seed, cfg.de_generations), (1, 7));
    assert_eq!(parse(&["--epochs", "3", "train-ml"]).epochs, 3);
    assert_eq!(parse(&["--epochs", "3", "capability-test"]).benchmark_epochs, 3);
}

/// A short corpus through delays, diagrams, a classical fit and a Riemann
/// prediction.
#[test]
fn short_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let quick = ["--set", "de_generations=30", "--set", "cells=40"];
    let with = |args: &[&str]| {
        let mut v = quick.to_vec();
        v.extend_from_slice(args);
        cli(p, &v).unwrap();
    };
    with(&["gen-synth", "--duration", "120"]);
    with(&["fit-delays"]);
    with(&["fit-fd"]);
    with(&["fit-classical", "--model", "c1"]);
    with(&["predict", "--model", "c1"]);

    let delays = fs::read_to_string(p.join("delays.csv")).unwrap();
    assert_eq!(delays.lines().filter(|l| !l.starts_with('#')).count(), 32);
    let fd: DiagramsFile = load_toml(p.join("fd.toml")).unwrap();
    assert_eq!(fd.road2.lanes, 3);
    assert!(fd.road2.rho_max <= 400.0 && fd.road1.v_max > 0.0);
    let c1: ClassicalFile = load_toml(p.join("classical_c1.toml")).unwrap();
    assert!((0.0..=1.0).contains(&c1.beta));
    assert_eq!(c1.diagrams, fd.diagrams().unwrap());
    let profiles = fs::read_to_string(p.join("predict_c1.csv")).unwrap();
    // header comment, column names, 40 cells on each side of the junction
    assert_eq!(profiles.lines().count(), 2 + 80);
    for file in ["delays.csv", "fd.toml", "classical_c1.toml", "errors_c1.csv", "predict_c1.csv"] {
        assert!(header(&p.join(file)).contains(" config="), "{file}");
    }
}
