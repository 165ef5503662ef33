//! Command-line surface. Exit codes: 0 success, 1 bad input, 2 internal
//! failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use gral_core::experiment::run_experiment;
use gral_core::{
    batches_from_streams, make_scenario, run_instance, run_pipeline, LinearFalloff, Method, ScenarioSpec,
};

use crate::formats::{read_graph, read_packages, read_scenario, write_graph, write_packages, write_scenario};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "gral", version, about = "Localize drifting sensor nodes in tree-shaped pipe networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one seeded instance and write its package stream and ground truth.
    Simulate {
        /// Built-in scenario 1-4 or a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize a package stream.
    Localize {
        #[arg(long, value_parser = parse_method)]
        variant: Method,
        #[arg(long)]
        graph: PathBuf,
        /// NDJSON package stream.
        #[arg(long)]
        packages: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario file providing the nodes' insertion points.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Also write the final epochs of every node as JSON.
        #[arg(long)]
        epochs: Option<PathBuf>,
    },
    /// Run seeded instances and compare localization methods.
    Evaluate {
        /// Built-in scenario 1-4 or a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', value_parser = parse_method,
              default_value = "baseline,gral,gral+cp,gral+pr,gral+cp+pr")]
        variants: Vec<Method>,
        /// Summary CSV, one row per method.
        #[arg(long)]
        out: PathBuf,
        /// Per-instance iRMSE CSV.
        #[arg(long)]
        irmse: Option<PathBuf>,
        /// Per-package error CSV.
        #[arg(long)]
        errors: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

type Outcome = Result<(), Failure>;

trait InputContext<T> {
    fn input(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn load_scenario(arg: &str) -> Result<(String, ScenarioSpec), Failure> {
    if let Ok(k) = arg.parse::<u32>() {
        let spec = make_scenario(k).input()?;
        return Ok((format!("S{k}"), spec));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()?;
    let spec = read_scenario(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .input()?;
    let label = path
        .file_stem()
        .map_or_else(|| arg.to_owned(), |s| s.to_string_lossy().into_owned());
    Ok((label, spec))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .input()
}

fn simulate(scenario: &str, seed: u64, out: &Path) -> Outcome {
    let (_, spec) = load_scenario(scenario)?;
    let instance = run_instance(&spec, seed).map_err(internal)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .input()?;
    let mut w = create(&out.join("packages.ndjson"))?;
    write_packages(&mut w, instance.packages()).map_err(internal)?;
    w.flush().input()?;
    report::write_ground_truth(create(&out.join("ground_truth.csv"))?, &instance.ground_truth).input()?;
    fs::write(out.join("graph.json"), write_graph(&spec.graph)).input()?;
    fs::write(out.join("scenario.json"), write_scenario(&spec)).input()?;
    log::info!(
        "{} packages in {} uploads{}",
        instance.ground_truth.len(),
        instance.batches.len(),
        if instance.truncated { ", truncated" } else { "" }
    );
    Ok(())
}

fn localize(
    variant: Method,
    graph: &Path,
    packages: &Path,
    out: &Path,
    scenario: Option<&Path>,
    epochs: Option<&Path>,
) -> Outcome {
    let text = fs::read_to_string(graph)
        .with_context(|| format!("reading {}", graph.display()))
        .input()?;
    let graph = read_graph(&text)
        .with_context(|| format!("parsing {}", graph.display()))
        .input()?;
    let file = File::open(packages)
        .with_context(|| format!("opening {}", packages.display()))
        .input()?;
    let stream = read_packages(BufReader::new(file))
        .with_context(|| format!("parsing {}", packages.display()))
        .input()?;
    for p in &stream {
        for o in &p.observations {
            if graph.gateway(o.gateway).is_none() {
                return Err(Failure::Input(anyhow!(
                    "package {} of node {} observes unknown gateway {}",
                    p.seq,
                    p.node,
                    o.gateway
                )));
            }
        }
    }
    let insertions = match scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .input()?;
            read_scenario(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .input()?
                .insertion_positions()
        }
        None => Default::default(),
    };
    let batches = batches_from_streams(&stream);
    let output = run_pipeline(&graph, LinearFalloff, variant, &insertions, &batches).map_err(internal)?;
    report::write_localized(create(out)?, &output.localized).input()?;
    if let Some(path) = epochs {
        fs::write(path, report::epochs_json(&output.epochs)).input()?;
    }
    log::info!("localized {} of {} packages", output.localized.len(), stream.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    scenario: &str,
    instances: usize,
    seed0: u64,
    variants: &[Method],
    out: &Path,
    irmse: Option<&Path>,
    errors: Option<&Path>,
) -> Outcome {
    let (label, spec) = load_scenario(scenario)?;
    if instances == 0 {
        return Err(Failure::Input(anyhow!("--instances must be at least 1")));
    }
    let run = run_experiment(&spec, variants, instances, seed0).map_err(internal)?;
    report::write_summary(create(out)?, &label, &run.results).input()?;
    if let Some(path) = irmse {
        report::write_irmse(create(path)?, &run).input()?;
    }
    if let Some(path) = errors {
        report::write_errors(create(path)?, &run).input()?;
    }
    print!("{}", report::format_table(&label, &run.results));
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate { scenario, seed, out } => simulate(scenario, *seed, out),
        Command::Localize {
            variant,
            graph,
            packages,
            out,
            scenario,
            epochs,
        } => localize(*variant, graph, packages, out, scenario.as_deref(), epochs.as_deref()),
        Command::Evaluate {
            scenario,
            instances,
            seed0,
            variants,
            out,
            irmse,
            errors,
        } => evaluate(
            scenario,
            *instances,
            *seed0,
            variants,
            out,
            irmse.as_deref(),
            errors.as_deref(),
        ),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            2
        }
    }
}
