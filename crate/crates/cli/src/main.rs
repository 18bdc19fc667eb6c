//! `proto-cl`: synthesize, validate, run and compare continual-learning
//! experiments over EMBD1 embedding files.
//!
//! Exit codes: 0 success, 1 validation or domain error, 2 I/O or usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proto_cl::classifier::DistanceMetric;
use proto_cl::config::{run_experiment, ExperimentConfig};
use proto_cl::embedding::{generate_synthetic, validate_dataset, write_dataset, SyntheticSpec};
use proto_cl::protocol::{comparison_rows, render_comparison_table, write_comparison_csv, LearnerRegistry, RunReport, ScenarioMode};
use proto_cl::Error;

const EXIT_DOMAIN: u8 = 1;
const EXIT_IO: u8 = 2;

#[derive(Parser)]
#[command(name = "proto-cl", version, about = "Nearest-mean continual learning over frozen embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-cluster dataset
    Synth(SynthArgs),
    /// Run a continual-learning scenario
    Run(Box<RunArgs>),
    /// Check a dataset file against the format invariants
    Validate {
        path: PathBuf,
    },
    /// Tabulate one or more run reports
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    classes: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    dim: u32,
    #[arg(long = "per-class", value_parser = clap::value_parser!(u32).range(1..))]
    per_class: u32,
    /// Distance between adjacent class centers, in noise standard deviations
    #[arg(long, default_value_t = 8.0)]
    sep: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label-order task groups written into task_id
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    tasks: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ScenarioMode>,
    #[arg(long)]
    num_tasks: Option<u32>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Comma-separated training domain ids, in stream order
    #[arg(long, value_delimiter = ',')]
    train_domains: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    test_domains: Option<Vec<u32>>,
    /// Train on all tasks at once
    #[arg(long)]
    joint: bool,
    #[arg(long)]
    learner: Option<String>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<DistanceMetric>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    probe_seed: Option<u64>,
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Where to write the JSON run report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the accuracy matrix CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Evaluation threads (default: all cores)
    #[arg(long, env = "PROTO_CL_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Also write the table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<ScenarioMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<DistanceMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Config(_) | Error::Unknown { .. } => EXIT_IO,
        _ => EXIT_DOMAIN,
    }
}

impl RunArgs {
    fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            train: self.train.clone(),
            test: self.test.clone(),
            mode: self.mode,
            num_tasks: self.num_tasks,
            split_seed: self.split_seed,
            train_domains: self.train_domains.clone(),
            test_domains: self.test_domains.clone(),
            joint: self.joint.then_some(true),
            learner: self.learner.clone(),
            metric: self.metric,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            probe_seed: self.probe_seed,
            shuffle_seed: self.shuffle_seed,
            report: self.report.clone(),
            csv: self.csv.clone(),
            threads: self.threads,
        }
    }
}

fn synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        num_classes: args.classes,
        dim: args.dim as usize,
        samples_per_class: args.per_class as usize,
        class_separation: args.sep,
        noise_sigma: args.sigma,
        seed: args.seed,
        num_tasks: args.tasks,
    };
    let records = generate_synthetic(&spec)?;
    let header = write_dataset(&records, spec.dim, &args.output)?;
    println!(
        "wrote {}: dim {}, {} records, {} classes, {} tasks",
        args.output.display(),
        header.dim,
        header.record_count,
        header.num_classes,
        header.num_tasks
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.overlay(&args.to_config());
    if let Some(n) = config.threads {
        // An already-initialised global pool is fine; results do not depend on its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let report = run_experiment(&config, &LearnerRegistry::default())?;

    if let Some(path) = &config.report {
        report.save(path)?;
    }
    if let Some(path) = &config.csv {
        report.write_matrix_csv(BufWriter::new(File::create(path)?))?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn validate(path: PathBuf) -> Result<u8, Error> {
    let report = validate_dataset(&path)?;
    if report.is_valid() {
        if let Some(h) = report.header {
            println!("{}: ok ({} records, dim {})", path.display(), h.record_count, h.dim);
        }
        return Ok(0);
    }
    println!("{}: {} violation(s)", path.display(), report.violations.len());
    for v in &report.violations {
        println!("  {v}");
    }
    Ok(EXIT_DOMAIN)
}

fn report(args: ReportArgs) -> Result<(), Error> {
    let reports = args.reports.iter().map(RunReport::load).collect::<Result<Vec<_>, _>>()?;
    let rows = comparison_rows(&reports);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    write!(out, "{}", render_comparison_table(&rows))?;
    if let Some(path) = &args.csv {
        write_comparison_csv(&rows, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Run(a) => run(*a).map(|_| 0),
        Command::Validate { path } => validate(path),
        Command::Report(a) => report(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
