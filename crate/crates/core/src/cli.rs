//! Command-line front end. `main` in the binary only sets up logging and
//! calls [`main_with_args`].

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::events::{EngineEvent, JsonLinesSink};
use crate::plot::write_svg;
use crate::runner::{
    default_grid, mean_f1, read_metrics_csv, run_seeds_with, tune, write_metrics_csv, GridPoint, MethodVariant,
    MetricRecord, RunConfig,
};
use crate::streams::{write_dataset, DriftStream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "kdrift",
    version,
    about = "Hierarchical stream classification under knowledge drift"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every evaluation seed and write metrics, event logs and a plot.
    Run(RunArgs),
    /// Pick tau and k on the tuning seeds.
    Tune(TuneArgs),
    /// Write a synthetic stream to disk.
    Generate(GenerateArgs),
    /// Plot mean micro-F1 with standard-error bands from a metrics CSV.
    Plot(PlotArgs),
    /// Serve interactive sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Run these methods instead of the one in the config.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<MethodVariant>,
    /// Skip the per-seed JSON-lines event logs.
    #[arg(long)]
    pub no_events: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Also write the result as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generate HSTAGGER (the only generator).
    #[arg(long, required = true)]
    pub hstagger: bool,
    /// Generator, schedule and length settings are read from here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    /// Defaults to the metrics path with an `.svg` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "micro-F1")]
    pub title: String,
    /// Iterations to mark with a vertical rule.
    #[arg(long, value_delimiter = ',')]
    pub mark: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Session logs go here; nothing is persisted without it.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::KernelConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg: RunConfig = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let crate::runner::SourceConfig::Dataset(d) = &cfg.source {
        for p in [&d.csv, &d.hierarchy] {
            if !p.is_file() {
                return Err(CliError::Config(format!("dataset file {} not found", p.display())));
            }
        }
    }
    Ok(cfg)
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let f = File::create(path).map_err(runtime)?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(runtime)
}

#[derive(Debug, Serialize)]
struct MethodSummary {
    method: MethodVariant,
    mean_f1: f64,
    mean_questions: f64,
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let base = load_config(args.config.as_deref())?;
    let methods = if args.methods.is_empty() {
        vec![base.method]
    } else {
        args.methods.clone()
    };
    fs::create_dir_all(&args.out).map_err(runtime)?;
    write_json(&args.out.join("config.json"), &base)?;
    let events_dir = args.out.join("events");
    if !args.no_events {
        fs::create_dir_all(&events_dir).map_err(runtime)?;
    }

    let mut all: Vec<MetricRecord> = Vec::new();
    let mut summary = Vec::new();
    for method in methods {
        let cfg = base.with_method(method);
        log::info!("running {method} on {} seeds", cfg.seeds.len());
        let records = if args.no_events {
            run_seeds_with(&cfg, &cfg.seeds, |_| crate::events::NullSink)?
        } else {
            let dir = events_dir.clone();
            run_seeds_with(&cfg, &cfg.seeds, move |seed| {
                let path = dir.join(format!("{method}-seed{seed}.jsonl"));
                match File::create(&path) {
                    Ok(f) => LogSink::File(JsonLinesSink::new(BufWriter::new(f))),
                    Err(e) => {
                        log::error!("cannot create {}: {e}", path.display());
                        LogSink::None
                    }
                }
            })?
        };
        let last: Vec<&MetricRecord> = records.iter().filter(|r| r.t + 1 == cfg.iterations).collect();
        let mean_questions = last.iter().map(|r| r.questions as f64).sum::<f64>() / last.len().max(1) as f64;
        let m = MethodSummary {
            method,
            mean_f1: mean_f1(&records, 0, cfg.iterations),
            mean_questions,
        };
        println!(
            "{:<18} mean micro-F1 {:.4}  questions/run {:.2}",
            method.as_str(),
            m.mean_f1,
            m.mean_questions
        );
        summary.push(m);
        all.extend(records);
    }

    let csv_path = args.out.join("metrics.csv");
    write_metrics_csv(&all, File::create(&csv_path).map_err(runtime)?)?;
    write_json(&args.out.join("summary.json"), &summary)?;
    let marks: Vec<usize> = base.schedule.events.iter().map(|e| e.t).collect();
    write_svg(&all, "micro-F1", &marks, &args.out.join("f1.svg"))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Event log target for one seed.
enum LogSink {
    File(JsonLinesSink<BufWriter<File>>),
    None,
}

impl crate::events::EventSink for LogSink {
    fn emit(&mut self, event: &EngineEvent) {
        if let LogSink::File(s) = self {
            s.emit(event);
        }
    }
}

fn cmd_tune(args: &TuneArgs) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref())?;
    let grid: Vec<GridPoint> = if args.tau.is_empty() && args.k.is_empty() {
        default_grid()
    } else {
        let taus = if args.tau.is_empty() {
            vec![cfg.tau]
        } else {
            args.tau.clone()
        };
        let ks = if args.k.is_empty() { vec![cfg.k] } else { args.k.clone() };
        taus.iter()
            .flat_map(|&tau| ks.iter().map(move |&k| GridPoint { tau, k }))
            .collect()
    };
    if grid.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let result = tune(&cfg, &grid)?;
    for (p, s) in &result.scores {
        println!("tau {:<5} k {:<3} final-third micro-F1 {:.4}", p.tau, p.k, s);
    }
    println!("best: tau {} k {}", result.best.tau, result.best.k);
    if let Some(out) = &args.out {
        write_json(out, &result)?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref())?;
    if !matches!(cfg.source, crate::runner::SourceConfig::Hstagger(_)) {
        return Err(CliError::Config("generate needs an HSTAGGER source".into()));
    }
    let seed = args.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
    let gt = cfg.ground_truth(seed)?;
    let plan = cfg.schedule.resolve(&gt, &cfg.hstagger(), seed)?;
    let initial = gt.hierarchy.clone();
    let mut stream = DriftStream::new(gt, plan, seed);
    let n = cfg.initial_size + cfg.iterations;
    let mut examples = Vec::with_capacity(n);
    let mut columns = initial.clone();
    for i in 0..n {
        if i >= cfg.initial_size {
            stream.advance_to(i - cfg.initial_size)?;
        }
        for c in stream.truth().hierarchy.non_root_concepts() {
            if !columns.contains(c) {
                let root = columns.root().clone();
                columns = columns
                    .add_concept(c.clone(), c.as_str(), &[root])
                    .map_err(Error::from)?;
            }
        }
        examples.push(stream.example(i));
    }
    fs::create_dir_all(&args.out).map_err(runtime)?;
    write_dataset(
        &examples,
        &columns,
        File::create(args.out.join("stream.csv")).map_err(runtime)?,
    )?;
    write_json(&args.out.join("hierarchy.json"), &initial)?;
    write_json(&args.out.join("events.json"), &stream.truth().event_log)?;
    println!(
        "wrote {n} rows ({} initial) and {} events to {}",
        cfg.initial_size,
        stream.truth().event_log.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> CliResult<()> {
    let f = File::open(&args.metrics).map_err(|e| CliError::Config(format!("{}: {e}", args.metrics.display())))?;
    let records = read_metrics_csv(f).map_err(|e| CliError::Config(e.to_string()))?;
    let out = args.out.clone().unwrap_or_else(|| args.metrics.with_extension("svg"));
    write_svg(&records, &args.title, &args.mark, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_serve(args: &ServeArgs) -> CliResult<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(crate::service::serve(&args.addr, args.data_dir.clone()))?;
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("kdrift").chain(args.iter().copied()))
    }

    #[test]
    fn bad_config_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"k": 0}"#).unwrap();
        let out = dir.path().join("o");
        assert_eq!(
            code(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
            2
        );
        fs::write(&cfg, r#"{"unknown_field": 1}"#).unwrap();
        assert_eq!(
            code(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
            2
        );
        assert_eq!(
            code(&[
                "run",
                "--config",
                "/does/not/exist.json",
                "--out",
                out.to_str().unwrap()
            ]),
            2
        );
        assert_eq!(code(&["frobnicate"]), 2);
    }

    #[test]
    fn run_generate_and_plot() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(
            &cfg,
            r#"{"iterations": 30, "seeds": [0, 1], "schedule": [{"t": 10, "kind": "relation_addition"}]}"#,
        )
        .unwrap();
        let out = dir.path().join("run");
        let c = cfg.to_str().unwrap();
        assert_eq!(
            code(&[
                "run",
                "--config",
                c,
                "--out",
                out.to_str().unwrap(),
                "--methods",
                "trckd_oracle,knn_static"
            ]),
            0
        );
        let records = read_metrics_csv(File::open(out.join("metrics.csv")).unwrap()).unwrap();
        assert_eq!(records.len(), 2 * 2 * 30);
        assert!(out.join("events/trckd_oracle-seed1.jsonl").exists());
        assert!(out.join("f1.svg").exists());

        let svg = dir.path().join("p.svg");
        let m = out.join("metrics.csv");
        assert_eq!(
            code(&["plot", "--metrics", m.to_str().unwrap(), "--out", svg.to_str().unwrap()]),
            0
        );
        assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));

        let gen = dir.path().join("gen");
        assert_eq!(
            code(&["generate", "--hstagger", "--config", c, "--out", gen.to_str().unwrap()]),
            0
        );
        let ds = crate::streams::load_dataset(&gen.join("stream.csv"), &gen.join("hierarchy.json"), false).unwrap();
        assert_eq!(ds.examples.len(), 70 + 30);
        let events: Vec<crate::streams::KdEvent> =
            serde_json::from_reader(File::open(gen.join("events.json")).unwrap()).unwrap();
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn shipped_configs_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let cfg = load_config(Some(&path)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let gt = cfg.ground_truth(cfg.seeds[0]).unwrap();
            cfg.schedule.resolve(&gt, &cfg.hstagger(), cfg.seeds[0]).unwrap();
            n += 1;
        }
        assert!(n >= 3);
    }

    #[test]
    fn plot_of_missing_file_is_a_config_error() {
        assert_eq!(code(&["plot", "--metrics", "/nope.csv"]), 2);
    }
}
