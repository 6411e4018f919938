//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors, 2 for
//! runtime failures such as unreadable inputs or unwritable outputs.

pub mod scenario;
pub mod units;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::assembly::Algorithm;
use crate::engine::{run_with, EngineError, MetricsReport, RunOptions, RunOutput, Scenario};
use crate::model::NodeId;
use crate::routing::{enumerate_simple_paths, exact_shortest_path, ga_shortest_path, GaConfig, Path, Router};
pub use scenario::{default_scenario, load_scenario, parse_scenario, serialize_scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "obsim", version, about = "Optical burst switching simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its metrics report as JSON.
    Run {
        scenario: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the per-event trace as CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Override the scenario seed (traffic and GA routing).
        #[arg(long)]
        seed: Option<u64>,
        /// Write flat CSV tables (links, classes, bursts, histogram) into DIR.
        #[arg(long, value_name = "DIR")]
        tables: Option<PathBuf>,
    },
    /// Run the scenario once per assembly algorithm and tabulate the results.
    Compare {
        scenario: PathBuf,
        /// Comma-separated list, e.g. fap,fas,msmap,aas,priority_aas.
        #[arg(short, long, value_delimiter = ',', required = true, num_args = 1..)]
        algorithms: Vec<Algorithm>,
        /// Also write the table as CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Show exact, genetic and enumerated paths between two nodes.
    Paths {
        scenario: PathBuf,
        src: String,
        dst: String,
        /// Longest simple path to enumerate, in hops.
        #[arg(long, default_value_t = 6)]
        max_hops: usize,
        /// Seed for the genetic search.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a complete scenario with every default spelled out.
    PrintDefaults,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(ScenarioError::Io { .. }) => EXIT_RUNTIME,
            CliError::Scenario(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Engine(EngineError::Invalid(_)) => EXIT_VALIDATION,
            CliError::Engine(_) | CliError::Output { .. } => EXIT_RUNTIME,
        }
    }
}

fn output_error(path: &FsPath, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_VALIDATION
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            output,
            trace,
            seed,
            tables,
        } => {
            let sc = with_seed(load_scenario(&scenario)?, seed);
            let result = run_with(
                &sc,
                RunOptions {
                    trace: trace.is_some(),
                },
            )?;
            let json = report_json(&result.report);
            // Everything is rendered before anything is written.
            let trace_csv = trace.as_ref().map(|_| trace_csv(&result));
            match &output {
                Some(p) => std::fs::write(p, &json).map_err(|e| output_error(p, e))?,
                None => out.write_all(json.as_bytes()).map_err(|e| output_error(FsPath::new("-"), e))?,
            }
            if let (Some(p), Some(csv)) = (&trace, trace_csv) {
                std::fs::write(p, csv).map_err(|e| output_error(p, e))?;
            }
            if let Some(dir) = &tables {
                write_tables(dir, &sc, &result)?;
            }
            Ok(())
        }
        Command::Compare {
            scenario,
            algorithms,
            output,
            seed,
        } => {
            if algorithms.is_empty() {
                return Err(CliError::Usage("compare needs at least one algorithm".into()));
            }
            let sc = with_seed(load_scenario(&scenario)?, seed);
            let rows = compare(&sc, &algorithms)?;
            out.write_all(compare_table(&rows).as_bytes())
                .map_err(|e| output_error(FsPath::new("-"), e))?;
            if let Some(p) = &output {
                std::fs::write(p, to_csv(&rows)).map_err(|e| output_error(p, e))?;
            }
            Ok(())
        }
        Command::Paths {
            scenario,
            src,
            dst,
            max_hops,
            seed,
        } => {
            let sc = load_scenario(&scenario)?;
            let text = paths_listing(&sc, &src, &dst, max_hops, seed)?;
            out.write_all(text.as_bytes()).map_err(|e| output_error(FsPath::new("-"), e))
        }
        Command::PrintDefaults => {
            let text = format!(
                "# obsim scenario with every default value written out\n{}",
                serialize_scenario(&default_scenario())
            );
            out.write_all(text.as_bytes()).map_err(|e| output_error(FsPath::new("-"), e))
        }
    }
}

fn with_seed(mut sc: Scenario, seed: Option<u64>) -> Scenario {
    if let Some(s) = seed {
        sc.traffic.seed = s;
        if let Router::Genetic(g) = &mut sc.protocol.router {
            g.rng_seed = s;
        }
    }
    sc
}

pub fn report_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

pub fn trace_csv(result: &RunOutput) -> String {
    to_csv(&result.trace)
}

#[derive(Serialize)]
struct ClassRow {
    class_index: usize,
    generated: u64,
    delivered: u64,
    lost: u64,
    queued: u64,
    in_flight: u64,
    packet_loss_rate: f64,
    mean_delay_us: f64,
    p95_delay_us: u64,
    max_delay_us: u64,
    mean_assembly_delay_us: f64,
}

#[derive(Serialize)]
struct BurstRow {
    burst_id: u64,
    source: String,
    dest: String,
    class_index: usize,
    packets: usize,
    bytes: u64,
    assembled_at_us: u64,
    status: &'static str,
    finished_at_us: Option<u64>,
    loss_reason: Option<&'static str>,
    payload_hops: usize,
}

fn write_tables(dir: &FsPath, sc: &Scenario, result: &RunOutput) -> Result<(), CliError> {
    use crate::engine::BurstStatus;
    let r = &result.report;
    let classes: Vec<ClassRow> = r
        .classes
        .iter()
        .map(|c| ClassRow {
            class_index: c.class_index,
            generated: c.generated,
            delivered: c.delivered,
            lost: c.lost,
            queued: c.queued,
            in_flight: c.in_flight,
            packet_loss_rate: c.packet_loss_rate,
            mean_delay_us: c.delay.mean_us,
            p95_delay_us: c.delay.p95_us,
            max_delay_us: c.delay.max_us,
            mean_assembly_delay_us: c.mean_assembly_delay_us,
        })
        .collect();
    let bursts: Vec<BurstRow> = result
        .bursts
        .iter()
        .map(|b| {
            let (status, at, reason) = match b.status {
                BurstStatus::Delivered { at } => ("delivered", Some(at.0), None),
                BurstStatus::Lost { at, reason } => ("lost", Some(at.0), Some(reason.label())),
                BurstStatus::InFlight => ("in_flight", None, None),
            };
            BurstRow {
                burst_id: b.burst_id,
                source: sc.topology.name(b.source).to_string(),
                dest: sc.topology.name(b.dest).to_string(),
                class_index: b.class_index,
                packets: b.packets,
                bytes: b.bytes,
                assembled_at_us: b.assembled_at.0,
                status,
                finished_at_us: at,
                loss_reason: reason,
                payload_hops: b.payload_transmissions.len(),
            }
        })
        .collect();
    std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let files = [
        ("links.csv", to_csv(&r.link_usage)),
        ("classes.csv", to_csv(&classes)),
        ("bursts.csv", to_csv(&bursts)),
        ("histogram.csv", to_csv(&r.bursts.size_histogram)),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| output_error(&p, e))?;
    }
    Ok(())
}

/// One row of an algorithm comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub algorithm: Algorithm,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub queued: u64,
    pub packet_loss_rate: f64,
    pub mean_delay_us: f64,
    pub p95_delay_us: u64,
    pub mean_assembly_delay_us: f64,
    pub bursts: u64,
    pub mean_burst_bytes: f64,
    pub inter_emission_cv: Option<f64>,
}

/// Runs the scenario under each algorithm in parallel. Every edge node
/// switches to the given algorithm and keeps its other parameters, and
/// traffic, seeds and faults stay unchanged.
pub fn compare(sc: &Scenario, algorithms: &[Algorithm]) -> Result<Vec<CompareRow>, EngineError> {
    let results: Vec<Result<MetricsReport, EngineError>> = std::thread::scope(|s| {
        let handles: Vec<_> = algorithms
            .iter()
            .map(|&alg| {
                let mut variant = sc.clone();
                variant.assembler.algorithm = alg;
                for cfg in variant.assembler_overrides.values_mut() {
                    cfg.algorithm = alg;
                }
                s.spawn(move || crate::engine::run(&variant))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    algorithms
        .iter()
        .zip(results)
        .map(|(&algorithm, r)| {
            let r = r?;
            Ok(CompareRow {
                algorithm,
                generated: r.generated,
                delivered: r.delivered,
                lost: r.lost,
                queued: r.queued,
                packet_loss_rate: r.packet_loss_rate,
                mean_delay_us: r.delay.mean_us,
                p95_delay_us: r.delay.p95_us,
                mean_assembly_delay_us: r.mean_assembly_delay_us,
                bursts: r.bursts.count,
                mean_burst_bytes: r.bursts.mean_bytes,
                inter_emission_cv: r.bursts.inter_emission_cv,
            })
        })
        .collect()
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let header = [
        "algorithm", "generated", "delivered", "lost", "queued", "loss", "delay_us", "p95_us", "asm_us", "bursts",
        "burst_B", "cv",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.algorithm.to_string(),
                r.generated.to_string(),
                r.delivered.to_string(),
                r.lost.to_string(),
                r.queued.to_string(),
                format!("{:.4}", r.packet_loss_rate),
                format!("{:.1}", r.mean_delay_us),
                r.p95_delay_us.to_string(),
                format!("{:.1}", r.mean_assembly_delay_us),
                r.bursts.to_string(),
                format!("{:.0}", r.mean_burst_bytes),
                r.inter_emission_cv.map_or("-".into(), |cv| format!("{cv:.3}")),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| cells.iter().map(|row| row[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    let mut line = |row: Vec<&str>| {
        let parts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        let _ = writeln!(s, "{}", parts.join("  "));
    };
    line(header.to_vec());
    for row in &cells {
        line(row.iter().map(String::as_str).collect());
    }
    s
}

pub fn paths_listing(
    sc: &Scenario,
    src: &str,
    dst: &str,
    max_hops: usize,
    seed: Option<u64>,
) -> Result<String, CliError> {
    let topo = &sc.topology;
    let node = |name: &str| -> Result<NodeId, CliError> {
        topo.node_id(name)
            .ok_or_else(|| CliError::Usage(format!("unknown node {name:?}")))
    };
    let (s, d) = (node(src)?, node(dst)?);
    let ga = match (&sc.protocol.router, seed) {
        (_, Some(seed)) => GaConfig {
            rng_seed: seed,
            ..GaConfig::default()
        },
        (Router::Genetic(g), None) => g.clone(),
        (Router::Exact, None) => GaConfig {
            rng_seed: sc.traffic.seed,
            ..GaConfig::default()
        },
    };
    let show = |p: &Path| format!("{} cost {} ({} hops)", topo.path_label(&p.nodes), p.cost, p.hops());
    let mut out = String::new();
    match exact_shortest_path(topo, s, d) {
        Ok(p) => {
            let _ = writeln!(out, "exact: {}", show(&p));
        }
        Err(_) => {
            let _ = writeln!(out, "no path from {src} to {dst}");
            return Ok(out);
        }
    }
    match ga_shortest_path(topo, s, d, &ga) {
        Ok(p) => {
            let _ = writeln!(out, "ga (seed {}): {}", ga.rng_seed, show(&p));
        }
        Err(e) => {
            let _ = writeln!(out, "ga (seed {}): {e}", ga.rng_seed);
        }
    }
    let mut all = enumerate_simple_paths(topo, s, d, max_hops);
    all.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.nodes.cmp(&b.nodes)));
    let _ = writeln!(out, "simple paths up to {max_hops} hops: {}", all.len());
    for p in &all {
        let _ = writeln!(out, "  {}", show(p));
    }
    Ok(out)
}
