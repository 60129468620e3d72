use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hexar::baselines::{explain_all_components, explain_end_to_end};
use hexar::reasoner::{build_reasoner, ReasonerKind, TextReasoner};
use hexar::scenario::{full_manifest, generate_trace, list_scenarios, manifest_csv, parse_manifest, scenario, ScenarioSpec};
use hexar::{read_trace, write_trace, ExplainerRegistry, Explanation, Query, Trace};
use hexar_eval::{
    auto_annotate, build_report, majority_vote, read_annotations, read_results, render_csv, render_markdown,
    run_grid, write_annotations, write_results, GridConfig, Method,
};

/// Reply printed when no explanation can be produced.
const NO_ANSWER: &str = "I do not have enough information to answer this question.";

#[derive(Debug, Parser)]
#[command(name = "hexar", version, about = "Hierarchical explanations for a modular home robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the benchmark scenarios.
    Scenarios {
        #[arg(long)]
        id: Option<u32>,
    },
    /// Simulate one scenario run and write its trace.
    Simulate {
        #[arg(long)]
        scenario: u32,
        #[arg(long)]
        task: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a question about a recorded trace.
    Explain {
        #[arg(long)]
        trace: PathBuf,
        /// Question to answer; omit with --interactive.
        #[arg(long, required_unless_present = "interactive")]
        query: Option<String>,
        #[arg(long, default_value = "hexar", value_parser = parse_method)]
        method: Method,
        #[arg(long, default_value = "rule", value_parser = parse_reasoner)]
        reasoner: ReasonerKind,
        /// Read one question per line from standard input.
        #[arg(long)]
        interactive: bool,
        /// Report this many seconds of reasoner latency per 100 prompt characters.
        #[arg(long)]
        simulated_latency: Option<f64>,
    },
    /// Run the evaluation grid and write the results CSV.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "hexar,end_to_end,all_components", value_parser = parse_method)]
        methods: Vec<Method>,
        #[arg(long, default_value = "rule", value_parser = parse_reasoner)]
        reasoner: ReasonerKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Report this many seconds of reasoner latency per 100 prompt characters.
        #[arg(long)]
        simulated_latency: Option<f64>,
    },
    /// Compute metrics and statistics from results and annotations.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, conflicts_with = "auto_annotate", required_unless_present = "auto_annotate")]
        annotations: Option<PathBuf>,
        /// Label the results from scenario ground truth instead.
        #[arg(long)]
        auto_annotate: bool,
        /// Output directory for report.md and report.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the full scenario manifest.
    Manifest {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_reasoner(s: &str) -> Result<ReasonerKind, String> {
    s.parse()
}

/// Marks a failure to explain, which exits with status 3.
#[derive(Debug)]
struct NoExplanation;

impl std::fmt::Display for NoExplanation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(NO_ANSWER)
    }
}

impl std::error::Error for NoExplanation {}

fn scenario_row(s: &ScenarioSpec) -> String {
    format!(
        "{:>2}  {:<20}  {:<18}  {}",
        s.scenario_id,
        s.category.as_str(),
        s.relevant_module.as_str(),
        s.description
    )
}

fn cmd_scenarios(id: Option<u32>) -> Result<()> {
    let rows = match id {
        Some(id) => vec![scenario(id)?],
        None => list_scenarios(),
    };
    println!("{:>2}  {:<20}  {:<18}  description", "id", "category", "module");
    for s in &rows {
        println!("{}", scenario_row(s));
    }
    Ok(())
}

fn cmd_simulate(scenario_id: u32, task: u32, seed: u64, out: &Path) -> Result<()> {
    let trace = generate_trace(scenario_id, task, seed)?;
    write_trace(&trace, out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} events to {}", trace.events.len(), out.display());
    Ok(())
}

fn reasoner(kind: ReasonerKind, latency: Option<f64>) -> Result<Box<dyn TextReasoner>> {
    if latency.is_some_and(|s| !s.is_finite() || s < 0.0) {
        bail!("--simulated-latency must be a non-negative number");
    }
    Ok(build_reasoner(kind, latency)?)
}

fn explain_once(
    method: Method,
    text: &str,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, hexar::FrameworkError> {
    let query = Query::new(text, trace.end_ts() + 1.0);
    match method {
        Method::Hexar => hexar::explain_hexar(&query, trace, registry, reasoner),
        Method::EndToEnd => explain_end_to_end(&query, trace, registry, reasoner),
        Method::AllComponents => explain_all_components(&query, trace, registry, reasoner),
    }
}

fn print_explanation(out: &mut impl Write, x: &Explanation) -> io::Result<()> {
    writeln!(out, "{}", x.text.trim())?;
    writeln!(out, "produced_by: {}", x.produced_by_label())?;
    writeln!(out, "wall_time: {:.6}", x.wall_time)
}

fn cmd_explain(
    trace_path: &Path,
    query: Option<&str>,
    method: Method,
    kind: ReasonerKind,
    interactive: bool,
    latency: Option<f64>,
) -> Result<()> {
    let trace = read_trace(trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let registry = ExplainerRegistry::standard();
    let reasoner = reasoner(kind, latency)?;
    let mut stdout = io::stdout().lock();

    if !interactive {
        let text = query.context("--query is required")?;
        return match explain_once(method, text, &trace, &registry, reasoner.as_ref()) {
            Ok(x) => Ok(print_explanation(&mut stdout, &x)?),
            Err(e) => {
                eprintln!("{e}");
                Err(NoExplanation.into())
            }
        };
    }

    // One question per line; failures answer with the fallback and continue.
    for line in io::stdin().lock().lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if matches!(text, "quit" | "exit") {
            break;
        }
        match explain_once(method, text, &trace, &registry, reasoner.as_ref()) {
            Ok(x) => print_explanation(&mut stdout, &x)?,
            Err(e) => {
                eprintln!("{e}");
                writeln!(stdout, "{NO_ANSWER}")?;
            }
        }
        stdout.flush()?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    manifest: &Path,
    methods: Vec<Method>,
    kind: ReasonerKind,
    seed: u64,
    out: &Path,
    jobs: usize,
    latency: Option<f64>,
) -> Result<()> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let entries = parse_manifest(&text)?;
    if entries.is_empty() {
        bail!("manifest {} has no entries", manifest.display());
    }
    let mut unique = methods;
    unique.dedup();
    let reasoner = reasoner(kind, latency)?;
    let config = GridConfig { methods: unique, seed, jobs };
    let records = run_grid(&entries, &config, &ExplainerRegistry::standard(), reasoner.as_ref())?;
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_results(&records, io::BufWriter::new(file))?;
    let failed = records.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!("wrote {} records to {} ({failed} failed)", records.len(), out.display());
    Ok(())
}

fn cmd_report(results: &Path, annotations: Option<&Path>, auto: bool, out: &Path) -> Result<()> {
    let file = fs::File::open(results).with_context(|| format!("reading {}", results.display()))?;
    let records = read_results(file)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let rows = match annotations {
        Some(path) if !auto => {
            read_annotations(fs::File::open(path).with_context(|| format!("reading {}", path.display()))?)?
        }
        _ => {
            let rows = auto_annotate(&records)?;
            write_annotations(&rows, fs::File::create(out.join("annotations.csv"))?)?;
            rows
        }
    };
    let vote = majority_vote(&rows)?;
    let report = build_report(&records, &vote.metrics, vote.disagreement_rate)?;
    fs::write(out.join("report.md"), render_markdown(&report))?;
    fs::write(out.join("report.csv"), render_csv(&report))?;
    eprintln!("wrote report for {} records to {}", records.len(), out.display());
    Ok(())
}

fn cmd_manifest(out: &Path) -> Result<()> {
    fs::write(out, manifest_csv(&full_manifest())).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenarios { id } => cmd_scenarios(id),
        Command::Simulate { scenario, task, seed, out } => cmd_simulate(scenario, task, seed, &out),
        Command::Explain {
            trace,
            query,
            method,
            reasoner,
            interactive,
            simulated_latency,
        } => cmd_explain(&trace, query.as_deref(), method, reasoner, interactive, simulated_latency),
        Command::Evaluate {
            manifest,
            methods,
            reasoner,
            seed,
            out,
            jobs,
            simulated_latency,
        } => cmd_evaluate(&manifest, methods, reasoner, seed, &out, jobs, simulated_latency),
        Command::Report {
            results,
            annotations,
            auto_annotate,
            out,
        } => cmd_report(&results, annotations.as_deref(), auto_annotate, &out),
        Command::Manifest { out } => cmd_manifest(&out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<NoExplanation>() => {
            println!("{NO_ANSWER}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
