//! Command line front end: run scenario configurations, validate them
//! against the capability matrix, inspect the matrix, and price workloads.

use anyhow::{Context, Result};
use chainless_core::scenario::cost::cost_report;
use chainless_core::scenario::matrix::{render_matrix, required_capabilities, requirement_matrix};
use chainless_core::scenario::validate::{validate_config, Finding, FindingLevel};
use chainless_core::scenario::{run_scenario, ScenarioConfig, ScenarioKind};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "chainless",
    about = "Deterministic testbed for blockchains acting as serverless components",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario configuration and print its end-of-run report.
    Run(RunArgs),
    /// Check a configuration's structure and required capabilities.
    Validate(ValidateArgs),
    /// Show which capabilities each scenario kind requires.
    Matrix(MatrixArgs),
    /// Run a scenario and price its chain and function usage.
    Cost(CostArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    config: PathBuf,
    /// Write the full run trace to this file, one JSON record per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario configuration (JSON).
    config: PathBuf,
    /// Emit findings as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// Emit the matrix as JSON instead of the text table.
    #[arg(long)]
    json: bool,
    /// List only the capabilities this scenario kind requires.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct CostArgs {
    /// Scenario configuration (JSON).
    config: PathBuf,
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let run = run_scenario(&config)?;
    if let Some(path) = &args.trace {
        fs::write(path, run.sim.trace.to_jsonl())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let report = serde_json::to_string_pretty(&run.report())?;
    match &args.report {
        Some(path) => fs::write(path, report)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{report}"),
    }
    Ok(())
}

fn level_tag(level: FindingLevel) -> &'static str {
    match level {
        FindingLevel::Ok => "ok",
        FindingLevel::Info => "info",
        FindingLevel::Warning => "warning",
        FindingLevel::Error => "error",
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let findings = validate_config(&config);
    let errors = findings
        .iter()
        .filter(|f| f.level == FindingLevel::Error)
        .count();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&findings)?);
    } else {
        for Finding {
            level,
            requirement,
            message,
        } in &findings
        {
            match requirement {
                Some(req) => println!("{:<7} [{req}] {message}", level_tag(*level)),
                None => println!("{:<7} {message}", level_tag(*level)),
            }
        }
        println!(
            "{}: {} finding(s), {} error(s)",
            config.id,
            findings.len(),
            errors
        );
    }
    if errors > 0 {
        std::process::exit(1);
    }
    Ok(())
}

fn matrix(args: MatrixArgs) -> Result<()> {
    if let Some(kind) = &args.scenario {
        let kind: ScenarioKind = serde_json::from_value(serde_json::json!(kind))
            .map_err(|_| anyhow::anyhow!("unknown scenario kind {kind:?}"))?;
        if args.json {
            let rows: Vec<_> = required_capabilities(kind)
                .into_iter()
                .map(|(req, cell)| {
                    serde_json::json!({
                        "id": req.id,
                        "title": req.title,
                        "notes": cell.notes,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows)?);
        } else {
            println!("{kind} requires:");
            for (req, cell) in required_capabilities(kind) {
                let notes = if cell.notes.is_empty() {
                    String::new()
                } else {
                    format!(
                        " ({})",
                        cell.notes
                            .iter()
                            .map(u8::to_string)
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                };
                println!("  {} {}{notes}", req.id, req.title);
            }
        }
        return Ok(());
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(requirement_matrix())?);
    } else {
        print!("{}", render_matrix());
    }
    Ok(())
}

fn cost(args: CostArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let run = run_scenario(&config)?;
    let report = cost_report(&run)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::Matrix(args) => matrix(args),
        Command::Cost(args) => cost(args),
    }
}
