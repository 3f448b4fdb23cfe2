//! Command-line runner for the groupoid effect scenarios.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use groupoid_effect_core::config::ScenarioConfig;
use groupoid_effect_core::report::{CheckStatus, ReportFormat};
use groupoid_effect_core::scenario::{list_scenarios, run_scenario};

#[derive(Parser)]
#[command(
    name = "groupoid-effect",
    version,
    about = "Transversal-effect diagnostics for concretely presented Lie groupoids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its report.
    Run(RunArgs),
    /// List the available scenarios.
    ListScenarios,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario name (see `list-scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario parameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Sample count driving the randomized checks.
    #[arg(long)]
    samples: Option<u64>,
    /// Seed for the deterministic random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: json, csv or text.
    #[arg(long, default_value = "json")]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read the full configuration from a JSON file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the timing field, making reports byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

fn parse_params(raw: &[String]) -> anyhow::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("parameter `{item}` is not of the form key=value"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn build_config(args: &RunArgs) -> anyhow::Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            ScenarioConfig::from_json(&raw).context("parsing config file")?
        }
        None => {
            let scenario = args
                .scenario
                .as_ref()
                .ok_or_else(|| anyhow!("either --scenario or --config is required"))?;
            ScenarioConfig::new(scenario.clone())
        }
    };
    // Flags refine the file-based configuration.
    for (k, v) in parse_params(&args.params)? {
        config.params.insert(k, v);
    }
    if let Some(samples) = args.samples {
        config.samples = samples;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let config = build_config(args)?;
    let format: ReportFormat = args.format.parse()?;
    let report = run_scenario(&config)?;
    let rendered = report.render(format, !args.no_timing)?;
    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            file.write_all(rendered.as_bytes())?;
        }
        None => {
            std::io::stdout().write_all(rendered.as_bytes())?;
            if !rendered.ends_with('\n') {
                println!();
            }
        }
    }
    let failed = report.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
    if failed > 0 {
        eprintln!("{failed} check(s) failed in scenario {}", report.scenario);
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for (name, summary) in list_scenarios() {
                println!("{name:<12} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(&args) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
