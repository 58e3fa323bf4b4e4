//! `ctxmatch` command-line front end.
//!
//! Exit codes: 0 success, 1 scenario validation failure, 2 bad arguments, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ctxmatch::market::presets::{self, PresetParams};
use ctxmatch::simulator::{optimal_matchings, write_trace_file, AgentMode, CdOverrides, RunConfig};
use ctxmatch::{run, summarize, validate_scenario, Algorithm, Error, MarketInstance};

#[derive(Parser)]
#[command(
    name = "ctxmatch",
    version,
    about = "Bandit learning in contextual two-sided matching markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv and summary.json.
    Run(RunArgs),
    /// Check a scenario against the identifiability and spectral requirements.
    Validate(ScenarioArgs),
    /// List the built-in scenarios.
    Presets,
    /// Print the agent-optimal stable matching of every environment.
    Oracle(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Gap parameter of sec4-delta-example, in (0, 1/3).
    #[arg(long, default_value_t = presets::DEFAULT_DELTA)]
    delta: f64,
    /// Switch period C of sec4-delta-example.
    #[arg(long = "period-c", default_value_t = presets::DEFAULT_PERIOD_C)]
    period_c: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// etpgs, ietpgs or cdetpgs.
    #[arg(long, default_value = "etpgs")]
    algorithm: Algorithm,
    /// Number of rounds T; defaults to the scenario's horizon.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// learning, oracle, known-rankings or explore-only.
    #[arg(long = "agent-mode", default_value = "learning")]
    agent_mode: AgentMode,
    /// Skip writing trace.csv.
    #[arg(long = "no-trace")]
    no_trace: bool,
    /// Simulate scenarios that fail validation.
    #[arg(long = "skip-validation")]
    skip_validation: bool,
    /// CUSUM threshold h (cdetpgs).
    #[arg(long = "cd-h")]
    cd_h: Option<f64>,
    /// Forced-exploration rate alpha in (0, 1] (cdetpgs).
    #[arg(long = "cd-alpha")]
    cd_alpha: Option<f64>,
    /// Anticipated number of changes used to tune h and alpha (cdetpgs).
    #[arg(long = "cd-gamma")]
    cd_gamma: Option<f64>,
}

enum Failure {
    Validation(String),
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let io = e.chain().any(|c| {
            c.downcast_ref::<std::io::Error>().is_some()
                || matches!(c.downcast_ref::<Error>(), Some(Error::Io(_)))
                || matches!(c.downcast_ref::<Error>(), Some(Error::Csv(err)) if err.is_io_error())
        });
        match e.downcast_ref::<Error>() {
            Some(Error::ValidationFailed(report)) => Failure::Validation(report.clone()),
            _ if io => Failure::Io(e),
            _ => Failure::Usage(e),
        }
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<MarketInstance> {
    let params = PresetParams {
        delta: Some(args.delta),
        period_c: Some(args.period_c),
    };
    match presets::by_name(&args.scenario, params) {
        Err(Error::UnknownPreset(_)) => {
            let path = Path::new(&args.scenario);
            if !path.exists() {
                anyhow::bail!(
                    "`{}` is neither a preset nor an existing file",
                    args.scenario
                );
            }
            MarketInstance::load(path)
                .with_context(|| format!("loading scenario {}", path.display()))
        }
        other => Ok(other?),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let inst = load_scenario(&args.scenario)?;
    let mut cfg = RunConfig::new(
        args.algorithm,
        args.horizon.unwrap_or(inst.horizon),
        args.seed,
    );
    cfg.replications = args.replications;
    cfg.mode = args.agent_mode;
    cfg.trace = !args.no_trace;
    cfg.skip_validation = args.skip_validation;
    cfg.cd = CdOverrides {
        h: args.cd_h,
        alpha: args.cd_alpha,
        gamma: args.cd_gamma,
        drift: None,
    };
    let result = run(&inst, &cfg).map_err(anyhow::Error::from)?;
    let summary = summarize(&inst, &result);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(Failure::Io)?;
    if cfg.trace {
        let rows: Vec<_> = result.trace_rows().cloned().collect();
        let path = args.out.join("trace.csv");
        write_trace_file(&path, &rows)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Io)?;
    }
    let path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).context("serializing summary")?;
    std::fs::write(&path, json + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Io)?;

    println!(
        "{} on {}: T={} replications={} mean regret {:.3}",
        cfg.algorithm, summary.scenario, cfg.horizon, cfg.replications, summary.final_regret_mean
    );
    if let Some(fit) = summary.log_fit {
        println!(
            "log fit: regret ~ {:.3} + {:.3} ln t (R2 {:.4})",
            fit.a, fit.b, fit.r2
        );
    }
    if let Some(d) = &summary.detection {
        println!(
            "detection: h={:.3} alpha={:.5} mean delay {} false-alarm-free {:.0}%",
            d.h,
            d.alpha,
            d.mean_delay
                .map_or("n/a".to_string(), |v| format!("{v:.1}")),
            100.0 * d.false_alarm_free_fraction
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_validate(args: ScenarioArgs) -> Result<(), Failure> {
    let inst = load_scenario(&args)?;
    let report = validate_scenario(&inst);
    print!("{report}");
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Validation(String::new()))
    }
}

fn cmd_presets() {
    for (name, desc) in presets::PRESETS {
        println!("{name:<24}{desc}");
    }
}

fn cmd_oracle(args: ScenarioArgs) -> Result<(), Failure> {
    let inst = load_scenario(&args)?;
    let all = optimal_matchings(&inst).map_err(anyhow::Error::from)?;
    let windows = all.len();
    for (w, per_env) in all.iter().enumerate() {
        for (e, m) in per_env.iter().enumerate() {
            let label = inst.environments[e]
                .name
                .clone()
                .unwrap_or_else(|| format!("e{}", e + 1));
            let pairs: Vec<String> =
                m.0.iter()
                    .enumerate()
                    .map(|(i, a)| match a {
                        Some(j) => format!("p{}->a{}", i + 1, j + 1),
                        None => format!("p{}->none", i + 1),
                    })
                    .collect();
            if windows > 1 {
                println!("window {w} {label}: {}", pairs.join(" "));
            } else {
                println!("{label}: {}", pairs.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Presets => {
            cmd_presets();
            Ok(())
        }
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(report) if !report.is_empty() => eprint!("error: {report}"),
                Failure::Validation(_) => {}
                Failure::Usage(e) | Failure::Io(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
