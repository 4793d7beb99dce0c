#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use prethermal::validate::{run_checks, Fault, ValidateOptions};
use serde_json::json;

use config::ConfigError;
use run::RunError;

const BUNDLED: [(&str, &str); 12] = [
    ("fig2", include_str!("../configs/fig2.json")),
    ("fig2_ball", include_str!("../configs/fig2_ball.json")),
    ("fig3", include_str!("../configs/fig3.json")),
    ("fig4", include_str!("../configs/fig4.json")),
    ("fig6_g_ii", include_str!("../configs/fig6_g_ii.json")),
    ("fig6_beta_i", include_str!("../configs/fig6_beta_i.json")),
    ("fig7c", include_str!("../configs/fig7c.json")),
    ("fig7d", include_str!("../configs/fig7d.json")),
    ("fig7e", include_str!("../configs/fig7e.json")),
    ("fig8_rates", include_str!("../configs/fig8_rates.json")),
    ("oracle_check", include_str!("../configs/oracle_check.json")),
    ("oracle_quick", include_str!("../configs/oracle_quick.json")),
];

#[derive(Parser)]
#[command(name = "prethermal", version, about = "Qubit dynamics with composite thermal environments")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; every pipeline is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        /// Path to a config file, or the name of a bundled config.
        #[arg(long)]
        config: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the fast self-checks.
    Validate {
        /// Add the finite-bath comparison, e.g. `--oracle N=200 M=200`.
        #[arg(long, num_args = 0..=2, value_name = "N=.. M=..")]
        oracle: Option<Vec<String>>,
        /// Corrupt an input on purpose to see a check fail.
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// List experiment kinds and bundled configs.
    ListExperiments,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipRateSign,
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", json!({"status": "error", "kind": kind, "message": message}));
}

fn load(config: &str) -> Result<(String, String), RunError> {
    if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == config) {
        return Ok((format!("bundled:{config}"), (*text).to_string()));
    }
    let text = std::fs::read_to_string(config).map_err(|e| RunError::Config(format!("reading {config}: {e}")))?;
    Ok((config.to_string(), text))
}

fn run_command(config: &str, out: &Path) -> Result<(), RunError> {
    let (source, text) = load(config)?;
    let cfg = config::parse(&text).map_err(|ConfigError(m)| RunError::Config(m))?;
    let outcome = run::run(&cfg, out)?;
    let manifest = json!({
        "name": cfg.name,
        "description": cfg.description,
        "figure": cfg.figure,
        "experiment": cfg.experiment.kind(),
        "source": source,
        "version": env!("CARGO_PKG_VERSION"),
        "tolerances": {"ode": cfg.simulation.ode, "quad": cfg.simulation.quad},
        "config": cfg,
        "outputs": outcome.files.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "summary": outcome.summary,
    });
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

fn parse_oracle(args: &[String]) -> Result<(usize, usize), String> {
    let (mut n, mut m) = (200, 200);
    for a in args {
        let (k, v) = a.split_once('=').ok_or_else(|| format!("expected N=.. or M=.., got {a}"))?;
        let v: usize = v.parse().map_err(|_| format!("not a mode count: {v}"))?;
        match k {
            "N" | "n" => n = v,
            "M" | "m" => m = v,
            _ => return Err(format!("unknown oracle size {k}")),
        }
    }
    Ok((n, m))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            report("config", &e.to_string());
            return ExitCode::from(2);
        }
    }
    let _ = cli.seed;
    match cli.command {
        Command::Run { config, out } => match run_command(&config, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(RunError::Config(m)) => {
                report("config", &m);
                ExitCode::from(2)
            }
            Err(RunError::Numerical(e)) => {
                report("numerical", &e.to_string());
                ExitCode::from(3)
            }
            Err(RunError::Io(e)) => {
                report("io", &format!("{e:#}"));
                ExitCode::FAILURE
            }
        },
        Command::Validate { oracle, inject_fault } => {
            let oracle = match oracle.as_deref().map(parse_oracle).transpose() {
                Ok(o) => o,
                Err(m) => {
                    report("config", &m);
                    return ExitCode::from(2);
                }
            };
            let fault = inject_fault.map(|FaultArg::FlipRateSign| Fault::FlipRateSign);
            let results = run_checks(&ValidateOptions { oracle, fault });
            let mut ok = true;
            for r in &results {
                println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::ListExperiments => {
            println!("experiment kinds:");
            for (k, d) in config::EXPERIMENT_KINDS {
                println!("  {k:<14} {d}");
            }
            println!("bundled configs (use the name with `run --config`):");
            for (name, text) in BUNDLED {
                let desc = config::parse(text).map(|c| c.description).unwrap_or_default();
                println!("  {name:<14} {desc}");
            }
            ExitCode::SUCCESS
        }
    }
}
