use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use qgibbs::harness::config::example_toml;
use qgibbs::harness::{self, Command, ExperimentConfig};
use qgibbs::Error;

/// Finite-volume thermodynamics of quantum spin lattices.
///
/// Exit status: 0 pass, 1 a gated check failed, 2 inconclusive (buffer
/// drift gate), 3 configuration, resource or numerical error.
#[derive(Parser, Debug)]
#[command(name = "qgibbs", version)]
struct Cli {
    /// TOML experiment file; the built-in example is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set buffer.width=4`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set model.beta=...`.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Shorthand for `--set seed=...`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shorthand for `--set output.dir=...`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shorthand for `--set boxes.sides=[...]`, comma separated.
    #[arg(long, value_delimiter = ',', global = true)]
    boxes: Option<Vec<usize>>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Log-partition function per site along the boxes.
    Pressure,
    /// Entropy per site of the comparison state.
    EntropyDensity,
    /// Relative entropy per site against the internal Gibbs states.
    InfoRate,
    /// Relative entropy per site against the buffered Gibbs marginals.
    RelEntDensity,
    /// Best product state for the free-energy functional.
    MeanField,
    /// Product form of the perturbed Gibbs state.
    VerifyGibbsProduct,
    /// Peierls-Bogolubov and Golden-Thompson bounds on random pairs.
    PbGt,
    /// Norm of the log-density difference between the two Gibbs families.
    LogGap,
    /// Vanishing per-site difference of the two relative entropies.
    #[command(name = "verify-theorem1")]
    VerifyTheorem1,
    /// Mean and variance of the per-site entropy operator.
    Mcmillan,
    /// Seeded property suite.
    Selftest,
    /// Print the built-in example configuration.
    ExampleConfig,
}

impl Cmd {
    fn command(self) -> Option<Command> {
        Some(match self {
            Cmd::Pressure => Command::Pressure,
            Cmd::EntropyDensity => Command::EntropyDensity,
            Cmd::InfoRate => Command::InfoRate,
            Cmd::RelEntDensity => Command::RelEntDensity,
            Cmd::MeanField => Command::MeanField,
            Cmd::VerifyGibbsProduct => Command::VerifyGibbsProduct,
            Cmd::PbGt => Command::PbGt,
            Cmd::LogGap => Command::LogGap,
            Cmd::VerifyTheorem1 => Command::VerifyTheorem1,
            Cmd::Mcmillan => Command::Mcmillan,
            Cmd::Selftest => Command::Selftest,
            Cmd::ExampleConfig => return None,
        })
    }
}

fn overrides(cli: &Cli) -> Vec<String> {
    let mut out = cli.overrides.clone();
    if let Some(b) = cli.beta {
        out.push(format!("model.beta={b:?}"));
    }
    if let Some(s) = cli.seed {
        out.push(format!("seed={s}"));
    }
    if let Some(dir) = &cli.out {
        out.push(format!("output.dir={}", toml::Value::String(dir.display().to_string())));
    }
    if let Some(sides) = &cli.boxes {
        let list: Vec<String> = sides.iter().map(usize::to_string).collect();
        out.push(format!("boxes.sides=[{}]", list.join(",")));
    }
    out
}

fn load(cli: &Cli) -> qgibbs::Result<ExperimentConfig> {
    let extra = overrides(cli);
    match &cli.config {
        Some(path) => ExperimentConfig::load(path, &extra),
        None => ExperimentConfig::from_toml_with_overrides(&example_toml(), &extra),
    }
}

fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    let Some(command) = cli.command.command() else {
        print!("{}", example_toml());
        return Ok(ExitCode::SUCCESS);
    };
    let cfg = load(cli)?;
    let outcome = harness::run(command, &cfg)?;
    let paths = harness::write_artifacts(&outcome, &cfg, &cfg.output.dir)
        .with_context(|| format!("writing artifacts to {}", cfg.output.dir.display()))?;
    for g in &outcome.gates {
        println!(
            "{:<5} {:<32} observed {:>12.5e}  threshold {:>12.5e}",
            if g.passed { "ok" } else { "FAIL" },
            g.name,
            g.observed,
            g.threshold
        );
    }
    for p in &paths {
        println!("wrote {}", p.display());
    }
    println!("{command}: {}", outcome.status);
    Ok(ExitCode::from(outcome.status.exit_code() as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            let kind = match e.downcast_ref::<Error>() {
                Some(Error::Resource { .. }) => "resource error",
                Some(Error::Validation(_)) => "config error",
                _ => "error",
            };
            eprintln!("qgibbs: {kind}: {e:#}");
            ExitCode::from(3)
        }
    }
}
