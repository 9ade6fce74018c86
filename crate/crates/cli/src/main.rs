use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use jumpbounds_cli::config::RunConfig;
use jumpbounds_cli::output::{flat_summary, print_line, sweep_row, SWEEP_COLUMNS};
use jumpbounds_cli::{
    cmd_classical_check, cmd_run, cmd_steady_state, cmd_sweep, cmd_validate, resolve_out_dir,
    CliError, Format, EXIT_CHECK_FAILED, EXIT_ERROR,
};

/// Quantum-jump simulation and multidimensional KUR/TUR bounds.
#[derive(Parser)]
#[command(name = "jumpbounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// TOML config (or JSON when the file ends in .json).
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Defaults to the config's output_dir, then $JUMPBOUNDS_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one ensemble and write summary.json, samples.csv, provenance.json.
    Run(Common),
    /// Run every value of the config's [sweep] and write sweep.csv.
    Sweep(Common),
    /// Check F̂₁₂ = 0 and F̂_αα = A_α on a classical model.
    ClassicalCheck(Common),
    /// Print ρ_ss and, for paired models, l_ss.
    SteadyState(Common),
    /// Lint the model.
    Validate(Common),
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(m) = self.trajectories {
            cfg.trajectories = m;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        resolve_out_dir(self.out.clone(), cfg)
    }
}

fn to_json_line(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let report = cmd_run(&cfg, &c.out_dir(&cfg))?;
            match c.format.unwrap_or(FormatArg::Json) {
                FormatArg::Json => print_line(&to_json_line(&flat_summary(&report))),
                FormatArg::Csv => {
                    print_line(&SWEEP_COLUMNS.join(","));
                    print_line(&sweep_row(f64::NAN, &report).join(","));
                }
            }
            Ok(0)
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let format = match c.format.unwrap_or(FormatArg::Csv) {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            let out = c.out_dir(&cfg);
            let outcome = cmd_sweep(&cfg, &out, format)?;
            let failures = outcome.failures();
            print_line(&format!(
                "{} of {} sweep points completed; results in {}",
                outcome.values.len() - failures,
                outcome.values.len(),
                out.display()
            ));
            if failures > 0 {
                for r in outcome.reports.iter().filter_map(|r| r.as_ref().err()) {
                    eprintln!("{}", r.to_json());
                }
                return Ok(EXIT_ERROR);
            }
            Ok(0)
        }
        Command::ClassicalCheck(c) => {
            let cfg = c.load()?;
            let out = c.out_dir(&cfg);
            let check = cmd_classical_check(&cfg, Some(&out))?;
            print_line(&to_json_line(&check));
            Ok(if check.passed { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::SteadyState(c) => {
            let cfg = c.load()?;
            print_line(&to_json_line(&cmd_steady_state(&cfg)?));
            Ok(0)
        }
        Command::Validate(c) => {
            let cfg = c.load()?;
            let (report, passed) = cmd_validate(&cfg)?;
            print_line(&to_json_line(&report));
            Ok(if passed { 0 } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
