use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mwm_cli::{
    cmd_fit, cmd_gamma, cmd_oracle_check, cmd_signal, cmd_sweep, plot_script, with_jobs, CliError,
    CliResult, Output, RunConfig,
};

#[derive(Parser)]
#[command(name = "mwm", version, about = "Multiwave-mixing photon-echo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: `out` in the config, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decoherence exponents Γ(t).
    Gamma(Common),
    /// Time-resolved signal intensities.
    Signal(Common),
    /// Time-integrated 4WM/6WM intensities versus t₁.
    Sweep(Common),
    /// Oracle versus analytic expansion; exits 4 on a breach.
    OracleCheck(Common),
    /// Least-squares fit of reservoir parameters.
    Fit(Common),
    /// Writes a gnuplot script for the CSVs in a directory.
    PlotScript {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let (common, cmd): (Common, fn(&RunConfig) -> CliResult<Output>) = match cli.command {
        Command::Gamma(c) => (c, cmd_gamma),
        Command::Signal(c) => (c, cmd_signal),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::OracleCheck(c) => (c, cmd_oracle_check),
        Command::Fit(c) => (c, cmd_fit),
        Command::PlotScript { out } => {
            let script = plot_script(&out)?;
            std::fs::write(out.join("plot.gp"), script)?;
            println!("wrote {}", out.join("plot.gp").display());
            return Ok(());
        }
    };
    let cfg = RunConfig::from_file(&common.config)?;
    let out_dir = common
        .out
        .or_else(|| cfg.out.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let output = with_jobs(common.jobs, || cmd(&cfg))?;
    output.write(&out_dir)?;
    print!("{}", output.summary);
    for (name, _) in &output.files {
        println!("wrote {}", out_dir.join(name).display());
    }
    match output.breach {
        Some(b) => Err(CliError::Breach(b)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
