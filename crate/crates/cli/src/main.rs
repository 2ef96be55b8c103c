use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rkhs_observer_cli::{cmd_design_report, cmd_run, cmd_sweep, output, CliError};

#[derive(Parser)]
#[command(name = "rkhs-observer", version, about = "Adaptive RKHS observer scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `sim.h=5e-4`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Reserved; all built-in signals are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write timeseries.csv, summary.txt and effective_config.toml.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print design quantities (eigenvalues, Lur'e residuals, E0, d_N) without simulating.
    DesignReport {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario for each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Override key to vary, or `noise_scale`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, out } => {
            let run = cmd_run(&common.config, &common.overrides, &out)?;
            print!("{}", run.summary.render());
            eprintln!("wrote {}", out.display());
        }
        Command::DesignReport { common } => {
            let (_, kv) = cmd_design_report(&common.config, &common.overrides)?;
            print!("{}", kv.render());
        }
        Command::Sweep {
            common,
            axis,
            values,
            out,
        } => {
            let rows = cmd_sweep(&common.config, &common.overrides, &axis, &values, &out)?;
            println!("value,N,sup_power,d_n,ultimate_bound,t_enter");
            for r in rows {
                println!(
                    "{},{},{},{},{},{}",
                    r.value,
                    r.centers,
                    output::num(r.sup_power),
                    r.d_n.map_or("NaN".into(), output::num),
                    output::num(r.ultimate_bound),
                    r.t_enter.map_or("not reached".into(), output::num)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
