use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nanoflow_cli::{cmd_compare, cmd_converge, cmd_dist, cmd_simulate, CliError, CompareArgs, ScenarioArgs};

#[derive(Parser)]
#[command(name = "nanoflow", version, about = "Raw-data model and simulator for flow-guided nanoscale localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the analytic distribution of reports (CSV, JSON, bar-chart data)
    Dist {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Simulate a nanodevice population and write its dataset
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Compare datasets with each other or with the analytic model
    Compare {
        #[command(flatten)]
        compare: CompareArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// MSE of simulated frequencies against the model over a device ladder
    Converge {
        /// Comma-separated, strictly increasing device counts
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        ladder: Vec<u64>,
        /// Binning tolerance [s]; defaults to 3 sigma (1e-6 without noise)
        #[arg(long)]
        time_tolerance: Option<f64>,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dist { scenario } => {
            for (label, spec) in scenario.resolve_sweep()? {
                for path in cmd_dist(&spec)? {
                    println!("{}wrote {}", prefix(&label), path.display());
                }
            }
        }
        Command::Simulate { scenario } => {
            for (label, spec) in scenario.resolve_sweep()? {
                for (path, n) in cmd_simulate(&spec)? {
                    println!("{}records: {n} -> {}", prefix(&label), path.display());
                }
            }
        }
        Command::Compare { compare, scenario } => {
            let specs = scenario.resolve_sweep()?;
            if specs.len() > 1 && compare.dataset_a.is_some() {
                return Err(CliError::validation("--sweep only applies to self-contained --analytic comparisons"));
            }
            let just_specs: Vec<_> = specs.iter().map(|(_, s)| s.clone()).collect();
            let reports = cmd_compare(&compare, &just_specs)?;
            for ((label, _), report) in specs.iter().zip(&reports) {
                let s = &report.summary;
                println!(
                    "{}accept_fraction={} mean_ecdf_distance={} max_kl={} missing={:?}",
                    prefix(label),
                    fmt_opt(s.accept_fraction),
                    fmt_opt(s.mean_ecdf_distance),
                    fmt_opt(s.max_kl),
                    s.missing_regions
                );
            }
        }
        Command::Converge {
            ladder,
            time_tolerance,
            scenario,
        } => {
            for (label, spec) in scenario.resolve_sweep()? {
                for (event, rows) in cmd_converge(&spec, &ladder, time_tolerance)? {
                    for r in rows {
                        println!("{}region={event} devices={} mse={}", prefix(&label), r.devices, r.mse);
                    }
                }
            }
        }
    }
    Ok(())
}

fn prefix(label: &Option<String>) -> String {
    label.as_ref().map(|l| format!("[{l}] ")).unwrap_or_default()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "na".into())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
