use std::path::PathBuf;

use clap::{Parser, Subcommand};
use onc_core::{Mode, Scheme};

/// Delay-constrained opportunistic network coding: solve, power, simulate, sweep.
///
/// Log verbosity follows the `ONC_LOG` environment variable
/// (`error`, `warn`, `info`, `debug`, `trace`).
#[derive(Debug, Parser)]
#[command(name = "onc", version)]
pub struct Cli {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `[output] directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the policy program; writes policy.txt and solve.csv.
    Solve,
    /// Thresholds and average power of a policy; writes thresholds.csv and power.csv.
    Power {
        #[arg(long)]
        policy: PathBuf,
    },
    /// Simulate one scheme over the seed list; writes simulate.csv.
    Simulate {
        /// Required for the optimal-policy scheme.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value = "optimal-policy", value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long, default_value = "probability-driven", value_parser = parse_mode)]
        mode: Mode,
        /// Comma-separated seeds, overriding `[sim] seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Analytic and simulated metrics of all schemes over the sweep grid;
    /// writes sweep.csv.
    Sweep {
        #[arg(long, default_value = "probability-driven", value_parser = parse_mode)]
        mode: Mode,
        /// Comma-separated seeds, overriding `[sim] seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Also write SVG charts.
        #[arg(long)]
        emit_plots: bool,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| "expected probability-driven or channel-driven".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "onc", "simulate", "--scheme", "random-ma", "--seeds", "3,1,2", "--out", "x",
        ])
        .unwrap();
        assert_eq!(cli.out, Some(PathBuf::from("x")));
        match cli.command {
            Command::Simulate { scheme, seeds, mode, .. } => {
                assert_eq!(scheme, Scheme::RandomMa);
                assert_eq!(seeds, Some(vec![3, 1, 2]));
                assert_eq!(mode, Mode::ProbabilityDriven);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_needs_policy() {
        assert!(Cli::try_parse_from(["onc", "power"]).is_err());
        assert!(Cli::try_parse_from(["onc", "simulate", "--mode", "fast"]).is_err());
    }
}
