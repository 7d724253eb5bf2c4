#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod accuracy;
mod config;
mod fit;
mod output;
mod quadcheck;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::EpOverrides;

#[derive(Parser)]
#[command(name = "epfrag", version, about = "Expectation propagation for Bayesian GLMMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file and write the fit document.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        ep: EpOverrides,
    },
    /// Write a simulated logistic random-intercept data set.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        groups: usize,
        #[arg(long, default_value_t = 5)]
        per_group: usize,
    },
    /// Compare EP marginals with an exact grid posterior (at most two free parameters).
    Accuracy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid nodes per axis.
        #[arg(long, default_value_t = 401)]
        grid_nodes: usize,
        #[command(flatten)]
        ep: EpOverrides,
    },
    /// Check the adaptive quadrature against a naive oracle on random arguments.
    Quadcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        tuples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 0 on success or convergence, 2 on non-convergence or a failed check.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit { data, model, out, ep } => {
            let file = config::read_model(&model)?;
            let spec = file.to_spec()?;
            let cfg = file.ep_config(&ep)?;
            let data = config::read_csv(&data)?;
            let (m, fit) = fit::fit_model(&spec, &data, &cfg)?;
            output::write_json(&output::fit_document(&m, &fit, spec.standardize), out.as_deref())?;
            Ok(if fit.converged { 0 } else { 2 })
        }
        Command::Simulate { out, seed, groups, per_group } => {
            simulate::simulate(seed, groups, per_group, &out)?;
            Ok(0)
        }
        Command::Accuracy { data, model, out, grid_nodes, ep } => {
            let file = config::read_model(&model)?;
            let spec = file.to_spec()?;
            let cfg = file.ep_config(&ep)?;
            let data = config::read_csv(&data)?;
            let (doc, converged) = accuracy::report(&spec, &data, &cfg, grid_nodes)?;
            output::write_json(&doc, out.as_deref())?;
            Ok(if converged { 0 } else { 2 })
        }
        Command::Quadcheck { seed, tuples, out } => {
            let (doc, pass) = quadcheck::report(seed, tuples)?;
            output::write_json(&doc, out.as_deref())?;
            Ok(if pass { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
