use std::fs::{self, File};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ldp_harness::audit::{audit_grid, write_audit_csv};
use ldp_harness::dataset::SyntheticSpec;
use ldp_harness::experiment::{
    read_results, run_experiment, write_outputs, DatasetSource, ExperimentConfig, Protocol,
    INFEASIBLE,
};
use ldp_harness::metrics::accuracy_gain;
use ldp_harness::tables::{
    longitudinal_table, single_round_table, write_longitudinal_csv, write_single_round_csv,
    DEFAULT_EPS_INF, DEFAULT_KS, DEFAULT_N, DEFAULT_RATIOS,
};

/// Longitudinal LDP frequency estimation experiments.
#[derive(Parser)]
#[command(name = "ldp-harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form variance tables for the single- and two-round protocols.
    Tables(TablesArgs),
    /// Monte Carlo comparison of protocols on a dataset.
    Simulate(SimulateArgs),
    /// Accuracy gain between two `results.csv` files.
    Gains(GainsArgs),
    /// Measured epsilons of the memoization and end-to-end channels.
    Audit(AuditArgs),
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, default_value_t = DEFAULT_N)]
    n: f64,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPS_INF)]
    eps_inf: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS)]
    ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    k: Vec<usize>,
    /// Directory for the CSV files; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// CSV file with a header row; every column is categorical.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    dataset: Option<PathBuf>,
    /// Synthetic data as `n:k1,k2,...`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = Protocol::ALL.map(|p| p.to_string()))]
    protocols: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0])]
    eps_inf: Vec<f64>,
    /// eps_1 as a fraction of eps_inf.
    #[arg(long, default_value_t = 0.6)]
    ratio: f64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    tau: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Project estimates onto the simplex before measuring error.
    #[arg(long)]
    clip: bool,
}

#[derive(Args)]
struct GainsArgs {
    baseline: PathBuf,
    candidate: PathBuf,
    #[arg(long)]
    baseline_protocol: Option<String>,
    #[arg(long)]
    candidate_protocol: Option<String>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPS_INF)]
    eps_inf: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS)]
    ratios: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 8, 32])]
    k: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    OnlyInfeasible,
}

fn tables(args: TablesArgs) -> anyhow::Result<Outcome> {
    let long = longitudinal_table(args.n, &args.eps_inf, &args.ratios, &args.k)?;
    let single = single_round_table(args.n, &args.eps_inf, &args.k)?;
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_longitudinal_csv(
                File::create(dir.join("longitudinal_variance.csv"))?,
                &long,
                &args.k,
            )?;
            write_single_round_csv(
                File::create(dir.join("single_round_variance.csv"))?,
                &single,
                &args.k,
            )?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            write_longitudinal_csv(&mut stdout, &long, &args.k)?;
            writeln!(stdout)?;
            write_single_round_csv(&mut stdout, &single, &args.k)?;
        }
    }
    Ok(Outcome::Done)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<Outcome> {
    let source = match (args.dataset, args.synthetic) {
        (Some(path), None) => DatasetSource::File(path),
        (None, Some(spec)) => DatasetSource::Synthetic(spec.parse::<SyntheticSpec>()?),
        _ => bail!("give exactly one of --dataset and --synthetic"),
    };
    let protocols = args
        .protocols
        .iter()
        .map(|p| p.parse::<Protocol>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = ExperimentConfig {
        source,
        protocols,
        eps_inf: args.eps_inf,
        ratio: args.ratio,
        runs: args.runs,
        tau: args.tau,
        seed: args.seed,
        clip: args.clip,
    };
    config.validate()?;
    let dataset = config.dataset()?;
    let results = run_experiment(&config, &dataset)?;
    write_outputs(&results, &dataset, &args.out)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    Ok(if results.all_infeasible() {
        Outcome::OnlyInfeasible
    } else {
        Outcome::Done
    })
}

fn gains(args: GainsArgs) -> anyhow::Result<Outcome> {
    let parse = |p: &Option<String>| p.as_deref().map(str::parse::<Protocol>).transpose();
    let baseline = read_results(&args.baseline, parse(&args.baseline_protocol)?)?;
    let candidate = read_results(&args.candidate, parse(&args.candidate_protocol)?)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["eps_inf", "baseline", "candidate", "gain"])?;
    let mut any = false;
    for &(eps, base_protocol, base_mse) in &baseline {
        let matches: Vec<_> = candidate.iter().filter(|c| c.0 == eps).collect();
        if matches.len() > 1 {
            bail!(
                "{} has several protocols at eps_inf = {eps}; pick one with --candidate-protocol",
                args.candidate.display()
            );
        }
        let Some(&&(_, cand_protocol, cand_mse)) = matches.first() else {
            continue;
        };
        let gain = match (base_mse, cand_mse) {
            (Some(b), Some(c)) => {
                any = true;
                accuracy_gain(b, c)?.to_string()
            }
            _ => INFEASIBLE.to_string(),
        };
        w.write_record([
            eps.to_string(),
            base_protocol.to_string(),
            cand_protocol.to_string(),
            gain,
        ])?;
    }
    w.flush()?;
    Ok(if any {
        Outcome::Done
    } else {
        Outcome::OnlyInfeasible
    })
}

fn audit(args: AuditArgs) -> anyhow::Result<Outcome> {
    let records = audit_grid(&args.eps_inf, &args.ratios, &args.k)?;
    match args.out {
        Some(path) => write_audit_csv(File::create(&path)?, &records)?,
        None => write_audit_csv(io::stdout().lock(), &records)?,
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Tables(args) => tables(args),
        Command::Simulate(args) => simulate(args),
        Command::Gains(args) => gains(args),
        Command::Audit(args) => audit(args),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::OnlyInfeasible) => {
            eprintln!("every requested configuration is infeasible");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
