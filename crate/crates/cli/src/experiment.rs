//! Monte Carlo comparison of longitudinal protocols on a fixed dataset.
//!
//! Every run re-randomizes attribute sampling and privacy noise over the same
//! rows. Client `i` of run `r` draws from its own stream keyed by
//! `(seed, protocol, eps_inf, r)`, so results do not depend on scheduling.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ldp_longitudinal::aggregator::{Aggregator, CountMatrix, EstimateTable};
use ldp_longitudinal::longitudinal::memoize;
use ldp_longitudinal::multidim::{
    adaptive_plan, allomfree_report, fixed_plan, sampled_client_init,
};
use ldp_longitudinal::{BudgetPair, LdpError, LongitudinalFamily, LongitudinalParams, StreamScope};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, synthetic_dataset, EncodedDataset, SyntheticSpec};
use crate::error::{HarnessError, Result};
use crate::metrics::{accuracy_gain, clip_and_normalize, mse_avg};

/// Written in place of numbers for budgets a protocol cannot meet.
pub const INFEASIBLE: &str = "infeasible";

const CLIENTS_PER_TASK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "L-SUE")]
    LSue,
    #[serde(rename = "L-OUE")]
    LOue,
    #[serde(rename = "L-OSUE")]
    LOsue,
    #[serde(rename = "L-SOUE")]
    LSoue,
    #[serde(rename = "ALLOMFREE")]
    Allomfree,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::LSue,
        Protocol::LOue,
        Protocol::LOsue,
        Protocol::LSoue,
        Protocol::Allomfree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::LSue => "L-SUE",
            Protocol::LOue => "L-OUE",
            Protocol::LOsue => "L-OSUE",
            Protocol::LSoue => "L-SOUE",
            Protocol::Allomfree => "ALLOMFREE",
        }
    }

    /// The fixed family, or `None` for the adaptive client.
    pub fn family(self) -> Option<LongitudinalFamily> {
        match self {
            Protocol::LSue => Some(LongitudinalFamily::LSue),
            Protocol::LOue => Some(LongitudinalFamily::LOue),
            Protocol::LOsue => Some(LongitudinalFamily::LOsue),
            Protocol::LSoue => Some(LongitudinalFamily::LSoue),
            Protocol::Allomfree => None,
        }
    }

    fn stream_label(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("allomfree") {
            return Ok(Protocol::Allomfree);
        }
        let family: LongitudinalFamily = s.parse().map_err(HarnessError::Config)?;
        Protocol::ALL
            .into_iter()
            .find(|p| p.family() == Some(family))
            .ok_or_else(|| {
                HarnessError::Config(format!("{family} is not available in simulations"))
            })
    }
}

/// Per-attribute parameters of `protocol` under `budget`.
pub fn protocol_plan(
    protocol: Protocol,
    domain: &ldp_longitudinal::DomainSpec,
    budget: BudgetPair,
) -> ldp_longitudinal::Result<Vec<LongitudinalParams>> {
    match protocol.family() {
        Some(family) => fixed_plan(family, domain, budget),
        None => adaptive_plan(domain, budget),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub protocols: Vec<Protocol>,
    pub eps_inf: Vec<f64>,
    /// `eps_1 = ratio * eps_inf`.
    pub ratio: f64,
    pub runs: usize,
    pub tau: u32,
    pub seed: u64,
    /// Clip estimates to the simplex before measuring error.
    pub clip: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.tau == 0 {
            return bad("tau must be at least 1".into());
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad(format!("ratio {} is not in (0, 1)", self.ratio));
        }
        if self.eps_inf.is_empty() || self.eps_inf.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("eps_inf values must be positive and finite".into());
        }
        if self.protocols.is_empty() {
            return bad("no protocols selected".into());
        }
        Ok(())
    }

    /// Loads the file or generates the synthetic dataset (seeded by `seed`).
    pub fn dataset(&self) -> Result<EncodedDataset> {
        match &self.source {
            DatasetSource::File(path) => load_dataset(path),
            DatasetSource::Synthetic(spec) => synthetic_dataset(spec, self.seed),
        }
    }
}

/// Which attributes a simulated client reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// One uniformly sampled attribute for the client's lifetime.
    OneAttribute,
    /// Every attribute, each with its own memoized value.
    EveryAttribute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub mse: f64,
    /// One table per report round.
    pub estimates: Vec<EstimateTable>,
}

/// Simulates all clients of `dataset` for `tau` rounds and measures the
/// averaged squared error of the server's estimates.
pub fn simulate_run(
    dataset: &EncodedDataset,
    plan: &[LongitudinalParams],
    sampling: Sampling,
    tau: u32,
    scope: &StreamScope,
    clip: bool,
) -> Result<RunOutcome> {
    let domain = dataset.domain();
    if plan.len() != domain.dimension() {
        return Err(LdpError::DimensionMismatch {
            expected: domain.dimension(),
            got: plan.len(),
        }
        .into());
    }
    let n = dataset.n();
    let tasks = n.div_ceil(CLIENTS_PER_TASK);
    let counts = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut counts = CountMatrix::new(domain);
            let end = ((task + 1) * CLIENTS_PER_TASK).min(n);
            for i in task * CLIENTS_PER_TASK..end {
                simulate_client(
                    dataset.row(i),
                    i as u64,
                    domain,
                    plan,
                    sampling,
                    tau,
                    scope,
                    &mut counts,
                )?;
            }
            Ok::<_, HarnessError>(counts)
        })
        .try_reduce(
            || CountMatrix::new(domain),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )?;

    let mut aggregator = Aggregator::new(domain.clone());
    for (j, params) in plan.iter().enumerate() {
        aggregator.register(j, *params)?;
    }
    aggregator.merge_counts(&counts)?;

    let mut tables = Vec::with_capacity(tau as usize);
    let mut per_round = Vec::with_capacity(tau as usize);
    for t in 1..=tau {
        let table = aggregator.estimate_all(t)?;
        let mut round = Vec::with_capacity(domain.dimension());
        for attr in &table.attributes {
            let mut est = attr.estimates.clone().ok_or_else(|| {
                HarnessError::Config(format!(
                    "attribute `{}` received no reports in round {t}",
                    attr.name
                ))
            })?;
            if clip {
                clip_and_normalize(&mut est);
            }
            round.push(est);
        }
        per_round.push(round);
        tables.push(table);
    }
    let mse = mse_avg(dataset.true_freqs(), &per_round)?;
    Ok(RunOutcome {
        mse,
        estimates: tables,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_client(
    row: &[usize],
    client: u64,
    domain: &ldp_longitudinal::DomainSpec,
    plan: &[LongitudinalParams],
    sampling: Sampling,
    tau: u32,
    scope: &StreamScope,
    counts: &mut CountMatrix,
) -> Result<()> {
    let mut setup = scope.client_round(client, 0);
    match sampling {
        Sampling::OneAttribute => {
            let state = sampled_client_init(row, domain, plan, &mut setup)?;
            for t in 1..=tau {
                let mut rng = scope.client_round(client, t);
                counts.ingest(&allomfree_report(&state, t, &mut rng))?;
            }
        }
        Sampling::EveryAttribute => {
            domain.check_tuple(row)?;
            let memos = row
                .iter()
                .zip(plan)
                .map(|(&v, params)| memoize(v, params, &mut setup))
                .collect::<ldp_longitudinal::Result<Vec<_>>>()?;
            for t in 1..=tau {
                let mut rng = scope.client_round(client, t);
                for (j, memo) in memos.iter().enumerate() {
                    counts.ingest_payload(t, j, &memo.report(&mut rng))?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Feasible {
        /// Protocol used for each attribute.
        families: Vec<LongitudinalFamily>,
        mse_runs: Vec<f64>,
        mse_mean: f64,
        mse_std: f64,
    },
    Infeasible {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub protocol: Protocol,
    pub eps_inf: f64,
    pub eps_1: f64,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn mse_mean(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Feasible { mse_mean, .. } => Some(mse_mean),
            CellOutcome::Infeasible { .. } => None,
        }
    }
}

/// Gain of the adaptive client over a baseline at one budget; `None` when
/// either side is infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub eps_inf: f64,
    pub baseline: Protocol,
    pub candidate: Protocol,
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub attributes: Vec<String>,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub version: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub cells: Vec<CellResult>,
    pub gains: Vec<GainRecord>,
    /// Estimates of the first run of each feasible cell.
    #[serde(skip)]
    pub first_run_estimates: Vec<(Protocol, f64, Vec<EstimateTable>)>,
}

impl ExperimentResults {
    pub fn cell(&self, protocol: Protocol, eps_inf: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.protocol == protocol && c.eps_inf == eps_inf)
    }

    pub fn all_infeasible(&self) -> bool {
        self.cells
            .iter()
            .all(|c| matches!(c.outcome, CellOutcome::Infeasible { .. }))
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (protocol, eps_inf) cell of `config` on `dataset`.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &EncodedDataset,
) -> Result<ExperimentResults> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut first_run_estimates = Vec::new();
    for &eps_inf in &config.eps_inf {
        let budget = BudgetPair::from_ratio(eps_inf, config.ratio)?;
        for &protocol in &config.protocols {
            let plan = match protocol_plan(protocol, dataset.domain(), budget) {
                Ok(plan) => plan,
                Err(err @ LdpError::InfeasibleBudget { .. }) => {
                    log::warn!("{protocol} at eps_inf = {eps_inf}: {err}");
                    cells.push(CellResult {
                        protocol,
                        eps_inf,
                        eps_1: budget.eps_1,
                        outcome: CellOutcome::Infeasible {
                            reason: err.to_string(),
                        },
                    });
                    continue;
                }
                Err(err) => return Err(err.into()),
            };
            let outcomes = (0..config.runs)
                .into_par_iter()
                .map(|run| {
                    let scope = StreamScope::new(
                        config.seed,
                        &[protocol.stream_label(), eps_inf.to_bits(), run as u64],
                    );
                    simulate_run(
                        dataset,
                        &plan,
                        Sampling::OneAttribute,
                        config.tau,
                        &scope,
                        config.clip,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mse_runs: Vec<f64> = outcomes.iter().map(|o| o.mse).collect();
            let (mse_mean, mse_std) = mean_std(&mse_runs);
            log::info!("{protocol} eps_inf = {eps_inf}: mse {mse_mean:.3e} +- {mse_std:.1e}");
            first_run_estimates.push((protocol, eps_inf, outcomes[0].estimates.clone()));
            cells.push(CellResult {
                protocol,
                eps_inf,
                eps_1: budget.eps_1,
                outcome: CellOutcome::Feasible {
                    families: plan.iter().map(|p| p.family).collect(),
                    mse_runs,
                    mse_mean,
                    mse_std,
                },
            });
        }
    }

    let mut gains = Vec::new();
    if config.protocols.contains(&Protocol::Allomfree) {
        for &eps_inf in &config.eps_inf {
            for baseline in [Protocol::LSue, Protocol::LOue] {
                if !config.protocols.contains(&baseline) {
                    continue;
                }
                let mse = |p| {
                    cells
                        .iter()
                        .find(|c: &&CellResult| c.protocol == p && c.eps_inf == eps_inf)?
                        .mse_mean()
                };
                let gain = match (mse(baseline), mse(Protocol::Allomfree)) {
                    (Some(b), Some(a)) => Some(accuracy_gain(b, a)?),
                    _ => None,
                };
                gains.push(GainRecord {
                    eps_inf,
                    baseline,
                    candidate: Protocol::Allomfree,
                    gain,
                });
            }
        }
    }

    Ok(ExperimentResults {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        dataset: DatasetSummary {
            n: dataset.n(),
            attributes: dataset
                .domain()
                .attributes()
                .iter()
                .map(|a| a.name.clone())
                .collect(),
            sizes: dataset.domain().sizes(),
        },
        cells,
        gains,
        first_run_estimates,
    })
}

/// Writes `results.csv`, `gains.csv`, `results.json` and one estimate file
/// per feasible cell under `estimates/`.
pub fn write_outputs(
    results: &ExperimentResults,
    dataset: &EncodedDataset,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out.join("estimates"))?;

    let mut w = csv::Writer::from_path(out.join("results.csv"))?;
    w.write_record([
        "protocol", "eps_inf", "eps_1", "runs", "mse_mean", "mse_std",
    ])?;
    for cell in &results.cells {
        let (mean, std) = match &cell.outcome {
            CellOutcome::Feasible {
                mse_mean, mse_std, ..
            } => (mse_mean.to_string(), mse_std.to_string()),
            CellOutcome::Infeasible { .. } => (INFEASIBLE.to_string(), INFEASIBLE.to_string()),
        };
        w.write_record([
            cell.protocol.to_string(),
            cell.eps_inf.to_string(),
            cell.eps_1.to_string(),
            results.config.runs.to_string(),
            mean,
            std,
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("gains.csv"))?;
    w.write_record(["eps_inf", "baseline", "candidate", "gain"])?;
    for g in &results.gains {
        w.write_record([
            g.eps_inf.to_string(),
            g.baseline.to_string(),
            g.candidate.to_string(),
            g.gain
                .map_or_else(|| INFEASIBLE.to_string(), |x| x.to_string()),
        ])?;
    }
    w.flush()?;

    fs::write(
        out.join("results.json"),
        serde_json::to_string_pretty(results)? + "\n",
    )?;

    for (protocol, eps_inf, tables) in &results.first_run_estimates {
        let path = out
            .join("estimates")
            .join(format!("{protocol}_eps{eps_inf}.csv"));
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(EstimateTable::csv_header())?;
        for table in tables {
            table.write_csv(&mut w, dataset.domain(), Some(dataset.labels()))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Mean MSE per `eps_inf` read back from a `results.csv`, optionally
/// restricted to one protocol.
pub fn read_results(
    path: &Path,
    protocol: Option<Protocol>,
) -> Result<Vec<(f64, Protocol, Option<f64>)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let malformed = |reason: String| HarnessError::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| malformed(format!("missing column {i}")))
        };
        let p: Protocol = field(0)?.parse()?;
        if protocol.is_some_and(|want| want != p) {
            continue;
        }
        let eps: f64 = field(1)?
            .parse()
            .map_err(|_| malformed("bad eps_inf".into()))?;
        let mse = match field(4)? {
            INFEASIBLE => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| malformed(format!("bad mse `{s}`")))?,
            ),
        };
        rows.push((eps, p, mse));
    }
    Ok(rows)
}
