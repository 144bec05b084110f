//! Multidimensional collection: budget strategies and the adaptive client.
//!
//! With `d` attributes a client can either split its budget over all of them
//! or sample `r` attributes and spend `eps / r` on each. Sampling a single
//! attribute minimizes the variance. The adaptive client samples one attribute
//! once, picks L-GRR or L-OSUE for it by comparing approximate variances, and
//! memoizes the value of that attribute.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalReport, DomainSpec, PayloadKind};
use crate::error::{LdpError, Result};
use crate::longitudinal::{
    approx_variance_longitudinal, memoize, solve_params, BudgetPair, LongitudinalFamily,
    LongitudinalParams, MemoState,
};
use crate::oracle::{theoretical_variance, OracleFamily};

/// Variance when the budget is split evenly over all `d` attributes.
pub fn spl_variance(family: OracleFamily, eps: f64, d: usize, k: usize, n: f64) -> Result<f64> {
    if d == 0 {
        return Err(LdpError::InvalidSampling { r: 1, d });
    }
    theoretical_variance(family, eps / d as f64, k, n)
}

/// Variance when each client samples `r` of `d` attributes: budget `eps / r`
/// and about `n r / d` reports per attribute.
pub fn smp_variance(
    family: OracleFamily,
    eps: f64,
    d: usize,
    k: usize,
    n: f64,
    r: usize,
) -> Result<f64> {
    if r == 0 || r > d {
        return Err(LdpError::InvalidSampling { r, d });
    }
    theoretical_variance(family, eps / r as f64, k, n * r as f64 / d as f64)
}

/// The number of sampled attributes in `1..=d` with the smallest variance.
/// Ties go to the smaller `r`.
pub fn optimal_r(family: OracleFamily, eps: f64, d: usize, k: usize, n: f64) -> Result<usize> {
    let mut best = (1, smp_variance(family, eps, d, k, n, 1)?);
    for r in 2..=d {
        let v = smp_variance(family, eps, d, k, n, r)?;
        if v < best.1 {
            best = (r, v);
        }
    }
    Ok(best.0)
}

/// The two protocols the adaptive client chooses between.
pub const ADAPTIVE_CANDIDATES: [LongitudinalFamily; 2] =
    [LongitudinalFamily::LGrr, LongitudinalFamily::LOsue];

/// Solves both candidates for a domain of size `k` and keeps L-GRR when its
/// approximate variance is no larger than L-OSUE's.
///
/// If L-GRR cannot meet the budget the client falls back to L-OSUE.
pub fn select_protocol(k: usize, budget: BudgetPair) -> Result<LongitudinalParams> {
    let osue = solve_params(LongitudinalFamily::LOsue, budget, k)?;
    let grr = match solve_params(LongitudinalFamily::LGrr, budget, k) {
        Ok(params) => params,
        Err(err @ LdpError::InfeasibleBudget { .. }) => {
            log::warn!("{err}; falling back to L-OSUE");
            return Ok(osue);
        }
        Err(err) => return Err(err),
    };
    // The comparison does not depend on n.
    let var_grr = approx_variance_longitudinal(&grr, 1.0)?;
    let var_osue = approx_variance_longitudinal(&osue, 1.0)?;
    Ok(if var_grr <= var_osue { grr } else { osue })
}

/// The adaptive choice for every attribute of `domain`.
pub fn adaptive_plan(domain: &DomainSpec, budget: BudgetPair) -> Result<Vec<LongitudinalParams>> {
    domain
        .attributes()
        .iter()
        .map(|a| select_protocol(a.k, budget))
        .collect()
}

/// The same protocol family for every attribute of `domain`.
pub fn fixed_plan(
    family: LongitudinalFamily,
    domain: &DomainSpec,
    budget: BudgetPair,
) -> Result<Vec<LongitudinalParams>> {
    domain
        .attributes()
        .iter()
        .map(|a| solve_params(family, budget, a.k))
        .collect()
}

/// A client that reports one attribute for its whole lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    sampled_attr: usize,
    memo: MemoState,
}

impl ClientState {
    pub fn new(sampled_attr: usize, memo: MemoState) -> Self {
        Self { sampled_attr, memo }
    }

    pub fn sampled_attr(&self) -> usize {
        self.sampled_attr
    }

    pub fn chosen_family(&self) -> LongitudinalFamily {
        self.memo.family()
    }

    pub fn memo(&self) -> &MemoState {
        &self.memo
    }
}

/// Samples one attribute uniformly, then memoizes its value with the
/// per-attribute protocol from `plan`.
pub fn sampled_client_init<R: Rng + ?Sized>(
    values: &[usize],
    domain: &DomainSpec,
    plan: &[LongitudinalParams],
    rng: &mut R,
) -> Result<ClientState> {
    domain.check_tuple(values)?;
    if plan.len() != domain.dimension() {
        return Err(LdpError::DimensionMismatch {
            expected: domain.dimension(),
            got: plan.len(),
        });
    }
    let attr = rng.gen_range(0..domain.dimension());
    let memo = memoize(values[attr], &plan[attr], rng)?;
    Ok(ClientState::new(attr, memo))
}

/// Adaptive client setup: sample an attribute, choose between L-GRR and
/// L-OSUE for its domain size, and memoize its value.
pub fn allomfree_init<R: Rng + ?Sized>(
    values: &[usize],
    domain: &DomainSpec,
    budget: BudgetPair,
    rng: &mut R,
) -> Result<ClientState> {
    domain.check_tuple(values)?;
    let attr = rng.gen_range(0..domain.dimension());
    let params = select_protocol(domain.k(attr)?, budget)?;
    let memo = memoize(values[attr], &params, rng)?;
    Ok(ClientState::new(attr, memo))
}

/// One report at round `t >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedReport {
    pub t: u32,
    pub attr: usize,
    pub payload: CategoricalReport,
}

impl TimedReport {
    /// Wire form `t,client_id,attr,payload`.
    pub fn encode_line(&self, client_id: u64) -> String {
        format!("{},{},{},{}", self.t, client_id, self.attr, self.payload)
    }

    /// Parses a wire line. `kinds[attr]` tells how the payload of each
    /// attribute is encoded, since a short bit string also parses as an index.
    pub fn decode_line(line: &str, kinds: &[PayloadKind]) -> Result<(u64, TimedReport)> {
        let malformed = || LdpError::MalformedReport(line.to_string());
        let fields: Vec<&str> = line.trim().split(',').collect();
        let [t, client, attr, payload] = fields.as_slice() else {
            return Err(malformed());
        };
        let t: u32 = t.parse().map_err(|_| malformed())?;
        let client: u64 = client.parse().map_err(|_| malformed())?;
        let attr: usize = attr.parse().map_err(|_| malformed())?;
        let kind = *kinds.get(attr).ok_or(LdpError::UnknownAttribute(attr))?;
        let payload = CategoricalReport::parse(payload, kind)?;
        Ok((client, TimedReport { t, attr, payload }))
    }
}

/// A fresh report of the client's memoized attribute at round `t`.
pub fn allomfree_report<R: Rng + ?Sized>(state: &ClientState, t: u32, rng: &mut R) -> TimedReport {
    debug_assert!(t >= 1, "report rounds start at 1");
    TimedReport {
        t,
        attr: state.sampled_attr,
        payload: state.memo.report(rng),
    }
}
