//! Two-round memoization protocols for longitudinal collection.
//!
//! A client sanitizes its true value once with a round-1 channel `(p1, q1)`
//! and keeps the result `B'` forever. Every report is a fresh round-2
//! sanitization `(p2, q2)` of `B'`. Round 1 bounds the leakage over any number
//! of reports by `eps_inf`; the composition of both rounds bounds a single
//! report by `eps_1`.
//!
//! Five protocols are provided: L-GRR (GRR twice) and four unary-encoding
//! combinations named by their (round-1, round-2) oracles: L-SUE, L-OUE,
//! L-OSUE (OUE then SUE) and L-SOUE (SUE then OUE).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalReport, PayloadKind};
use crate::error::{LdpError, Result};
use crate::oracle::{
    canonical_pq, channel_epsilon, check_domain, check_epsilon, grr_channel, grr_perturb, one_hot,
    ue_pair_channel, ue_perturb_bits, OracleFamily, RoundParams,
};

/// Residual required from the bracketed solver, in units of epsilon.
pub const SOLVER_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LongitudinalFamily {
    #[serde(rename = "L-GRR")]
    LGrr,
    #[serde(rename = "L-SUE")]
    LSue,
    #[serde(rename = "L-OUE")]
    LOue,
    #[serde(rename = "L-OSUE")]
    LOsue,
    #[serde(rename = "L-SOUE")]
    LSoue,
}

impl LongitudinalFamily {
    pub const ALL: [LongitudinalFamily; 5] = [
        LongitudinalFamily::LGrr,
        LongitudinalFamily::LSue,
        LongitudinalFamily::LOue,
        LongitudinalFamily::LOsue,
        LongitudinalFamily::LSoue,
    ];

    pub const UNARY: [LongitudinalFamily; 4] = [
        LongitudinalFamily::LOsue,
        LongitudinalFamily::LSue,
        LongitudinalFamily::LSoue,
        LongitudinalFamily::LOue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LongitudinalFamily::LGrr => "L-GRR",
            LongitudinalFamily::LSue => "L-SUE",
            LongitudinalFamily::LOue => "L-OUE",
            LongitudinalFamily::LOsue => "L-OSUE",
            LongitudinalFamily::LSoue => "L-SOUE",
        }
    }

    pub fn round1(self) -> OracleFamily {
        match self {
            LongitudinalFamily::LGrr => OracleFamily::Grr,
            LongitudinalFamily::LSue | LongitudinalFamily::LSoue => OracleFamily::Sue,
            LongitudinalFamily::LOue | LongitudinalFamily::LOsue => OracleFamily::Oue,
        }
    }

    pub fn round2(self) -> OracleFamily {
        match self {
            LongitudinalFamily::LGrr => OracleFamily::Grr,
            LongitudinalFamily::LSue | LongitudinalFamily::LOsue => OracleFamily::Sue,
            LongitudinalFamily::LOue | LongitudinalFamily::LSoue => OracleFamily::Oue,
        }
    }

    pub fn is_unary(self) -> bool {
        self != LongitudinalFamily::LGrr
    }

    pub fn payload_kind(self) -> PayloadKind {
        self.round1().payload_kind()
    }
}

impl fmt::Display for LongitudinalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LongitudinalFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "LGRR" => Ok(LongitudinalFamily::LGrr),
            "LSUE" => Ok(LongitudinalFamily::LSue),
            "LOUE" => Ok(LongitudinalFamily::LOue),
            "LOSUE" => Ok(LongitudinalFamily::LOsue),
            "LSOUE" => Ok(LongitudinalFamily::LSoue),
            _ => Err(format!("unknown longitudinal protocol `{s}`")),
        }
    }
}

/// Longitudinal budget: `eps_inf` bounds infinitely many reports, `eps_1`
/// bounds a single report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPair {
    pub eps_inf: f64,
    pub eps_1: f64,
}

impl BudgetPair {
    pub fn new(eps_inf: f64, eps_1: f64) -> Result<Self> {
        check_epsilon(eps_inf)?;
        check_epsilon(eps_1)?;
        if eps_1 >= eps_inf {
            return Err(LdpError::InvalidBudget { eps_inf, eps_1 });
        }
        Ok(Self { eps_inf, eps_1 })
    }

    /// `eps_1 = ratio * eps_inf`.
    pub fn from_ratio(eps_inf: f64, ratio: f64) -> Result<Self> {
        Self::new(eps_inf, ratio * eps_inf)
    }
}

/// The four channel probabilities of a two-round protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalParams {
    pub family: LongitudinalFamily,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    /// Domain size. Enters the probabilities only for L-GRR.
    pub k: usize,
    /// The budget the parameters were solved for; `None` when the
    /// probabilities were supplied directly.
    pub budget: Option<BudgetPair>,
}

impl LongitudinalParams {
    /// Parameters with explicit probabilities (e.g. a noiseless second round
    /// `p2 = 1, q2 = 0`). Family-specific structure is not enforced beyond
    /// GRR rows summing to one.
    pub fn from_probabilities(
        family: LongitudinalFamily,
        p1: f64,
        q1: f64,
        p2: f64,
        q2: f64,
        k: usize,
    ) -> Result<Self> {
        let round1 = RoundParams::from_probabilities(family.round1(), p1, q1, k)?;
        let round2 = RoundParams::from_probabilities(family.round2(), p2, q2, k)?;
        Ok(Self {
            family,
            p1: round1.p,
            q1: round1.q,
            p2: round2.p,
            q2: round2.q,
            k,
            budget: None,
        })
    }

    pub fn round1(&self) -> RoundParams {
        RoundParams {
            family: self.family.round1(),
            p: self.p1,
            q: self.q1,
            k: self.k,
            eps: channel_epsilon(self.family.payload_kind(), self.p1, self.q1),
        }
    }

    pub fn round2(&self) -> RoundParams {
        RoundParams {
            family: self.family.round2(),
            p: self.p2,
            q: self.q2,
            k: self.k,
            eps: channel_epsilon(self.family.payload_kind(), self.p2, self.q2),
        }
    }

    /// End-to-end `(Pr[report v | true v], Pr[report v | true v' != v])`.
    ///
    /// For unary encoding these are per-bit probabilities. For GRR the same
    /// expressions hold for every `k` because `1 - p1 = (k-1) q1`.
    pub fn composed(&self) -> (f64, f64) {
        let ps = self.p1 * self.p2 + (1.0 - self.p1) * self.q2;
        let qs = self.q1 * self.p2 + (1.0 - self.q1) * self.q2;
        (ps, qs)
    }

    /// Round-1 epsilon recomputed from `(p1, q1)`.
    pub fn eps_inf_audit(&self) -> f64 {
        self.round1().eps
    }

    /// Single-report epsilon from the family's closed-form relation.
    pub fn eps_1_audit(&self) -> Result<f64> {
        eps1_of(self.family, self.p1, self.q1, self.p2, self.q2, self.k)
    }

    pub fn payload_kind(&self) -> PayloadKind {
        self.family.payload_kind()
    }
}

/// Single-report epsilon of a two-round protocol.
///
/// L-GRR: `ln((p1 p2 + q1 q2) / (p1 q2 + q1 p2))`. Unary families:
/// `ln(ps (1 - qs) / ((1 - ps) qs))` with `ps = p1 p2 + (1 - p1) q2` and
/// `qs = q1 p2 + (1 - q1) q2`.
///
/// The L-GRR relation describes the binary probability tree; for `k > 2`
/// the true composed channel leaks strictly less than the value returned
/// here (see [`composed_channel_table`]).
pub fn eps1_of(
    family: LongitudinalFamily,
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
    _k: usize,
) -> Result<f64> {
    let (num, den) = if family.is_unary() {
        let ps = p1 * p2 + (1.0 - p1) * q2;
        let qs = q1 * p2 + (1.0 - q1) * q2;
        (ps * (1.0 - qs), (1.0 - ps) * qs)
    } else {
        (p1 * p2 + q1 * q2, p1 * q2 + q1 * p2)
    };
    if !(num > 0.0 && den > 0.0) {
        return Err(LdpError::DegenerateChannel("zero term in the eps_1 ratio"));
    }
    Ok((num / den).ln())
}

/// Round-2 parameters and the parameters for all five protocols.
///
/// L-GRR and L-OSUE use closed forms. L-SUE is rearranged analytically: with
/// both rounds symmetric the end-to-end channel is again symmetric, so `ps`
/// equals the SUE probability at `eps_1`. L-OUE and L-SOUE fix `p2 = 1/2` and
/// bisect `q2` on `(0, 1/2)`, where the single-report epsilon is strictly
/// decreasing in `q2`.
pub fn solve_params(
    family: LongitudinalFamily,
    budget: BudgetPair,
    k: usize,
) -> Result<LongitudinalParams> {
    check_domain(k)?;
    let BudgetPair { eps_inf, eps_1 } = budget;
    let (p1, q1) = canonical_pq(family.round1(), eps_inf, k);
    let infeasible = || LdpError::InfeasibleBudget {
        family: family.to_string(),
        eps_inf,
        eps_1,
        k,
    };

    let (p2, q2) = match family {
        LongitudinalFamily::LGrr => {
            let e1 = eps_1.exp();
            let e_inf = eps_inf.exp();
            let km1 = k as f64 - 1.0;
            let both = (eps_1 + eps_inf).exp_m1();
            let p2 = both / (km1 * (e_inf - e1) + both);
            (p2, (1.0 - p2) / km1)
        }
        LongitudinalFamily::LOsue => {
            let e1 = eps_1.exp();
            let e_inf = eps_inf.exp();
            let both = (eps_1 + eps_inf).exp_m1();
            let p2 = both / (both + e_inf - e1);
            (p2, 1.0 - p2)
        }
        LongitudinalFamily::LSue => {
            let half = (eps_1 / 2.0).exp();
            let ps = half / (half + 1.0);
            let p2 = (ps - (1.0 - p1)) / (2.0 * p1 - 1.0);
            (p2, 1.0 - p2)
        }
        LongitudinalFamily::LOue | LongitudinalFamily::LSoue => {
            let q2 = solve_half_round2(p1, q1, eps_1).ok_or_else(infeasible)?;
            (0.5, q2)
        }
    };

    let inside = |x: f64| x > 0.0 && x < 1.0;
    if !(inside(p2) && inside(q2) && p2 > q2) {
        return Err(infeasible());
    }
    let params = LongitudinalParams {
        family,
        p1,
        q1,
        p2,
        q2,
        k,
        budget: Some(budget),
    };
    let residual = (params.eps_1_audit()? - eps_1).abs();
    if residual > 1e-10 {
        return Err(infeasible());
    }
    Ok(params)
}

/// Finds `q2` in `(0, 1/2)` with `p2 = 1/2` hitting `eps_1`, if one exists.
fn solve_half_round2(p1: f64, q1: f64, eps_1: f64) -> Option<f64> {
    let eps_at = |q2: f64| {
        let ps = p1 * 0.5 + (1.0 - p1) * q2;
        let qs = q1 * 0.5 + (1.0 - q1) * q2;
        ((ps * (1.0 - qs)) / ((1.0 - ps) * qs)).ln()
    };
    // Supremum reached as q2 -> 0; the root must lie strictly inside.
    if eps_at(0.0) <= eps_1 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = eps_at(mid) - eps_1;
        if r.abs() < SOLVER_RESIDUAL * 1e-3 {
            return Some(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid > 0.0 && (eps_at(mid) - eps_1).abs() < SOLVER_RESIDUAL).then_some(mid)
}

/// A client's permanent round-1 output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoState {
    params: LongitudinalParams,
    memoized: CategoricalReport,
}

impl MemoState {
    pub fn params(&self) -> &LongitudinalParams {
        &self.params
    }

    pub fn family(&self) -> LongitudinalFamily {
        self.params.family
    }

    /// The memoized value `B'`.
    pub fn memoized(&self) -> &CategoricalReport {
        &self.memoized
    }

    /// A fresh round-2 sanitization of the memoized value.
    pub fn report<R: Rng + ?Sized>(&self, rng: &mut R) -> CategoricalReport {
        let p = &self.params;
        match &self.memoized {
            CategoricalReport::Index(v) => {
                CategoricalReport::Index(grr_perturb(*v, p.p2, p.k, rng))
            }
            CategoricalReport::Bits(bits) => {
                CategoricalReport::Bits(ue_perturb_bits(bits, p.p2, p.q2, rng))
            }
        }
    }
}

/// Applies the round-1 channel once and memoizes the result.
pub fn memoize<R: Rng + ?Sized>(
    value: usize,
    params: &LongitudinalParams,
    rng: &mut R,
) -> Result<MemoState> {
    if value >= params.k {
        return Err(LdpError::ValueOutOfDomain { value, k: params.k });
    }
    let memoized = match params.payload_kind() {
        PayloadKind::Index => {
            CategoricalReport::Index(grr_perturb(value, params.p1, params.k, rng))
        }
        PayloadKind::Bits => CategoricalReport::Bits(ue_perturb_bits(
            &one_hot(value, params.k),
            params.p1,
            params.q1,
            rng,
        )),
    };
    Ok(MemoState {
        params: *params,
        memoized,
    })
}

/// Produces one report `B''` from a memoized state.
pub fn report<R: Rng + ?Sized>(state: &MemoState, rng: &mut R) -> CategoricalReport {
    state.report(rng)
}

fn check_channel(params: &LongitudinalParams) -> Result<()> {
    if params.p1 == params.q1 {
        return Err(LdpError::DegenerateChannel("p1 = q1"));
    }
    if params.p2 == params.q2 {
        return Err(LdpError::DegenerateChannel("p2 = q2"));
    }
    Ok(())
}

/// Unbiased two-round estimates
/// `(N_i - n q1 (p2 - q2) - n q2) / (n (p1 - q1)(p2 - q2))`.
pub fn estimate_longitudinal(
    counts: &[u64],
    n: u64,
    params: &LongitudinalParams,
) -> Result<Vec<f64>> {
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    estimate_longitudinal_real(&counts, n as f64, params)
}

/// [`estimate_longitudinal`] over real-valued counts, e.g. expected counts.
pub fn estimate_longitudinal_real(
    counts: &[f64],
    n: f64,
    params: &LongitudinalParams,
) -> Result<Vec<f64>> {
    check_channel(params)?;
    if n.is_nan() || n <= 0.0 {
        return Err(LdpError::EmptyCollection);
    }
    let LongitudinalParams { p1, q1, p2, q2, .. } = *params;
    let offset = n * q1 * (p2 - q2) + n * q2;
    let scale = n * (p1 - q1) * (p2 - q2);
    Ok(counts.iter().map(|&c| (c - offset) / scale).collect())
}

/// Probability that one client's report counts toward a value of true
/// frequency `f`: `f (p1 - q1)(p2 - q2) + p2 q1 + q2 (1 - q1)`.
pub fn report_probability(params: &LongitudinalParams, f: f64) -> f64 {
    let LongitudinalParams { p1, q1, p2, q2, .. } = *params;
    f * (p1 - q1) * (p2 - q2) + p2 * q1 + q2 * (1.0 - q1)
}

/// Variance of the two-round estimate for a value of true frequency `f`,
/// `gamma (1 - gamma) / (n (p1 - q1)^2 (p2 - q2)^2)`.
pub fn variance_longitudinal(params: &LongitudinalParams, f: f64, n: f64) -> Result<f64> {
    check_channel(params)?;
    if !(0.0..=1.0).contains(&f) {
        return Err(LdpError::ShapeMismatch(format!(
            "frequency {f} outside [0, 1]"
        )));
    }
    if n.is_nan() || n <= 0.0 {
        return Err(LdpError::EmptyCollection);
    }
    let gamma = report_probability(params, f);
    let LongitudinalParams { p1, q1, p2, q2, .. } = *params;
    Ok(gamma * (1.0 - gamma) / (n * (p1 - q1).powi(2) * (p2 - q2).powi(2)))
}

/// The approximate variance: [`variance_longitudinal`] at `f = 0`.
pub fn approx_variance_longitudinal(params: &LongitudinalParams, n: f64) -> Result<f64> {
    variance_longitudinal(params, 0.0, n)
}

/// Leakage after `t` reports from one memoized value:
/// `ln((e^(eps_inf + t eps_1) + 1) / (e^eps_inf + e^(t eps_1)))`.
///
/// With `lo = min(eps_inf, t eps_1)` and `hi` the other one this equals
/// `lo - ln(1 + (1 - e^-2lo) / (e^(hi-lo) + e^-2lo))`. Every operation is
/// monotone in `hi`, so the float result never decreases as `t` grows and
/// saturates at exactly `eps_inf` once `e^(hi-lo)` overflows.
pub fn privacy_after(budget: &BudgetPair, t: u64) -> f64 {
    let b = t as f64 * budget.eps_1;
    let (lo, hi) = if budget.eps_inf <= b {
        (budget.eps_inf, b)
    } else {
        (b, budget.eps_inf)
    };
    let shrink = -(-2.0 * lo).exp_m1() / ((hi - lo).exp() + (-2.0 * lo).exp());
    lo - shrink.ln_1p()
}

/// Matrix product of two channels: `out[v][y] = sum_m first[v][m] * second[m][y]`.
pub fn compose_channels(first: &[Vec<f64>], second: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let width = second.first().map_or(0, Vec::len);
    first
        .iter()
        .map(|row| {
            let mut out = vec![0.0; width];
            for (m, &pm) in row.iter().enumerate() {
                if pm == 0.0 {
                    continue;
                }
                for (o, &py) in out.iter_mut().zip(&second[m]) {
                    *o += pm * py;
                }
            }
            out
        })
        .collect()
}

/// Brute-force end-to-end channel of a two-round protocol.
///
/// L-GRR: the `k x k` product of both GRR matrices. Unary families: each bit
/// goes through the product of the two 2x2 bit channels, and the result is
/// laid out as the reduced pair table of [`crate::oracle::ue_pair_channel`].
pub fn composed_channel_table(params: &LongitudinalParams) -> Vec<Vec<f64>> {
    let LongitudinalParams {
        p1, q1, p2, q2, k, ..
    } = *params;
    match params.payload_kind() {
        PayloadKind::Index => compose_channels(&grr_channel(p1, q1, k), &grr_channel(p2, q2, k)),
        PayloadKind::Bits => {
            // Rows: bit value 0, 1; columns: output bit 0, 1.
            let bit1 = vec![vec![1.0 - q1, q1], vec![1.0 - p1, p1]];
            let bit2 = vec![vec![1.0 - q2, q2], vec![1.0 - p2, p2]];
            let bit = compose_channels(&bit1, &bit2);
            ue_pair_channel(bit[1][1], bit[0][1])
        }
    }
}

/// Brute-force round-1 channel (full GRR matrix or reduced UE pair table).
pub fn round1_channel_table(params: &LongitudinalParams) -> Vec<Vec<f64>> {
    crate::oracle::channel_table(&params.round1())
}
