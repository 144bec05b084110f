//! Single-round frequency oracles: generalized randomized response (GRR) and
//! the two unary-encoding variants, symmetric (SUE, basic one-time RAPPOR)
//! and optimized (OUE).
//!
//! Each oracle is described by a [`RoundParams`] pair `(p, q)`: the
//! probability of reporting the true value (or of keeping a one bit) and the
//! probability of reporting a given other value (or of raising a zero bit).
//! Estimates are the raw unbiased values `(N_i - n q) / (n (p - q))` and are
//! never clipped here.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalReport, PayloadKind};
use crate::error::{LdpError, Result};

/// Row-normalization tolerance accepted by [`ldp_audit`].
pub const CHANNEL_ROW_TOLERANCE: f64 = 1e-9;

/// Largest domain for which [`ue_channel`] materializes all `2^k` outputs.
pub const MAX_FULL_UE_CHANNEL_K: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleFamily {
    #[serde(rename = "GRR")]
    Grr,
    #[serde(rename = "SUE")]
    Sue,
    #[serde(rename = "OUE")]
    Oue,
}

impl OracleFamily {
    pub const ALL: [OracleFamily; 3] = [OracleFamily::Grr, OracleFamily::Sue, OracleFamily::Oue];

    pub fn is_unary(self) -> bool {
        !matches!(self, OracleFamily::Grr)
    }

    pub fn payload_kind(self) -> PayloadKind {
        if self.is_unary() {
            PayloadKind::Bits
        } else {
            PayloadKind::Index
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OracleFamily::Grr => "GRR",
            OracleFamily::Sue => "SUE",
            OracleFamily::Oue => "OUE",
        }
    }
}

impl fmt::Display for OracleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GRR" => Ok(OracleFamily::Grr),
            "SUE" => Ok(OracleFamily::Sue),
            "OUE" => Ok(OracleFamily::Oue),
            other => Err(format!("unknown oracle family `{other}`")),
        }
    }
}

/// One perturbation channel.
///
/// `k` is the domain size: for GRR it enters `p` and `q`, for the unary
/// families it is only the length of the encoded bit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundParams {
    pub family: OracleFamily,
    pub p: f64,
    pub q: f64,
    pub k: usize,
    /// The epsilon this channel satisfies; `+inf` for a noiseless channel.
    pub eps: f64,
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(LdpError::NonPositiveEpsilon(eps))
    }
}

pub(crate) fn check_domain(k: usize) -> Result<()> {
    if k < 2 {
        Err(LdpError::DomainTooSmall(k))
    } else {
        Ok(())
    }
}

/// Canonical `(p, q)` of a family at budget `eps` over `k` values.
pub(crate) fn canonical_pq(family: OracleFamily, eps: f64, k: usize) -> (f64, f64) {
    match family {
        OracleFamily::Grr => {
            let e = eps.exp();
            let denom = e + k as f64 - 1.0;
            (e / denom, 1.0 / denom)
        }
        OracleFamily::Sue => {
            let e = (eps / 2.0).exp();
            (e / (e + 1.0), 1.0 / (e + 1.0))
        }
        OracleFamily::Oue => (0.5, 1.0 / (eps.exp() + 1.0)),
    }
}

/// Epsilon guaranteed by a `(p, q)` channel of the given shape: `ln(p/q)` for
/// direct encoding and `ln(p(1-q) / ((1-p)q))` for unary encoding.
pub fn channel_epsilon(kind: PayloadKind, p: f64, q: f64) -> f64 {
    match kind {
        PayloadKind::Index => (p / q).ln(),
        PayloadKind::Bits => ((p * (1.0 - q)) / ((1.0 - p) * q)).ln(),
    }
}

impl RoundParams {
    /// The family's canonical parameters at budget `eps`.
    pub fn new(family: OracleFamily, eps: f64, k: usize) -> Result<Self> {
        check_epsilon(eps)?;
        check_domain(k)?;
        let (p, q) = canonical_pq(family, eps, k);
        Ok(Self {
            family,
            p,
            q,
            k,
            eps,
        })
    }

    /// A channel with explicit probabilities, e.g. the noiseless `p = 1, q = 0`.
    pub fn from_probabilities(family: OracleFamily, p: f64, q: f64, k: usize) -> Result<Self> {
        check_domain(k)?;
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(LdpError::InvalidProbabilities {
                p,
                q,
                reason: "outside [0, 1]",
            });
        }
        if q >= p {
            return Err(LdpError::InvalidProbabilities {
                p,
                q,
                reason: "need q < p",
            });
        }
        if family == OracleFamily::Grr && (p + (k as f64 - 1.0) * q - 1.0).abs() > 1e-12 {
            return Err(LdpError::InvalidProbabilities {
                p,
                q,
                reason: "GRR rows must sum to one",
            });
        }
        let eps = channel_epsilon(family.payload_kind(), p, q);
        Ok(Self {
            family,
            p,
            q,
            k,
            eps,
        })
    }

    pub fn payload_kind(&self) -> PayloadKind {
        self.family.payload_kind()
    }

    /// Epsilon recomputed from `(p, q)`.
    pub fn audited_epsilon(&self) -> f64 {
        channel_epsilon(self.payload_kind(), self.p, self.q)
    }
}

/// Canonical parameters for `family` at budget `eps`.
pub fn make_params(family: OracleFamily, eps: f64, k: usize) -> Result<RoundParams> {
    RoundParams::new(family, eps, k)
}

/// Keeps `value` with probability `p`, otherwise moves to one of the other
/// `k - 1` values uniformly.
pub(crate) fn grr_perturb<R: Rng + ?Sized>(value: usize, p: f64, k: usize, rng: &mut R) -> usize {
    if rng.gen_bool(p) {
        value
    } else {
        let other = rng.gen_range(0..k - 1);
        if other >= value {
            other + 1
        } else {
            other
        }
    }
}

/// Independently keeps each one bit with probability `p` and raises each zero
/// bit with probability `q`.
pub(crate) fn ue_perturb_bits<R: Rng + ?Sized>(
    bits: &[bool],
    p: f64,
    q: f64,
    rng: &mut R,
) -> Vec<bool> {
    bits.iter()
        .map(|&b| rng.gen_bool(if b { p } else { q }))
        .collect()
}

pub(crate) fn one_hot(value: usize, k: usize) -> Vec<bool> {
    let mut bits = vec![false; k];
    bits[value] = true;
    bits
}

/// Sanitizes one category index with the channel `params`.
pub fn perturb<R: Rng + ?Sized>(
    value: usize,
    params: &RoundParams,
    rng: &mut R,
) -> Result<CategoricalReport> {
    if value >= params.k {
        return Err(LdpError::ValueOutOfDomain { value, k: params.k });
    }
    Ok(match params.payload_kind() {
        PayloadKind::Index => CategoricalReport::Index(grr_perturb(value, params.p, params.k, rng)),
        PayloadKind::Bits => CategoricalReport::Bits(ue_perturb_bits(
            &one_hot(value, params.k),
            params.p,
            params.q,
            rng,
        )),
    })
}

/// Unbiased estimates `(N_i - n q) / (n (p - q))` for an arbitrary `(p, q)`.
pub fn estimate_with(counts: &[u64], n: u64, p: f64, q: f64) -> Result<Vec<f64>> {
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    estimate_real(&counts, n as f64, p, q)
}

/// [`estimate_with`] over real-valued counts, e.g. expected counts.
pub fn estimate_real(counts: &[f64], n: f64, p: f64, q: f64) -> Result<Vec<f64>> {
    if n.is_nan() || n <= 0.0 {
        return Err(LdpError::EmptyCollection);
    }
    if p == q {
        return Err(LdpError::DegenerateChannel("p = q"));
    }
    Ok(counts
        .iter()
        .map(|&c| (c - n * q) / (n * (p - q)))
        .collect())
}

/// Frequency estimates from per-value report counts (one-bit counts for UE).
pub fn estimate(counts: &[u64], n: u64, params: &RoundParams) -> Result<Vec<f64>> {
    estimate_with(counts, n, params.p, params.q)
}

/// Approximate variance `q(1-q) / (n (p-q)^2)` of a single-round estimate.
pub fn approx_variance(p: f64, q: f64, n: f64) -> f64 {
    q * (1.0 - q) / (n * (p - q).powi(2))
}

/// Closed-form approximate variance of `family` at budget `eps` with `n`
/// reports (`n` may be fractional, e.g. an expected per-attribute count).
pub fn theoretical_variance(family: OracleFamily, eps: f64, k: usize, n: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if family == OracleFamily::Grr {
        check_domain(k)?;
    }
    if n.is_nan() || n <= 0.0 {
        return Err(LdpError::EmptyCollection);
    }
    Ok(match family {
        OracleFamily::Grr => (eps.exp() + k as f64 - 2.0) / (n * eps.exp_m1().powi(2)),
        OracleFamily::Sue => (eps / 2.0).exp() / (n * (eps / 2.0).exp_m1().powi(2)),
        OracleFamily::Oue => 4.0 * eps.exp() / (n * eps.exp_m1().powi(2)),
    })
}

/// Largest `ln(Pr[y | v1] / Pr[y | v2])` over outputs `y` and input pairs.
///
/// `channel[v][y]` is `Pr[y | v]`. Outputs impossible under every input are
/// skipped; an output possible under one input but not another gives `+inf`.
pub fn ldp_audit(channel: &[Vec<f64>]) -> Result<f64> {
    let width = channel.first().map_or(0, Vec::len);
    for (row, probs) in channel.iter().enumerate() {
        let sum: f64 = probs.iter().sum();
        if probs.len() != width
            || (sum - 1.0).abs() > CHANNEL_ROW_TOLERANCE
            || probs.iter().any(|&x| !(0.0..=1.0).contains(&x))
        {
            return Err(LdpError::MalformedChannel { row, sum });
        }
    }
    let mut worst = 0.0f64;
    for y in 0..width {
        let (lo, hi) = channel
            .iter()
            .map(|row| row[y])
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        if hi == 0.0 {
            continue;
        }
        if lo == 0.0 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max((hi / lo).ln());
    }
    Ok(worst)
}

/// The `k x k` GRR channel.
pub fn grr_channel(p: f64, q: f64, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|v| (0..k).map(|y| if y == v { p } else { q }).collect())
        .collect()
}

/// The full `k x 2^k` unary-encoding channel. Output `y` is read as a bit
/// mask with bit `i` standing for position `i`.
pub fn ue_channel(p: f64, q: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    if k > MAX_FULL_UE_CHANNEL_K {
        return Err(LdpError::ShapeMismatch(format!(
            "full UE channel limited to k <= {MAX_FULL_UE_CHANNEL_K}, got {k}"
        )));
    }
    Ok((0..k)
        .map(|v| {
            (0..1usize << k)
                .map(|mask| {
                    (0..k)
                        .map(|i| {
                            let prob_one = if i == v { p } else { q };
                            if mask >> i & 1 == 1 {
                                prob_one
                            } else {
                                1.0 - prob_one
                            }
                        })
                        .product()
                })
                .collect()
        })
        .collect())
}

/// The unary-encoding channel restricted to two inputs and the two bit
/// positions where their encodings differ (2 inputs x 4 outputs).
///
/// All other positions are identically distributed under both inputs and
/// cancel from every likelihood ratio, so auditing this table gives the same
/// value as auditing the full channel for any `k >= 2`.
pub fn ue_pair_channel(p: f64, q: f64) -> Vec<Vec<f64>> {
    let row = |first: f64, second: f64| {
        let mut out = Vec::with_capacity(4);
        for b0 in [false, true] {
            for b1 in [false, true] {
                let a = if b0 { first } else { 1.0 - first };
                let b = if b1 { second } else { 1.0 - second };
                out.push(a * b);
            }
        }
        out
    };
    vec![row(p, q), row(q, p)]
}

/// Audit table for a single-round channel: the full GRR matrix, or the
/// reduced pair table for unary encoding.
pub fn channel_table(params: &RoundParams) -> Vec<Vec<f64>> {
    match params.payload_kind() {
        PayloadKind::Index => grr_channel(params.p, params.q, params.k),
        PayloadKind::Bits => ue_pair_channel(params.p, params.q),
    }
}
