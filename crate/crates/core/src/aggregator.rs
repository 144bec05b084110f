//! Server side: report counting and per-round frequency estimation.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalReport, DomainSpec, PayloadKind};
use crate::error::{LdpError, Result};
use crate::longitudinal::{estimate_longitudinal, LongitudinalParams};
use crate::multidim::TimedReport;
use crate::oracle::{estimate, RoundParams};

/// The channel an attribute's reports went through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttributeProtocol {
    Single(RoundParams),
    Longitudinal(LongitudinalParams),
}

impl AttributeProtocol {
    pub fn k(&self) -> usize {
        match self {
            AttributeProtocol::Single(p) => p.k,
            AttributeProtocol::Longitudinal(p) => p.k,
        }
    }

    pub fn payload_kind(&self) -> PayloadKind {
        match self {
            AttributeProtocol::Single(p) => p.payload_kind(),
            AttributeProtocol::Longitudinal(p) => p.payload_kind(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AttributeProtocol::Single(p) => p.family.to_string(),
            AttributeProtocol::Longitudinal(p) => p.family.to_string(),
        }
    }

    pub fn estimate(&self, counts: &[u64], n: u64) -> Result<Vec<f64>> {
        match self {
            AttributeProtocol::Single(p) => estimate(counts, n, p),
            AttributeProtocol::Longitudinal(p) => estimate_longitudinal(counts, n, p),
        }
    }
}

impl From<RoundParams> for AttributeProtocol {
    fn from(p: RoundParams) -> Self {
        AttributeProtocol::Single(p)
    }
}

impl From<LongitudinalParams> for AttributeProtocol {
    fn from(p: LongitudinalParams) -> Self {
        AttributeProtocol::Longitudinal(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Cell {
    kind: PayloadKind,
    n: u64,
    counts: Vec<u64>,
}

/// Report totals and per-value counts for every (round, attribute) pair.
///
/// For index payloads the counts sum to `n`; for bit payloads each count is
/// the number of reports with that bit set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    sizes: Vec<usize>,
    cells: BTreeMap<(u32, usize), Cell>,
}

impl CountMatrix {
    pub fn new(domain: &DomainSpec) -> Self {
        Self::with_sizes(domain.sizes())
    }

    pub fn with_sizes(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            cells: BTreeMap::new(),
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn ingest(&mut self, report: &TimedReport) -> Result<()> {
        self.ingest_payload(report.t, report.attr, &report.payload)
    }

    pub fn ingest_payload(
        &mut self,
        t: u32,
        attr: usize,
        payload: &CategoricalReport,
    ) -> Result<()> {
        let k = *self
            .sizes
            .get(attr)
            .ok_or(LdpError::UnknownAttribute(attr))?;
        payload.check_shape(k)?;
        let cell = self.cells.entry((t, attr)).or_insert_with(|| Cell {
            kind: payload.kind(),
            n: 0,
            counts: vec![0; k],
        });
        if cell.kind != payload.kind() {
            return Err(LdpError::ShapeMismatch(format!(
                "attribute {attr} mixes index and bit payloads in round {t}"
            )));
        }
        cell.n += 1;
        match payload {
            CategoricalReport::Index(v) => cell.counts[*v] += 1,
            CategoricalReport::Bits(bits) => {
                for (c, &b) in cell.counts.iter_mut().zip(bits) {
                    *c += u64::from(b);
                }
            }
        }
        Ok(())
    }

    /// Adds another partial count into this one.
    pub fn merge(&mut self, other: &CountMatrix) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(LdpError::ShapeMismatch(
                "count matrices cover different domains".into(),
            ));
        }
        for (key, theirs) in &other.cells {
            match self.cells.get_mut(key) {
                None => {
                    self.cells.insert(*key, theirs.clone());
                }
                Some(ours) => {
                    if ours.kind != theirs.kind {
                        return Err(LdpError::ShapeMismatch(format!(
                            "attribute {} mixes index and bit payloads in round {}",
                            key.1, key.0
                        )));
                    }
                    ours.n += theirs.n;
                    for (a, b) in ours.counts.iter_mut().zip(&theirs.counts) {
                        *a += b;
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of reports for `attr` in round `t`.
    pub fn n(&self, t: u32, attr: usize) -> u64 {
        self.cells.get(&(t, attr)).map_or(0, |c| c.n)
    }

    pub fn counts(&self, t: u32, attr: usize) -> Option<&[u64]> {
        self.cells.get(&(t, attr)).map(|c| c.counts.as_slice())
    }

    /// Rounds with at least one report, ascending.
    pub fn rounds(&self) -> Vec<u32> {
        let mut rounds: Vec<u32> = self.cells.keys().map(|&(t, _)| t).collect();
        rounds.dedup();
        rounds
    }
}

/// Estimates for one attribute in one round. `estimates` is `None` when
/// nobody reported the attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEstimate {
    pub attr: usize,
    pub name: String,
    pub n_reports: u64,
    pub protocol: Option<AttributeProtocol>,
    pub estimates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub t: u32,
    pub attributes: Vec<AttributeEstimate>,
}

/// Marker written in place of an estimate for attributes without reports.
pub const ABSENT: &str = "NA";

impl EstimateTable {
    /// Writes `t,attribute,value_index,value_label,estimate,n_reports` rows
    /// ordered by attribute and value. `labels[j][v]` names value `v` of
    /// attribute `j`; the index is used when no label is given.
    pub fn write_csv<W: io::Write>(
        &self,
        writer: &mut csv::Writer<W>,
        domain: &DomainSpec,
        labels: Option<&[Vec<String>]>,
    ) -> csv::Result<()> {
        for row in &self.attributes {
            let k = domain.attributes()[row.attr].k;
            for v in 0..k {
                let label = labels
                    .and_then(|l| l.get(row.attr))
                    .and_then(|l| l.get(v))
                    .cloned()
                    .unwrap_or_else(|| v.to_string());
                let estimate = match &row.estimates {
                    Some(est) => est[v].to_string(),
                    None => ABSENT.to_string(),
                };
                writer.write_record([
                    self.t.to_string(),
                    row.name.clone(),
                    v.to_string(),
                    label,
                    estimate,
                    row.n_reports.to_string(),
                ])?;
            }
        }
        Ok(())
    }

    pub fn csv_header() -> [&'static str; 6] {
        [
            "t",
            "attribute",
            "value_index",
            "value_label",
            "estimate",
            "n_reports",
        ]
    }
}

/// Collects reports and turns them into per-attribute estimates.
#[derive(Debug, Clone)]
pub struct Aggregator {
    domain: DomainSpec,
    protocols: Vec<Option<AttributeProtocol>>,
    counts: CountMatrix,
}

impl Aggregator {
    pub fn new(domain: DomainSpec) -> Self {
        let d = domain.dimension();
        let counts = CountMatrix::new(&domain);
        Self {
            domain,
            protocols: vec![None; d],
            counts,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Declares the channel used by `attr`.
    pub fn register(&mut self, attr: usize, protocol: impl Into<AttributeProtocol>) -> Result<()> {
        let protocol = protocol.into();
        let k = self.domain.k(attr)?;
        if protocol.k() != k {
            return Err(LdpError::ShapeMismatch(format!(
                "attribute {attr} has k = {k}, protocol expects k = {}",
                protocol.k()
            )));
        }
        self.protocols[attr] = Some(protocol);
        Ok(())
    }

    pub fn protocol(&self, attr: usize) -> Option<&AttributeProtocol> {
        self.protocols.get(attr).and_then(Option::as_ref)
    }

    /// Counts one report after checking it against the declared protocol.
    pub fn ingest(&mut self, report: &TimedReport) -> Result<()> {
        self.domain.k(report.attr)?;
        if let Some(protocol) = self.protocol(report.attr) {
            if protocol.payload_kind() != report.payload.kind() {
                return Err(LdpError::ShapeMismatch(format!(
                    "attribute {} expects {:?} payloads",
                    report.attr,
                    protocol.payload_kind()
                )));
            }
        }
        self.counts.ingest(report)
    }

    pub fn merge_counts(&mut self, partial: &CountMatrix) -> Result<()> {
        self.counts.merge(partial)
    }

    pub fn counts(&self) -> &CountMatrix {
        &self.counts
    }

    /// Estimates every attribute for round `t`, dividing by the number of
    /// clients that actually reported each attribute.
    pub fn estimate_all(&self, t: u32) -> Result<EstimateTable> {
        let attributes = self
            .domain
            .attributes()
            .iter()
            .enumerate()
            .map(|(j, attr)| {
                let n = self.counts.n(t, j);
                let protocol = self.protocol(j).copied();
                let estimates = match self.counts.counts(t, j) {
                    Some(counts) if n > 0 => {
                        let protocol = protocol.ok_or(LdpError::MissingParameters { attr: j })?;
                        Some(protocol.estimate(counts, n)?)
                    }
                    _ => None,
                };
                Ok(AttributeEstimate {
                    attr: j,
                    name: attr.name.clone(),
                    n_reports: n,
                    protocol,
                    estimates,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EstimateTable { t, attributes })
    }
}
