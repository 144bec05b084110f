//! Attribute domains and the report payloads exchanged between clients and
//! the aggregator.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};

/// One categorical attribute: a name and its number of distinct values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub k: usize,
}

/// The ordered attribute list `A_1..A_d` with per-attribute domain sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    attributes: Vec<Attribute>,
}

impl DomainSpec {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = HashSet::new();
        for attr in &attributes {
            if attr.k < 2 {
                return Err(LdpError::DomainTooSmall(attr.k));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(LdpError::DuplicateAttribute(attr.name.clone()));
            }
        }
        Ok(Self { attributes })
    }

    /// Builds a domain with generated names `A1..Ad`.
    pub fn from_sizes(ks: &[usize]) -> Result<Self> {
        Self::new(
            ks.iter()
                .enumerate()
                .map(|(j, &k)| Attribute {
                    name: format!("A{}", j + 1),
                    k,
                })
                .collect(),
        )
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    /// Number of attributes `d`.
    pub fn dimension(&self) -> usize {
        self.attributes.len()
    }

    pub fn k(&self, attr: usize) -> Result<usize> {
        self.attributes
            .get(attr)
            .map(|a| a.k)
            .ok_or(LdpError::UnknownAttribute(attr))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(|a| a.k).collect()
    }

    /// Checks that `values` is a tuple of in-domain category indices.
    pub fn check_tuple(&self, values: &[usize]) -> Result<()> {
        if values.len() != self.dimension() {
            return Err(LdpError::DimensionMismatch {
                expected: self.dimension(),
                got: values.len(),
            });
        }
        for (&value, attr) in values.iter().zip(&self.attributes) {
            if value >= attr.k {
                return Err(LdpError::ValueOutOfDomain { value, k: attr.k });
            }
        }
        Ok(())
    }
}

/// How a payload is represented on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PayloadKind {
    /// A single category index (GRR-style direct encoding).
    Index,
    /// A bit vector of length k (unary encoding).
    Bits,
}

/// A sanitized report: either a category index or a unary-encoded bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CategoricalReport {
    Index(usize),
    Bits(Vec<bool>),
}

impl CategoricalReport {
    pub fn kind(&self) -> PayloadKind {
        match self {
            CategoricalReport::Index(_) => PayloadKind::Index,
            CategoricalReport::Bits(_) => PayloadKind::Bits,
        }
    }

    /// Checks the payload against a domain of size `k`.
    pub fn check_shape(&self, k: usize) -> Result<()> {
        match self {
            CategoricalReport::Index(v) if *v >= k => {
                Err(LdpError::ValueOutOfDomain { value: *v, k })
            }
            CategoricalReport::Bits(bits) if bits.len() != k => Err(LdpError::ShapeMismatch(
                format!("bit payload has length {}, domain has k = {k}", bits.len()),
            )),
            _ => Ok(()),
        }
    }

    /// Parses the wire form: a decimal index or a `0`/`1` string.
    pub fn parse(s: &str, kind: PayloadKind) -> Result<Self> {
        match kind {
            PayloadKind::Index => s
                .parse::<usize>()
                .map(CategoricalReport::Index)
                .map_err(|_| LdpError::MalformedReport(format!("bad index payload `{s}`"))),
            PayloadKind::Bits => s
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(LdpError::MalformedReport(format!("bad bit payload `{s}`"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(CategoricalReport::Bits),
        }
    }
}

impl fmt::Display for CategoricalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoricalReport::Index(v) => write!(f, "{v}"),
            CategoricalReport::Bits(bits) => {
                for &b in bits {
                    f.write_str(if b { "1" } else { "0" })?;
                }
                Ok(())
            }
        }
    }
}
