//! Frequency estimation under local differential privacy for categorical
//! data collected repeatedly from the same clients.
//!
//! The crate provides the single-round frequency oracles (GRR, SUE, OUE),
//! two-round memoization protocols built from them, a multidimensional
//! client that reports one sampled attribute with an adaptively chosen
//! protocol, and a server-side aggregator.

pub mod aggregator;
pub mod domain;
pub mod error;
pub mod longitudinal;
pub mod multidim;
pub mod oracle;
pub mod stream;

pub use aggregator::{Aggregator, AttributeProtocol, CountMatrix, EstimateTable};
pub use domain::{Attribute, CategoricalReport, DomainSpec, PayloadKind};
pub use error::{LdpError, Result};
pub use longitudinal::{BudgetPair, LongitudinalFamily, LongitudinalParams, MemoState};
pub use multidim::{ClientState, TimedReport};
pub use oracle::{OracleFamily, RoundParams};
pub use stream::StreamScope;
