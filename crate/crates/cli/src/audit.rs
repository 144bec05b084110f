//! Brute-force privacy audit of the two-round protocols.

use std::io;

use ldp_longitudinal::longitudinal::{composed_channel_table, round1_channel_table, solve_params};
use ldp_longitudinal::oracle::ldp_audit;
use ldp_longitudinal::{BudgetPair, LdpError, LongitudinalFamily};

use crate::error::Result;
use crate::experiment::INFEASIBLE;

/// Largest domain audited with a full channel matrix.
pub const MAX_AUDIT_K: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub family: LongitudinalFamily,
    pub eps_inf: f64,
    pub eps_1: f64,
    pub k: usize,
    /// Measured epsilons of the memoization channel and of one end-to-end
    /// report, or `None` when the budget is infeasible.
    pub measured: Option<(f64, f64)>,
}

pub fn audit_grid(eps_grid: &[f64], ratios: &[f64], ks: &[usize]) -> Result<Vec<AuditRecord>> {
    let mut records = Vec::new();
    for family in LongitudinalFamily::ALL {
        for &eps_inf in eps_grid {
            for &ratio in ratios {
                let budget = BudgetPair::from_ratio(eps_inf, ratio)?;
                for &k in ks.iter().filter(|&&k| k <= MAX_AUDIT_K) {
                    let measured = match solve_params(family, budget, k) {
                        Ok(params) => Some((
                            ldp_audit(&round1_channel_table(&params))?,
                            ldp_audit(&composed_channel_table(&params))?,
                        )),
                        Err(LdpError::InfeasibleBudget { .. }) => None,
                        Err(err) => return Err(err.into()),
                    };
                    records.push(AuditRecord {
                        family,
                        eps_inf,
                        eps_1: budget.eps_1,
                        k,
                        measured,
                    });
                }
            }
        }
    }
    Ok(records)
}

pub fn write_audit_csv<W: io::Write>(out: W, records: &[AuditRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "family",
        "eps_inf",
        "eps_1",
        "k",
        "round1_eps",
        "report_eps",
    ])?;
    for r in records {
        let (round1, report) = match r.measured {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => (INFEASIBLE.to_string(), INFEASIBLE.to_string()),
        };
        w.write_record([
            r.family.to_string(),
            r.eps_inf.to_string(),
            r.eps_1.to_string(),
            r.k.to_string(),
            round1,
            report,
        ])?;
    }
    w.flush()?;
    Ok(())
}
