//! Closed-form variance tables for the single-round and two-round protocols.

use std::io;

use ldp_longitudinal::longitudinal::{approx_variance_longitudinal, solve_params};
use ldp_longitudinal::oracle::theoretical_variance;
use ldp_longitudinal::{BudgetPair, LdpError, LongitudinalFamily, OracleFamily};

use crate::error::Result;
use crate::experiment::INFEASIBLE;

pub const DEFAULT_N: f64 = 10_000.0;
pub const DEFAULT_EPS_INF: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_RATIOS: [f64; 6] = [0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
pub const DEFAULT_KS: [usize; 3] = [2, 32, 1024];

/// Unary families in column order.
pub const UNARY_COLUMNS: [LongitudinalFamily; 4] = LongitudinalFamily::UNARY;

/// One row of the two-round table: `None` marks an infeasible cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalRow {
    pub ratio: f64,
    pub eps_inf: f64,
    pub eps_1: f64,
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleRoundRow {
    pub eps: f64,
    pub cells: Vec<f64>,
}

pub fn longitudinal_columns(ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|k| format!("L-GRR k={k}"))
        .chain(UNARY_COLUMNS.iter().map(|f| f.to_string()))
        .collect()
}

pub fn single_round_columns(ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|k| format!("GRR k={k}"))
        .chain(["OUE".to_string(), "SUE".to_string()])
        .collect()
}

fn longitudinal_cell(
    family: LongitudinalFamily,
    budget: BudgetPair,
    k: usize,
    n: f64,
) -> ldp_longitudinal::Result<Option<f64>> {
    match solve_params(family, budget, k) {
        Ok(params) => approx_variance_longitudinal(&params, n).map(Some),
        Err(LdpError::InfeasibleBudget { .. }) => Ok(None),
        Err(err) => Err(err),
    }
}

/// Approximate variances of the two-round protocols, one row per
/// (ratio, eps_inf) with `eps_1 = ratio * eps_inf`.
pub fn longitudinal_table(
    n: f64,
    eps_grid: &[f64],
    ratios: &[f64],
    ks: &[usize],
) -> Result<Vec<LongitudinalRow>> {
    let mut rows = Vec::new();
    for &ratio in ratios {
        for &eps_inf in eps_grid {
            let budget = BudgetPair::from_ratio(eps_inf, ratio)?;
            let mut cells = Vec::new();
            for &k in ks {
                cells.push(longitudinal_cell(LongitudinalFamily::LGrr, budget, k, n)?);
            }
            for family in UNARY_COLUMNS {
                // Unary variances do not depend on k.
                cells.push(longitudinal_cell(family, budget, 2, n)?);
            }
            rows.push(LongitudinalRow {
                ratio,
                eps_inf,
                eps_1: budget.eps_1,
                cells,
            });
        }
    }
    Ok(rows)
}

/// Approximate variances of GRR (one column per k), OUE and SUE.
pub fn single_round_table(n: f64, eps_grid: &[f64], ks: &[usize]) -> Result<Vec<SingleRoundRow>> {
    eps_grid
        .iter()
        .map(|&eps| {
            let mut cells = Vec::new();
            for &k in ks {
                cells.push(theoretical_variance(OracleFamily::Grr, eps, k, n)?);
            }
            cells.push(theoretical_variance(OracleFamily::Oue, eps, 2, n)?);
            cells.push(theoretical_variance(OracleFamily::Sue, eps, 2, n)?);
            Ok(SingleRoundRow { eps, cells })
        })
        .collect()
}

fn fmt_cell(value: Option<f64>) -> String {
    value.map_or_else(|| INFEASIBLE.to_string(), |v| format!("{v:.6}"))
}

pub fn write_longitudinal_csv<W: io::Write>(
    out: W,
    rows: &[LongitudinalRow],
    ks: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "ratio".to_string(),
        "eps_inf".to_string(),
        "eps_1".to_string(),
    ];
    header.extend(longitudinal_columns(ks));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.ratio.to_string(),
            row.eps_inf.to_string(),
            format!("{:.2}", row.eps_1),
        ];
        record.extend(row.cells.iter().map(|&c| fmt_cell(c)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_single_round_csv<W: io::Write>(
    out: W,
    rows: &[SingleRoundRow],
    ks: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["eps".to_string()];
    header.extend(single_round_columns(ks));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.eps.to_string()];
        record.extend(row.cells.iter().map(|&c| fmt_cell(Some(c))));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
