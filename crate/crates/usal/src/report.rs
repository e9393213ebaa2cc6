//! CSV and JSON report emission. Numbers in CSV files are printed like C's
//! `%.12g`; nothing time-dependent is written, so reruns are byte-identical.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::RunConfig;
use crate::runner::{mean_se, BudgetRow, CellResult, SweepAggregate};

/// Formats `x` with 12 significant digits in the style of `%.12g`.
pub fn fmt_g12(x: f64) -> String {
    const P: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const TRACE_HEADER: &str = "t,queries,test_error,mean_hinge,mean_sq_hinge,bound,ok";

/// One row per checkpoint. `bound` and `ok` are empty when bounds were not
/// verified.
pub fn trace_csv(cell: &CellResult) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &cell.rows {
        let (bound, ok) = match r.bound {
            Some(b) => (fmt_g12(b.bound), if b.ok { "true" } else { "false" }),
            None => (String::new(), ""),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t,
            r.queries,
            fmt_g12(r.eval.test_error),
            fmt_g12(r.eval.mean_hinge),
            fmt_g12(r.eval.mean_sq_hinge),
            bound,
            ok
        );
    }
    s
}

pub const SWEEP_HEADER: &str =
    "row,mu,seed,seeds,test_error,test_error_se,query_fraction,query_fraction_se,queries,expected_queries";

/// Cell rows (one per μ and seed) followed by one aggregate row per μ.
pub fn sweep_csv(cells: &[CellResult], aggregates: &[SweepAggregate]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for c in cells {
        let last = c.last();
        let _ = writeln!(
            s,
            "cell,{},{},1,{},,{},,{},{}",
            fmt_g12(c.mu),
            c.seed,
            fmt_g12(last.eval.test_error),
            fmt_g12(c.query_fraction()),
            last.queries,
            fmt_g12(last.expected_queries)
        );
    }
    for a in aggregates {
        let _ = writeln!(
            s,
            "aggregate,{},,{},{},{},{},{},,{}",
            fmt_g12(a.mu),
            a.seeds,
            fmt_g12(a.test_error),
            fmt_g12(a.test_error_se),
            fmt_g12(a.query_fraction),
            fmt_g12(a.query_fraction_se),
            fmt_g12(a.expected_queries)
        );
    }
    s
}

pub const BUDGET_HEADER: &str = "queries,t,uncertainty_error,vanilla_error";

pub fn budget_csv(rows: &[BudgetRow]) -> String {
    let mut s = String::from(BUDGET_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.queries,
            r.t,
            fmt_g12(r.uncertainty_error),
            fmt_g12(r.vanilla_error)
        );
    }
    s
}

/// Fraction of budget rows where uncertainty sampling is no worse.
pub fn budget_win_rate(rows: &[BudgetRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    Some(rows.iter().filter(|r| r.uncertainty_error <= r.vanilla_error).count() as f64 / rows.len() as f64)
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub mu: f64,
    pub seed: u64,
    pub gamma: f64,
    pub n: u64,
    pub queries: u64,
    pub query_fraction: f64,
    pub expected_queries: f64,
    pub test_error: f64,
    pub mean_hinge: f64,
    pub mean_sq_hinge: f64,
    pub theta_bar_norm: f64,
    pub slope: Option<f64>,
    pub bound_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_win_rate: Option<f64>,
}

impl CellSummary {
    pub fn new(c: &CellResult, budget: Option<&[BudgetRow]>) -> Self {
        let last = c.last();
        Self {
            mu: c.mu,
            seed: c.seed,
            gamma: c.gamma,
            n: c.n,
            queries: last.queries,
            query_fraction: c.query_fraction(),
            expected_queries: last.expected_queries,
            test_error: last.eval.test_error,
            mean_hinge: last.eval.mean_hinge,
            mean_sq_hinge: last.eval.mean_sq_hinge,
            theta_bar_norm: last.theta_bar_norm,
            slope: c.slope,
            bound_violations: last.bound.map(|_| c.violations),
            budget_win_rate: budget.and_then(budget_win_rate),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Aggregates {
    pub seeds: usize,
    pub mean_slope: Option<f64>,
    pub test_error: f64,
    pub test_error_se: f64,
    pub query_fraction: f64,
    pub query_fraction_se: f64,
    pub bound_violations: Option<usize>,
}

impl Aggregates {
    pub fn new(cells: &[CellResult]) -> Self {
        let slopes: Vec<f64> = cells.iter().filter_map(|c| c.slope).collect();
        let (test_error, test_error_se) = mean_se(cells.iter().map(|c| c.last().eval.test_error));
        let (query_fraction, query_fraction_se) = mean_se(cells.iter().map(|c| c.query_fraction()));
        let verified = cells.iter().all(|c| c.last().bound.is_some());
        Self {
            seeds: cells.len(),
            mean_slope: (slopes.len() == cells.len() && !slopes.is_empty())
                .then(|| slopes.iter().sum::<f64>() / slopes.len() as f64),
            test_error,
            test_error_se,
            query_fraction,
            query_fraction_se,
            bound_violations: verified.then(|| cells.iter().map(|c| c.violations).sum()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    /// Choices made by this tool rather than fixed by the method.
    pub notes: Vec<&'static str>,
    pub cells: Vec<CellSummary>,
    pub aggregates: Aggregates,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRowSummary>,
}

#[derive(Debug, Serialize)]
pub struct SweepRowSummary {
    pub mu: f64,
    pub seeds: usize,
    pub test_error: f64,
    pub test_error_se: f64,
    pub query_fraction: f64,
    pub query_fraction_se: f64,
    pub expected_queries: f64,
}

impl From<&SweepAggregate> for SweepRowSummary {
    fn from(a: &SweepAggregate) -> Self {
        Self {
            mu: a.mu,
            seeds: a.seeds,
            test_error: a.test_error,
            test_error_se: a.test_error_se,
            query_fraction: a.query_fraction,
            query_fraction_se: a.query_fraction_se,
            expected_queries: a.expected_queries,
        }
    }
}

pub const DEFAULT_NOTES: &[&str] = &[
    "checkpoint schedule and repeat seeds are experiment defaults, chosen by this tool",
    "slope is the least-squares log-log slope of mean hinge vs t over the second half of checkpoints",
];

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
