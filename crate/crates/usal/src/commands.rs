//! The `generate`, `run` and `sweep` commands. Each writes only inside its
//! output directory.

use std::path::{Path, PathBuf};

use usal_core::data::generate_synthetic;

use crate::config::{DataConfig, Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::libsvm::write_libsvm_file;
use crate::meta::Metadata;
use crate::report::{self, Aggregates, CellSummary, RunSummary, DEFAULT_NOTES};
use crate::runner::{self, prepare};

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub threads: usize,
    pub overrides: Overrides,
}

/// What a command reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// One line for stdout.
    pub message: String,
    /// Any checked theorem bound failed.
    pub bound_violation: bool,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load(config: &Path, opts: &Options) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(config, opts.overrides)?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub fn generate(config: &Path, opts: &Options) -> Result<Outcome> {
    let (cfg, _) = load(config, opts)?;
    let DataConfig::Synthetic(section) = &cfg.data else {
        return Err(Error::Config("data.kind: generate needs synthetic data".into()));
    };
    let spec = runner::synthetic_spec(section);
    let data = generate_synthetic(&spec)?;
    let (mut train, mut test) = (data.train, data.test);
    if let Some(n) = &section.noise {
        train = usal_core::data::inject_label_noise(&train, n.eta, n.seed)?.0;
        if n.test {
            test = usal_core::data::inject_label_noise(&test, n.eta, n.seed.wrapping_add(1))?.0;
        }
    }
    let meta = Metadata {
        d: spec.dim,
        n: spec.n_train,
        k: spec.labels.classes().unwrap_or(2),
        rho_star: data.truth.rho_star,
        r: data.truth.r,
        theta_star_norm: data.truth.theta_star_norm,
        seed: spec.seed,
    };
    ensure_dir(&opts.out)?;
    write_libsvm_file(&opts.out.join("train.libsvm"), &train)?;
    write_libsvm_file(&opts.out.join("test.libsvm"), &test)?;
    write(&opts.out, "meta.json", &meta.to_json())?;
    let message = serde_json::json!({
        "rho_star": meta.rho_star,
        "R": meta.r,
        "theta_star_norm": meta.theta_star_norm,
    })
    .to_string();
    Ok(Outcome { message, bound_violation: false })
}

pub fn run(config: &Path, opts: &Options) -> Result<Outcome> {
    let (cfg, base) = load(config, opts)?;
    let data = prepare(&cfg, &base)?;
    let cells = runner::run_experiment(&cfg, &data, opts.threads)?;
    let budgets = if cfg.experiment.equal_budget {
        Some(runner::par_map(&cfg.experiment.seeds, opts.threads, |&s| runner::equal_budget(&cfg, &data, s))?)
    } else {
        None
    };

    ensure_dir(&opts.out)?;
    for (i, c) in cells.iter().enumerate() {
        write(&opts.out, &format!("trace_seed{}.csv", c.seed), &report::trace_csv(c))?;
        if let Some(b) = &budgets {
            write(&opts.out, &format!("budget_seed{}.csv", c.seed), &report::budget_csv(&b[i]))?;
        }
    }
    let aggregates = Aggregates::new(&cells);
    let summary = RunSummary {
        command: "run",
        config: &cfg,
        notes: DEFAULT_NOTES.to_vec(),
        cells: cells
            .iter()
            .enumerate()
            .map(|(i, c)| CellSummary::new(c, budgets.as_ref().map(|b| b[i].as_slice())))
            .collect(),
        aggregates,
        sweep: Vec::new(),
    };
    write(&opts.out, "summary.json", &report::to_json(&summary))?;

    let violations = summary.aggregates.bound_violations.unwrap_or(0);
    let last_queries: Vec<String> = cells.iter().map(|c| c.last().queries.to_string()).collect();
    let message = serde_json::json!({
        "runs": cells.len(),
        "queries": last_queries,
        "mean_test_error": summary.aggregates.test_error,
        "bound_violations": summary.aggregates.bound_violations,
    })
    .to_string();
    Ok(Outcome { message, bound_violation: violations > 0 })
}

pub fn sweep(config: &Path, opts: &Options) -> Result<Outcome> {
    let (cfg, base) = load(config, opts)?;
    let data = prepare(&cfg, &base)?;
    let (cells, aggregates) = runner::run_sweep(&cfg, &data, opts.threads)?;
    ensure_dir(&opts.out)?;
    write(&opts.out, "sweep.csv", &report::sweep_csv(&cells, &aggregates))?;
    let summary = RunSummary {
        command: "sweep",
        config: &cfg,
        notes: DEFAULT_NOTES.to_vec(),
        cells: cells.iter().map(|c| CellSummary::new(c, None)).collect(),
        aggregates: Aggregates::new(&cells),
        sweep: aggregates.iter().map(Into::into).collect(),
    };
    write(&opts.out, "summary.json", &report::to_json(&summary))?;
    let violations = summary.aggregates.bound_violations.unwrap_or(0);
    let message = serde_json::json!({
        "cells": cells.len(),
        "query_fraction": aggregates.iter().map(|a| a.query_fraction).collect::<Vec<_>>(),
    })
    .to_string();
    Ok(Outcome { message, bound_violation: violations > 0 })
}
