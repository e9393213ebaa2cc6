//! Experiment orchestration: data preparation, single runs, μ sweeps and
//! the equal-label-budget comparison against vanilla SGD.
//!
//! Every (μ, seed) cell owns its learner and RNG, so cells run in parallel
//! and results are collected in submission order.

use std::path::Path;

use rayon::prelude::*;

use usal_core::data::{generate_synthetic, inject_label_noise, Covariance, Dataset, LabelKind, SyntheticSpec};
use usal_core::learners::{geometric_checkpoints, DatasetOracle, StepSize};
use usal_core::metrics::{evaluate, fit_rate_second_half, verify_theorem_bound, BoundCheck, Evaluation};
use usal_core::rff::{median_pairwise_distance, RffMap};
use usal_core::{
    linalg, train_stream, BinaryLearner, Learner, LearnerConfig, MarginAssumptions, MulticlassLearner, Regime,
    SamplingConfig, SamplingMode, Task,
};

use crate::config::{
    CovarianceSpec, DataConfig, EvalTarget, GammaKeyword, GammaSpec, ProjectionSpec, RegimeKind, RunConfig,
    SamplingKind, TaskKind,
};
use crate::error::{Error, Result};
use crate::libsvm::{read_libsvm_with_dim, LabelFormat};
use crate::meta::Metadata;

/// Ground-truth constants, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub rho_star: f64,
    pub r: f64,
    pub theta_star_norm: f64,
}

/// Train/test data ready for learning.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub task: Task,
    pub truth: Option<Truth>,
    /// Injected noise level (0 for clean data).
    pub eta: f64,
    /// `max‖x‖` over both splits, `√2`-scaled for multiclass.
    pub data_radius: f64,
}

impl Prepared {
    pub fn classes(&self) -> Option<usize> {
        self.train.labels.classes()
    }
}

pub fn synthetic_spec(s: &crate::config::SyntheticSection) -> SyntheticSpec {
    SyntheticSpec {
        dim: s.dim,
        n_train: s.n_train,
        n_test: s.n_test,
        covariance: match &s.covariance {
            CovarianceSpec::Decaying => Covariance::Decaying,
            CovarianceSpec::Identity => Covariance::Identity,
            CovarianceSpec::Diagonal(v) => Covariance::Diagonal(v.clone()),
        },
        seed: s.seed.unwrap_or(0),
        margin_floor: s.margin_floor,
        labels: match s.task {
            TaskKind::Binary => LabelKind::Binary,
            TaskKind::Multiclass => LabelKind::Multiclass(s.classes),
        },
    }
}

fn radius_of(train: &Dataset, test: &Dataset) -> f64 {
    let m = train.max_norm().max(test.max_norm());
    match train.labels {
        LabelKind::Binary => m,
        LabelKind::Multiclass(_) => std::f64::consts::SQRT_2 * m,
    }
}

/// Loads or generates the data named by `cfg`. Relative LIBSVM paths are
/// resolved against `base_dir`.
pub fn prepare(cfg: &RunConfig, base_dir: &Path) -> Result<Prepared> {
    let (mut train, mut test, mut truth, mut eta) = match &cfg.data {
        DataConfig::Synthetic(s) => {
            let data = generate_synthetic(&synthetic_spec(s))?;
            let t = data.truth;
            let truth = Truth { rho_star: t.rho_star, r: t.r, theta_star_norm: t.theta_star_norm };
            let (mut train, mut test, mut eta) = (data.train, data.test, 0.0);
            if let Some(n) = &s.noise {
                train = inject_label_noise(&train, n.eta, n.seed)?.0;
                if n.test {
                    test = inject_label_noise(&test, n.eta, n.seed.wrapping_add(1))?.0;
                }
                eta = n.eta;
            }
            (train, test, Some(truth), eta)
        }
        DataConfig::Libsvm(l) => {
            let format = match l.task {
                TaskKind::Binary => LabelFormat::BinaryPm1,
                TaskKind::Multiclass => LabelFormat::Classes(l.classes),
            };
            let train_path = base_dir.join(&l.train);
            let test_path = base_dir.join(&l.test);
            let mut train = read_libsvm_with_dim(&train_path, format, l.dim)?;
            let mut test = read_libsvm_with_dim(&test_path, format, l.dim)?;
            let dim = train.dim.max(test.dim);
            for d in [&mut train, &mut test] {
                if d.dim < dim {
                    d.dim = dim;
                    d.samples.iter_mut().for_each(|s| s.features.resize(dim, 0.0));
                }
            }
            let truth = match &l.meta {
                Some(p) => {
                    let m = Metadata::read(&base_dir.join(p))?;
                    Some(Truth { rho_star: m.rho_star, r: m.r, theta_star_norm: m.theta_star_norm })
                }
                None => None,
            };
            (train, test, truth, 0.0)
        }
    };
    if let Some(eta_override) = cfg.learner.assumptions.eta {
        eta = eta_override;
    }
    if let Some(r) = &cfg.rff {
        let bandwidth = match r.bandwidth {
            Some(b) => b,
            None => median_pairwise_distance(&train.samples, r.median_sample, r.seed)?,
        };
        let map = RffMap::new(train.dim, r.features, bandwidth, r.seed)?;
        train = map.transform(&train)?;
        test = map.transform(&test)?;
        // The original constants describe the raw features only.
        truth = None;
    }
    let task = match train.labels {
        LabelKind::Binary => Task::Binary,
        LabelKind::Multiclass(_) => Task::Multiclass,
    };
    let data_radius = radius_of(&train, &test);
    Ok(Prepared { train, test, task, truth, eta, data_radius })
}

fn need(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| {
        Error::Config(format!(
            "{what} is unknown; set learner.assumptions.{what} or use data with known ground truth"
        ))
    })
}

/// Theorem constants from the overrides, falling back to the data's truth.
/// Returns `None` when `ρ⋆` or `R` is unavailable.
pub fn assumptions(cfg: &RunConfig, data: &Prepared, projection: Option<f64>) -> Option<MarginAssumptions> {
    let o = &cfg.learner.assumptions;
    let t = data.truth.as_ref();
    let rho_star = o.rho_star.or(t.map(|t| t.rho_star))?;
    let r = o.r.or(t.map(|t| t.r))?;
    Some(MarginAssumptions {
        rho_star,
        r,
        b: o.b.or(projection),
        eta: data.eta,
        theta_star_norm: o.theta_star_norm.or(t.map(|t| t.theta_star_norm)),
    })
}

fn projection(cfg: &RunConfig, data: &Prepared) -> Result<Option<f64>> {
    Ok(match cfg.learner.projection {
        None => None,
        Some(ProjectionSpec::Radius(b)) => Some(b),
        Some(ProjectionSpec::Relative { theta_star_multiple }) => {
            let norm = cfg
                .learner
                .assumptions
                .theta_star_norm
                .or(data.truth.as_ref().map(|t| t.theta_star_norm));
            Some(theta_star_multiple * need(norm, "theta_star_norm")?)
        }
    })
}

/// Builds the learner configuration for one `(mu, seed)` cell.
pub fn learner_config(cfg: &RunConfig, data: &Prepared, mu: f64, seed: u64) -> Result<LearnerConfig> {
    let l = &cfg.learner;
    let mode = match (l.sampling, data.task) {
        (SamplingKind::Always, _) => SamplingMode::Always,
        (SamplingKind::Margin, Task::Binary) => SamplingMode::BinaryMargin,
        (SamplingKind::Margin, Task::Multiclass) => SamplingMode::MulticlassTopTwo,
    };
    let proj = projection(cfg, data)?;
    let assumptions = assumptions(cfg, data, proj);
    let step = match l.gamma {
        GammaSpec::Fixed(g) => StepSize::Fixed(g),
        GammaSpec::Scaled { inverse_r2 } => {
            let r = l.assumptions.r.unwrap_or(data.data_radius);
            StepSize::Fixed(inverse_r2 / (r * r))
        }
        GammaSpec::Keyword(GammaKeyword::Derive) => {
            if assumptions.is_none() {
                let truth = data.truth.as_ref();
                need(l.assumptions.rho_star.or(truth.map(|t| t.rho_star)), "rho_star")?;
                need(l.assumptions.r.or(truth.map(|t| t.r)), "R")?;
            }
            StepSize::Derive
        }
    };
    let regime = match l.regime {
        RegimeKind::Separable => Regime::Separable,
        RegimeKind::NoisyLow => Regime::NoisyLow,
        RegimeKind::NoisyHigh => Regime::NoisyHigh,
    };
    let out = LearnerConfig {
        step,
        sampling: SamplingConfig::new(mu, mode, seed),
        assumptions,
        projection: proj,
        regime,
        step_multiplier: l.step_multiplier,
    };
    if step == StepSize::Derive && regime != Regime::Separable {
        // noisy step sizes also need ‖θ⋆‖
        need(out.assumptions.and_then(|a| a.theta_star_norm), "theta_star_norm")?;
    }
    out.validate(data.task)?;
    Ok(out)
}

fn new_learner(data: &Prepared, lc: &LearnerConfig) -> Result<Box<dyn Learner + Send>> {
    Ok(match data.task {
        Task::Binary => Box::new(BinaryLearner::new(data.train.dim, lc)?),
        Task::Multiclass => Box::new(MulticlassLearner::new(data.classes().unwrap_or(2), data.train.dim, lc)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub queries: u64,
    pub expected_queries: f64,
    pub eval: Evaluation,
    pub theta_bar_norm: f64,
    pub bound: Option<BoundCheck>,
}

/// Outcome of one (μ, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub mu: f64,
    pub seed: u64,
    pub gamma: f64,
    pub n: u64,
    pub rows: Vec<TraceRow>,
    /// Second-half log-log slope of the mean hinge, if it could be fitted.
    pub slope: Option<f64>,
    pub violations: usize,
}

impl CellResult {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("at least one checkpoint")
    }

    pub fn query_fraction(&self) -> f64 {
        self.last().queries as f64 / self.n as f64
    }
}

/// Trains one cell over the full training stream and evaluates every
/// checkpoint on the test split.
pub fn run_cell(cfg: &RunConfig, data: &Prepared, mu: f64, seed: u64) -> Result<CellResult> {
    let lc = learner_config(cfg, data, mu, seed)?;
    let mut learner = new_learner(data, &lc)?;
    let gamma = lc.resolve_gamma(data.task)?;
    let bound = if cfg.experiment.verify_bounds {
        let a = lc.effective_assumptions().ok_or_else(|| {
            Error::Config("verify_bounds needs rho_star and R (known ground truth or overrides)".into())
        })?;
        let norm = need(a.theta_star_norm, "theta_star_norm")?;
        Some(usal_core::theory::TheoremBound::new(&a, mu, data.task, lc.regime, gamma, norm * norm)?)
    } else {
        None
    };

    let n = data.train.len() as u64;
    let schedule = geometric_checkpoints(cfg.experiment.first_checkpoint, n, cfg.experiment.checkpoints);
    let mut oracle = DatasetOracle::new(&data.train.samples);
    let trace = train_stream(learner.as_mut(), &data.train.samples, &mut oracle, &schedule)?;

    let mut rows = Vec::with_capacity(trace.checkpoints.len());
    for c in &trace.checkpoints {
        let theta = match cfg.experiment.evaluate {
            EvalTarget::Average => &c.theta_bar,
            EvalTarget::Last => &c.theta,
        };
        let eval = evaluate(theta, &data.test)?;
        let check = bound.as_ref().map(|b| verify_theorem_bound(&[(c.t, eval.mean_hinge)], b)[0]);
        rows.push(TraceRow {
            t: c.t,
            queries: c.queries,
            expected_queries: c.expected_queries,
            eval,
            theta_bar_norm: linalg::norm(&c.theta_bar),
            bound: check,
        });
    }
    let points: Vec<(u64, f64)> = rows.iter().map(|r| (r.t, r.eval.mean_hinge)).collect();
    let slope = fit_rate_second_half(&points).ok().map(|f| f.slope);
    let violations = rows.iter().filter(|r| r.bound.is_some_and(|b| !b.ok)).count();
    Ok(CellResult { mu, seed, gamma, n, rows, slope, violations })
}

/// Runs `jobs` on `threads` workers, keeping the input order.
pub fn par_map<J: Sync, T: Send>(
    jobs: &[J],
    threads: usize,
    f: impl Fn(&J) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

/// One cell per seed at the configured μ.
pub fn run_experiment(cfg: &RunConfig, data: &Prepared, threads: usize) -> Result<Vec<CellResult>> {
    let mu = cfg.learner.mu;
    par_map(&cfg.experiment.seeds, threads, |&seed| run_cell(cfg, data, mu, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub mu: f64,
    pub seeds: usize,
    pub test_error: f64,
    pub test_error_se: f64,
    pub query_fraction: f64,
    pub query_fraction_se: f64,
    pub expected_queries: f64,
}

/// Cells ordered by μ then seed, plus one aggregate per μ.
pub fn run_sweep(cfg: &RunConfig, data: &Prepared, threads: usize) -> Result<(Vec<CellResult>, Vec<SweepAggregate>)> {
    let jobs: Vec<(f64, u64)> = cfg
        .experiment
        .mu_values
        .iter()
        .flat_map(|&mu| cfg.experiment.seeds.iter().map(move |&s| (mu, s)))
        .collect();
    let cells = par_map(&jobs, threads, |&(mu, seed)| run_cell(cfg, data, mu, seed))?;
    let per_mu = cfg.experiment.seeds.len();
    let aggregates = cells
        .chunks(per_mu)
        .map(|group| {
            let (err_mean, err_se) = mean_se(group.iter().map(|c| c.last().eval.test_error));
            let (frac_mean, frac_se) = mean_se(group.iter().map(|c| c.query_fraction()));
            let (eq, _) = mean_se(group.iter().map(|c| c.last().expected_queries));
            SweepAggregate {
                mu: group[0].mu,
                seeds: group.len(),
                test_error: err_mean,
                test_error_se: err_se,
                query_fraction: frac_mean,
                query_fraction_se: frac_se,
                expected_queries: eq,
            }
        })
        .collect();
    Ok((cells, aggregates))
}

/// Mean and standard error (0 for a single value).
pub fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetRow {
    /// Labels spent by both learners.
    pub queries: u64,
    /// Samples the uncertainty learner had seen when it reached the budget.
    pub t: u64,
    pub uncertainty_error: f64,
    pub vanilla_error: f64,
}

/// Compares uncertainty sampling (configured μ) against vanilla SGD at equal
/// label budgets: vanilla SGD after `q` samples has spent exactly `q` labels.
/// Budgets are spaced geometrically up to the labels the uncertainty
/// learner spends over the whole stream.
pub fn equal_budget(cfg: &RunConfig, data: &Prepared, seed: u64) -> Result<Vec<BudgetRow>> {
    let mu = cfg.learner.mu;
    let uncertain = learner_config(cfg, data, mu, seed)?;
    let mut vanilla = uncertain.clone();
    vanilla.sampling.mode = SamplingMode::Always;
    if vanilla.step == StepSize::Derive {
        // vanilla SGD has no theorem step of its own; share the learner's
        vanilla.step = StepSize::Fixed(uncertain.resolve_gamma(data.task)?);
    }
    let pick = |c_bar: &[f64], c: &[f64]| -> Vec<f64> {
        match cfg.experiment.evaluate {
            EvalTarget::Average => c_bar.to_vec(),
            EvalTarget::Last => c.to_vec(),
        }
    };

    // First pass: how many labels does the uncertainty learner spend?
    let mut oracle = DatasetOracle::new(&data.train.samples);
    let mut probe = new_learner(data, &uncertain)?;
    let n = data.train.len() as u64;
    let total = train_stream(probe.as_mut(), &data.train.samples, &mut oracle, &[n])?
        .last()
        .map(|c| c.queries)
        .unwrap_or(0);
    if total == 0 {
        return Ok(Vec::new());
    }
    let budgets = geometric_checkpoints(cfg.experiment.first_checkpoint.min(total), total, cfg.experiment.checkpoints);

    // Second pass (identical draws): snapshot when each budget is reached.
    let mut learner = new_learner(data, &uncertain)?;
    let mut oracle = DatasetOracle::new(&data.train.samples);
    let mut snaps = Vec::with_capacity(budgets.len());
    let mut next = 0;
    for (i, s) in data.train.samples.iter().enumerate() {
        learner.step(&s.features, i, &mut oracle)?;
        while next < budgets.len() && learner.queries() >= budgets[next] {
            snaps.push((learner.steps(), pick(learner.theta_bar(), learner.theta())));
            next += 1;
        }
    }

    let mut base = new_learner(data, &vanilla)?;
    let mut oracle = DatasetOracle::new(&data.train.samples);
    let trace = train_stream(base.as_mut(), &data.train.samples, &mut oracle, &budgets)?;
    budgets
        .iter()
        .zip(&snaps)
        .zip(&trace.checkpoints)
        .map(|((&q, (t, theta)), c)| {
            Ok(BudgetRow {
                queries: q,
                t: *t,
                uncertainty_error: evaluate(theta, &data.test)?.test_error,
                vanilla_error: evaluate(&pick(&c.theta_bar, &c.theta), &data.test)?.test_error,
            })
        })
        .collect()
}
