//! The streaming training loops.
//!
//! Each step draws `z_t ~ Bernoulli(σ(θ_t, x_t))`. Only when `z_t = 1` is
//! the label requested from the [`LabelOracle`] and a squared-hinge SGD step
//! taken:
//!
//! * binary: `θ ← θ + γ·y·x·(1 − yθᵀx)₊`, optionally projected onto the
//!   `B`-ball (required in the noisy-high regime);
//! * multiclass: `θ(y) += γ·ℓ̂·x`, `θ(y⋆) −= γ·ℓ̂·x` with y⋆ the best class
//!   other than `y`, then projection onto the `B`-ball.
//!
//! The averaged iterate θ̄ and the step counter advance on every sample,
//! queried or not.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::loss::{hinge, project_to_ball};
use crate::model::{best_competitor, BinaryModel, Label, MulticlassModel, Sample};
use crate::sampling::{sigma, QueryRng, SamplingConfig, SamplingMode};
use crate::theory::{derive_step_size, MarginAssumptions, Regime, Task};

/// Answers "what is the label of sample `index`". Implementations may be
/// costly; learners only call them when a label is actually requested.
pub trait LabelOracle {
    fn label(&mut self, index: usize) -> Result<Label>;
}

/// Oracle backed by the hidden labels of an in-memory sample list. Counts
/// how often it was asked.
#[derive(Debug)]
pub struct DatasetOracle<'a> {
    samples: &'a [Sample],
    calls: u64,
}

impl<'a> DatasetOracle<'a> {
    pub fn new(samples: &'a [Sample]) -> Self {
        Self { samples, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl LabelOracle for DatasetOracle<'_> {
    fn label(&mut self, index: usize) -> Result<Label> {
        self.calls += 1;
        self.samples
            .get(index)
            .and_then(|s| s.label)
            .ok_or_else(|| Error::Query { index, reason: "no label available".to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// Use the theorem step for the configured task and regime.
    Derive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub step: StepSize,
    pub sampling: SamplingConfig,
    pub assumptions: Option<MarginAssumptions>,
    /// Projection radius `B`. Required for multiclass and for the
    /// noisy-high regime.
    pub projection: Option<f64>,
    pub regime: Regime,
    /// Scales a derived step. 1 gives the full theorem step; ½ recovers the
    /// conservative multiclass normalisation `1/(2R²(1 + BR))`.
    pub step_multiplier: f64,
}

impl LearnerConfig {
    pub fn fixed(gamma: f64, sampling: SamplingConfig) -> Self {
        Self {
            step: StepSize::Fixed(gamma),
            sampling,
            assumptions: None,
            projection: None,
            regime: Regime::Separable,
            step_multiplier: 1.0,
        }
    }

    pub fn derived(sampling: SamplingConfig, assumptions: MarginAssumptions) -> Self {
        Self {
            step: StepSize::Derive,
            sampling,
            assumptions: Some(assumptions),
            projection: None,
            regime: Regime::Separable,
            step_multiplier: 1.0,
        }
    }

    pub fn with_projection(mut self, radius: f64) -> Self {
        self.projection = Some(radius);
        self
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    /// Assumptions with `B` filled in from the projection radius when unset.
    pub fn effective_assumptions(&self) -> Option<MarginAssumptions> {
        self.assumptions.map(|mut a| {
            if a.b.is_none() {
                a.b = self.projection;
            }
            a
        })
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        self.sampling.validate()?;
        if let Some(b) = self.projection {
            if !(b > 0.0) || !b.is_finite() {
                return Err(invalid(format!("projection radius must be > 0, got {b}")));
            }
        }
        if task == Task::Multiclass && self.projection.is_none() {
            return Err(invalid("multiclass learning needs a projection radius B"));
        }
        if self.regime == Regime::NoisyHigh && self.projection.is_none() {
            return Err(invalid("the noisy-high regime needs projected updates (set B)"));
        }
        if !(self.step_multiplier > 0.0) || !self.step_multiplier.is_finite() {
            return Err(invalid("step multiplier must be > 0"));
        }
        match self.step {
            StepSize::Fixed(g) if !(g > 0.0) || !g.is_finite() => {
                Err(invalid(format!("gamma must be > 0, got {g}")))
            }
            StepSize::Fixed(_) => Ok(()),
            StepSize::Derive => {
                if self.assumptions.is_none() {
                    return Err(invalid("a derived step size needs margin assumptions"));
                }
                if self.sampling.mode == SamplingMode::Always || !(self.sampling.mu > 0.0) {
                    return Err(invalid("a derived step size needs margin sampling with mu > 0"));
                }
                Ok(())
            }
        }
    }

    /// The step size actually used for `task`.
    pub fn resolve_gamma(&self, task: Task) -> Result<f64> {
        self.validate(task)?;
        match self.step {
            StepSize::Fixed(g) => Ok(g),
            StepSize::Derive => {
                let a = self.effective_assumptions().expect("validated");
                Ok(self.step_multiplier * derive_step_size(&a, self.sampling.mu, task, self.regime)?)
            }
        }
    }
}

/// What happened on one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    /// `σ(θ_t, x_t)`.
    pub probability: f64,
    pub queried: bool,
    pub label: Option<Label>,
    /// Hinge loss `ℓ̂` of θ_t on the sample (only known when queried).
    pub loss: Option<f64>,
    /// Coefficient of the pre-projection update: the step was
    /// `scale·x` (binary) or `scale·δ_x(y, competitor)` (multiclass).
    pub update_scale: f64,
    pub competitor: Option<usize>,
}

impl QueryRecord {
    fn skipped(probability: f64) -> Self {
        Self { probability, queried: false, label: None, loss: None, update_scale: 0.0, competitor: None }
    }
}

/// Common interface of the two learners, used by [`train_stream`].
pub trait Learner {
    fn dim(&self) -> usize;
    /// Query probability for `x` under the current parameter.
    fn query_probability(&self, x: &[f64]) -> Result<f64>;
    /// Runs one step with a caller-supplied query decision.
    fn step_with_decision(
        &mut self,
        x: &[f64],
        index: usize,
        queried: bool,
        oracle: &mut dyn LabelOracle,
    ) -> Result<QueryRecord>;
    fn rng(&mut self) -> &mut QueryRng;
    fn steps(&self) -> u64;
    fn queries(&self) -> u64;
    fn theta(&self) -> &[f64];
    fn theta_bar(&self) -> &[f64];
    /// `Σ σ(θ_t, x_t)` over all steps so far.
    fn expected_queries(&self) -> f64;

    /// One full step: compute σ, draw `z_t`, and update.
    fn step(&mut self, x: &[f64], index: usize, oracle: &mut dyn LabelOracle) -> Result<QueryRecord> {
        let p = self.query_probability(x)?;
        let z = self.rng().draw_query(p)?;
        self.step_with_decision(x, index, z, oracle)
    }
}

/// Algorithm-1 style learner for labels in {−1, +1}.
#[derive(Debug, Clone)]
pub struct BinaryLearner {
    pub model: BinaryModel,
    gamma: f64,
    mu: f64,
    projection: Option<f64>,
    rng: QueryRng,
    expected_queries: f64,
}

impl BinaryLearner {
    pub fn new(dim: usize, config: &LearnerConfig) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        let gamma = config.resolve_gamma(Task::Binary)?;
        if config.sampling.mode == SamplingMode::MulticlassTopTwo {
            return Err(invalid("top-two sampling needs a multiclass learner"));
        }
        Ok(Self {
            model: BinaryModel::new(dim),
            gamma,
            mu: config.sampling.effective_mu(),
            projection: config.projection,
            rng: QueryRng::new(config.sampling.rng_seed),
            expected_queries: 0.0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Learner for BinaryLearner {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn query_probability(&self, x: &[f64]) -> Result<f64> {
        sigma(self.model.score(x)?, self.mu)
    }

    fn step_with_decision(
        &mut self,
        x: &[f64],
        index: usize,
        queried: bool,
        oracle: &mut dyn LabelOracle,
    ) -> Result<QueryRecord> {
        let score = self.model.score(x)?;
        let p = sigma(score, self.mu)?;
        let record = if queried {
            let label = oracle.label(index)?;
            let y = label.as_sign()?.value();
            let loss = hinge(y * score);
            let scale = self.gamma * y * loss;
            if loss > 0.0 {
                linalg::axpy(scale, x, &mut self.model.theta);
                if let Some(b) = self.projection {
                    project_to_ball(&mut self.model.theta, b)?;
                }
            }
            self.model.queries += 1;
            QueryRecord {
                probability: p,
                queried: true,
                label: Some(label),
                loss: Some(loss),
                update_scale: scale,
                competitor: None,
            }
        } else {
            QueryRecord::skipped(p)
        };
        self.expected_queries += p;
        self.model.advance_average();
        Ok(record)
    }

    fn rng(&mut self) -> &mut QueryRng {
        &mut self.rng
    }
    fn steps(&self) -> u64 {
        self.model.t
    }
    fn queries(&self) -> u64 {
        self.model.queries
    }
    fn theta(&self) -> &[f64] {
        &self.model.theta
    }
    fn theta_bar(&self) -> &[f64] {
        &self.model.theta_bar
    }
    fn expected_queries(&self) -> f64 {
        self.expected_queries
    }
}

/// Algorithm-2 style learner over `k` classes with projected updates.
#[derive(Debug, Clone)]
pub struct MulticlassLearner {
    pub model: MulticlassModel,
    gamma: f64,
    mu: f64,
    rng: QueryRng,
    expected_queries: f64,
}

impl MulticlassLearner {
    pub fn new(classes: usize, dim: usize, config: &LearnerConfig) -> Result<Self> {
        let gamma = config.resolve_gamma(Task::Multiclass)?;
        if config.sampling.mode == SamplingMode::BinaryMargin {
            return Err(invalid("binary-margin sampling needs a binary learner"));
        }
        let radius = config.projection.expect("validated");
        Ok(Self {
            model: MulticlassModel::new(classes, dim, radius)?,
            gamma,
            mu: config.sampling.effective_mu(),
            rng: QueryRng::new(config.sampling.rng_seed),
            expected_queries: 0.0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Learner for MulticlassLearner {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn query_probability(&self, x: &[f64]) -> Result<f64> {
        sigma(self.model.top_two_scores(x)?.gap(), self.mu)
    }

    fn step_with_decision(
        &mut self,
        x: &[f64],
        index: usize,
        queried: bool,
        oracle: &mut dyn LabelOracle,
    ) -> Result<QueryRecord> {
        let scores = self.model.scores(x)?;
        let p = sigma(crate::model::top_two(&scores)?.gap(), self.mu)?;
        let record = if queried {
            let label = oracle.label(index)?;
            let y = label.as_class(self.model.classes())?;
            let (competitor, competitor_score) = best_competitor(&scores, y);
            let loss = hinge(scores[y] - competitor_score);
            let scale = self.gamma * loss;
            if loss > 0.0 {
                linalg::axpy(scale, x, self.model.block_mut(y));
                linalg::axpy(-scale, x, self.model.block_mut(competitor));
                let radius = self.model.radius();
                project_to_ball(&mut self.model.theta, radius)?;
            }
            self.model.queries += 1;
            QueryRecord {
                probability: p,
                queried: true,
                label: Some(label),
                loss: Some(loss),
                update_scale: scale,
                competitor: Some(competitor),
            }
        } else {
            QueryRecord::skipped(p)
        };
        self.expected_queries += p;
        self.model.advance_average();
        Ok(record)
    }

    fn rng(&mut self) -> &mut QueryRng {
        &mut self.rng
    }
    fn steps(&self) -> u64 {
        self.model.t
    }
    fn queries(&self) -> u64 {
        self.model.queries
    }
    fn theta(&self) -> &[f64] {
        &self.model.theta
    }
    fn theta_bar(&self) -> &[f64] {
        &self.model.theta_bar
    }
    fn expected_queries(&self) -> f64 {
        self.expected_queries
    }
}

/// Learner state captured after `t` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub queries: u64,
    pub expected_queries: f64,
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub checkpoints: Vec<Checkpoint>,
}

impl ExperimentTrace {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// Runs one pass over `stream`, snapshotting the learner after the sample
/// counts listed in `checkpoints` (strictly increasing, each in
/// `1..=stream.len()`). Labels are only obtained through `oracle`, which is
/// addressed by position in `stream`.
pub fn train_stream<L: Learner + ?Sized>(
    learner: &mut L,
    stream: &[Sample],
    oracle: &mut dyn LabelOracle,
    checkpoints: &[u64],
) -> Result<ExperimentTrace> {
    if stream.is_empty() {
        return Err(invalid("training stream is empty"));
    }
    let n = stream.len() as u64;
    for w in checkpoints.windows(2) {
        if w[1] <= w[0] {
            return Err(invalid("checkpoints must be strictly increasing"));
        }
    }
    if let Some(&c) = checkpoints.iter().find(|&&c| c == 0 || c > n) {
        return Err(invalid(format!("checkpoint {c} outside 1..={n}")));
    }
    for s in stream {
        check_dim(learner.dim(), s.features.len())?;
    }

    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, sample) in stream.iter().enumerate() {
        learner.step(&sample.features, i, oracle)?;
        if next.peek().is_some_and(|&&c| c == i as u64 + 1) {
            next.next();
            out.push(Checkpoint {
                t: learner.steps(),
                queries: learner.queries(),
                expected_queries: learner.expected_queries(),
                theta: learner.theta().to_vec(),
                theta_bar: learner.theta_bar().to_vec(),
            });
        }
    }
    Ok(ExperimentTrace { checkpoints: out })
}

/// `count` checkpoints spaced geometrically from `first` to `last`
/// (inclusive), rounded and deduplicated.
pub fn geometric_checkpoints(first: u64, last: u64, count: usize) -> Vec<u64> {
    let first = first.clamp(1, last.max(1));
    if count <= 1 || first >= last {
        return alloc::vec![last.max(1)];
    }
    let ratio = libm::log(last as f64 / first as f64) / (count - 1) as f64;
    let mut out: Vec<u64> = (0..count)
        .map(|i| libm::round(first as f64 * libm::exp(ratio * i as f64)) as u64)
        .collect();
    out[count - 1] = last;
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sign;
    use alloc::vec;

    struct Counting<'a> {
        inner: DatasetOracle<'a>,
    }

    impl LabelOracle for Counting<'_> {
        fn label(&mut self, index: usize) -> Result<Label> {
            self.inner.label(index)
        }
    }

    struct Failing;
    impl LabelOracle for Failing {
        fn label(&mut self, index: usize) -> Result<Label> {
            Err(Error::Query { index, reason: "offline".into() })
        }
    }

    fn binary_config(gamma: f64, mu: f64) -> LearnerConfig {
        LearnerConfig::fixed(gamma, SamplingConfig::new(mu, SamplingMode::BinaryMargin, 7))
    }

    fn pos(x: Vec<f64>) -> Sample {
        Sample::new(x, Some(Label::Binary(Sign::Pos)))
    }

    #[test]
    fn skipped_step_leaves_theta_and_never_asks() {
        let samples = [pos(vec![1.0, 0.0])];
        let mut learner = BinaryLearner::new(2, &binary_config(0.5, 1.0)).unwrap();
        learner.model.theta = vec![0.25, 0.0];
        learner.model.theta_bar = vec![0.25, 0.0];
        let mut oracle = DatasetOracle::new(&samples);
        let r = learner.step_with_decision(&samples[0].features, 0, false, &mut oracle).unwrap();
        assert!(!r.queried);
        assert_eq!(learner.model.theta, vec![0.25, 0.0]);
        assert_eq!(learner.model.queries, 0);
        assert_eq!(learner.model.t, 1);
        assert_eq!(oracle.calls(), 0);
    }

    #[test]
    fn satisfied_margin_still_counts_query() {
        let samples = [pos(vec![1.0])];
        let mut learner = BinaryLearner::new(1, &binary_config(0.5, 1.0)).unwrap();
        learner.model.theta = vec![2.0];
        let mut oracle = DatasetOracle::new(&samples);
        let r = learner.step_with_decision(&[1.0], 0, true, &mut oracle).unwrap();
        assert_eq!(r.loss, Some(0.0));
        assert_eq!(learner.model.theta, vec![2.0]);
        assert_eq!(learner.model.queries, 1);
    }

    #[test]
    fn first_binary_step_from_zero() {
        let samples = [pos(vec![1.0, 0.0, 0.0])];
        let mut learner = BinaryLearner::new(3, &binary_config(0.5, 1.0)).unwrap();
        let mut oracle = DatasetOracle::new(&samples);
        learner.step_with_decision(&samples[0].features, 0, true, &mut oracle).unwrap();
        assert_eq!(learner.model.theta, vec![0.5, 0.0, 0.0]);
        assert_eq!(learner.model.theta_bar, vec![0.25, 0.0, 0.0]);
    }

    #[test]
    fn oracle_failure_aborts_step() {
        let mut learner = BinaryLearner::new(1, &binary_config(0.5, 0.0)).unwrap();
        let err = learner.step(&[1.0], 3, &mut Failing).unwrap_err();
        assert!(matches!(err, Error::Query { index: 3, .. }));
        assert_eq!(learner.model.t, 0);
        assert_eq!(learner.model.queries, 0);
        assert_eq!(learner.model.theta, vec![0.0]);
    }

    fn multiclass_config(gamma: f64, radius: f64) -> LearnerConfig {
        LearnerConfig::fixed(gamma, SamplingConfig::new(1.0, SamplingMode::MulticlassTopTwo, 3))
            .with_projection(radius)
    }

    #[test]
    fn multiclass_step_examples() {
        let samples = [Sample::new(vec![1.0], Some(Label::Class(0)))];
        let mut l = MulticlassLearner::new(2, 1, &multiclass_config(1.0, 10.0)).unwrap();
        let mut oracle = DatasetOracle::new(&samples);
        let r = l.step_with_decision(&[1.0], 0, true, &mut oracle).unwrap();
        assert_eq!(r.loss, Some(1.0));
        assert_eq!(r.competitor, Some(1));
        assert_eq!(l.model.theta, vec![1.0, -1.0]);

        let mut l = MulticlassLearner::new(2, 1, &multiclass_config(1.0, 1.0)).unwrap();
        l.step_with_decision(&[1.0], 0, true, &mut oracle).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((l.model.theta[0] - h).abs() < 1e-15);
        assert!((l.model.theta[1] + h).abs() < 1e-15);
        assert!((linalg::norm(&l.model.theta) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn multiclass_skip_only_advances_counters() {
        let samples = [Sample::new(vec![1.0], Some(Label::Class(0)))];
        let mut l = MulticlassLearner::new(3, 1, &multiclass_config(1.0, 10.0)).unwrap();
        let mut oracle = DatasetOracle::new(&samples);
        l.step_with_decision(&[1.0], 0, false, &mut oracle).unwrap();
        assert_eq!(l.model.theta, vec![0.0; 3]);
        assert_eq!((l.model.t, l.model.queries), (1, 0));
        assert_eq!(oracle.calls(), 0);
    }

    #[test]
    fn config_validation() {
        let s = SamplingConfig::new(1.0, SamplingMode::BinaryMargin, 0);
        assert!(LearnerConfig::fixed(0.0, s).validate(Task::Binary).is_err());
        assert!(LearnerConfig::fixed(1.0, s).validate(Task::Multiclass).is_err());
        assert!(LearnerConfig::fixed(1.0, s)
            .with_regime(Regime::NoisyHigh)
            .validate(Task::Binary)
            .is_err());
        let mut derive = LearnerConfig::fixed(1.0, s);
        derive.step = StepSize::Derive;
        assert!(derive.validate(Task::Binary).is_err());
        let a = MarginAssumptions::separable(3.0, 1.0);
        let zero_mu = SamplingConfig::new(0.0, SamplingMode::BinaryMargin, 0);
        assert!(LearnerConfig::derived(zero_mu, a).validate(Task::Binary).is_err());
        let g = LearnerConfig::derived(s, a).resolve_gamma(Task::Binary).unwrap();
        assert!((g - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counting_oracle_is_lazy_over_stream() {
        let samples: Vec<Sample> = (0..200)
            .map(|i| pos(vec![1.0 + (i % 7) as f64, -(i as f64) / 50.0]))
            .collect();
        let mut learner = BinaryLearner::new(2, &binary_config(0.1, 5.0)).unwrap();
        let mut oracle = Counting { inner: DatasetOracle::new(&samples) };
        let trace = train_stream(&mut learner, &samples, &mut oracle, &[200]).unwrap();
        assert_eq!(trace.checkpoints[0].queries, oracle.inner.calls());
        assert!(oracle.inner.calls() < 200);
    }

    #[test]
    fn stream_edge_cases() {
        let mut learner = BinaryLearner::new(1, &binary_config(0.1, 1.0)).unwrap();
        let mut oracle = Failing;
        assert!(train_stream(&mut learner, &[], &mut oracle, &[]).is_err());
        let samples = [pos(vec![1.0]), pos(vec![2.0])];
        let mut oracle = DatasetOracle::new(&samples);
        assert!(train_stream(&mut learner, &samples, &mut oracle, &[3]).is_err());
        assert!(train_stream(&mut learner, &samples, &mut oracle, &[2, 1]).is_err());
        assert!(train_stream(&mut learner, &[pos(vec![1.0, 2.0])], &mut oracle, &[1]).is_err());
    }

    #[test]
    fn geometric_schedule() {
        let c = geometric_checkpoints(10, 50_000, 30);
        assert_eq!(c.first(), Some(&10));
        assert_eq!(c.last(), Some(&50_000));
        assert_eq!(c.len(), 30);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_checkpoints(10, 12, 30), vec![10, 11, 12]);
        assert_eq!(geometric_checkpoints(10, 5, 30), vec![5]);
    }
}
