//! Synthetic separable streams and label-noise injection.
//!
//! Features are drawn from `N(0, Σ)` with diagonal `Σ`; labels come from a
//! ground-truth linear model `θ⋆` drawn from a standard normal. All
//! randomness flows from one ChaCha8 stream seeded by `SyntheticSpec::seed`, in the
//! order: `θ⋆`, training features, test features.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{block_scores, top_two, Label, Sample, Sign};

/// Regeneration attempts for a sample that lands exactly on a decision
/// boundary.
const MAX_BOUNDARY_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `Σ_ii = 1/i` (1-based `i`).
    Decaying,
    Identity,
    Diagonal(Vec<f64>),
}

impl Covariance {
    fn std_devs(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            Covariance::Decaying => Ok((1..=dim).map(|i| libm::sqrt(1.0 / i as f64)).collect()),
            Covariance::Identity => Ok(vec![1.0; dim]),
            Covariance::Diagonal(v) => {
                if v.len() != dim {
                    return Err(invalid(format!(
                        "covariance diagonal has {} entries, expected {dim}",
                        v.len()
                    )));
                }
                if let Some(bad) = v.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
                    return Err(invalid(format!("covariance entries must be > 0, got {bad}")));
                }
                Ok(v.iter().map(|&e| libm::sqrt(e)).collect())
            }
        }
    }
}

/// Shape of the labels of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelKind {
    Binary,
    Multiclass(usize),
}

impl LabelKind {
    pub fn classes(self) -> Option<usize> {
        match self {
            LabelKind::Binary => None,
            LabelKind::Multiclass(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub covariance: Covariance,
    pub seed: u64,
    /// Rescale `θ⋆` so the smallest training margin equals this value.
    pub margin_floor: Option<f64>,
    pub labels: LabelKind,
}

impl SyntheticSpec {
    pub fn binary(dim: usize, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            dim,
            n_train,
            n_test,
            covariance: Covariance::Decaying,
            seed,
            margin_floor: Some(1.5),
            labels: LabelKind::Binary,
        }
    }

    pub fn multiclass(classes: usize, dim: usize, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self { labels: LabelKind::Multiclass(classes), ..Self::binary(dim, n_train, n_test, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("d must be >= 1"));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(invalid("n_train and n_test must be >= 1"));
        }
        if let Some(f) = self.margin_floor {
            if !(f > 0.0) || !f.is_finite() {
                return Err(invalid(format!("margin_floor must be > 0, got {f}")));
            }
        }
        if let LabelKind::Multiclass(k) = self.labels {
            if k < 2 {
                return Err(invalid("multiclass data needs k >= 2"));
            }
        }
        self.covariance.std_devs(self.dim).map(|_| ())
    }
}

/// Labelled samples of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub labels: LabelKind,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, labels: LabelKind, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            s.validate(dim, labels.classes())?;
            if s.label.is_none() {
                return Err(invalid("every dataset sample needs a label"));
            }
        }
        Ok(Self { dim, labels, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `max ‖x‖` over the split.
    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|s| linalg::norm(&s.features)).fold(0.0, f64::max)
    }
}

/// Exact constants of a generated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `θ⋆`, flat `k·d` for multiclass.
    pub theta_star: Vec<f64>,
    /// Smallest training margin `y·θ⋆ᵀx` (binary) or top-two gap
    /// (multiclass).
    pub rho_star: f64,
    /// `max ‖x‖` (binary) or `√2·max ‖x‖` (multiclass) over both splits.
    pub r: f64,
    pub theta_star_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: GroundTruth,
}

fn normal_vec(rng: &mut ChaCha8Rng, scales: &[f64]) -> Vec<f64> {
    scales.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Margin a labelling model assigns to `x` together with its label:
/// `|θ⋆ᵀx|` for binary, the top-two gap for multiclass.
fn label_point(theta: &[f64], dim: usize, labels: LabelKind, x: &[f64]) -> (Label, f64) {
    match labels {
        LabelKind::Binary => {
            let s = linalg::dot(theta, x);
            (Label::Binary(Sign::of(s)), s.abs())
        }
        LabelKind::Multiclass(_) => {
            let t = top_two(&block_scores(theta, dim, x)).expect("k >= 2");
            (Label::Class(t.first), t.gap())
        }
    }
}

fn draw_split(
    rng: &mut ChaCha8Rng,
    theta: &[f64],
    spec: &SyntheticSpec,
    scales: &[f64],
    n: usize,
) -> Result<(Vec<Sample>, f64)> {
    let mut samples = Vec::with_capacity(n);
    let mut min_margin = f64::INFINITY;
    for _ in 0..n {
        let mut attempt = 0;
        loop {
            let x = normal_vec(rng, scales);
            let (label, margin) = label_point(theta, spec.dim, spec.labels, &x);
            if margin > 0.0 || spec.margin_floor.is_none() {
                min_margin = min_margin.min(margin);
                samples.push(Sample::new(x, Some(label)));
                break;
            }
            attempt += 1;
            if attempt > MAX_BOUNDARY_RETRIES {
                return Err(Error::Generation(format!(
                    "{MAX_BOUNDARY_RETRIES} consecutive samples fell on the decision boundary; \
                     cannot enforce a margin floor"
                )));
            }
        }
    }
    Ok((samples, min_margin))
}

/// Generates a separable train/test pair from `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blocks = spec.labels.classes().unwrap_or(1);
    let theta: Vec<f64> =
        (0..blocks * spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    generate_from(spec, theta, &mut rng)
}

/// Like [`generate_synthetic`] but labels with the given `θ⋆` (flat `k·d`
/// for multiclass) instead of drawing one. The margin floor still rescales
/// it.
pub fn generate_synthetic_with_truth(spec: &SyntheticSpec, theta_star: Vec<f64>) -> Result<SyntheticData> {
    spec.validate()?;
    let blocks = spec.labels.classes().unwrap_or(1);
    if theta_star.len() != blocks * spec.dim {
        return Err(invalid(format!(
            "theta_star has {} entries, expected {}",
            theta_star.len(),
            blocks * spec.dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_from(spec, theta_star, &mut rng)
}

fn generate_from(spec: &SyntheticSpec, mut theta: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<SyntheticData> {
    let scales = spec.covariance.std_devs(spec.dim)?;
    let (mut train, train_min) = draw_split(rng, &theta, spec, &scales, spec.n_train)?;
    let (mut test, _) = draw_split(rng, &theta, spec, &scales, spec.n_test)?;

    if let Some(floor) = spec.margin_floor {
        let factor = floor / train_min;
        linalg::scale(factor, &mut theta);
        // Labels are scale invariant; re-derive them anyway so the exported
        // θ⋆ is exactly the labelling model.
        for s in train.iter_mut().chain(test.iter_mut()) {
            s.label = Some(label_point(&theta, spec.dim, spec.labels, &s.features).0);
        }
    }

    let max_norm = train
        .iter()
        .chain(test.iter())
        .map(|s| linalg::norm(&s.features))
        .fold(0.0, f64::max);
    let r = match spec.labels {
        LabelKind::Binary => max_norm,
        LabelKind::Multiclass(_) => core::f64::consts::SQRT_2 * max_norm,
    };
    let rho_star = min_margin(&theta, spec.dim, spec.labels, &train);
    let truth = GroundTruth { theta_star_norm: linalg::norm(&theta), theta_star: theta, rho_star, r };
    Ok(SyntheticData {
        train: Dataset { dim: spec.dim, labels: spec.labels, samples: train },
        test: Dataset { dim: spec.dim, labels: spec.labels, samples: test },
        truth,
    })
}

/// Smallest labelled margin of `theta` over `samples`: `min y·θᵀx` (binary)
/// or `min θ(y)ᵀx − max_{j≠y} θ(j)ᵀx` (multiclass).
pub fn min_margin(theta: &[f64], dim: usize, labels: LabelKind, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| match (labels, s.label) {
            (LabelKind::Binary, Some(Label::Binary(y))) => y.value() * linalg::dot(theta, &s.features),
            (LabelKind::Multiclass(_), Some(Label::Class(y))) => {
                crate::loss::multiclass_margin(theta, dim, &s.features, y).1
            }
            _ => f64::NEG_INFINITY,
        })
        .fold(f64::INFINITY, f64::min)
}

/// Replaces each label independently with probability `eta`: binary labels
/// flip sign, class labels move uniformly to one of the other `k − 1`
/// classes. Returns the noisy dataset and the per-sample flip mask.
pub fn inject_label_noise(dataset: &Dataset, eta: f64, seed: u64) -> Result<(Dataset, Vec<bool>)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    let mut mask = Vec::with_capacity(out.len());
    for s in &mut out.samples {
        let u: f64 = rng.random();
        let flip = u < eta;
        if flip {
            s.label = match s.label {
                Some(Label::Binary(y)) => Some(Label::Binary(y.flipped())),
                Some(Label::Class(c)) => {
                    let k = dataset.labels.classes().unwrap_or(2);
                    let other = rng.random_range(0..k - 1);
                    Some(Label::Class(if other >= c { other + 1 } else { other }))
                }
                None => None,
            };
        }
        mask.push(flip);
    }
    Ok((out, mask))
}
