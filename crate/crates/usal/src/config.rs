//! JSON run configuration.
//!
//! Every field has a default except the seeds: `data.seed` (synthetic
//! data), `data.noise.seed`, `rff.seed` and `experiment.seeds`. Unknown keys
//! are rejected. Command-line flags win over the file, the file wins over
//! the defaults; `--seed` replaces `data.seed`.
//!
//! ```json
//! {
//!   "data": { "kind": "synthetic", "task": "binary", "dim": 20, "n_train": 5000,
//!             "n_test": 2000, "covariance": "decaying", "margin_floor": 1.5, "seed": 1 },
//!   "learner": { "gamma": "derive", "mu": 1.0 },
//!   "experiment": { "seeds": [1, 2, 3], "verify_bounds": true }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub rff: Option<RffConfig>,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic(SyntheticSection),
    Libsvm(LibsvmSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    #[serde(default)]
    pub task: TaskKind,
    /// Class count for multiclass data. Default 3.
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    /// `null` disables the rescale. Default 1.5.
    #[serde(default = "default_floor")]
    pub margin_floor: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// `Σ_ii = 1/i`.
    #[default]
    Decaying,
    Identity,
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub eta: f64,
    pub seed: u64,
    /// Also corrupt the test split (with `seed + 1`). Default true, since the
    /// noisy bounds are stated for the noisy distribution.
    #[serde(default = "yes")]
    pub test: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibsvmSection {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub task: TaskKind,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Densify to this dimension instead of the largest index seen.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Sidecar written by `generate`; supplies ρ⋆, R and ‖θ⋆‖.
    #[serde(default)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RffConfig {
    #[serde(default = "default_rff_features")]
    pub features: usize,
    /// Default: median pairwise distance of a training subsample.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_median_sample")]
    pub median_sample: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Fixed(f64),
    Keyword(GammaKeyword),
    /// `γ = inverse_r2 / R²`.
    Scaled { inverse_r2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKeyword {
    Derive,
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Keyword(GammaKeyword::Derive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    /// Margin (binary) or top-two gap (multiclass) uncertainty sampling.
    #[default]
    Margin,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionSpec {
    Radius(f64),
    /// `B = theta_star_multiple · ‖θ⋆‖`, needs known ground truth.
    Relative { theta_star_multiple: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    #[default]
    Separable,
    NoisyLow,
    NoisyHigh,
}

/// Overrides for the theorem constants. Unset fields come from the
/// synthetic ground truth or the metadata sidecar; `eta` defaults to the
/// injected noise level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionOverrides {
    pub rho_star: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub eta: Option<f64>,
    pub theta_star_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    /// A number, `"derive"` (default) or `{"inverse_r2": c}`.
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub sampling: SamplingKind,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    #[serde(default)]
    pub regime: RegimeKind,
    #[serde(default = "one")]
    pub step_multiplier: f64,
    #[serde(default)]
    pub assumptions: AssumptionOverrides,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            gamma: GammaSpec::default(),
            mu: default_mu(),
            sampling: SamplingKind::Margin,
            projection: None,
            regime: RegimeKind::Separable,
            step_multiplier: 1.0,
            assumptions: AssumptionOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTarget {
    /// The averaged iterate θ̄.
    #[default]
    Average,
    /// The last iterate θ.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Learner RNG seeds; one run per seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_first_checkpoint")]
    pub first_checkpoint: u64,
    #[serde(default)]
    pub evaluate: EvalTarget,
    #[serde(default)]
    pub verify_bounds: bool,
    /// μ grid for `sweep`.
    #[serde(default = "default_mu_values")]
    pub mu_values: Vec<f64>,
    /// Also train vanilla SGD and compare at equal label budgets.
    #[serde(default)]
    pub equal_budget: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            checkpoints: default_checkpoints(),
            first_checkpoint: default_first_checkpoint(),
            evaluate: EvalTarget::Average,
            verify_bounds: false,
            mu_values: default_mu_values(),
            equal_budget: false,
        }
    }
}

fn default_classes() -> usize {
    3
}
fn default_dim() -> usize {
    20
}
fn default_n_train() -> usize {
    5000
}
fn default_n_test() -> usize {
    2000
}
fn default_floor() -> Option<f64> {
    Some(1.5)
}
fn default_rff_features() -> usize {
    500
}
fn default_median_sample() -> usize {
    1000
}
fn default_mu() -> f64 {
    1.0
}
fn default_checkpoints() -> usize {
    30
}
fn default_first_checkpoint() -> u64 {
    10
}
fn default_mu_values() -> Vec<f64> {
    vec![0.0, 1.0, 4.0, 16.0]
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

fn bad(field: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {why}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, applies `overrides` and validates.
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let (Some(seed), DataConfig::Synthetic(s)) = (overrides.seed, &mut self.data) {
            s.seed = Some(seed);
        }
    }

    pub fn is_multiclass(&self) -> bool {
        let task = match &self.data {
            DataConfig::Synthetic(s) => s.task,
            DataConfig::Libsvm(l) => l.task,
        };
        task == TaskKind::Multiclass
    }

    /// Checks everything that does not need the data itself.
    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataConfig::Synthetic(s) => {
                if s.dim == 0 {
                    return Err(bad("data.dim", "must be >= 1"));
                }
                if s.n_train == 0 {
                    return Err(bad("data.n_train", "must be >= 1"));
                }
                if s.n_test == 0 {
                    return Err(bad("data.n_test", "must be >= 1"));
                }
                if s.task == TaskKind::Multiclass && s.classes < 2 {
                    return Err(bad("data.classes", "must be >= 2"));
                }
                if let CovarianceSpec::Diagonal(v) = &s.covariance {
                    if v.len() != s.dim {
                        return Err(bad("data.covariance.diagonal", format!("needs {} entries, got {}", s.dim, v.len())));
                    }
                    if let Some(i) = v.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
                        return Err(bad(&format!("data.covariance.diagonal[{i}]"), format!("must be > 0, got {}", v[i])));
                    }
                }
                if let Some(f) = s.margin_floor {
                    positive("data.margin_floor", f)?;
                }
                if s.seed.is_none() {
                    return Err(bad("data.seed", "required (or pass --seed)"));
                }
                if let Some(n) = &s.noise {
                    if !(0.0..=1.0).contains(&n.eta) {
                        return Err(bad("data.noise.eta", format!("must lie in [0, 1], got {}", n.eta)));
                    }
                }
            }
            DataConfig::Libsvm(l) => {
                if l.task == TaskKind::Multiclass && l.classes < 2 {
                    return Err(bad("data.classes", "must be >= 2"));
                }
                if l.dim == Some(0) {
                    return Err(bad("data.dim", "must be >= 1"));
                }
            }
        }
        if let Some(r) = &self.rff {
            if r.features == 0 {
                return Err(bad("rff.features", "must be >= 1"));
            }
            if let Some(b) = r.bandwidth {
                positive("rff.bandwidth", b)?;
            }
            if r.median_sample < 2 {
                return Err(bad("rff.median_sample", "must be >= 2"));
            }
        }
        let l = &self.learner;
        match l.gamma {
            GammaSpec::Fixed(g) => positive("learner.gamma", g)?,
            GammaSpec::Scaled { inverse_r2 } => positive("learner.gamma.inverse_r2", inverse_r2)?,
            GammaSpec::Keyword(GammaKeyword::Derive) => {}
        }
        if !(l.mu >= 0.0) || !l.mu.is_finite() {
            return Err(bad("learner.mu", format!("must be >= 0, got {}", l.mu)));
        }
        match l.projection {
            Some(ProjectionSpec::Radius(b)) => positive("learner.projection", b)?,
            Some(ProjectionSpec::Relative { theta_star_multiple }) => {
                positive("learner.projection.theta_star_multiple", theta_star_multiple)?
            }
            None => {}
        }
        positive("learner.step_multiplier", l.step_multiplier)?;
        let a = &l.assumptions;
        for (name, v) in [
            ("learner.assumptions.R", a.r),
            ("learner.assumptions.B", a.b),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(rho) = a.rho_star {
            if !(rho > 1.0) {
                return Err(bad("learner.assumptions.rho_star", format!("must be > 1, got {rho}")));
            }
        }
        if let Some(eta) = a.eta {
            if !(0.0..=1.0).contains(&eta) {
                return Err(bad("learner.assumptions.eta", format!("must lie in [0, 1], got {eta}")));
            }
        }
        if let Some(t) = a.theta_star_norm {
            if !(t >= 0.0) {
                return Err(bad("learner.assumptions.theta_star_norm", format!("must be >= 0, got {t}")));
            }
        }
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(bad("experiment.seeds", "at least one seed is required"));
        }
        if e.checkpoints == 0 {
            return Err(bad("experiment.checkpoints", "must be >= 1"));
        }
        if e.first_checkpoint == 0 {
            return Err(bad("experiment.first_checkpoint", "must be >= 1"));
        }
        if e.mu_values.is_empty() {
            return Err(bad("experiment.mu_values", "must not be empty"));
        }
        if let Some(m) = e.mu_values.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(bad("experiment.mu_values", format!("entries must be >= 0, got {m}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"data": {"kind": "synthetic", "seed": 3}, "experiment": {"seeds": [1]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        let DataConfig::Synthetic(s) = &c.data else { panic!() };
        assert_eq!((s.dim, s.n_train, s.n_test), (20, 5000, 2000));
        assert_eq!(s.margin_floor, Some(1.5));
        assert_eq!(c.learner.gamma, GammaSpec::Keyword(GammaKeyword::Derive));
        assert_eq!(c.experiment.checkpoints, 30);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"data": {"kind": "synthetic", "seed": 3, "dims": 4}, "experiment": {"seeds": [1]}}"#,
            r#"{"data": {"kind": "synthetic", "seed": 3}, "experiment": {"seeds": [1]}, "extra": 1}"#,
            r#"{"data": {"kind": "synthetic", "seed": 3}, "learner": {"gama": 1}, "experiment": {"seeds": [1]}}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn gamma_forms() {
        for (g, want) in [
            ("0.5", GammaSpec::Fixed(0.5)),
            ("\"derive\"", GammaSpec::Keyword(GammaKeyword::Derive)),
            ("{\"inverse_r2\": 2}", GammaSpec::Scaled { inverse_r2: 2.0 }),
        ] {
            let text = format!(r#"{{"data": {{"kind": "synthetic", "seed": 3}}, "learner": {{"gamma": {g}}}, "experiment": {{"seeds": [1]}}}}"#);
            assert_eq!(RunConfig::from_json(&text).unwrap().learner.gamma, want);
        }
    }

    #[test]
    fn seeds_are_required() {
        let c = RunConfig::from_json(r#"{"data": {"kind": "synthetic"}, "experiment": {"seeds": [1]}}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("data.seed"));
        let mut c2 = c.clone();
        c2.apply(Overrides { seed: Some(4) });
        c2.validate().unwrap();
        let c = RunConfig::from_json(r#"{"data": {"kind": "synthetic", "seed": 1}}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("experiment.seeds"));
    }

    #[test]
    fn flag_beats_file() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.apply(Overrides { seed: Some(99) });
        let DataConfig::Synthetic(s) = &c.data else { panic!() };
        assert_eq!(s.seed, Some(99));
    }

    #[test]
    fn bad_covariance_names_the_field() {
        let c = RunConfig::from_json(
            r#"{"data": {"kind": "synthetic", "seed": 1, "dim": 2, "covariance": {"diagonal": [1, -1]}}, "experiment": {"seeds": [1]}}"#,
        )
        .unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("data.covariance.diagonal[1]"));
    }
}
