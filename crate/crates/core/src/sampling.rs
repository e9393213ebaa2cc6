//! Query probabilities `σ = 1/(1 + μ·|gap|)`, the Bernoulli query draw, and
//! executable forms of the two sampling envelopes that the convergence
//! analysis rests on.
//!
//! # Generator
//!
//! [`QueryRng`] is ChaCha8 (the `rand_chacha` crate) seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. A query draw consumes one `u64`,
//! converts it to a uniform `u ∈ [0, 1)` with 53 bits of precision and
//! answers `u < p`. The stream is identical on every platform.

use alloc::format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::loss::{hinge, multiclass_margin};
use crate::model::{MulticlassModel, Sign};
use crate::theory::{sampling_lower_constant, sampling_upper_constant, MarginAssumptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// `σ = 1/(1 + μ|θᵀx|)`
    BinaryMargin,
    /// `σ = 1/(1 + μ|s₁ − s₂|)` over the two best class scores.
    MulticlassTopTwo,
    /// `σ ≡ 1`: every label is requested (vanilla SGD).
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub mu: f64,
    pub mode: SamplingMode,
    pub rng_seed: u64,
}

impl SamplingConfig {
    pub fn new(mu: f64, mode: SamplingMode, rng_seed: u64) -> Self {
        Self { mu, mode, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)
    }

    /// μ as seen by σ: `Always` behaves like `μ = 0`.
    pub fn effective_mu(&self) -> f64 {
        match self.mode {
            SamplingMode::Always => 0.0,
            _ => self.mu,
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(invalid(format!("mu must be a finite number >= 0, got {mu}")));
    }
    Ok(())
}

/// `1/(1 + μ·|gap|)` for an already computed score or score gap.
pub fn sigma(gap: f64, mu: f64) -> Result<f64> {
    if !gap.is_finite() {
        return Err(invalid("score is not finite"));
    }
    check_mu(mu)?;
    // μ = 0 must give exactly 1 even for huge gaps.
    if mu == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + mu * gap.abs()))
}

pub fn query_probability_binary(theta: &[f64], x: &[f64], mu: f64) -> Result<f64> {
    check_dim(theta.len(), x.len())?;
    sigma(linalg::dot(theta, x), mu)
}

pub fn query_probability_multiclass(model: &MulticlassModel, x: &[f64], mu: f64) -> Result<f64> {
    sigma(model.top_two_scores(x)?.gap(), mu)
}

/// Per-learner Bernoulli source for the query indicator `z_t`.
#[derive(Debug, Clone)]
pub struct QueryRng {
    rng: ChaCha8Rng,
}

impl QueryRng {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Returns `true` with probability `p`.
    pub fn draw_query(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("query probability must lie in [0, 1], got {p}")));
        }
        let u = (self.rng.random::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        Ok(u < p)
    }
}

/// Outcome of an envelope check: which of the two inequalities held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl Envelope {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Relative slack granted to the envelope comparisons for rounding in the
/// evaluation of both sides.
pub const ENVELOPE_RTOL: f64 = 1e-12;

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + ENVELOPE_RTOL * rhs.abs()
}

/// Binary sampling envelope, valid whenever `yθᵀx ≤ 1`:
///
/// `min{1/μ, (ρ⋆−1)/(1+μ)} / (ρ⋆ − yθᵀx) ≤ σ(θ, x) ≤ max{1, 1/μ} / (1 − yθᵀx)₊`
pub fn lemma1_envelope(theta: &[f64], x: &[f64], y: Sign, mu: f64, rho_star: f64) -> Result<Envelope> {
    check_dim(theta.len(), x.len())?;
    if !(mu > 0.0) {
        return Err(invalid("envelope needs mu > 0"));
    }
    if !(rho_star > 1.0) {
        return Err(invalid("envelope needs rho_star > 1"));
    }
    let score = linalg::dot(theta, x);
    let margin = y.value() * score;
    if margin > 1.0 {
        return Err(Error::Precondition(format!(
            "envelope applies only for y·θᵀx <= 1, got {margin}"
        )));
    }
    let s = sigma(score, mu)?;
    let lower = sampling_lower_constant(mu, rho_star) / (rho_star - margin);
    let h = hinge(margin);
    // h = 0 sends the upper bound to +inf.
    let upper_ok = h == 0.0 || le(s, sampling_upper_constant(mu) / h);
    Ok(Envelope { lower_ok: le(lower, s), upper_ok })
}

/// Multiclass sampling envelope, valid whenever `θᵀδ_x(y, y⋆) ≤ 1`,
/// `‖θ‖ ≤ B` and `‖δ_x‖ ≤ R`:
///
/// `min{1/μ, (ρ⋆−1)/(1+μ)} / (ρ⋆ − θᵀδ_x(y, y⋆)) ≤ σ(θ, x) ≤ (1 + BR) / ℓ̂(x, y, θ)`
pub fn lemma2_envelope(
    model: &MulticlassModel,
    x: &[f64],
    y: usize,
    mu: f64,
    assumptions: &MarginAssumptions,
) -> Result<Envelope> {
    check_dim(model.dim(), x.len())?;
    if y >= model.classes() {
        return Err(invalid(format!("class {y} out of range")));
    }
    if !(mu > 0.0) {
        return Err(invalid("envelope needs mu > 0"));
    }
    assumptions.validate()?;
    let b = assumptions.b.ok_or_else(|| invalid("multiclass envelope needs B"))?;
    let r = assumptions.r;
    let rho_star = assumptions.rho_star;

    let theta_norm = linalg::norm(&model.theta);
    if !le(theta_norm, b) {
        return Err(Error::Precondition(format!("‖θ‖ = {theta_norm} exceeds B = {b}")));
    }
    let delta_norm = core::f64::consts::SQRT_2 * linalg::norm(x);
    if !le(delta_norm, r) {
        return Err(Error::Precondition(format!("‖δ_x‖ = {delta_norm} exceeds R = {r}")));
    }
    let (_, margin) = multiclass_margin(&model.theta, model.dim(), x, y);
    if margin > 1.0 {
        return Err(Error::Precondition(format!(
            "envelope applies only for θᵀδ_x <= 1, got {margin}"
        )));
    }
    let s = query_probability_multiclass(model, x, mu)?;
    let lower = sampling_lower_constant(mu, rho_star) / (rho_star - margin);
    let h = hinge(margin);
    let upper_ok = h == 0.0 || le(s, (1.0 + b * r) / h);
    Ok(Envelope { lower_ok: le(lower, s), upper_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn binary_probability_examples() {
        assert_eq!(query_probability_binary(&[1.0, -1.0], &[1.0, 1.0], 7.0).unwrap(), 1.0);
        assert_eq!(query_probability_binary(&[100.0], &[3.0], 0.0).unwrap(), 1.0);
        assert!((query_probability_binary(&[1.0], &[1.0], 4.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((query_probability_binary(&[-1.0], &[1.0], 4.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(query_probability_binary(&[1.0], &[f64::NAN], 1.0).is_err());
        assert!(query_probability_binary(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn multiclass_probability_examples() {
        let m = MulticlassModel::from_blocks(&[vec![1.0], vec![1.0], vec![0.0]], 10.0).unwrap();
        assert_eq!(query_probability_multiclass(&m, &[2.0], 5.0).unwrap(), 1.0);
        let m = MulticlassModel::from_blocks(&[vec![3.0], vec![2.0], vec![0.0]], 10.0).unwrap();
        assert_eq!(query_probability_multiclass(&m, &[1.0], 0.0).unwrap(), 1.0);
        assert!((query_probability_multiclass(&m, &[1.0], 4.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn draw_extremes_and_errors() {
        let mut rng = QueryRng::new(1);
        for _ in 0..10_000 {
            assert!(rng.draw_query(1.0).unwrap());
            assert!(!rng.draw_query(0.0).unwrap());
        }
        assert!(rng.draw_query(1.5).is_err());
        assert!(rng.draw_query(-0.1).is_err());
        assert!(rng.draw_query(f64::NAN).is_err());
    }

    #[test]
    fn draws_are_reproducible() {
        let a: Vec<bool> = {
            let mut r = QueryRng::new(42);
            (0..256).map(|_| r.draw_query(0.5).unwrap()).collect()
        };
        let mut r = QueryRng::new(42);
        let b: Vec<bool> = (0..256).map(|_| r.draw_query(0.5).unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn draw_frequency_matches_probability() {
        let mut rng = QueryRng::new(2024);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| rng.draw_query(0.3).unwrap()).count();
        let mean = hits as f64 / n as f64;
        let tol = 3.0 * libm::sqrt(0.3 * 0.7 / n as f64);
        assert!((mean - 0.3).abs() <= tol, "mean {mean}");
    }

    #[test]
    fn lemma1_examples() {
        let env = lemma1_envelope(&[0.0], &[1.0], Sign::Pos, 1.0, 3.0).unwrap();
        assert_eq!(env, Envelope { lower_ok: true, upper_ok: true });
        // margin just below one: upper bound blows up
        let env = lemma1_envelope(&[1.0 - 1e-12], &[1.0], Sign::Pos, 0.5, 2.0).unwrap();
        assert!(env.upper_ok);
        assert!(matches!(
            lemma1_envelope(&[2.0], &[1.0], Sign::Pos, 1.0, 3.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lemma2_examples() {
        let m = MulticlassModel::new(3, 2, 1.0).unwrap();
        let a = MarginAssumptions::separable(2.0, 4.0).with_radius(1.0);
        let env = lemma2_envelope(&m, &[1.0, 1.0], 0, 1.0, &a).unwrap();
        assert!(env.upper_ok && env.lower_ok);

        // large mu: sigma small but so is the lower bound
        let m = MulticlassModel::from_blocks(&[vec![0.5], vec![0.0]], 1.0).unwrap();
        let a = MarginAssumptions::separable(2.0, 2.0).with_radius(1.0);
        for mu in [1e2, 1e4, 1e6] {
            assert!(lemma2_envelope(&m, &[1.0], 0, mu, &a).unwrap().holds());
        }
        // R too small for ‖δ_x‖ = √2
        let a = MarginAssumptions::separable(2.0, 1.0).with_radius(1.0);
        assert!(matches!(lemma2_envelope(&m, &[1.0], 0, 1.0, &a), Err(Error::Precondition(_))));
    }
}
