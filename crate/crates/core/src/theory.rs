//! Margin assumptions, theorem step sizes and the closed-form hinge-loss
//! bounds they guarantee for the averaged iterate.
//!
//! Every formula is built from the same few quantities:
//!
//! * `c = min{1/μ, (ρ⋆ − 1)/(1 + μ)}`, the sampling lower-envelope constant;
//! * `K`, the curvature term: `R²·max{1, 1/μ}` (binary) or `R²(1 + BR)`
//!   (multiclass);
//! * `M`, the noise penalty: `max{(1 + R‖θ⋆‖)/(1 + μ), R‖θ⋆‖}` (binary) or
//!   `1 + R‖θ⋆‖` (multiclass).
//!
//! With a step `γ` and descent coefficient `a` (`c`, `(1−η)c − ηM` or
//! `(1−η)c` depending on the regime) the per-step inequality telescopes to
//! `mean hinge(θ̄_n) ≤ ‖θ₁ − θ⋆‖² / (n·(2γa − γ²K)) + plateau`, which at the
//! optimal `γ = a/K` is `K‖θ₁ − θ⋆‖² / (a²n)`.

use alloc::format;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Binary,
    Multiclass,
}

/// Noise regime of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Separable data, margin `ρ⋆ > 1`.
    Separable,
    /// Label noise below the threshold; plain (binary) updates, `O(1/n)`.
    NoisyLow,
    /// Any noise level; projected updates, `O(1/n) + O(η)`.
    NoisyHigh,
}

/// Constants the step sizes and bounds are parameterised by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginAssumptions {
    /// Margin `ρ⋆ > 1`.
    pub rho_star: f64,
    /// Bound on `‖x‖` (binary) or `‖δ_x(i, j)‖` (multiclass).
    pub r: f64,
    /// Parameter-ball radius.
    pub b: Option<f64>,
    /// Label-noise level in `[0, 1]`.
    pub eta: f64,
    /// `‖θ⋆‖`, needed by the noisy regimes.
    pub theta_star_norm: Option<f64>,
}

impl MarginAssumptions {
    pub fn separable(rho_star: f64, r: f64) -> Self {
        Self { rho_star, r, b: None, eta: 0.0, theta_star_norm: None }
    }

    pub fn with_radius(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_noise(mut self, eta: f64, theta_star_norm: f64) -> Self {
        self.eta = eta;
        self.theta_star_norm = Some(theta_star_norm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_star > 1.0) || !self.rho_star.is_finite() {
            return Err(invalid(format!("rho_star must be > 1, got {}", self.rho_star)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(invalid(format!("R must be > 0, got {}", self.r)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if let Some(b) = self.b {
            if !(b > 0.0) || !b.is_finite() {
                return Err(invalid(format!("B must be > 0, got {b}")));
            }
        }
        if let Some(n) = self.theta_star_norm {
            if !(n >= 0.0) || !n.is_finite() {
                return Err(invalid(format!("theta_star_norm must be >= 0, got {n}")));
            }
        }
        Ok(())
    }

    fn radius(&self) -> Result<f64> {
        self.b.ok_or_else(|| invalid("this task/regime needs the parameter-ball radius B"))
    }

    fn theta_star_norm(&self) -> Result<f64> {
        self.theta_star_norm
            .ok_or_else(|| invalid("noisy regimes need theta_star_norm (‖θ⋆‖)"))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid(format!("theorem constants need mu > 0, got {mu}")));
    }
    Ok(())
}

/// `min{1/μ, (ρ⋆ − 1)/(1 + μ)}`
pub fn sampling_lower_constant(mu: f64, rho_star: f64) -> f64 {
    (1.0 / mu).min((rho_star - 1.0) / (1.0 + mu))
}

/// `max{1, 1/μ}`
pub fn sampling_upper_constant(mu: f64) -> f64 {
    (1.0 / mu).max(1.0)
}

/// Curvature term `K` of the per-step inequality.
pub fn curvature(a: &MarginAssumptions, mu: f64, task: Task) -> Result<f64> {
    let r2 = a.r * a.r;
    Ok(match task {
        Task::Binary => r2 * sampling_upper_constant(mu),
        Task::Multiclass => r2 * (1.0 + a.radius()? * a.r),
    })
}

/// Noise penalty `M` multiplying `η` in the per-step inequality.
pub fn noise_penalty(a: &MarginAssumptions, mu: f64, task: Task) -> Result<f64> {
    let rt = a.r * a.theta_star_norm()?;
    Ok(match task {
        Task::Binary => ((1.0 + rt) / (1.0 + mu)).max(rt),
        Task::Multiclass => 1.0 + rt,
    })
}

/// Largest noise level (exclusive) for which the low-noise regime applies:
/// `c / (M + c)`.
pub fn noise_threshold(a: &MarginAssumptions, mu: f64, task: Task) -> Result<f64> {
    check_mu(mu)?;
    a.validate()?;
    let c = sampling_lower_constant(mu, a.rho_star);
    Ok(c / (noise_penalty(a, mu, task)? + c))
}

/// Descent coefficient `a` of the regime (see module docs).
pub fn descent_coefficient(a: &MarginAssumptions, mu: f64, task: Task, regime: Regime) -> Result<f64> {
    check_mu(mu)?;
    a.validate()?;
    let c = sampling_lower_constant(mu, a.rho_star);
    match regime {
        Regime::Separable => Ok(c),
        Regime::NoisyLow => {
            let threshold = noise_threshold(a, mu, task)?;
            let coef = (1.0 - a.eta) * c - a.eta * noise_penalty(a, mu, task)?;
            if a.eta >= threshold || !(coef > 0.0) {
                return Err(Error::RegimeMismatch { eta: a.eta, threshold });
            }
            Ok(coef)
        }
        Regime::NoisyHigh => {
            if a.eta >= 1.0 {
                return Err(invalid("eta = 1 leaves no signal to learn from"));
            }
            Ok((1.0 - a.eta) * c)
        }
    }
}

/// Theorem step size `γ = a / K`.
///
/// The multiclass separable step uses the complete `1/(R²(1 + BR))`
/// normalisation; pass the result through a multiplier (e.g. ½) to get the
/// more conservative variant.
pub fn derive_step_size(a: &MarginAssumptions, mu: f64, task: Task, regime: Regime) -> Result<f64> {
    let coef = descent_coefficient(a, mu, task, regime)?;
    Ok(coef / curvature(a, mu, task)?)
}

/// Closed-form right-hand side of the averaged-iterate hinge bound for a
/// run with step `gamma` started at distance `init_dist_sq = ‖θ₁ − θ⋆‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremBound {
    /// `‖θ₁ − θ⋆‖² / (2γa − γ²K)`; the bound is `rate_constant / n + plateau`.
    pub rate_constant: f64,
    /// `O(η)` term; zero except in the noisy-high regime.
    pub plateau: f64,
}

impl TheoremBound {
    pub fn new(
        a: &MarginAssumptions,
        mu: f64,
        task: Task,
        regime: Regime,
        gamma: f64,
        init_dist_sq: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(invalid("gamma must be > 0"));
        }
        if !(init_dist_sq >= 0.0) {
            return Err(invalid("initial distance must be >= 0"));
        }
        let coef = descent_coefficient(a, mu, task, regime)?;
        let k = curvature(a, mu, task)?;
        let denom = 2.0 * gamma * coef - gamma * gamma * k;
        if !(denom > 0.0) {
            return Err(invalid(format!(
                "step size {gamma} is too large for a bound (needs gamma < {})",
                2.0 * coef / k
            )));
        }
        let plateau = match regime {
            Regime::NoisyHigh => {
                let ball = 1.0 + a.radius()? * a.r;
                2.0 * gamma * a.eta * noise_penalty(a, mu, task)? * ball / denom
            }
            _ => 0.0,
        };
        Ok(Self { rate_constant: init_dist_sq / denom, plateau })
    }

    pub fn at(&self, n: u64) -> f64 {
        self.rate_constant / n as f64 + self.plateau
    }
}

/// Explicit `O(η)` coefficient `C₂` of the noisy-high bound at the theorem
/// step: `2(1 + BR)·M / ((1 − η)c)`.
pub fn plateau_coefficient(a: &MarginAssumptions, mu: f64, task: Task) -> Result<f64> {
    let c = sampling_lower_constant(mu, a.rho_star);
    let ball = 1.0 + a.radius()? * a.r;
    Ok(2.0 * ball * noise_penalty(a, mu, task)? / ((1.0 - a.eta) * c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn separable_binary_steps() {
        let a = MarginAssumptions::separable(3.0, 1.0);
        assert!(close(derive_step_size(&a, 1.0, Task::Binary, Regime::Separable).unwrap(), 1.0));
        let a = MarginAssumptions::separable(2.0, 2.0);
        assert!(close(
            derive_step_size(&a, 2.0, Task::Binary, Regime::Separable).unwrap(),
            1.0 / 12.0
        ));
    }

    #[test]
    fn noisy_low_with_zero_eta_matches_separable() {
        for &(rho, r, mu, ts) in &[(3.0, 1.0, 1.0, 2.0), (1.5, 4.0, 0.3, 10.0), (7.0, 0.5, 9.0, 0.1)] {
            let a = MarginAssumptions::separable(rho, r).with_noise(0.0, ts).with_radius(5.0);
            for task in [Task::Binary, Task::Multiclass] {
                let sep = derive_step_size(&a, mu, task, Regime::Separable).unwrap();
                let low = derive_step_size(&a, mu, task, Regime::NoisyLow).unwrap();
                assert_eq!(sep, low);
            }
        }
    }

    #[test]
    fn multiclass_step_uses_full_normalisation() {
        let a = MarginAssumptions::separable(3.0, 1.0).with_radius(2.0);
        // c = min{1, 2/2} = 1, K = 1 * (1 + 2) = 3
        assert!(close(derive_step_size(&a, 1.0, Task::Multiclass, Regime::Separable).unwrap(), 1.0 / 3.0));
        let no_b = MarginAssumptions::separable(3.0, 1.0);
        assert!(derive_step_size(&no_b, 1.0, Task::Multiclass, Regime::Separable).is_err());
    }

    #[test]
    fn noisy_low_rejects_large_eta() {
        let a = MarginAssumptions::separable(3.0, 1.0).with_noise(0.4, 1.0);
        // c = 1, M = max{2/2, 1} = 1, threshold 1/2
        assert!(close(noise_threshold(&a, 1.0, Task::Binary).unwrap(), 0.5));
        assert!(derive_step_size(&a, 1.0, Task::Binary, Regime::NoisyLow).is_ok());
        let a = a.with_noise(0.5, 1.0);
        assert!(matches!(
            derive_step_size(&a, 1.0, Task::Binary, Regime::NoisyLow),
            Err(Error::RegimeMismatch { .. })
        ));
        assert!(derive_step_size(&a, 1.0, Task::Binary, Regime::NoisyHigh).is_ok());
    }

    #[test]
    fn rejects_bad_constants() {
        let a = MarginAssumptions::separable(1.0, 1.0);
        assert!(derive_step_size(&a, 1.0, Task::Binary, Regime::Separable).is_err());
        let a = MarginAssumptions::separable(2.0, 1.0);
        assert!(derive_step_size(&a, 0.0, Task::Binary, Regime::Separable).is_err());
        let a = MarginAssumptions::separable(2.0, 0.0);
        assert!(derive_step_size(&a, 1.0, Task::Binary, Regime::Separable).is_err());
        let a = MarginAssumptions::separable(2.0, 1.0);
        assert!(derive_step_size(&a, 1.0, Task::Binary, Regime::NoisyLow).is_err());
    }

    #[test]
    fn bound_at_theorem_step_is_closed_form() {
        let a = MarginAssumptions::separable(1.5, 2.0);
        let mu = 1.0;
        let g = derive_step_size(&a, mu, Task::Binary, Regime::Separable).unwrap();
        let b = TheoremBound::new(&a, mu, Task::Binary, Regime::Separable, g, 9.0).unwrap();
        let c: f64 = 0.25;
        let closed = 4.0 * 1.0 * 9.0 / (c * c * 100.0);
        assert!(close(b.at(100), closed));
        assert_eq!(b.plateau, 0.0);
    }

    #[test]
    fn noisy_high_plateau_matches_explicit_constant() {
        let a = MarginAssumptions::separable(2.0, 1.5).with_radius(4.0).with_noise(0.1, 3.0);
        for task in [Task::Binary, Task::Multiclass] {
            let mu = 2.0;
            let g = derive_step_size(&a, mu, task, Regime::NoisyHigh).unwrap();
            let b = TheoremBound::new(&a, mu, task, Regime::NoisyHigh, g, 1.0).unwrap();
            let c2 = plateau_coefficient(&a, mu, task).unwrap();
            assert!(close(b.plateau, c2 * 0.1));
            let c = sampling_lower_constant(mu, 2.0);
            let k = curvature(&a, mu, task).unwrap();
            assert!(close(b.rate_constant, k / ((0.9 * c) * (0.9 * c))));
        }
    }

    #[test]
    fn halved_multiclass_step_loosens_bound() {
        let a = MarginAssumptions::separable(2.0, 1.0).with_radius(3.0);
        let g = derive_step_size(&a, 1.0, Task::Multiclass, Regime::Separable).unwrap();
        let full = TheoremBound::new(&a, 1.0, Task::Multiclass, Regime::Separable, g, 1.0).unwrap();
        let half = TheoremBound::new(&a, 1.0, Task::Multiclass, Regime::Separable, g / 2.0, 1.0).unwrap();
        assert!(close(half.rate_constant, full.rate_constant * 4.0 / 3.0));
        assert!(TheoremBound::new(&a, 1.0, Task::Multiclass, Regime::Separable, 2.0 * g, 1.0).is_err());
    }
}
