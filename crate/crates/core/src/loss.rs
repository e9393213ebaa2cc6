//! Hinge losses, the multiclass feature difference `δ_x(y, y′)` and the
//! Euclidean ball projection.
//!
//! The "squared" losses carry the extra factor ½: `ℓ = ½·(1 − m)₊²` where
//! `m` is the margin.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::linalg;
use crate::model::{best_competitor, block_scores, MulticlassModel, Sign};

/// `(1 − margin)₊`
#[inline]
pub fn hinge(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// `½·(1 − margin)₊²`
#[inline]
pub fn squared_hinge(margin: f64) -> f64 {
    let h = hinge(margin);
    0.5 * h * h
}

fn check_pair(x: &[f64], theta: &[f64]) -> Result<()> {
    check_dim(theta.len(), x.len())?;
    if !linalg::all_finite(x) {
        return Err(invalid("feature vector contains non-finite entries"));
    }
    Ok(())
}

/// `max(0, 1 − y·θᵀx)`
pub fn hinge_binary(x: &[f64], y: Sign, theta: &[f64]) -> Result<f64> {
    check_pair(x, theta)?;
    Ok(hinge(y.value() * linalg::dot(theta, x)))
}

pub fn squared_hinge_binary(x: &[f64], y: Sign, theta: &[f64]) -> Result<f64> {
    check_pair(x, theta)?;
    Ok(squared_hinge(y.value() * linalg::dot(theta, x)))
}

/// Gradient of `½(1 − yθᵀx)₊²` with respect to θ: `−y·x·(1 − yθᵀx)₊`.
pub fn squared_hinge_binary_grad(x: &[f64], y: Sign, theta: &[f64]) -> Result<Vec<f64>> {
    check_pair(x, theta)?;
    let h = hinge(y.value() * linalg::dot(theta, x));
    Ok(x.iter().map(|xi| -y.value() * xi * h).collect())
}

/// `δ_x(y, y′) = φ(x, y) − φ(x, y′)`: `x` in block `y`, `−x` in block `y′`,
/// zeros elsewhere. Classes are 0-based.
pub fn delta_x(x: &[f64], y: usize, y_prime: usize, classes: usize) -> Result<Vec<f64>> {
    if y == y_prime {
        return Err(invalid("delta_x needs two distinct classes"));
    }
    if y >= classes || y_prime >= classes {
        return Err(invalid(format!("class out of range for k = {classes}")));
    }
    let d = x.len();
    let mut out = vec![0.0; d * classes];
    out[y * d..(y + 1) * d].copy_from_slice(x);
    for (o, xi) in out[y_prime * d..(y_prime + 1) * d].iter_mut().zip(x) {
        *o = -xi;
    }
    Ok(out)
}

/// Multiclass margin `θᵀδ_x(y, y⋆)` against the best competitor y⋆ of `y`,
/// computed from a flat `k·d` parameter.
pub fn multiclass_margin(theta: &[f64], dim: usize, x: &[f64], y: usize) -> (usize, f64) {
    let scores = block_scores(theta, dim, x);
    let (competitor, s) = best_competitor(&scores, y);
    (competitor, scores[y] - s)
}

fn check_multiclass(model: &MulticlassModel, x: &[f64], y: usize) -> Result<()> {
    check_dim(model.dim(), x.len())?;
    if !linalg::all_finite(x) {
        return Err(invalid("feature vector contains non-finite entries"));
    }
    if y >= model.classes() {
        return Err(invalid(format!("class {y} out of range for k = {}", model.classes())));
    }
    Ok(())
}

/// `[1 − θᵀδ_x(y, y⋆(θ, x, y))]₊` with y⋆ the best class other than `y`.
pub fn hinge_multiclass(x: &[f64], y: usize, model: &MulticlassModel) -> Result<f64> {
    check_multiclass(model, x, y)?;
    Ok(hinge(multiclass_margin(&model.theta, model.dim(), x, y).1))
}

pub fn squared_hinge_multiclass(x: &[f64], y: usize, model: &MulticlassModel) -> Result<f64> {
    check_multiclass(model, x, y)?;
    Ok(squared_hinge(multiclass_margin(&model.theta, model.dim(), x, y).1))
}

/// Gradient of `½(1 − θᵀδ_x(y, competitor))₊²` for a fixed competitor:
/// `−δ_x(y, competitor)·(1 − θᵀδ)₊`.
pub fn squared_hinge_multiclass_grad(
    theta: &[f64],
    classes: usize,
    x: &[f64],
    y: usize,
    competitor: usize,
) -> Result<Vec<f64>> {
    check_dim(theta.len(), x.len() * classes)?;
    let delta = delta_x(x, y, competitor, classes)?;
    let h = hinge(linalg::dot(theta, &delta));
    Ok(delta.iter().map(|v| -v * h).collect())
}

/// Relative slack on the ball radius. Vectors within it are left alone, so
/// a rescaled vector whose recomputed norm rounds above `radius` is not
/// rescaled a second time (projection stays idempotent bit-for-bit).
pub const PROJECTION_SLACK: f64 = 1e-12;

/// Projects `theta` in place onto `{‖θ‖₂ ≤ radius}`, up to
/// [`PROJECTION_SLACK`].
pub fn project_to_ball(theta: &mut [f64], radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(invalid("projection radius must be > 0"));
    }
    let n = linalg::norm(theta);
    if n > radius * (1.0 + PROJECTION_SLACK) {
        linalg::scale(radius / n, theta);
    }
    Ok(())
}
