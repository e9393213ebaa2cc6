//! Samples and linear-model state shared by both learners.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::linalg;

/// A binary label, `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn from_i64(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Sign::Neg),
            1 => Ok(Sign::Pos),
            other => Err(invalid(alloc::format!("binary label must be -1 or +1, got {other}"))),
        }
    }

    /// Sign of a score; zero maps to `Pos`. Only used for labelling
    /// generated data, where zero scores are rejected beforehand.
    pub fn of(score: f64) -> Self {
        if score < 0.0 {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Pos => Sign::Neg,
        }
    }
}

/// Ground-truth tag of a sample. Classes are 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Binary(Sign),
    Class(usize),
}

impl Label {
    pub fn as_sign(self) -> Result<Sign> {
        match self {
            Label::Binary(s) => Ok(s),
            Label::Class(c) => Err(invalid(alloc::format!("expected a binary label, got class {c}"))),
        }
    }

    pub fn as_class(self, k: usize) -> Result<usize> {
        match self {
            Label::Class(c) if c < k => Ok(c),
            Label::Class(c) => Err(invalid(alloc::format!("class {c} out of range for k = {k}"))),
            Label::Binary(_) => Err(invalid("expected a class label, got a binary label")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Option<Label>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Option<Label>) -> Self {
        Self { features, label }
    }

    /// Checks the feature length, finiteness and label range.
    /// `classes` is `None` for binary samples.
    pub fn validate(&self, dim: usize, classes: Option<usize>) -> Result<()> {
        check_dim(dim, self.features.len())?;
        if !linalg::all_finite(&self.features) {
            return Err(invalid("sample features must be finite"));
        }
        match (self.label, classes) {
            (None, _) => Ok(()),
            (Some(l), None) => l.as_sign().map(|_| ()),
            (Some(l), Some(k)) => l.as_class(k).map(|_| ()),
        }
    }
}

fn check_input(dim: usize, x: &[f64]) -> Result<()> {
    check_dim(dim, x.len())?;
    if !linalg::all_finite(x) {
        return Err(invalid("feature vector contains non-finite entries"));
    }
    Ok(())
}

/// Parameter θ of a binary linear classifier together with the running
/// average θ̄ and the query ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
    /// Number of samples processed.
    pub t: u64,
    /// Number of labels requested so far.
    pub queries: u64,
}

impl BinaryModel {
    /// Zero-initialised model (`θ₁ = 0`).
    pub fn new(dim: usize) -> Self {
        Self::from_theta(vec![0.0; dim])
    }

    pub fn from_theta(theta: Vec<f64>) -> Self {
        Self { theta_bar: theta.clone(), theta, t: 0, queries: 0 }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `θᵀx` with the current (non-averaged) parameter.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_input(self.dim(), x)?;
        Ok(linalg::dot(&self.theta, x))
    }

    /// Folds the current θ into the running mean after a step:
    /// `θ̄ ← θ̄ + (θ − θ̄)/(t + 1)`, so θ̄ is the mean of `t + 1` iterates.
    pub(crate) fn advance_average(&mut self) {
        self.t += 1;
        running_mean(&mut self.theta_bar, &self.theta, self.t);
    }
}

fn running_mean(mean: &mut [f64], latest: &[f64], t: u64) {
    let w = 1.0 / (t as f64 + 1.0);
    for (m, v) in mean.iter_mut().zip(latest) {
        *m += (v - *m) * w;
    }
}

/// The two highest-scoring classes for an input, `first_score >= second_score`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopTwo {
    pub first: usize,
    pub first_score: f64,
    pub second: usize,
    pub second_score: f64,
}

impl TopTwo {
    pub fn gap(&self) -> f64 {
        self.first_score - self.second_score
    }
}

/// Top two of a score vector. Ties go to the lowest index.
pub fn top_two(scores: &[f64]) -> Result<TopTwo> {
    if scores.len() < 2 {
        return Err(invalid("top-two needs at least two classes"));
    }
    let (mut first, mut second) = if scores[1] > scores[0] { (1, 0) } else { (0, 1) };
    for (j, &s) in scores.iter().enumerate().skip(2) {
        if s > scores[first] {
            second = first;
            first = j;
        } else if s > scores[second] {
            second = j;
        }
    }
    Ok(TopTwo {
        first,
        first_score: scores[first],
        second,
        second_score: scores[second],
    })
}

/// Highest-scoring class other than `y` (lowest index on ties).
pub fn best_competitor(scores: &[f64], y: usize) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (j, &s) in scores.iter().enumerate() {
        if j == y {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((j, s)),
        }
    }
    best.expect("at least two classes")
}

/// Stacked per-class parameters `θ = [θ(1); …; θ(k)]` stored row-major,
/// with the running average and the projection radius `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    classes: usize,
    dim: usize,
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
    pub t: u64,
    pub queries: u64,
    radius: f64,
}

impl MulticlassModel {
    pub fn new(classes: usize, dim: usize, radius: f64) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("multiclass model needs k >= 2"));
        }
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("projection radius B must be a positive finite number"));
        }
        Ok(Self {
            classes,
            dim,
            theta: vec![0.0; classes * dim],
            theta_bar: vec![0.0; classes * dim],
            t: 0,
            queries: 0,
            radius,
        })
    }

    /// Builds a model from explicit blocks (θ̄ starts equal to θ). The
    /// blocks are not projected.
    pub fn from_blocks(blocks: &[Vec<f64>], radius: f64) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        let mut m = Self::new(blocks.len(), dim, radius)?;
        for (i, b) in blocks.iter().enumerate() {
            check_dim(dim, b.len())?;
            m.theta[i * dim..(i + 1) * dim].copy_from_slice(b);
        }
        m.theta_bar.clone_from(&m.theta);
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn block(&self, class: usize) -> &[f64] {
        &self.theta[class * self.dim..(class + 1) * self.dim]
    }

    pub(crate) fn block_mut(&mut self, class: usize) -> &mut [f64] {
        &mut self.theta[class * self.dim..(class + 1) * self.dim]
    }

    /// Per-class scores `θ(i)ᵀx`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim, x)?;
        Ok(block_scores(&self.theta, self.dim, x))
    }

    pub fn top_two_scores(&self, x: &[f64]) -> Result<TopTwo> {
        top_two(&self.scores(x)?)
    }

    pub(crate) fn advance_average(&mut self) {
        self.t += 1;
        running_mean(&mut self.theta_bar, &self.theta, self.t);
    }
}

/// Scores of a flat `k·d` parameter against `x`.
pub fn block_scores(theta: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
    theta.chunks_exact(dim).map(|b| linalg::dot(b, x)).collect()
}
