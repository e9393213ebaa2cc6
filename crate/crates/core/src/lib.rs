//! Streaming uncertainty-sampling active learning for linear classifiers.
//!
//! The learner sees one feature vector at a time, decides with probability
//! `σ = 1 / (1 + μ·|margin|)` whether to pay for its label, and on a query
//! takes a squared-hinge SGD step. Binary and multiclass (Crammer-Singer
//! style, projected onto a norm ball) variants are provided, together with
//! the step sizes and closed-form hinge-loss bounds that go with them.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the
//! experiment runner and the CLI live in the `usal` crate.
#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod learners;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rff;
pub mod sampling;
pub mod theory;

pub use error::{Error, Result};
pub use learners::{
    train_stream, BinaryLearner, Checkpoint, ExperimentTrace, LabelOracle, Learner, LearnerConfig,
    MulticlassLearner, QueryRecord, StepSize,
};
pub use model::{BinaryModel, Label, MulticlassModel, Sample, Sign};
pub use sampling::{QueryRng, SamplingConfig, SamplingMode};
pub use theory::{MarginAssumptions, Regime, Task};
