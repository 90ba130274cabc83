//! Learning switching dynamic Bayesian models from multisensor time series.
//!
//! The pipeline has five stages:
//!
//! - [`signal`]: ingest sensor CSVs, pick feature-case channel subsets and
//!   stack each series with its time derivatives (generalized states).
//! - [`gng`] and [`vocabulary`]: one growing neural gas per derivative order
//!   yields an alphabet; the Cartesian product of alphabets is the word
//!   dictionary, with a smoothed word-transition matrix and per-word local
//!   linear dynamics.
//! - [`mjpf`]: a Markov jump particle filter (a particle filter over words,
//!   each particle carrying a Kalman filter) predicts the next generalized
//!   state and scores each tick with [`anomaly`]'s Hellinger distance.
//! - [`eval`]: ROC/AUC/accuracy against labelled ground truth and ranking of
//!   feature-cases.
//! - [`scenario`]: a deterministic synthetic vehicle (perimeter laps for
//!   training, a U-turn run with ground truth for testing).
//!
//! [`model`] ties the stages together and defines the persisted model file.

pub mod anomaly;
pub mod error;
pub mod eval;
pub mod gng;
mod linalg;
pub mod mjpf;
pub mod model;
pub mod scenario;
pub mod signal;
pub mod vocabulary;

pub use error::{Error, Result};
