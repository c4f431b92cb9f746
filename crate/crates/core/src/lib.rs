//! Tug-of-war (TOW) dynamics and the TOW bombe for competitive bandit problems.
//!
//! * [`tow`] — single-player TOW, the weighting parameter and analytical checks.
//! * [`bombe`] — the coupled `M`-player, `N`-machine bombe.
//! * [`fluctuations`] — volume-conserving and external perturbations.
//! * [`environment`] — Bernoulli machines, real-valued rewards, the EPD game.
//! * [`baselines`] — epsilon-greedy, softmax and UCB1-tuned comparators.
//! * [`metrics`] — scores, fairness, outcome classes, aggregates.
//! * [`harness`] — seeded Monte Carlo experiments and CSV output.

pub mod baselines;
pub mod bombe;
pub mod environment;
pub mod error;
pub mod fluctuations;
pub mod harness;
pub mod metrics;
pub mod tow;
pub mod verify;

pub use error::{Error, Result};
