//! Textbook bandit strategies used as comparators: epsilon-greedy, softmax
//! and UCB1-tuned. These are the standard forms, not replications of any
//! particular "modified" variant.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::metrics::{classify_outcome, OutcomeClass, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    EpsilonGreedy(f64),
    /// Boltzmann exploration with temperature `tau`.
    Softmax(f64),
    Ucb1Tuned,
}

impl BaselineKind {
    pub fn validate(self) -> Result<()> {
        match self {
            BaselineKind::EpsilonGreedy(e) if !(0.0..=1.0).contains(&e) => {
                Err(Error::input(format!("epsilon must lie in [0, 1], got {e}")))
            }
            BaselineKind::Softmax(tau) if !(tau > 0.0) => {
                Err(Error::input(format!("temperature must be > 0, got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::EpsilonGreedy(e) => write!(f, "epsilon-greedy:{e}"),
            BaselineKind::Softmax(t) => write!(f, "softmax:{t}"),
            BaselineKind::Ucb1Tuned => f.write_str("ucb1-tuned"),
        }
    }
}

/// Parses `epsilon-greedy:E`, `softmax:TAU` or `ucb1-tuned`.
impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let number = |default: f64| -> Result<f64> {
            param.map_or(Ok(default), |p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::input(format!("bad strategy parameter in {s:?}")))
            })
        };
        let kind = match name.trim() {
            "epsilon-greedy" => BaselineKind::EpsilonGreedy(number(0.1)?),
            "softmax" => BaselineKind::Softmax(number(0.1)?),
            "ucb1-tuned" if param.is_none() => BaselineKind::Ucb1Tuned,
            _ => {
                return Err(Error::input(format!(
                    "unknown strategy {s:?} (expected epsilon-greedy[:E]|softmax[:TAU]|ucb1-tuned)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// A strategy plus its per-machine reward statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStrategy {
    kind: BaselineKind,
    counts: Vec<u64>,
    sums: Vec<f64>,
    sq_sums: Vec<f64>,
}

impl BaselineStrategy {
    pub fn new(kind: BaselineKind, machines: usize) -> Result<Self> {
        kind.validate()?;
        if machines == 0 {
            return Err(Error::input("a strategy needs at least one machine"));
        }
        Ok(Self {
            kind,
            counts: vec![0; machines],
            sums: vec![0.0; machines],
            sq_sums: vec![0.0; machines],
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mean(&self, k: usize) -> f64 {
        if self.counts[k] == 0 {
            0.0
        } else {
            self.sums[k] / self.counts[k] as f64
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.mean(k)).collect()
    }

    /// Highest empirical mean; ties go to the lower index.
    pub fn best(&self) -> usize {
        argmax(&self.means())
    }

    /// Choice for step `t` (1-based). Unplayed machines are tried first, in
    /// index order, without touching `rng`.
    pub fn select(&self, t: u64, rng: &mut (impl RngCore + ?Sized)) -> Result<usize> {
        if t == 0 {
            return Err(Error::input("steps are numbered from 1"));
        }
        if let Some(k) = self.counts.iter().position(|&c| c == 0) {
            return Ok(k);
        }
        let n = self.counts.len();
        Ok(match self.kind {
            BaselineKind::EpsilonGreedy(eps) => {
                if rng.random::<f64>() < eps {
                    rng.random_range(0..n)
                } else {
                    self.best()
                }
            }
            BaselineKind::Softmax(tau) => {
                let means = self.means();
                let top = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = means.iter().map(|m| ((m - top) / tau).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (k, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = k;
                        break;
                    }
                    u -= w;
                }
                pick
            }
            BaselineKind::Ucb1Tuned => {
                let total: u64 = self.counts.iter().sum();
                let ln_t = (total.max(t) as f64).ln();
                let index: Vec<f64> = (0..n)
                    .map(|k| {
                        let c = self.counts[k] as f64;
                        let mean = self.sums[k] / c;
                        let var = (self.sq_sums[k] / c - mean * mean).max(0.0);
                        let v = var + (2.0 * ln_t / c).sqrt();
                        mean + (ln_t / c * v.min(0.25)).sqrt()
                    })
                    .collect();
                argmax(&index)
            }
        })
    }

    pub fn observe(&mut self, k: usize, reward: f64) -> Result<()> {
        if k >= self.counts.len() {
            return Err(Error::input(format!("machine {k} out of range")));
        }
        self.counts[k] += 1;
        self.sums[k] += reward;
        self.sq_sums[k] += reward * reward;
        Ok(())
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Independent selfish learners sharing `env`, each learning only from the
/// rewards it receives. Per step the players choose in order, then the
/// environment draws.
pub fn selfish_cbp_run(
    strategies: &mut [BaselineStrategy],
    env: &dyn Environment,
    plays: usize,
    window: usize,
    rng: &mut dyn RngCore,
) -> Result<RunRecord> {
    let m = strategies.len();
    let n = env.machines();
    if m == 0 || plays == 0 {
        return Err(Error::input("a selfish run needs players and plays"));
    }
    if strategies.iter().any(|s| s.counts.len() != n) {
        return Err(Error::input("strategy and environment machine counts differ"));
    }
    let mut scores = vec![0.0; m];
    let mut histogram = vec![vec![0u64; n]; m];
    let mut window_histogram = vec![vec![0u64; n]; m];
    let window_start = plays.saturating_sub(window.max(1));
    let mut picks = vec![0usize; m];
    for step in 0..plays {
        for (pick, s) in picks.iter_mut().zip(strategies.iter()) {
            *pick = s.select(step as u64 + 1, rng)?;
        }
        let rewards = env.draw(&picks, rng)?;
        for (i, s) in strategies.iter_mut().enumerate() {
            s.observe(picks[i], rewards[i])?;
            scores[i] += rewards[i];
            histogram[i][picks[i]] += 1;
            if step >= window_start {
                window_histogram[i][picks[i]] += 1;
            }
        }
    }
    let mut record = RunRecord {
        sample: 0,
        seed: 0,
        plays,
        scores,
        histogram,
        window_histogram,
        max_fluctuation: 0.0,
        outcome: OutcomeClass::Other,
        fingerprint: String::new(),
    };
    record.outcome = classify_outcome(&record, env);
    Ok(record)
}
