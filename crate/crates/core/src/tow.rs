//! Single-player tug-of-war dynamics.
//!
//! Two machines share one incompressible volume: the estimate of a played
//! machine moves by `+1` on a reward and by `-omega` otherwise, and the
//! displacement `X_A = Q_A - Q_B + delta` picks the next machine. This module
//! also carries the weighting-parameter theory (`omega0`, `gamma'`, adaptive
//! direct substitution), the real-valued reward variant and the closed-form
//! identities used to check the dynamics.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// Ceiling applied to adaptive estimates of omega.
pub const OMEGA_MAX: f64 = 10.0;

/// Probability assumed for a machine that has never been played.
pub const UNPLAYED_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaMode {
    Fixed(f64),
    /// Re-estimated from the player's own counts before every update.
    Adaptive,
}

impl OmegaMode {
    pub fn token(self) -> String {
        match self {
            OmegaMode::Fixed(w) => format!("{w}"),
            OmegaMode::Adaptive => "auto".to_string(),
        }
    }
}

impl fmt::Display for OmegaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for OmegaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(OmegaMode::Adaptive);
        }
        let w: f64 = s
            .parse()
            .map_err(|_| Error::input(format!("omega must be 'auto' or a number, got {s:?}")))?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::input(format!("omega must be a finite value >= 0, got {w}")));
        }
        Ok(OmegaMode::Fixed(w))
    }
}

/// How an unknown reward probability is estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorRule {
    /// `R/N`, or 0.5 for an unplayed machine.
    #[default]
    Midpoint,
    /// `(R + 1) / (N + 2)`.
    Laplace,
}

impl PriorRule {
    pub fn token(self) -> &'static str {
        match self {
            PriorRule::Midpoint => "midpoint",
            PriorRule::Laplace => "laplace",
        }
    }

    pub fn estimate(self, rewards: f64, plays: u64) -> f64 {
        match self {
            PriorRule::Midpoint if plays == 0 => UNPLAYED_PRIOR,
            PriorRule::Midpoint => rewards / plays as f64,
            PriorRule::Laplace => (rewards + 1.0) / (plays as f64 + 2.0),
        }
    }
}

impl fmt::Display for PriorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PriorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(PriorRule::Midpoint),
            "laplace" => Ok(PriorRule::Laplace),
            other => Err(Error::input(format!(
                "unknown prior {other:?} (expected midpoint|laplace)"
            ))),
        }
    }
}

/// Near-optimal weighting parameter `gamma / (2 - gamma)`.
pub fn omega0(gamma: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::domain(format!("omega0 needs 0 <= gamma < 2, got {gamma}")));
    }
    Ok(gamma / (2.0 - gamma))
}

/// Sum of the `m`-th and `(m+1)`-th largest probabilities.
pub fn gamma_prime(probs: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m >= probs.len() {
        return Err(Error::input(format!(
            "player count {m} must satisfy 1 <= M < N = {}",
            probs.len()
        )));
    }
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[m - 1] + sorted[m])
}

/// Direct-substitution estimate of `omega0` from a player's own counts,
/// clamped to `[0, OMEGA_MAX]`.
pub fn adaptive_omega(rewards: &[f64], plays: &[u64], m: usize, prior: PriorRule) -> Result<f64> {
    if rewards.len() != plays.len() {
        return Err(Error::input("reward and play counts differ in length"));
    }
    let estimates: Vec<f64> = rewards
        .iter()
        .zip(plays)
        .map(|(&r, &n)| prior.estimate(r, n))
        .collect();
    let gamma = gamma_prime(&estimates, m)?;
    Ok(match omega0(gamma) {
        Ok(w) => w.clamp(0.0, OMEGA_MAX),
        Err(_) => OMEGA_MAX,
    })
}

/// Two-machine decision: A when `Q_A - Q_B + delta > 0`, B when negative,
/// a fair coin on an exact tie.
pub fn tow_select(q_a: f64, q_b: f64, delta: f64, rng: &mut (impl RngCore + ?Sized)) -> usize {
    let x = q_a - q_b + delta;
    if x > 0.0 {
        0
    } else if x < 0.0 {
        1
    } else if rng.random_bool(0.5) {
        0
    } else {
        1
    }
}

/// Counts and estimates of one player's TOW dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct TowState {
    plays: Vec<u64>,
    failures: Vec<u64>,
    estimates: Vec<f64>,
    omega: f64,
    mode: OmegaMode,
    prior: PriorRule,
    players: usize,
}

impl TowState {
    pub fn new(machines: usize, mode: OmegaMode) -> Result<Self> {
        if machines < 2 {
            return Err(Error::input("TOW needs at least two machines"));
        }
        let mut state = Self {
            plays: vec![0; machines],
            failures: vec![0; machines],
            estimates: vec![0.0; machines],
            omega: 0.0,
            mode,
            prior: PriorRule::default(),
            players: 1,
        };
        state.omega = state.current_omega();
        Ok(state)
    }

    pub fn with_prior(mut self, prior: PriorRule) -> Self {
        self.prior = prior;
        self.omega = self.current_omega();
        self
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    pub fn failures(&self) -> &[u64] {
        &self.failures
    }

    pub fn rewards(&self) -> Vec<u64> {
        self.plays.iter().zip(&self.failures).map(|(n, l)| n - l).collect()
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// The omega the next update will use.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mode(&self) -> OmegaMode {
        self.mode
    }

    fn current_omega(&self) -> f64 {
        match self.mode {
            OmegaMode::Fixed(w) => w,
            OmegaMode::Adaptive => {
                let rewards: Vec<f64> = self.rewards().iter().map(|&r| r as f64).collect();
                adaptive_omega(&rewards, &self.plays, self.players, self.prior)
                    .unwrap_or(OMEGA_MAX)
            }
        }
    }

    /// Records one play. With a fixed omega the estimate is kept at the
    /// closed form `N - (1 + omega) L` exactly.
    pub fn update(&mut self, played: usize, rewarded: bool) -> Result<()> {
        if played >= self.plays.len() {
            return Err(Error::input(format!("machine {played} out of range")));
        }
        self.plays[played] += 1;
        if !rewarded {
            self.failures[played] += 1;
        }
        match self.mode {
            OmegaMode::Fixed(w) => {
                self.estimates[played] =
                    self.plays[played] as f64 - (1.0 + w) * self.failures[played] as f64;
            }
            OmegaMode::Adaptive => {
                self.estimates[played] += if rewarded { 1.0 } else { -self.omega };
                self.omega = self.current_omega();
            }
        }
        Ok(())
    }

    pub fn select(&self, delta: f64, rng: &mut (impl RngCore + ?Sized)) -> Result<usize> {
        if self.estimates.len() != 2 {
            return Err(Error::input("tow_select is defined for two machines"));
        }
        Ok(tow_select(self.estimates[0], self.estimates[1], delta, rng))
    }
}

/// `gamma* = (mu_A + mu_B) / 2`.
pub fn gamma_star(mu_a: f64, mu_b: f64) -> f64 {
    (mu_a + mu_b) / 2.0
}

/// TOW for rewards in `[0, R]`: `Q_k = sum r_k - gamma* N_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralTowState {
    sums: Vec<f64>,
    plays: Vec<u64>,
    gamma_star: f64,
    bound: f64,
}

impl GeneralTowState {
    pub fn new(machines: usize, gamma_star: f64, bound: f64) -> Result<Self> {
        if machines < 2 {
            return Err(Error::input("TOW needs at least two machines"));
        }
        if !(bound > 0.0) {
            return Err(Error::input(format!("reward bound must be positive, got {bound}")));
        }
        Ok(Self {
            sums: vec![0.0; machines],
            plays: vec![0; machines],
            gamma_star,
            bound,
        })
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn estimate(&self, k: usize) -> f64 {
        self.sums[k] - self.gamma_star * self.plays[k] as f64
    }

    pub fn estimates(&self) -> Vec<f64> {
        (0..self.sums.len()).map(|k| self.estimate(k)).collect()
    }

    pub fn update(&mut self, played: usize, reward: f64) -> Result<()> {
        if played >= self.sums.len() {
            return Err(Error::input(format!("machine {played} out of range")));
        }
        if !(0.0..=self.bound).contains(&reward) {
            return Err(Error::input(format!(
                "reward {reward} outside [0, {}]",
                self.bound
            )));
        }
        self.sums[played] += reward;
        self.plays[played] += 1;
        Ok(())
    }

    pub fn select(&self, delta: f64, rng: &mut (impl RngCore + ?Sized)) -> Result<usize> {
        if self.sums.len() != 2 {
            return Err(Error::input("tow_select is defined for two machines"));
        }
        Ok(tow_select(self.estimate(0), self.estimate(1), delta, rng))
    }
}

/// Whether a random walk with right flight `alpha` (coin) and left flight
/// `beta` (no coin) separates the two machines: `P_B < beta/(alpha+beta) < P_A`.
pub fn solvability_check(alpha: f64, beta: f64, p_a: f64, p_b: f64) -> bool {
    let threshold = beta / (alpha + beta);
    p_b < threshold && threshold < p_a
}

/// Both sides of the TOW-principle identity.
///
/// The first component is `Q_A - Q_B` of the TOW learning rule with
/// `omega0(gamma)`. The second builds the simultaneous-update estimates
/// `Q'_A = N_A - L_A + (gamma - 1) N_B + L_B` (and symmetrically `Q'_B`),
/// rescales them by `1 / (2 - gamma)` and takes the difference.
pub fn tow_principle_gap(n_a: u64, n_b: u64, l_a: u64, l_b: u64, gamma: f64) -> Result<(f64, f64)> {
    if l_a > n_a || l_b > n_b {
        return Err(Error::input("failure counts exceed play counts"));
    }
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    let w = omega0(gamma)?;
    let (na, nb, la, lb) = (n_a as f64, n_b as f64, l_a as f64, l_b as f64);
    let tow = (na - nb) - (1.0 + w) * (la - lb);

    let q_a = na - la + (gamma - 1.0) * nb + lb;
    let q_b = nb - lb + (gamma - 1.0) * na + la;
    let simultaneous = q_a / (2.0 - gamma) - q_b / (2.0 - gamma);
    Ok((tow, simultaneous))
}

/// `(P_A - P_B) E(N_B)`.
pub fn regret(p_a: f64, p_b: f64, expected_n_b: f64) -> f64 {
    (p_a - p_b) * expected_n_b
}
