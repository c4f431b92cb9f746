//! The `M`-player, `N`-machine TOW bombe.
//!
//! `Q[(i, k)]` is player `i`'s estimate for machine `k`. One step runs
//! heights -> fluctuation -> argmax selection -> reward draw -> `Delta Q`
//! -> coupling:
//!
//! ```text
//! X(i,k)  = Q(i,k) - 1/(N-1) * sum_{l != k} Q(i,l)
//! Q'(i,k) = Q(i,k) + dQ(i,k) - 1/(M-1) * sum_{j != i} dQ(j,k)
//! ```
//!
//! From a zero start every column of `Q` and every row of `X` sums to zero.
//! Fluctuations only perturb the selection and are never stored in `Q`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::{Rng, RngCore};

use crate::environment::{contention, Environment};
use crate::error::{Error, Result};
use crate::fluctuations::FluctuationSpec;
use crate::metrics::{OutcomeClass, RunRecord};
use crate::tow::{adaptive_omega, OmegaMode, PriorRule};

/// Success increment for a player that won a coin on a contested machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionReward {
    /// `+1` regardless of contention.
    #[default]
    Unit,
    /// `+1/c` on a machine shared by `c` players.
    Shared,
}

impl CollisionReward {
    pub fn token(self) -> &'static str {
        match self {
            CollisionReward::Unit => "unit",
            CollisionReward::Shared => "shared",
        }
    }
}

impl fmt::Display for CollisionReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CollisionReward {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(CollisionReward::Unit),
            "shared" => Ok(CollisionReward::Shared),
            other => Err(Error::input(format!(
                "unknown collision reward {other:?} (expected unit|shared)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BombeConfig {
    pub players: usize,
    pub machines: usize,
    pub omega: OmegaMode,
    pub prior: PriorRule,
    /// Couple players through the yellow fluid; disabling it leaves `M`
    /// independent TOW players.
    pub coupling: bool,
    pub collision_reward: CollisionReward,
}

impl BombeConfig {
    pub fn new(players: usize, machines: usize, omega: OmegaMode) -> Self {
        Self {
            players,
            machines,
            omega,
            prior: PriorRule::default(),
            coupling: true,
            collision_reward: CollisionReward::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines < 2 {
            return Err(Error::domain(format!(
                "the bombe needs N >= 2 machines, got {}",
                self.machines
            )));
        }
        if self.players == 0 {
            return Err(Error::input("the bombe needs at least one player"));
        }
        if self.coupling && self.players < 2 {
            return Err(Error::domain(
                "coupling needs M >= 2 players; use single-player TOW instead",
            ));
        }
        if self.omega == OmegaMode::Adaptive && self.players >= self.machines {
            return Err(Error::input(format!(
                "adaptive omega needs M < N, got M = {}, N = {}",
                self.players, self.machines
            )));
        }
        Ok(())
    }
}

/// Interface heights of every player.
pub fn compute_heights(q: &Array2<f64>) -> Result<Array2<f64>> {
    let n = q.ncols();
    if n < 2 {
        return Err(Error::domain(format!("heights need N >= 2 machines, got {n}")));
    }
    let scale = 1.0 / (n - 1) as f64;
    let mut x = q.clone();
    for mut row in x.rows_mut() {
        let total: f64 = row.sum();
        row.mapv_inplace(|qk| qk - scale * (total - qk));
    }
    Ok(x)
}

/// Each player picks its highest interface after adding `osc`; exact ties
/// consume one uniform index draw.
pub fn select_machines(
    x: &Array2<f64>,
    osc: &Array2<f64>,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Vec<usize>> {
    if x.dim() != osc.dim() {
        return Err(Error::input(format!(
            "height shape {:?} and fluctuation shape {:?} differ",
            x.dim(),
            osc.dim()
        )));
    }
    let mut tied = Vec::with_capacity(x.ncols());
    let mut picks = Vec::with_capacity(x.nrows());
    for (xr, or) in x.rows().into_iter().zip(osc.rows()) {
        let mut best = f64::NEG_INFINITY;
        tied.clear();
        for (k, (a, b)) in xr.iter().zip(or.iter()).enumerate() {
            let level = a + b;
            if level > best {
                best = level;
                tied.clear();
                tied.push(k);
            } else if level == best {
                tied.push(k);
            }
        }
        let pick = match tied.len() {
            0 => return Err(Error::input("heights contain no comparable value")),
            1 => tied[0],
            len => tied[rng.random_range(0..len)],
        };
        picks.push(pick);
    }
    Ok(picks)
}

/// `+1` where a player was rewarded on its machine, `-omega_i` where it was
/// not, zero elsewhere.
pub fn deltas_from_outcome(
    selections: &[usize],
    rewards: &[f64],
    omegas: &[f64],
    machines: usize,
) -> Result<Array2<f64>> {
    let m = selections.len();
    if rewards.len() != m || omegas.len() != m {
        return Err(Error::input("selections, rewards and omegas differ in length"));
    }
    let mut dq = Array2::zeros((m, machines));
    for (i, (&k, &r)) in selections.iter().zip(rewards).enumerate() {
        if k >= machines {
            return Err(Error::input(format!("machine index {k} out of range")));
        }
        dq[(i, k)] = if r > 0.0 { 1.0 } else { -omegas[i] };
    }
    Ok(dq)
}

/// Adds `dq` and the yellow-fluid reaction of the other players.
pub fn apply_coupling(q: &Array2<f64>, dq: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = q.clone();
    couple_in_place(&mut out, dq)?;
    Ok(out)
}

fn couple_in_place(q: &mut Array2<f64>, dq: &Array2<f64>) -> Result<()> {
    if q.dim() != dq.dim() {
        return Err(Error::input("estimate and delta shapes differ"));
    }
    let m = q.nrows();
    if m < 2 {
        return Err(Error::domain(format!("coupling needs M >= 2 players, got {m}")));
    }
    let scale = 1.0 / (m - 1) as f64;
    let column_totals = dq.sum_axis(Axis(0));
    for ((i, k), cell) in q.indexed_iter_mut() {
        let own = dq[(i, k)];
        *cell += own - scale * (column_totals[k] - own);
    }
    Ok(())
}

/// What happened in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub selections: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Players per machine.
    pub contention: Vec<usize>,
}

/// Both fluids of the bombe plus the per-player counts behind adaptive omega.
#[derive(Debug, Clone, PartialEq)]
pub struct BombeState {
    q: Array2<f64>,
    t: u64,
    plays: Array2<u64>,
    failures: Array2<u64>,
    rewards: Array2<f64>,
}

impl BombeState {
    /// The symmetric rest state `Q = 0`.
    pub fn new(cfg: &BombeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::from_estimates(Array2::zeros((cfg.players, cfg.machines))))
    }

    /// Starts from arbitrary estimates (conservation then holds relative to
    /// the initial column sums).
    pub fn from_estimates(q: Array2<f64>) -> Self {
        let dim = q.dim();
        Self {
            q,
            t: 0,
            plays: Array2::zeros(dim),
            failures: Array2::zeros(dim),
            rewards: Array2::zeros(dim),
        }
    }

    pub fn estimates(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn plays(&self) -> &Array2<u64> {
        &self.plays
    }

    pub fn failures(&self) -> &Array2<u64> {
        &self.failures
    }

    pub fn rewards(&self) -> &Array2<f64> {
        &self.rewards
    }

    pub fn heights(&self) -> Result<Array2<f64>> {
        compute_heights(&self.q)
    }

    /// The omega each player applies this step, from its own counts only.
    pub fn omegas(&self, cfg: &BombeConfig) -> Result<Vec<f64>> {
        match cfg.omega {
            OmegaMode::Fixed(w) => Ok(vec![w; self.q.nrows()]),
            OmegaMode::Adaptive => self
                .rewards
                .rows()
                .into_iter()
                .zip(self.plays.rows())
                .map(|(r, n)| {
                    adaptive_omega(&r.to_vec(), &n.to_vec(), cfg.players, cfg.prior)
                })
                .collect(),
        }
    }

    /// One full iteration against `env` with fluctuation matrix `osc`.
    pub fn step(
        &mut self,
        cfg: &BombeConfig,
        env: &dyn Environment,
        osc: &Array2<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<StepOutcome> {
        if self.q.dim() != (cfg.players, cfg.machines) || env.machines() != cfg.machines {
            return Err(Error::input("state, config and environment shapes disagree"));
        }
        let x = compute_heights(&self.q)?;
        let selections = select_machines(&x, osc, rng)?;
        let rewards = env.draw(&selections, rng)?;
        let contention = contention(&selections, cfg.machines);
        let omegas = self.omegas(cfg)?;

        let mut dq = deltas_from_outcome(&selections, &rewards, &omegas, cfg.machines)?;
        if cfg.collision_reward == CollisionReward::Shared {
            for (i, &k) in selections.iter().enumerate() {
                if dq[(i, k)] > 0.0 {
                    dq[(i, k)] /= contention[k] as f64;
                }
            }
        }
        if cfg.coupling {
            couple_in_place(&mut self.q, &dq)?;
        } else {
            self.q += &dq;
        }

        for (i, (&k, &r)) in selections.iter().zip(&rewards).enumerate() {
            self.plays[(i, k)] += 1;
            self.rewards[(i, k)] += r;
            if r <= 0.0 {
                self.failures[(i, k)] += 1;
            }
        }
        self.t += 1;
        Ok(StepOutcome {
            selections,
            rewards,
            contention,
        })
    }
}

/// Length and classification window of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub bombe: BombeConfig,
    pub plays: usize,
    /// Number of final plays whose modal machines classify the run.
    pub window: usize,
}

/// Runs `plays` steps from the rest state and summarizes them.
///
/// Per step the fluctuation matrix is generated first (at `t` = steps done so
/// far), then the step itself draws from the same stream.
pub fn run_episode(
    cfg: &EpisodeConfig,
    env: &dyn Environment,
    fluct: &FluctuationSpec,
    rng: &mut dyn RngCore,
) -> Result<RunRecord> {
    if cfg.plays == 0 {
        return Err(Error::input("an episode needs at least one play"));
    }
    let (m, n) = (cfg.bombe.players, cfg.bombe.machines);
    fluct.validate()?;
    fluct.check_shape(m, n)?;
    let mut state = BombeState::new(&cfg.bombe)?;
    let mut scores = vec![0.0; m];
    let mut histogram = vec![vec![0u64; n]; m];
    let mut window_histogram = vec![vec![0u64; n]; m];
    let window_start = cfg.plays.saturating_sub(cfg.window.max(1));
    let mut max_fluct = 0.0f64;

    for step in 0..cfg.plays {
        let osc = fluct.generate(state.t(), m, n, rng)?;
        max_fluct = osc.iter().fold(max_fluct, |acc, v| acc.max(v.abs()));
        let out = state.step(&cfg.bombe, env, &osc, rng)?;
        for (i, (&k, &r)) in out.selections.iter().zip(&out.rewards).enumerate() {
            scores[i] += r;
            histogram[i][k] += 1;
            if step >= window_start {
                window_histogram[i][k] += 1;
            }
        }
    }

    let mut record = RunRecord {
        sample: 0,
        seed: 0,
        plays: cfg.plays,
        scores,
        histogram,
        window_histogram,
        max_fluctuation: max_fluct,
        outcome: OutcomeClass::Other,
        fingerprint: String::new(),
    };
    record.outcome = crate::metrics::classify_outcome(&record, env);
    Ok(record)
}
