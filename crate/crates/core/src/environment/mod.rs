//! Reward-generating environments.
//!
//! A [`MachineSet`] holds Bernoulli reward probabilities; wrapped in a
//! [`BernoulliEnv`] together with a [`CollisionPolicy`] it becomes the
//! competitive environment the bombe plays against. The Extended Prisoner's
//! Dilemma lives in [`epd`] and real-valued rewards in [`general`].

pub mod epd;
pub mod general;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::metrics::{OutcomeClass, ReferencePoint};

pub use epd::{epd_degrees_oracle, EpdEnvironment, EpdRow, EpdTable};
pub use general::{GeneralRewardModel, RewardDistribution};

/// Machine probabilities of the canonical three-player, five-machine experiment.
pub const CANONICAL_PROBS: [f64; 5] = [0.03, 0.05, 0.1, 0.2, 0.9];

/// Letter used for machine `k` in tables and reports (`0 -> 'A'`).
pub fn machine_label(k: usize) -> char {
    if k < 26 {
        (b'A' + k as u8) as char
    } else {
        '?'
    }
}

/// Parses a machine letter (`'A'..`) back into an index.
pub fn parse_machine_label(c: char) -> Result<usize> {
    let upper = c.to_ascii_uppercase();
    if upper.is_ascii_uppercase() {
        Ok((upper as u8 - b'A') as usize)
    } else {
        Err(Error::input(format!("not a machine label: {c:?}")))
    }
}

/// Renders a selection pattern as letters, e.g. `(D,E,C)`.
pub fn pattern_label(pattern: &[usize]) -> String {
    let letters: Vec<String> = pattern.iter().map(|&k| machine_label(k).to_string()).collect();
    format!("({})", letters.join(","))
}

/// Number of players on each machine.
pub fn contention(selections: &[usize], machines: usize) -> Vec<usize> {
    let mut counts = vec![0; machines];
    for &k in selections {
        if k < machines {
            counts[k] += 1;
        }
    }
    counts
}

/// Bernoulli reward probabilities of the slot machines.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineSet {
    probs: Vec<f64>,
}

impl MachineSet {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::input(format!(
                "need at least two machines, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::input(format!("reward probability {p} outside [0, 1]")));
        }
        Ok(Self { probs })
    }

    pub fn canonical() -> Self {
        Self {
            probs: CANONICAL_PROBS.to_vec(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Machine indices ordered by descending probability, ties by index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx
    }

    fn check_pattern(&self, pattern: &[usize]) -> Result<()> {
        match pattern.iter().find(|&&k| k >= self.probs.len()) {
            Some(k) => Err(Error::input(format!(
                "machine index {k} out of range for {} machines",
                self.probs.len()
            ))),
            None => Ok(()),
        }
    }

    /// Expected reward of every player: `P_k / c_k` for the machine it chose.
    pub fn expected_payoff(&self, pattern: &[usize]) -> Result<Vec<f64>> {
        self.check_pattern(pattern)?;
        let c = contention(pattern, self.len());
        Ok(pattern.iter().map(|&k| self.probs[k] / c[k] as f64).collect())
    }

    /// Draws one round of rewards.
    ///
    /// Under [`CollisionPolicy::SplitProbability`] every player consumes one
    /// uniform `u` in player order and is rewarded iff `u < P_k / c_k`. Under
    /// [`CollisionPolicy::SplitValue`] every contested machine, in index
    /// order, consumes one uniform and its single coin is shared evenly.
    pub fn draw_round(
        &self,
        selections: &[usize],
        policy: CollisionPolicy,
        rng: &mut (impl RngCore + ?Sized),
    ) -> Result<Vec<f64>> {
        self.check_pattern(selections)?;
        let c = contention(selections, self.len());
        match policy {
            CollisionPolicy::SplitProbability => Ok(selections
                .iter()
                .map(|&k| {
                    let u: f64 = rng.random();
                    if u < self.probs[k] / c[k] as f64 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()),
            CollisionPolicy::SplitValue => {
                let mut coin = vec![0.0; self.len()];
                for (k, &n) in c.iter().enumerate() {
                    if n > 0 {
                        let u: f64 = rng.random();
                        if u < self.probs[k] {
                            coin[k] = 1.0 / n as f64;
                        }
                    }
                }
                Ok(selections.iter().map(|&k| coin[k]).collect())
            }
        }
    }
}

/// How a reward is shared when several players pick the same machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionPolicy {
    /// Each contender independently wins a whole coin with probability `P/c`.
    #[default]
    SplitProbability,
    /// The machine pays at most one coin, divided evenly among contenders.
    SplitValue,
}

impl CollisionPolicy {
    pub fn token(self) -> &'static str {
        match self {
            CollisionPolicy::SplitProbability => "split-prob",
            CollisionPolicy::SplitValue => "split-value",
        }
    }
}

impl fmt::Display for CollisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CollisionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split-prob" => Ok(CollisionPolicy::SplitProbability),
            "split-value" => Ok(CollisionPolicy::SplitValue),
            other => Err(Error::input(format!(
                "unknown collision policy {other:?} (expected split-prob|split-value)"
            ))),
        }
    }
}

/// An environment a group of players can play against, one round at a time.
pub trait Environment: Send + Sync {
    fn machines(&self) -> usize;

    /// Expected per-player reward of a joint selection.
    fn expected_payoff(&self, pattern: &[usize]) -> Result<Vec<f64>>;

    /// Draws per-player rewards for one joint selection.
    fn draw(&self, selections: &[usize], rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    /// Classifies a joint selection as social maximum, Nash equilibrium or other.
    fn classify(&self, pattern: &[usize]) -> OutcomeClass;

    /// Score-space points a run of `plays` steps is compared against.
    fn reference_points(&self, players: usize, plays: usize) -> Vec<ReferencePoint>;

    /// Whether per-player scores are whole coin counts.
    fn integral_scores(&self) -> bool {
        true
    }
}

/// A machine set with a fixed collision policy.
#[derive(Debug, Clone)]
pub struct BernoulliEnv {
    pub machines: MachineSet,
    pub policy: CollisionPolicy,
}

impl BernoulliEnv {
    pub fn new(machines: MachineSet, policy: CollisionPolicy) -> Self {
        Self { machines, policy }
    }
}

/// Lehmer rank of a sequence of distinct keys.
fn permutation_rank(keys: &[usize]) -> usize {
    let mut rank = 0;
    for (i, &a) in keys.iter().enumerate() {
        let smaller = keys[i + 1..].iter().filter(|&&b| b < a).count();
        rank = rank * (keys.len() - i) + smaller;
    }
    rank
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

impl Environment for BernoulliEnv {
    fn machines(&self) -> usize {
        self.machines.len()
    }

    fn expected_payoff(&self, pattern: &[usize]) -> Result<Vec<f64>> {
        self.machines.expected_payoff(pattern)
    }

    fn draw(&self, selections: &[usize], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.machines.draw_round(selections, self.policy, rng)
    }

    /// Social maximum: the players sit on distinct machines whose total
    /// probability equals that of the top-`M` machines. Nash equilibrium:
    /// every player sits on a best machine.
    fn classify(&self, pattern: &[usize]) -> OutcomeClass {
        let probs = self.machines.probs();
        if pattern.is_empty() || pattern.iter().any(|&k| k >= probs.len()) {
            return OutcomeClass::Other;
        }
        let m = pattern.len();
        let ranked = self.machines.ranked();
        let best = probs[ranked[0]];
        let distinct = contention(pattern, probs.len()).iter().all(|&c| c <= 1);
        if distinct && m <= probs.len() {
            let top: f64 = ranked[..m].iter().map(|&k| probs[k]).sum();
            let got: f64 = pattern.iter().map(|&k| probs[k]).sum();
            if (top - got).abs() <= 1e-12 {
                // position of each player's machine in the ranking
                let keys: Vec<usize> = pattern
                    .iter()
                    .map(|k| ranked.iter().position(|r| r == k).unwrap_or(0))
                    .collect();
                return OutcomeClass::SocialMaximum(permutation_rank(&keys) as u32 + 1);
            }
        }
        if m > 1 && pattern.iter().all(|&k| probs[k] == best) {
            return OutcomeClass::NashEquilibrium;
        }
        OutcomeClass::Other
    }

    fn reference_points(&self, players: usize, plays: usize) -> Vec<ReferencePoint> {
        let probs = self.machines.probs();
        let ranked = self.machines.ranked();
        let mut points = Vec::new();
        if players <= probs.len() {
            let top: Vec<usize> = ranked[..players].to_vec();
            for perm in permutations(&top) {
                let score = perm.iter().map(|&k| probs[k] * plays as f64).collect();
                let class = self.classify(&perm);
                points.push(ReferencePoint { class, score });
            }
        }
        if players > 1 {
            let share = probs[ranked[0]] * plays as f64 / players as f64;
            points.push(ReferencePoint {
                class: OutcomeClass::NashEquilibrium,
                score: vec![share; players],
            });
        }
        points
    }

    fn integral_scores(&self) -> bool {
        self.policy == CollisionPolicy::SplitProbability
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A: usize = 0;
    const C: usize = 2;
    const D: usize = 3;
    const E: usize = 4;

    #[test]
    fn expected_payoff_matches_split_rule() {
        let ms = MachineSet::canonical();
        assert_eq!(ms.expected_payoff(&[E, E, E]).unwrap(), vec![0.3, 0.3, 0.3]);
        let ccc = ms.expected_payoff(&[C, C, C]).unwrap();
        for v in ccc {
            assert!((v - 1.0 / 30.0).abs() < 1e-15);
        }
        assert_eq!(ms.expected_payoff(&[D, E, C]).unwrap(), vec![0.2, 0.9, 0.1]);
        assert!(matches!(ms.expected_payoff(&[0, 5]), Err(Error::Input(_))));
    }

    #[test]
    fn machine_set_validation() {
        assert!(MachineSet::new(vec![0.5]).is_err());
        assert!(MachineSet::new(vec![0.5, 1.2]).is_err());
        assert!(MachineSet::new(vec![-0.1, 0.2]).is_err());
        assert!(MachineSet::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn zero_probability_machine_never_pays() {
        let ms = MachineSet::new(vec![0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for policy in [CollisionPolicy::SplitProbability, CollisionPolicy::SplitValue] {
            for _ in 0..1000 {
                let r = ms.draw_round(&[0, 0, 0], policy, &mut rng).unwrap();
                assert_eq!(r, vec![0.0; 3]);
            }
        }
    }

    #[test]
    fn deterministic_machine_splits_value_evenly() {
        let ms = MachineSet::new(vec![1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let r = ms
                .draw_round(&[0, 0], CollisionPolicy::SplitValue, &mut rng)
                .unwrap();
            assert_eq!(r, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn single_player_empirical_mean_within_binomial_band() {
        let ms = MachineSet::new(vec![0.9, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let total: f64 = (0..n)
            .map(|_| ms.draw_round(&[0], CollisionPolicy::SplitProbability, &mut rng).unwrap()[0])
            .sum();
        let sigma = (0.9f64 * 0.1 / n as f64).sqrt();
        assert!((total / n as f64 - 0.9).abs() < 3.0 * sigma);
    }

    #[test]
    fn classify_patterns() {
        let env = BernoulliEnv::new(MachineSet::canonical(), CollisionPolicy::default());
        assert!(matches!(env.classify(&[D, E, C]), OutcomeClass::SocialMaximum(_)));
        assert_eq!(env.classify(&[E, E, E]), OutcomeClass::NashEquilibrium);
        assert_eq!(env.classify(&[A, E, E]), OutcomeClass::Other);
        let mut ids: Vec<u32> = permutations(&[C, D, E])
            .iter()
            .map(|p| match env.classify(p) {
                OutcomeClass::SocialMaximum(id) => id,
                other => panic!("{other:?}"),
            })
            .collect();
        ids.sort();
        assert_eq!(ids, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn reference_points_of_canonical_game() {
        let env = BernoulliEnv::new(MachineSet::canonical(), CollisionPolicy::default());
        let pts = env.reference_points(3, 1000);
        assert_eq!(pts.len(), 7);
        let mut sm: Vec<Vec<i64>> = pts
            .iter()
            .filter(|p| matches!(p.class, OutcomeClass::SocialMaximum(_)))
            .map(|p| p.score.iter().map(|s| s.round() as i64).collect())
            .collect();
        sm.sort();
        assert_eq!(sm[0], vec![100, 200, 900]);
        assert_eq!(sm[5], vec![900, 200, 100]);
        let ne = pts.last().unwrap();
        assert_eq!(ne.class, OutcomeClass::NashEquilibrium);
        assert!(ne.score.iter().all(|s| (s - 300.0).abs() < 1e-9));
    }

    #[test]
    fn labels_round_trip() {
        assert_eq!(pattern_label(&[3, 4, 2]), "(D,E,C)");
        assert_eq!(parse_machine_label('e').unwrap(), 4);
        assert!(parse_machine_label('3').is_err());
    }
}
