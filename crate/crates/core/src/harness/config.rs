//! Experiment configuration: defaults, the `key = value` file format and the
//! resolved-config echo written into every output file.
//!
//! ```text
//! [environment]
//! probs = 0.03, 0.05, 0.1, 0.2, 0.9
//! players = 3
//!
//! [fluctuation]
//! kind = random
//! amplitude = 1
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::baselines::BaselineKind;
use crate::bombe::CollisionReward;
use crate::environment::general::RewardDistribution;
use crate::environment::{CollisionPolicy, CANONICAL_PROBS};
use crate::error::{Error, Result};
use crate::fluctuations::{FluctuationKind, FluctuationSpec, DEFAULT_DEPTH};
use crate::tow::{OmegaMode, PriorRule};

pub const DEFAULT_PLAYERS: usize = 3;
pub const DEFAULT_PLAYS: usize = 1000;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_AMPLITUDE: f64 = 1.0;
pub const DEFAULT_SWEEP_AMPLITUDES: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_SWEEP_KINDS: [FluctuationKind; 3] = [
    FluctuationKind::InternalFixed,
    FluctuationKind::InternalRandom,
    FluctuationKind::ExternalOscillation,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvKind {
    #[default]
    Bernoulli,
    Epd,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Bernoulli => "bernoulli",
            EnvKind::Epd => "epd",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(EnvKind::Bernoulli),
            "epd" => Ok(EnvKind::Epd),
            other => Err(Error::config(format!(
                "unknown environment {other:?} (expected bernoulli|epd)"
            ))),
        }
    }
}

/// Who plays a CBP run: the coupled bombe or independent selfish learners.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Learner {
    #[default]
    Bombe,
    Selfish(BaselineKind),
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Learner::Bombe => f.write_str("bombe"),
            Learner::Selfish(k) => k.fmt(f),
        }
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bombe" {
            Ok(Learner::Bombe)
        } else {
            Ok(Learner::Selfish(s.parse()?))
        }
    }
}

/// Everything a run depends on. `workers` and `out` only affect scheduling
/// and placement, never results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Machine probabilities; the reward means when `reward` is set.
    pub probs: Vec<f64>,
    pub policy: CollisionPolicy,
    /// Replacement EPD table; the bundled one when unset.
    pub epd_table: Option<PathBuf>,
    /// Real-valued rewards (single-player runs only); Bernoulli when unset.
    pub reward: Option<RewardDistribution>,
    pub variances: Vec<f64>,
    pub bound: f64,
    pub players: usize,
    pub plays: usize,
    pub samples: usize,
    pub omega: OmegaMode,
    pub prior: PriorRule,
    pub coupling: bool,
    pub collision_reward: CollisionReward,
    pub window: usize,
    pub seed: u64,
    pub learner: Learner,
    /// Comparators run next to TOW in single-player runs.
    pub baselines: Vec<BaselineKind>,
    pub fluct: FluctuationSpec,
    pub sweep_kinds: Vec<FluctuationKind>,
    pub sweep_amplitudes: Vec<f64>,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Bernoulli,
            probs: CANONICAL_PROBS.to_vec(),
            policy: CollisionPolicy::default(),
            epd_table: None,
            reward: None,
            variances: Vec::new(),
            bound: 1.0,
            players: DEFAULT_PLAYERS,
            plays: DEFAULT_PLAYS,
            samples: DEFAULT_SAMPLES,
            omega: OmegaMode::Adaptive,
            prior: PriorRule::default(),
            coupling: true,
            collision_reward: CollisionReward::default(),
            window: DEFAULT_WINDOW,
            seed: DEFAULT_SEED,
            learner: Learner::Bombe,
            baselines: Vec::new(),
            fluct: FluctuationSpec {
                kind: FluctuationKind::InternalRandom,
                amplitude: DEFAULT_AMPLITUDE,
                depth: DEFAULT_DEPTH,
                generalized: false,
            },
            sweep_kinds: DEFAULT_SWEEP_KINDS.to_vec(),
            sweep_amplitudes: DEFAULT_SWEEP_AMPLITUDES.to_vec(),
            workers: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::config(format!("bad {what} entry {s:?}"))))
        .collect()
}

fn parse_one<T: FromStr>(value: &str, what: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("bad value {value:?} for {what}")))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Every accepted `section.key`.
pub const KEYS: [&str; 26] = [
    "environment.kind",
    "environment.probs",
    "environment.policy",
    "environment.epd_table",
    "environment.reward",
    "environment.variances",
    "environment.bound",
    "environment.players",
    "dynamics.plays",
    "dynamics.samples",
    "dynamics.omega",
    "dynamics.prior",
    "dynamics.coupling",
    "dynamics.collision_reward",
    "dynamics.window",
    "dynamics.seed",
    "dynamics.learner",
    "dynamics.baselines",
    "fluctuation.kind",
    "fluctuation.amplitude",
    "fluctuation.depth",
    "fluctuation.generalized",
    "fluctuation.sweep_kinds",
    "fluctuation.sweep_amplitudes",
    "output.dir",
    "output.workers",
];

impl ExperimentConfig {
    /// Sets one `section.key`; the same entry point serves files and flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let typed = |e: Error| match e {
            Error::Input(m) | Error::Domain(m) => Error::config(format!("{key}: {m}")),
            other => other,
        };
        match key {
            "environment.kind" => self.env = v.parse()?,
            "environment.probs" => self.probs = parse_list(v, key)?,
            "environment.policy" => self.policy = v.parse().map_err(typed)?,
            "environment.epd_table" => {
                self.epd_table = if v.is_empty() { None } else { Some(PathBuf::from(v)) }
            }
            "environment.reward" => {
                self.reward = match v {
                    "bernoulli" => None,
                    other => Some(other.parse().map_err(typed)?),
                }
            }
            "environment.variances" => self.variances = parse_list(v, key)?,
            "environment.bound" => self.bound = parse_one(v, key)?,
            "environment.players" => self.players = parse_one(v, key)?,
            "dynamics.plays" => self.plays = parse_one(v, key)?,
            "dynamics.samples" => self.samples = parse_one(v, key)?,
            "dynamics.omega" => self.omega = v.parse().map_err(typed)?,
            "dynamics.prior" => self.prior = v.parse().map_err(typed)?,
            "dynamics.coupling" => self.coupling = parse_one(v, key)?,
            "dynamics.collision_reward" => self.collision_reward = v.parse().map_err(typed)?,
            "dynamics.window" => self.window = parse_one(v, key)?,
            "dynamics.seed" => self.seed = parse_one(v, key)?,
            "dynamics.learner" => self.learner = v.parse().map_err(typed)?,
            "dynamics.baselines" => {
                self.baselines = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(typed))
                    .collect::<Result<_>>()?
            }
            "fluctuation.kind" => self.fluct.kind = v.parse().map_err(typed)?,
            "fluctuation.amplitude" => self.fluct.amplitude = parse_one(v, key)?,
            "fluctuation.depth" => self.fluct.depth = parse_one(v, key)?,
            "fluctuation.generalized" => self.fluct.generalized = parse_one(v, key)?,
            "fluctuation.sweep_kinds" => {
                self.sweep_kinds = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(typed))
                    .collect::<Result<_>>()?
            }
            "fluctuation.sweep_amplitudes" => self.sweep_amplitudes = parse_list(v, key)?,
            "output.dir" => self.out = PathBuf::from(v),
            "output.workers" => self.workers = parse_one(v, key)?,
            other => return Err(Error::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every entry of a config file on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let Some(section) = section else {
                    return Err(Error::config(format!("key {key:?} outside any section")));
                };
                self.set(&format!("{section}.{key}"), value)?;
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn machines(&self) -> usize {
        match self.env {
            EnvKind::Bernoulli => self.probs.len(),
            EnvKind::Epd => crate::environment::epd::OPTIONS,
        }
    }

    /// Checks everything a CBP experiment needs before any sample runs.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.plays == 0 {
            return fail("plays must be at least 1".into());
        }
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.env == EnvKind::Bernoulli {
            if self.probs.len() < 2 || self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return fail(format!("probs must hold >= 2 values in [0, 1], got {:?}", self.probs));
            }
        } else if self.players != crate::environment::epd::PLAYERS {
            return fail(format!("the EPD game has 3 players, got {}", self.players));
        }
        if self.players == 0 {
            return fail("players must be at least 1".into());
        }
        if let OmegaMode::Fixed(w) = self.omega {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(format!("omega must be finite and >= 0, got {w}"));
            }
        }
        self.fluct.validate().map_err(|e| Error::config(e.to_string()))?;
        if self.sweep_kinds.is_empty() || self.sweep_amplitudes.is_empty() {
            return fail("sweep lists must not be empty".into());
        }
        if self.sweep_amplitudes.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return fail("sweep amplitudes must be finite and >= 0".into());
        }
        if let Learner::Bombe = self.learner {
            self.bombe().validate().map_err(|e| Error::config(e.to_string()))?;
            self.fluct
                .check_shape(self.players, self.machines())
                .map_err(|e| Error::config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn bombe(&self) -> crate::bombe::BombeConfig {
        crate::bombe::BombeConfig {
            players: self.players,
            machines: self.machines(),
            omega: self.omega,
            prior: self.prior,
            coupling: self.coupling,
            collision_reward: self.collision_reward,
        }
    }

    /// The complete resolved configuration, one `(key, value)` per entry.
    pub fn echo(&self) -> Vec<(String, String)> {
        let reward = self.reward.map_or("bernoulli".to_string(), |r| r.to_string());
        let table = self
            .epd_table
            .as_ref()
            .map_or(String::new(), |p| p.display().to_string());
        let entries: Vec<(&str, String)> = vec![
            ("environment.kind", self.env.to_string()),
            ("environment.probs", join(&self.probs)),
            ("environment.policy", self.policy.to_string()),
            ("environment.epd_table", table),
            ("environment.reward", reward),
            ("environment.variances", join(&self.variances)),
            ("environment.bound", self.bound.to_string()),
            ("environment.players", self.players.to_string()),
            ("dynamics.plays", self.plays.to_string()),
            ("dynamics.samples", self.samples.to_string()),
            ("dynamics.omega", self.omega.to_string()),
            ("dynamics.prior", self.prior.to_string()),
            ("dynamics.coupling", self.coupling.to_string()),
            ("dynamics.collision_reward", self.collision_reward.to_string()),
            ("dynamics.window", self.window.to_string()),
            ("dynamics.seed", self.seed.to_string()),
            ("dynamics.learner", self.learner.to_string()),
            ("dynamics.baselines", join(&self.baselines)),
            ("fluctuation.kind", self.fluct.kind.to_string()),
            ("fluctuation.amplitude", self.fluct.amplitude.to_string()),
            ("fluctuation.depth", self.fluct.depth.to_string()),
            ("fluctuation.generalized", self.fluct.generalized.to_string()),
            ("fluctuation.sweep_kinds", join(&self.sweep_kinds)),
            ("fluctuation.sweep_amplitudes", join(&self.sweep_amplitudes)),
            ("output.dir", self.out.display().to_string()),
            ("output.workers", self.workers.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Short hash of every result-relevant entry.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.echo() {
            if k.starts_with("output.") {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Echo lines in the `# key = value` form that heads every output file.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.echo() {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# fingerprint = {}\n", self.fingerprint()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_canonical_experiment() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.probs, vec![0.03, 0.05, 0.1, 0.2, 0.9]);
        assert_eq!((cfg.players, cfg.machines()), (3, 5));
        assert_eq!((cfg.plays, cfg.samples, cfg.window), (1000, 1000, 100));
        assert_eq!(cfg.fluct.depth, 10);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn file_overrides_defaults() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str(
            "[environment]\nprobs = 0.9, 0.2\nplayers = 1\n\n[dynamics]\nomega = 0.5\nsamples = 7\n\
             [fluctuation]\nkind = external\n[output]\ndir = /tmp/x\n",
        )
        .unwrap();
        assert_eq!(cfg.probs, vec![0.9, 0.2]);
        assert_eq!(cfg.omega, OmegaMode::Fixed(0.5));
        assert_eq!(cfg.samples, 7);
        assert_eq!(cfg.fluct.kind, FluctuationKind::ExternalOscillation);
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.apply_str("[dynamics]\nspeed = 3\n"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_str("[weather]\nplays = 3\n"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_str("plays = 3\n"), Err(Error::Config(_))));
        assert!(cfg.apply_str("[dynamics]\nplays = many\n").is_err());
        assert!(cfg.apply_str("[fluctuation]\nkind = wobble\n").is_err());
    }

    #[test]
    fn validation_rejects_empty_runs() {
        let mut cfg = ExperimentConfig::default();
        cfg.plays = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.samples = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.players = 5;
        cfg.fluct.kind = FluctuationKind::InternalMRandom;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.omega = OmegaMode::Fixed(0.08);
        cfg.baselines = vec![BaselineKind::Ucb1Tuned, BaselineKind::Softmax(0.2)];
        cfg.reward = Some(RewardDistribution::TruncatedGaussian);
        cfg.epd_table = Some(PathBuf::from("t.csv"));
        let mut back = ExperimentConfig::default();
        for (k, v) in cfg.echo() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
        assert_eq!(back.fingerprint(), cfg.fingerprint());
        assert_eq!(cfg.echo().iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>(), KEYS);
    }

    #[test]
    fn fingerprint_ignores_placement() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.workers = 4;
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
