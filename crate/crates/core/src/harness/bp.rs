//! Single-player two-machine runs: TOW next to the configured baselines,
//! summarized as sample-mean regret curves.
//!
//! TOW's `delta` is drawn uniformly from `[-A, A]` each step (`A` is the
//! fluctuation amplitude; zero when the fluctuation kind is `none`).

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::rng::rng_stream;
use super::run::with_workers;
use crate::baselines::{BaselineKind, BaselineStrategy};
use crate::environment::{GeneralRewardModel, MachineSet};
use crate::error::{Error, Result};
use crate::fluctuations::FluctuationKind;
use crate::tow::{gamma_star, GeneralTowState, TowState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BpLearner {
    Tow,
    Baseline(BaselineKind),
}

impl std::fmt::Display for BpLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BpLearner::Tow => f.write_str("tow"),
            BpLearner::Baseline(k) => k.fmt(f),
        }
    }
}

enum Rewards {
    Bernoulli(MachineSet),
    General(GeneralRewardModel),
}

impl Rewards {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.probs.len() != 2 {
            return Err(Error::config(format!(
                "single-player runs use two machines, got {}",
                cfg.probs.len()
            )));
        }
        Ok(match cfg.reward {
            None => Rewards::Bernoulli(MachineSet::new(cfg.probs.clone())?),
            Some(dist) => Rewards::General(GeneralRewardModel::new(
                cfg.probs.clone(),
                cfg.variances.clone(),
                cfg.bound,
                dist,
            )?),
        })
    }

    fn draw(&self, k: usize, rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            Rewards::Bernoulli(m) => Ok(if rng.random::<f64>() < m.probs()[k] { 1.0 } else { 0.0 }),
            Rewards::General(g) => g.sample(k, rng),
        }
    }
}

/// Plays of the worse machine after every step, for one run.
fn worse_plays(
    cfg: &ExperimentConfig,
    rewards: &Rewards,
    learner: BpLearner,
    worse: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<u32>> {
    let steps = cfg.plays;
    let amplitude = if cfg.fluct.kind == FluctuationKind::None {
        0.0
    } else {
        cfg.fluct.amplitude
    };
    let delta = |rng: &mut dyn RngCore| {
        if amplitude > 0.0 {
            rng.random_range(-amplitude..=amplitude)
        } else {
            0.0
        }
    };
    let mut out = Vec::with_capacity(steps);
    let mut count = 0u32;
    let mut record = |k: usize, out: &mut Vec<u32>| {
        if k == worse {
            count += 1;
        }
        out.push(count);
    };
    match (learner, rewards) {
        (BpLearner::Tow, Rewards::Bernoulli(_)) => {
            let mut tow = TowState::new(2, cfg.omega)?.with_prior(cfg.prior);
            for _ in 0..steps {
                let d = delta(rng);
                let k = tow.select(d, rng)?;
                let r = rewards.draw(k, rng)?;
                tow.update(k, r > 0.0)?;
                record(k, &mut out);
            }
        }
        (BpLearner::Tow, Rewards::General(g)) => {
            let means = g.means();
            let mut tow = GeneralTowState::new(2, gamma_star(means[0], means[1]), g.bound())?;
            for _ in 0..steps {
                let d = delta(rng);
                let k = tow.select(d, rng)?;
                let r = rewards.draw(k, rng)?;
                tow.update(k, r)?;
                record(k, &mut out);
            }
        }
        (BpLearner::Baseline(kind), _) => {
            let mut s = BaselineStrategy::new(kind, 2)?;
            for t in 1..=steps {
                let k = s.select(t as u64, rng)?;
                let r = rewards.draw(k, rng)?;
                s.observe(k, r)?;
                record(k, &mut out);
            }
        }
    }
    Ok(out)
}

/// Sample-mean cumulative regret of one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub learner: BpLearner,
    /// `regret[t]` is the mean regret after `t + 1` steps.
    pub regret: Vec<f64>,
}

/// Runs `samples` runs of `plays` steps for TOW and every baseline. Run `s`
/// of learner `l` draws from stream `l * samples + s`.
pub fn run_bp(cfg: &ExperimentConfig) -> Result<Vec<RegretCurve>> {
    if cfg.plays == 0 || cfg.samples == 0 {
        return Err(Error::config("plays and samples must be at least 1"));
    }
    cfg.fluct.validate().map_err(|e| Error::config(e.to_string()))?;
    let rewards = Rewards::from_config(cfg).map_err(|e| match e {
        Error::Input(m) | Error::Domain(m) => Error::config(m),
        other => other,
    })?;
    let (worse, gap) = if cfg.probs[0] >= cfg.probs[1] {
        (1, cfg.probs[0] - cfg.probs[1])
    } else {
        (0, cfg.probs[1] - cfg.probs[0])
    };
    let learners: Vec<BpLearner> = std::iter::once(BpLearner::Tow)
        .chain(cfg.baselines.iter().map(|&k| BpLearner::Baseline(k)))
        .collect();

    with_workers(cfg.workers, || {
        learners
            .iter()
            .enumerate()
            .map(|(l, &learner)| {
                // integer sums keep the mean independent of scheduling
                let totals = (0..cfg.samples)
                    .into_par_iter()
                    .map(|s| {
                        let mut rng = rng_stream(cfg.seed, (l * cfg.samples + s) as u64);
                        worse_plays(cfg, &rewards, learner, worse, &mut rng)
                    })
                    .try_fold(
                        || vec![0u64; cfg.plays],
                        |mut acc, run| {
                            for (a, c) in acc.iter_mut().zip(run?) {
                                *a += c as u64;
                            }
                            Ok::<_, Error>(acc)
                        },
                    )
                    .try_reduce(
                        || vec![0u64; cfg.plays],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                            Ok(a)
                        },
                    )?;
                let n = cfg.samples as f64;
                Ok(RegretCurve {
                    learner,
                    regret: totals.iter().map(|&c| gap * c as f64 / n).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Writes `regret.csv` (`step,<learner>...`) into `dir`.
pub fn write_regret(cfg: &ExperimentConfig, curves: &[RegretCurve], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("regret.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut file = std::io::BufWriter::new(file);
    std::io::Write::write_all(&mut file, cfg.header().as_bytes()).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |source| Error::Csv {
        path: path.clone(),
        source,
    };
    let mut columns = vec!["step".to_string()];
    columns.extend(curves.iter().map(|c| c.learner.to_string()));
    w.write_record(&columns).map_err(csv_err)?;
    for t in 0..cfg.plays {
        let mut row = vec![(t + 1).to_string()];
        row.extend(curves.iter().map(|c| format!("{:.6}", c.regret[t])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RewardDistribution;
    use crate::tow::{omega0, OmegaMode};

    fn two_armed() -> ExperimentConfig {
        ExperimentConfig {
            probs: vec![0.9, 0.2],
            players: 1,
            samples: 50,
            plays: 400,
            omega: OmegaMode::Fixed(omega0(1.1).unwrap()),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn regret_is_nondecreasing_and_bounded() {
        let mut cfg = two_armed();
        cfg.baselines = vec![BaselineKind::Ucb1Tuned];
        let curves = run_bp(&cfg).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            assert_eq!(c.regret.len(), 400);
            assert!(c.regret.windows(2).all(|w| w[1] >= w[0]));
            for (t, r) in c.regret.iter().enumerate() {
                assert!(*r <= 0.7 * (t + 1) as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn independent_of_workers() {
        let mut cfg = two_armed();
        cfg.workers = 1;
        let a = run_bp(&cfg).unwrap();
        cfg.workers = 4;
        assert_eq!(a, run_bp(&cfg).unwrap());
    }

    #[test]
    fn general_rewards_are_accepted() {
        let mut cfg = two_armed();
        cfg.probs = vec![0.6, 0.4];
        cfg.variances = vec![0.01, 0.01];
        cfg.reward = Some(RewardDistribution::UniformOnInterval);
        let curves = run_bp(&cfg).unwrap();
        let last = *curves[0].regret.last().unwrap();
        assert!(last < 0.2 * 400.0 / 2.0, "regret {last}");
    }

    #[test]
    fn three_machines_are_rejected() {
        let mut cfg = two_armed();
        cfg.probs = vec![0.1, 0.2, 0.3];
        assert!(matches!(run_bp(&cfg), Err(Error::Config(_))));
    }
}
