//! Machines paying real-valued rewards from `[0, R]`.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardDistribution {
    /// Uniform on `[mu - sqrt(3) sigma, mu + sqrt(3) sigma]`.
    #[default]
    UniformOnInterval,
    /// `N(mu, sigma^2)` conditioned on `[0, R]` by rejection.
    TruncatedGaussian,
}

impl RewardDistribution {
    pub fn token(self) -> &'static str {
        match self {
            RewardDistribution::UniformOnInterval => "uniform",
            RewardDistribution::TruncatedGaussian => "truncated-gaussian",
        }
    }
}

impl fmt::Display for RewardDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RewardDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RewardDistribution::UniformOnInterval),
            "truncated-gaussian" => Ok(RewardDistribution::TruncatedGaussian),
            other => Err(Error::input(format!(
                "unknown reward distribution {other:?} (expected uniform|truncated-gaussian)"
            ))),
        }
    }
}

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralRewardModel {
    means: Vec<f64>,
    variances: Vec<f64>,
    bound: f64,
    distribution: RewardDistribution,
}

impl GeneralRewardModel {
    pub fn new(
        means: Vec<f64>,
        variances: Vec<f64>,
        bound: f64,
        distribution: RewardDistribution,
    ) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::input(format!("reward bound must be positive, got {bound}")));
        }
        if means.len() < 2 || means.len() != variances.len() {
            return Err(Error::input(format!(
                "need matching means/variances for at least two machines ({} vs {})",
                means.len(),
                variances.len()
            )));
        }
        for (k, (&mu, &var)) in means.iter().zip(&variances).enumerate() {
            if !(0.0..=bound).contains(&mu) {
                return Err(Error::input(format!("mean {mu} of machine {k} outside [0, {bound}]")));
            }
            if !(var >= 0.0 && var.is_finite()) {
                return Err(Error::input(format!("variance {var} of machine {k} is invalid")));
            }
            if distribution == RewardDistribution::UniformOnInterval {
                let half = (3.0 * var).sqrt();
                if mu - half < 0.0 || mu + half > bound {
                    return Err(Error::input(format!(
                        "uniform interval [{}, {}] of machine {k} leaves [0, {bound}]",
                        mu - half,
                        mu + half
                    )));
                }
            }
        }
        Ok(Self {
            means,
            variances,
            bound,
            distribution,
        })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn distribution(&self) -> RewardDistribution {
        self.distribution
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// One reward from machine `k`; always inside `[0, R]`.
    pub fn sample(&self, k: usize, rng: &mut (impl RngCore + ?Sized)) -> Result<f64> {
        let (mu, var) = match (self.means.get(k), self.variances.get(k)) {
            (Some(&mu), Some(&var)) => (mu, var),
            _ => return Err(Error::input(format!("machine index {k} out of range"))),
        };
        if var == 0.0 {
            return Ok(mu);
        }
        let sigma = var.sqrt();
        let r = match self.distribution {
            RewardDistribution::UniformOnInterval => {
                let half = 3f64.sqrt() * sigma;
                Uniform::new_inclusive(mu - half, mu + half)
                    .map_err(|e| Error::input(e.to_string()))?
                    .sample(rng)
            }
            RewardDistribution::TruncatedGaussian => {
                let normal = Normal::new(mu, sigma).map_err(|e| Error::input(e.to_string()))?;
                let mut draw = normal.sample(rng);
                let mut tries = 0;
                while !(0.0..=self.bound).contains(&draw) && tries < MAX_REJECTIONS {
                    draw = normal.sample(rng);
                    tries += 1;
                }
                draw
            }
        };
        Ok(r.clamp(0.0, self.bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rewards_stay_in_bounds_and_match_moments() {
        let model = GeneralRewardModel::new(
            vec![0.6, 0.4],
            vec![0.02, 0.05],
            1.0,
            RewardDistribution::UniformOnInterval,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| model.sample(0, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|r| (0.0..=1.0).contains(r)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.6).abs() < 4.0 * (0.02f64 / n as f64).sqrt());
        assert!((var - 0.02).abs() < 0.002);
    }

    #[test]
    fn truncated_gaussian_stays_in_bounds() {
        let model = GeneralRewardModel::new(
            vec![0.95, 0.1],
            vec![0.04, 0.04],
            1.0,
            RewardDistribution::TruncatedGaussian,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 0..2 {
            for _ in 0..5_000 {
                let r = model.sample(k, &mut rng).unwrap();
                assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn rejects_inconsistent_models() {
        let uni = RewardDistribution::UniformOnInterval;
        assert!(GeneralRewardModel::new(vec![0.5, 1.5], vec![0.0, 0.0], 1.0, uni).is_err());
        assert!(GeneralRewardModel::new(vec![0.5, 0.5], vec![0.0], 1.0, uni).is_err());
        assert!(GeneralRewardModel::new(vec![0.5, 0.5], vec![0.0, 0.0], 0.0, uni).is_err());
        // sqrt(3 * 0.2) > 0.05: interval would leave [0, 1]
        assert!(GeneralRewardModel::new(vec![0.05, 0.5], vec![0.2, 0.0], 1.0, uni).is_err());
    }

    #[test]
    fn zero_variance_is_deterministic() {
        let model = GeneralRewardModel::new(
            vec![0.3, 0.7],
            vec![0.0, 0.0],
            2.0,
            RewardDistribution::TruncatedGaussian,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(model.sample(1, &mut rng).unwrap(), 0.7);
    }
}
