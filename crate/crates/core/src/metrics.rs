//! Scores, fairness, outcome classification and sample aggregates.

use std::fmt;

use crate::environment::Environment;
use crate::error::{Error, Result};

/// Where a run ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeClass {
    /// Players occupy a socially optimal joint selection; the id numbers the
    /// optimal patterns (1-based).
    SocialMaximum(u32),
    NashEquilibrium,
    Other,
}

impl OutcomeClass {
    pub fn token(self) -> String {
        match self {
            OutcomeClass::SocialMaximum(id) => format!("sm{id}"),
            OutcomeClass::NashEquilibrium => "ne".to_string(),
            OutcomeClass::Other => "other".to_string(),
        }
    }

    pub fn is_social_maximum(self) -> bool {
        matches!(self, OutcomeClass::SocialMaximum(_))
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// An expected score vector of an SM or NE state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub class: OutcomeClass,
    pub score: Vec<f64>,
}

/// Result of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub sample: usize,
    pub seed: u64,
    pub plays: usize,
    pub scores: Vec<f64>,
    /// `histogram[i][k]`: how often player `i` chose machine `k`.
    pub histogram: Vec<Vec<u64>>,
    /// Same counts restricted to the final classification window.
    pub window_histogram: Vec<Vec<u64>>,
    pub max_fluctuation: f64,
    pub outcome: OutcomeClass,
    pub fingerprint: String,
}

impl RunRecord {
    pub fn total_score(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn modal_machines(&self) -> Vec<usize> {
        modal_machines(&self.window_histogram)
    }
}

/// Mean absolute score difference over all unordered player pairs.
pub fn fairness(scores: &[f64]) -> Result<f64> {
    let m = scores.len();
    if m < 2 {
        return Err(Error::input("fairness needs at least two players"));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            total += (scores[i] - scores[j]).abs();
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}

/// Most frequent machine of each histogram row; ties go to the lower index.
pub fn modal_machines(histogram: &[Vec<u64>]) -> Vec<usize> {
    histogram
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, 0u64), |best, (k, &c)| if c > best.1 { (k, c) } else { best })
                .0
        })
        .collect()
}

/// Classifies a record by the modal machines of its final window.
pub fn classify_outcome(record: &RunRecord, env: &dyn Environment) -> OutcomeClass {
    env.classify(&record.modal_machines())
}

/// Records assigned to the nearest reference point, with their mean score.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub reference: ReferencePoint,
    pub count: usize,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub samples: usize,
    pub mean_total: f64,
    pub mean_fairness: f64,
    pub sm_freq: f64,
    pub ne_freq: f64,
    pub other_freq: f64,
    pub mean_max_fluct: f64,
    pub clusters: Vec<Cluster>,
}

/// Mean that does not depend on the order of its inputs.
fn order_free_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sample means, outcome frequencies and nearest-reference clusters.
pub fn aggregate(records: &[RunRecord], references: &[ReferencePoint]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::input("aggregate needs at least one record"));
    }
    let n = records.len() as f64;
    let count = |f: fn(OutcomeClass) -> bool| records.iter().filter(|r| f(r.outcome)).count();
    let sm = count(|c| c.is_social_maximum());
    let ne = count(|c| c == OutcomeClass::NashEquilibrium);
    let other = records.len() - sm - ne;

    let mut fair = Vec::with_capacity(records.len());
    for r in records {
        fair.push(if r.scores.len() >= 2 { fairness(&r.scores)? } else { 0.0 });
    }

    let mut members: Vec<Vec<&RunRecord>> = vec![Vec::new(); references.len()];
    for r in records {
        let nearest = references
            .iter()
            .enumerate()
            .filter(|(_, p)| p.score.len() == r.scores.len())
            .min_by(|(_, a), (_, b)| {
                squared_distance(&a.score, &r.scores).total_cmp(&squared_distance(&b.score, &r.scores))
            })
            .map(|(i, _)| i);
        if let Some(i) = nearest {
            members[i].push(r);
        }
    }
    let clusters = references
        .iter()
        .zip(members)
        .map(|(reference, rs)| {
            let dims = reference.score.len();
            let centroid = (0..dims)
                .map(|d| order_free_mean(rs.iter().map(|r| r.scores[d])))
                .collect();
            Cluster {
                reference: reference.clone(),
                count: rs.len(),
                centroid,
            }
        })
        .collect();

    Ok(Summary {
        samples: records.len(),
        mean_total: order_free_mean(records.iter().map(RunRecord::total_score)),
        mean_fairness: order_free_mean(fair),
        sm_freq: sm as f64 / n,
        ne_freq: ne as f64 / n,
        other_freq: other as f64 / n,
        mean_max_fluct: order_free_mean(records.iter().map(|r| r.max_fluctuation)),
        clusters,
    })
}

/// Cumulative regret `(P_A - P_B) N_B(t)` after every step of a two-machine
/// run, where B is the machine with the lower probability.
pub fn regret_curve(selections: &[usize], probs: [f64; 2]) -> Vec<f64> {
    let (worse, gap) = if probs[0] >= probs[1] {
        (1, probs[0] - probs[1])
    } else {
        (0, probs[1] - probs[0])
    };
    let mut n_b = 0u64;
    selections
        .iter()
        .map(|&k| {
            if k == worse {
                n_b += 1;
            }
            gap * n_b as f64
        })
        .collect()
}
