//! Seeded Monte Carlo over samples, amplitude sweeps and CSV output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{EnvKind, ExperimentConfig, Learner};
use super::rng::rng_stream;
use crate::baselines::{selfish_cbp_run, BaselineStrategy};
use crate::bombe::{run_episode, EpisodeConfig};
use crate::environment::{BernoulliEnv, EpdEnvironment, EpdTable, Environment, MachineSet};
use crate::error::{Error, Result};
use crate::fluctuations::{FluctuationKind, FluctuationSpec};
use crate::metrics::{aggregate, RunRecord, Summary};

/// Builds the environment a CBP config describes.
pub fn build_environment(cfg: &ExperimentConfig) -> Result<Box<dyn Environment>> {
    Ok(match cfg.env {
        EnvKind::Bernoulli => {
            if cfg.reward.is_some() {
                return Err(Error::config(
                    "real-valued rewards are only supported for single-player runs",
                ));
            }
            Box::new(BernoulliEnv::new(MachineSet::new(cfg.probs.clone())?, cfg.policy))
        }
        EnvKind::Epd => {
            let table = match &cfg.epd_table {
                Some(path) => EpdTable::load(path)?,
                None => EpdTable::bundled()?,
            };
            Box::new(EpdEnvironment::new(table))
        }
    })
}

/// Runs `f` on a pool of `workers` threads (all cores when zero).
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_one(
    cfg: &ExperimentConfig,
    env: &dyn Environment,
    fluct: &FluctuationSpec,
    sample: usize,
    fingerprint: &str,
) -> Result<RunRecord> {
    let mut rng = rng_stream(cfg.seed, sample as u64);
    let mut record = match cfg.learner {
        Learner::Bombe => {
            let episode = EpisodeConfig {
                bombe: cfg.bombe(),
                plays: cfg.plays,
                window: cfg.window,
            };
            run_episode(&episode, env, fluct, &mut rng)?
        }
        Learner::Selfish(kind) => {
            let mut players = (0..cfg.players)
                .map(|_| BaselineStrategy::new(kind, env.machines()))
                .collect::<Result<Vec<_>>>()?;
            selfish_cbp_run(&mut players, env, cfg.plays, cfg.window, &mut rng)?
        }
    };
    record.sample = sample;
    record.seed = cfg.seed;
    record.fingerprint = fingerprint.to_string();
    Ok(record)
}

/// Records in sample order plus their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

fn run_cell(
    cfg: &ExperimentConfig,
    env: &dyn Environment,
    fluct: &FluctuationSpec,
) -> Result<ExperimentResult> {
    let fingerprint = cfg.fingerprint();
    let records = (0..cfg.samples)
        .into_par_iter()
        .map(|s| run_one(cfg, env, fluct, s, &fingerprint))
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&records, &env.reference_points(cfg.players, cfg.plays))?;
    Ok(ExperimentResult { records, summary })
}

/// Runs every sample of `cfg`; sample `s` draws from stream `s` of the
/// master seed, so the result does not depend on `workers`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let env = build_environment(cfg)?;
    with_workers(cfg.workers, || run_cell(cfg, env.as_ref(), &cfg.fluct))?
}

/// One aggregate row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: FluctuationKind,
    pub amplitude: f64,
    pub summary: Summary,
}

/// One row per `(kind, amplitude)`, kinds outermost. Every cell reuses the
/// master seed, so cells differ only through the fluctuation.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let cells: Vec<FluctuationSpec> = cfg
        .sweep_kinds
        .iter()
        .flat_map(|&kind| {
            cfg.sweep_amplitudes.iter().map(move |&amplitude| FluctuationSpec {
                kind,
                amplitude,
                ..cfg.fluct
            })
        })
        .collect();
    for spec in &cells {
        spec.check_shape(cfg.players, cfg.machines())
            .map_err(|e| Error::config(e.to_string()))?;
    }
    let env = build_environment(cfg)?;
    with_workers(cfg.workers, || {
        cells
            .iter()
            .map(|spec| {
                let mut cell_cfg = cfg.clone();
                cell_cfg.fluct = *spec;
                let result = run_cell(&cell_cfg, env.as_ref(), spec)?;
                Ok(SweepRow {
                    kind: spec.kind,
                    amplitude: spec.amplitude,
                    summary: result.summary,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the config echo, then CSV rows.
fn write_csv(path: &Path, header: &str, rows: Vec<Vec<String>>) -> Result<()> {
    let mut file = create(path)?;
    file.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.write_record(&row).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn score_text(value: f64, integral: bool) -> String {
    if integral {
        format!("{value:.0}")
    } else {
        format!("{value:.6}")
    }
}

fn summary_columns() -> Vec<String> {
    [
        "kind", "A", "D", "omega_mode", "samples", "plays", "mean_total", "mean_fairness",
        "sm_freq", "ne_freq", "other_freq", "mean_max_fluct",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn summary_row(cfg: &ExperimentConfig, fluct: &FluctuationSpec, s: &Summary) -> Vec<String> {
    vec![
        fluct.kind.to_string(),
        fluct.amplitude.to_string(),
        fluct.depth.to_string(),
        cfg.omega.to_string(),
        s.samples.to_string(),
        cfg.plays.to_string(),
        format!("{:.6}", s.mean_total),
        format!("{:.6}", s.mean_fairness),
        format!("{:.6}", s.sm_freq),
        format!("{:.6}", s.ne_freq),
        format!("{:.6}", s.other_freq),
        format!("{:.6}", s.mean_max_fluct),
    ]
}

/// Writes `records.csv`, `summary.csv` and `clusters.csv` into `dir` and
/// returns their paths.
pub fn write_experiment(
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let header = cfg.header();
    let integral = build_environment(cfg)?.integral_scores();
    let m = cfg.players;

    let mut columns = vec!["sample".to_string(), "seed".to_string()];
    columns.extend((1..=m).map(|i| format!("score_{i}")));
    columns.extend(["outcome".to_string(), "max_fluct".to_string()]);
    let mut rows = vec![columns];
    for r in &result.records {
        let mut row = vec![r.sample.to_string(), r.seed.to_string()];
        row.extend(r.scores.iter().map(|&s| score_text(s, integral)));
        row.push(r.outcome.to_string());
        row.push(format!("{:.6}", r.max_fluctuation));
        rows.push(row);
    }
    let records = dir.join("records.csv");
    write_csv(&records, &header, rows)?;

    let summary = dir.join("summary.csv");
    write_csv(
        &summary,
        &header,
        vec![summary_columns(), summary_row(cfg, &cfg.fluct, &result.summary)],
    )?;

    let mut columns = vec!["class".to_string(), "count".to_string()];
    columns.extend((1..=m).map(|i| format!("reference_{i}")));
    columns.extend((1..=m).map(|i| format!("centroid_{i}")));
    let mut rows = vec![columns];
    for c in &result.summary.clusters {
        let mut row = vec![c.reference.class.to_string(), c.count.to_string()];
        row.extend(c.reference.score.iter().map(|v| format!("{v:.6}")));
        row.extend(c.centroid.iter().map(|v| format!("{v:.6}")));
        rows.push(row);
    }
    let clusters = dir.join("clusters.csv");
    write_csv(&clusters, &header, rows)?;
    Ok(vec![records, summary, clusters])
}

/// Writes `sweep.csv` into `dir`.
pub fn write_sweep(cfg: &ExperimentConfig, rows: &[SweepRow], dir: &Path) -> Result<PathBuf> {
    let mut out = vec![summary_columns()];
    for row in rows {
        let spec = FluctuationSpec {
            kind: row.kind,
            amplitude: row.amplitude,
            ..cfg.fluct
        };
        out.push(summary_row(cfg, &spec, &row.summary));
    }
    let path = dir.join("sweep.csv");
    write_csv(&path, &cfg.header(), out)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tow::OmegaMode;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            samples: 6,
            plays: 200,
            omega: OmegaMode::Fixed(0.08),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let mut cfg = small();
        cfg.workers = 1;
        let a = run_experiment(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.sample == i));
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let mut cfg = small();
        cfg.samples = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn general_rewards_are_refused_for_cbp() {
        let mut cfg = small();
        cfg.reward = Some(crate::environment::RewardDistribution::UniformOnInterval);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_rows_follow_the_grid() {
        let mut cfg = small();
        cfg.samples = 3;
        cfg.sweep_amplitudes = vec![0.0, 2.0];
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        // zero amplitude switches every kind off
        assert_eq!(rows[0].summary, rows[2].summary);
        assert_eq!(rows[0].summary, rows[4].summary);
        assert_eq!(rows[1].kind, FluctuationKind::InternalFixed);
        assert_eq!(rows[1].amplitude, 2.0);
    }

    #[test]
    fn selfish_learners_run_through_the_harness() {
        let mut cfg = small();
        cfg.learner = "ucb1-tuned".parse().unwrap();
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.records.len(), 6);
        assert!(res.records.iter().all(|r| r.max_fluctuation == 0.0));
    }
}
