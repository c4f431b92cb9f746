//! Experiment orchestration: configuration, per-sample random streams,
//! parallel Monte Carlo and CSV output.

pub mod bp;
pub mod config;
pub mod rng;
pub mod run;

pub use bp::{run_bp, write_regret, BpLearner, RegretCurve};
pub use config::{EnvKind, ExperimentConfig, Learner};
pub use rng::{rng_stream, SampleRng};
pub use run::{
    build_environment, run_experiment, run_sweep, write_experiment, write_sweep,
    ExperimentResult, SweepRow,
};
