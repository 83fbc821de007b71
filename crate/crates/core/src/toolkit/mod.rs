//! Experiment harness, result export and the command-line front end.

pub mod cli;
pub mod experiment;
pub mod export;

pub use experiment::{fit_seed, run_experiment, run_experiment_on, CellSummary, ExperimentSpec, RunRecord, SweepResult};
pub use export::{
    export_blockmodel, write_metrics, write_phi, write_phi_by_class, write_pi, write_pi_summary, write_predictions,
    write_sweep, write_trace, ModelFile,
};
