pub mod config;
pub mod converge;
pub mod pipeline;
pub mod suite;

pub use config::{ExperimentConfig, MethodChoice, PotentialSource, Tolerances};
pub use converge::{converge_table, run_converge, write_converge_csv, ConvergeReport};
pub use pipeline::{generate_samples, recover_samples, write_recovered_csv, Experiment, RecoveredRow};
pub use suite::{run_suite, suite_table, SuiteSummary};
