//! Configuration, ensemble orchestration and output files.

pub mod config;
pub mod experiment;

pub use config::{parse_config, SimulationConfig};
pub use experiment::{
    dump_realizations, run_experiment, simulate_ensemble, spatial_scatter, write_theory, EnsembleSummary,
};
