//! Config-driven front end: experiment descriptions in `key = value` form,
//! pipelines over the eigen, solver and conditions modules, and CSV/JSON
//! artifacts.

mod config;
mod run;

pub use config::{
    parse_config, Domain, ExperimentConfig, LoadSpec, NonlinearityChoice, Pipeline, Scalar, Tolerances,
};
pub use run::{build_load, build_mesh, build_nonlinearity, load_config, run, RunOutcome, Status};
