//! Configuration, scenario orchestration and artifact persistence.

pub mod artifacts;
pub mod config;
pub mod scenarios;

use std::path::Path;

use serde_json::{json, Value};

pub use artifacts::{Criterion, Sink};
pub use config::{ExperimentConfig, InitialData, Options, Scenario};

use crate::error::{Error, Result};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const ACCEPTANCE: i32 = 3;
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Precondition(_)
        | Error::Parse { .. }
        | Error::GridMismatch { .. } => exit::CONFIG,
        Error::Numerical(_) | Error::Estimation(_) | Error::Io(_) | Error::Json(_) => exit::NUMERICAL,
    }
}

/// Everything a finished (or failed) run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub sink: Sink,
    pub failure: Option<Error>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.sink.criteria().iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        match &self.failure {
            Some(e) => exit_code(e),
            None if self.passed() => exit::SUCCESS,
            None => exit::ACCEPTANCE,
        }
    }
}

pub fn manifest(cfg: &ExperimentConfig) -> Value {
    json!({
        "program": "meanflow",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.scenario.name(),
        "initial": cfg.initial.label(),
        "config": cfg,
        "seed": cfg.seed,
    })
}

/// Runs one scenario. With `out`, artifacts are written as they are produced
/// and a failure record is added if the run aborts midway.
pub fn run_scenario(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut sink = match out {
        Some(dir) => Sink::on_disk(dir, &cfg.hash)?,
        None => Sink::in_memory(&cfg.hash),
    };
    let result = match cfg.scenario {
        Scenario::Estimators => scenarios::estimators(cfg, &mut sink),
        Scenario::BurgersDiffuse => scenarios::burgers_diffuse(cfg, &mut sink),
        Scenario::ReynoldsEuler => scenarios::reynolds_euler(cfg, &mut sink),
        Scenario::MeanfieldNs => scenarios::meanfield_ns(cfg, &mut sink),
        Scenario::Invariants => scenarios::invariants(cfg, &mut sink),
    };
    let failure = result.err();
    sink.finish(&manifest(cfg), failure.as_ref())?;
    Ok(RunOutcome { sink, failure })
}
