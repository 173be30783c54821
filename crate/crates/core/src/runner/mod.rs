//! Configuration-driven orchestration: stages, named experiments, invariant suite.

pub mod config;
pub mod report;
pub mod stages;
pub mod verify;

use std::path::Path;

use log::info;

use crate::error::{Error, Result};

pub use config::{Experiment, ScenarioConfig, Stage};
pub use report::Report;

/// Runs `stage` on `cfg` inside a pool of `workers` threads and writes `report.json`.
pub fn run_stage(cfg: &ScenarioConfig, stage: Stage, out: &Path, workers: Option<usize>) -> Result<Report> {
    if let Some(e) = cfg.experiment {
        if e.stage() != stage {
            return Err(Error::Config {
                path: "experiment".into(),
                reason: format!("{e} runs under `{}`, not `{}`", e.stage().name(), stage.name()),
            });
        }
    }
    std::fs::create_dir_all(out)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config {
            path: "workers".into(),
            reason: e.to_string(),
        })?;
    info!("{} with {} workers into {}", stage.name(), pool.current_num_threads(), out.display());
    let report = pool.install(|| match stage {
        Stage::Simulate => stages::simulate(cfg, out),
        Stage::Scatter => stages::scatter(cfg, out),
        Stage::Smallamp => stages::smallamp(cfg, out),
        Stage::Probe => stages::probe(cfg, out),
        Stage::Reconstruct => stages::reconstruct(cfg, out),
    })?;
    crate::io::write_json(&out.join("config.json"), cfg)?;
    report.write(out)?;
    Ok(report)
}
