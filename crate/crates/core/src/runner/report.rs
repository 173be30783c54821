use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_json;

use super::config::Experiment;

pub const REPORT_SCHEMA: &str = "magscat.report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 1e-10` or `in [1.7, 2.3]`.
    pub threshold: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub stage: String,
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    /// Runtime warnings (flagged runs, quality flags).
    pub flags: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(stage: &str, experiment: Option<Experiment>, seed: u64) -> Self {
        Report {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            stage: stage.into(),
            experiment,
            seed,
            metrics: BTreeMap::new(),
            criteria: Vec::new(),
            flags: Vec::new(),
            pass: true,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!("<= {limit:e}"), value <= limit);
    }

    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value));
    }

    /// Criterion that fails when `flagged` is set; value is the flagged count.
    pub fn unflagged(&mut self, name: &str, flagged: usize) {
        self.push(name, flagged as f64, "== 0".into(), flagged == 0);
    }

    fn push(&mut self, name: &str, value: f64, threshold: String, pass: bool) {
        self.pass &= pass;
        self.criteria.push(Criterion {
            name: name.into(),
            value,
            threshold,
            pass,
        });
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("report.json"), self)
    }

    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&format!(
                "{:<4} {:<32} {:>12.4e}  {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            ));
        }
        s
    }
}
