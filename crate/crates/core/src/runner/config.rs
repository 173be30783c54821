//! Scenario configuration: one JSON file with a block per stage.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::potential::{build_potentials, PotentialDescriptor};
use crate::probe::{ProbeTarget, StabilityAudit};
use crate::scattering::ScatterMode;
use crate::tomography::Source;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

impl From<GridBlock> for GridShape {
    fn from(g: GridBlock) -> Self {
        GridShape {
            n: g.n,
            points: g.points,
            half_width: g.half_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Length of the `simulate` run.
    #[serde(rename = "T", default = "d_t")]
    pub t_final: f64,
    /// Scattering horizon; chosen from the packet's exit time when absent.
    #[serde(rename = "T_scat", default)]
    pub t_scat: Option<f64>,
    #[serde(default = "yes")]
    pub nonlinear: bool,
    /// Scattering map used by `scatter`.
    #[serde(default = "d_mode")]
    pub mode: ScatterMode,
    /// Checkpoint and conservation-row stride in steps.
    #[serde(default = "d_stride")]
    pub stride: usize,
}

fn d_p() -> f64 {
    3.0
}
fn d_dt() -> f64 {
    1e-3
}
fn d_t() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn d_mode() -> ScatterMode {
    ScatterMode::Linear
}
fn d_stride() -> usize {
    100
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        DynamicsBlock {
            p: d_p(),
            dt: d_dt(),
            t_final: d_t(),
            t_scat: None,
            nonlinear: true,
            mode: d_mode(),
            stride: d_stride(),
        }
    }
}

/// Gaussian initial state `amplitude * exp(-|x - center|^2 / (2 sigma^2) + i k0.x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub k0: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock {
            center: Vec::new(),
            sigma: 1.0,
            k0: Vec::new(),
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesBlock {
    #[serde(default = "d_angles")]
    pub angles: usize,
    #[serde(default = "d_offsets")]
    pub offsets: usize,
    /// Offsets cover `[-half_range, half_range]`; defaults to the potential's reach.
    #[serde(default)]
    pub half_range: Option<f64>,
    #[serde(default = "d_xi")]
    pub xi_ladder: Vec<f64>,
    /// Amplitudes for the small-amplitude sweep; derived from `delta` when absent.
    #[serde(default)]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(default = "d_delta")]
    pub delta: f64,
    /// Number of test functions paired against the initial state in `smallamp`.
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    /// Envelope width; defaults to 0.4 times the smallest bump width.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "d_probe_dt")]
    pub dt: f64,
    /// Moving-frame grid used for each probe.
    #[serde(default = "d_frame")]
    pub frame: GridBlock,
    #[serde(default = "d_source")]
    pub source: Source,
    #[serde(default = "d_target")]
    pub target: ProbeTarget,
    #[serde(default = "d_audit")]
    pub audit: StabilityAudit,
}

fn d_angles() -> usize {
    16
}
fn d_offsets() -> usize {
    65
}
fn d_xi() -> Vec<f64> {
    vec![8.0, 16.0, 32.0]
}
fn d_delta() -> f64 {
    0.05
}
fn d_pairs() -> usize {
    5
}
fn d_probe_dt() -> f64 {
    4e-3
}
fn d_frame() -> GridBlock {
    GridBlock {
        n: 2,
        points: 64,
        half_width: 8.0,
    }
}
fn d_source() -> Source {
    Source::Scattering
}
fn d_target() -> ProbeTarget {
    ProbeTarget::ATangential
}
fn d_audit() -> StabilityAudit {
    StabilityAudit::Central
}

impl Default for ProbesBlock {
    fn default() -> Self {
        ProbesBlock {
            angles: d_angles(),
            offsets: d_offsets(),
            half_range: None,
            xi_ladder: d_xi(),
            eps_ladder: None,
            delta: d_delta(),
            pairs: d_pairs(),
            sigma: None,
            dt: d_probe_dt(),
            frame: d_frame(),
            source: d_source(),
            target: d_target(),
            audit: d_audit(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructBlock {
    /// Output grid; the scenario grid when absent.
    #[serde(default)]
    pub grid: Option<GridBlock>,
    /// Also reconstruct each Cartesian component of `A` from oracle data.
    #[serde(default)]
    pub literal: bool,
    /// Scale that a pure-gauge reconstruction of `B` is compared against.
    #[serde(default)]
    pub reference_scale: Option<f64>,
}

/// Named experiment pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Zero potential: the linear scattering map must be the identity.
    FreeIdentity,
    /// Small-amplitude sweep with fitted residual order.
    #[serde(alias = "thm13_sweep")]
    AmplitudeSweep,
    /// Tangential probes, B-field recovery.
    #[serde(alias = "cor14_reconstruct")]
    MagneticReconstruct,
    /// Magnetic and electric recovery from separate probe passes.
    #[serde(alias = "cor16_joint")]
    JointReconstruct,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::FreeIdentity,
        Experiment::AmplitudeSweep,
        Experiment::MagneticReconstruct,
        Experiment::JointReconstruct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FreeIdentity => "free_identity",
            Experiment::AmplitudeSweep => "amplitude_sweep",
            Experiment::MagneticReconstruct => "magnetic_reconstruct",
            Experiment::JointReconstruct => "joint_reconstruct",
        }
    }

    /// Subcommand that runs this experiment.
    pub fn stage(self) -> Stage {
        match self {
            Experiment::FreeIdentity => Stage::Scatter,
            Experiment::AmplitudeSweep => Stage::Smallamp,
            Experiment::MagneticReconstruct | Experiment::JointReconstruct => Stage::Reconstruct,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| Error::Config {
            path: "experiment".into(),
            reason: format!(
                "unknown experiment `{s}`; expected one of {}",
                Experiment::ALL.map(Experiment::name).join(", ")
            ),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Scatter,
    Smallamp,
    Probe,
    Reconstruct,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Scatter => "scatter",
            Stage::Smallamp => "smallamp",
            Stage::Probe => "probe",
            Stage::Reconstruct => "reconstruct",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridBlock,
    #[serde(default)]
    pub potential: PotentialDescriptor,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub probes: ProbesBlock,
    #[serde(default)]
    pub reconstruct: ReconstructBlock,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "d_output")]
    pub output: PathBuf,
    /// Seeds randomized property suites only.
    #[serde(default)]
    pub seed: u64,
}

fn d_output() -> PathBuf {
    PathBuf::from("magscat-out")
}

fn cfg_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parses and validates; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid_shape(&self) -> GridShape {
        self.grid.into()
    }

    /// Envelope width for probes.
    pub fn probe_sigma(&self) -> f64 {
        self.probes
            .sigma
            .unwrap_or_else(|| 0.4 * self.potential.min_width().unwrap_or(1.0))
    }

    /// Offsets half range: the configured value or five widths past the farthest bump centre.
    pub fn half_range(&self) -> f64 {
        self.probes.half_range.unwrap_or_else(|| {
            self.potential
                .bumps
                .iter()
                .map(|b| {
                    let c = b.center.iter().map(|c| c * c).sum::<f64>().sqrt();
                    c + 5.0 * b.widths.iter().cloned().fold(0.0, f64::max)
                })
                .fold(1.0, f64::max)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=2).contains(&g.n) {
            return Err(cfg_err("grid.n", "must be 1 or 2"));
        }
        if g.points < 8 || g.points % 2 != 0 {
            return Err(cfg_err("grid.N", "must be even and at least 8"));
        }
        if !(g.half_width > 0.0) || !g.half_width.is_finite() {
            return Err(cfg_err("grid.L", "must be positive"));
        }
        for (i, b) in self.potential.bumps.iter().enumerate() {
            if b.center.len() != g.n || b.widths.len() != g.n {
                return Err(cfg_err(
                    &format!("potential.bumps[{i}]"),
                    format!("center and widths need {} entries", g.n),
                ));
            }
        }
        let grid = crate::grid::make_grid(g.n, g.points, g.half_width)
            .map_err(|e| cfg_err("grid", e.to_string()))?;
        build_potentials(&self.potential, &grid).map_err(|e| cfg_err("potential", e.to_string()))?;
        let i = &self.initial;
        if !i.center.is_empty() && i.center.len() != g.n {
            return Err(cfg_err("initial.center", format!("needs {} entries", g.n)));
        }
        if !i.k0.is_empty() && i.k0.len() != g.n {
            return Err(cfg_err("initial.k0", format!("needs {} entries", g.n)));
        }
        if !(i.sigma > 0.0) {
            return Err(cfg_err("initial.sigma", "must be positive"));
        }
        let d = &self.dynamics;
        if !(d.p > 1.0) {
            return Err(cfg_err("dynamics.p", "must exceed 1"));
        }
        if !(d.dt > 0.0) {
            return Err(cfg_err("dynamics.dt", "must be positive"));
        }
        if !(d.t_final >= 0.0) {
            return Err(cfg_err("dynamics.T", "must be non-negative"));
        }
        if let Some(t) = d.t_scat {
            if !(t > 0.0) {
                return Err(cfg_err("dynamics.T_scat", "must be positive"));
            }
        }
        if d.stride == 0 {
            return Err(cfg_err("dynamics.stride", "must be positive"));
        }
        let p = &self.probes;
        if p.angles == 0 {
            return Err(cfg_err("probes.angles", "must be positive"));
        }
        if p.offsets < 3 || p.offsets % 2 == 0 {
            return Err(cfg_err("probes.offsets", "must be odd and at least 3"));
        }
        if let Some(h) = p.half_range {
            if !(h > 0.0) {
                return Err(cfg_err("probes.half_range", "must be positive"));
            }
        }
        if p.xi_ladder.is_empty() || p.xi_ladder.iter().any(|x| !(*x > 0.0)) {
            return Err(cfg_err("probes.xi_ladder", "needs positive speeds"));
        }
        if let Some(l) = &p.eps_ladder {
            if l.len() < 2 || l.iter().any(|e| !(*e > 0.0)) || l.windows(2).any(|w| w[1] >= w[0]) {
                return Err(cfg_err("probes.eps_ladder", "must be positive and strictly decreasing"));
            }
        }
        if !(p.delta > 0.0) {
            return Err(cfg_err("probes.delta", "must be positive"));
        }
        if p.pairs == 0 {
            return Err(cfg_err("probes.pairs", "must be positive"));
        }
        if let Some(s) = p.sigma {
            if !(s > 0.0) {
                return Err(cfg_err("probes.sigma", "must be positive"));
            }
        }
        if !(p.dt > 0.0) {
            return Err(cfg_err("probes.dt", "must be positive"));
        }
        if p.frame.n != 2 || p.frame.points < 8 || !(p.frame.half_width > 0.0) {
            return Err(cfg_err("probes.frame", "needs n = 2, N >= 8, L > 0"));
        }
        if let Some(r) = &self.reconstruct.grid {
            if r.n != 2 || r.points < 8 || !(r.half_width > 0.0) {
                return Err(cfg_err("reconstruct.grid", "needs n = 2, N >= 8, L > 0"));
            }
        }
        if self.experiment == Some(Experiment::FreeIdentity) && !self.potential.bumps.is_empty() {
            return Err(cfg_err("potential.bumps", "free_identity needs A = 0 and V = 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid": {"n": 1, "N": 64, "L": 10.0}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.dynamics.p, 3.0);
        assert_eq!(cfg.probes.xi_ladder, vec![8.0, 16.0, 32.0]);
        assert_eq!(cfg.experiment, None);
    }

    #[test]
    fn missing_grid_is_named() {
        let err = ScenarioConfig::from_json(r#"{"dynamics": {"dt": 0.01}}"#).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ScenarioConfig::from_json(r#"{"grid": {"n": 1, "N": 64, "L": 10.0}, "probes": {"sigmaa": 1}}"#)
            .unwrap_err();
        match err {
            Error::Config { path, reason } => {
                assert_eq!(path, "probes.sigmaa");
                assert!(reason.contains("sigmaa"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn semantic_errors_carry_field_paths() {
        let err = ScenarioConfig::from_json(r#"{"grid": {"n": 1, "N": 63, "L": 10.0}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "grid.N"), "{err}");
        let err = ScenarioConfig::from_json(
            r#"{"grid": {"n": 1, "N": 64, "L": 10.0}, "probes": {"eps_ladder": [0.1, 0.2]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "probes.eps_ladder"), "{err}");
    }

    #[test]
    fn experiment_names_and_aliases() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("thm13_sweep".parse::<Experiment>().unwrap(), Experiment::AmplitudeSweep);
        assert_eq!("cor16_joint".parse::<Experiment>().unwrap(), Experiment::JointReconstruct);
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn free_identity_rejects_potentials() {
        let text = r#"{"grid": {"n": 1, "N": 64, "L": 10.0}, "experiment": "free_identity",
            "potential": {"bumps": [{"component": "V", "center": [0.0], "amplitude": 1.0, "widths": [1.0]}]}}"#;
        let err = ScenarioConfig::from_json(text).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "potential.bumps"), "{err}");
    }
}
