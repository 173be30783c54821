//! High-velocity probing: boosted Gaussian packets, the scattering pairing and sinogram
//! assembly over lines `{s theta_perp + tau theta}`.
//!
//! With `phi_xi = e^{i m xi.x} phi_0`, `xi = |xi| theta` and `P = (i(S_L - I) phi_xi, phi_xi)`:
//!
//! * A-mode value `P / ||phi_0||^2 -> int theta.A` smeared by `|phi_0|^2`,
//! * V-mode value `-2 m|xi| P / ||phi_0||^2 -> int V` smeared likewise,
//!
//! each with an `O(|xi|^{-1})` remainder.

use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Wavefunction, I};
use crate::potential::{directions, LineTarget, PotentialDescriptor};
use crate::propagate::HamiltonianOp;
use crate::comoving::MovingFrame;
use crate::scattering::{linear_s, packet_overlap, ScatterSpec, DEFAULT_TOL_T, OVERLAP_LIMIT, STABILITY_FACTOR};
use crate::stats::linear_fit;
use crate::tomography::{Sinogram, Source, Target};

/// Fraction of `k_max` the boosted spectrum may occupy.
pub const BAND_FRACTION: f64 = 0.8;
/// Envelope bandwidth in units of `1/sigma`.
pub const ENVELOPE_BAND: f64 = 3.0;
/// Relative gap between the two fastest pairings below which extrapolation is trusted.
pub const EXTRAPOLATION_GAP: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTarget {
    ATangential,
    V,
}

impl ProbeTarget {
    pub fn line_target(self) -> LineTarget {
        match self {
            ProbeTarget::ATangential => LineTarget::ATangential,
            ProbeTarget::V => LineTarget::V,
        }
    }
}

/// Which probes re-run at `1.25 T` to audit convergence in `T_scat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityAudit {
    None,
    /// The probe nearest `s = 0` on every angle.
    Central,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Envelope width.
    pub sigma: f64,
    pub m: f64,
    pub dt: f64,
    /// Fixed horizon; chosen per probe from the packet's exit time when absent.
    pub t_scat: Option<f64>,
    pub audit: StabilityAudit,
    /// Allowed change of `P / ||phi_0||^2` between `T_scat` and `1.25 T_scat`.
    pub tol_t: f64,
    /// Packet-potential overlap at `+-T_scat` when the horizon is chosen automatically.
    pub overlap: f64,
}

impl ProbeConfig {
    pub fn new(sigma: f64, dt: f64) -> Self {
        ProbeConfig {
            sigma,
            m: 1.0,
            dt,
            t_scat: None,
            audit: StabilityAudit::Central,
            tol_t: DEFAULT_TOL_T,
            overlap: OVERLAP_LIMIT,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(self.m > 0.0) {
            return Err(invalid("m", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.overlap > 0.0) || !(self.tol_t > 0.0) {
            return Err(invalid("overlap", "tolerances must be positive"));
        }
        Ok(())
    }
}

/// Largest wavenumber the boosted packet needs and the grid size providing it.
fn band_check(grid: &Grid, speed: f64, sigma: f64) -> std::result::Result<(), (f64, usize)> {
    let needed = speed + ENVELOPE_BAND / sigma;
    if needed <= BAND_FRACTION * grid.k_max() {
        Ok(())
    } else {
        Err((needed, grid.required_points(needed / BAND_FRACTION)))
    }
}

fn band_error(grid: &Grid, speed: f64, sigma: f64, detail: String) -> Result<()> {
    band_check(grid, speed, sigma).map_err(|(needed, n)| Error::BandLimit {
        detail: format!(
            "{detail}: m|xi| + 3/sigma = {needed:.2} exceeds {BAND_FRACTION} k_max = {:.2}",
            BAND_FRACTION * grid.k_max()
        ),
        required_n: n,
    })
}

/// Width of the Gaussian with the same per-axis spectral spread as `u`.
fn spectral_width(u: &Wavefunction) -> f64 {
    let grid = u.grid();
    let spec = u.spectrum(&mut grid.spectral());
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    let spread = (0..grid.dim())
        .map(|j| {
            let k = grid.k_spec(j);
            let mean: f64 = spec.iter().zip(k).map(|(z, k)| k * z.norm_sqr()).sum::<f64>() / total;
            spec.iter()
                .zip(k)
                .map(|(z, k)| (k - mean) * (k - mean) * z.norm_sqr())
                .sum::<f64>()
                / total
        })
        .fold(0.0, f64::max);
    // |exp(-x^2 / (2 s^2))^|^2 has per-axis variance 1 / (2 s^2)
    1.0 / (2.0 * spread).sqrt()
}

/// `e^{i m xi.x} phi_0`.
pub fn boost(phi0: &Wavefunction, xi: &[f64], m: f64) -> Result<Wavefunction> {
    let grid = phi0.grid();
    if xi.len() != grid.dim() {
        return Err(invalid("xi", format!("expected {} components", grid.dim())));
    }
    let speed = m * xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if speed == 0.0 {
        return Ok(phi0.clone());
    }
    if phi0.mass() == 0.0 {
        return Err(invalid("phi0", "zero envelope"));
    }
    band_error(grid, speed, spectral_width(phi0), "boost".into())?;
    let data = phi0
        .data()
        .iter()
        .enumerate()
        .map(|(p, z)| {
            let x = grid.coords(p);
            let phase: f64 = xi.iter().enumerate().map(|(j, v)| m * v * x[j]).sum();
            z * Complex64::from_polar(1.0, phase)
        })
        .collect();
    Wavefunction::from_vec(grid, data)
}

/// A Gaussian envelope and its boost.
#[derive(Clone, Debug)]
pub struct ProbeState {
    pub envelope: Wavefunction,
    pub sigma: f64,
    pub center: Vec<f64>,
    pub xi: Vec<f64>,
    pub m: f64,
}

impl ProbeState {
    pub fn new(grid: &Arc<Grid>, center: &[f64], sigma: f64, xi: &[f64], m: f64) -> Result<Self> {
        if center.len() != grid.dim() || xi.len() != grid.dim() {
            return Err(invalid("center", "dimension mismatch"));
        }
        let speed = m * xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        band_error(grid, speed, sigma, "probe".into())?;
        let zero = vec![0.0; grid.dim()];
        Ok(ProbeState {
            envelope: Wavefunction::gaussian(grid, center, sigma, &zero, 1.0),
            sigma,
            center: center.to_vec(),
            xi: xi.to_vec(),
            m,
        })
    }

    /// Probe along line `(theta, s)` at speed `|xi|`.
    pub fn on_line(grid: &Arc<Grid>, theta: f64, s: f64, speed: f64, cfg: &ProbeConfig) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::InvalidGrid("line probes need a 2-D grid".into()));
        }
        let (t, p) = directions(theta);
        ProbeState::new(grid, &[s * p[0], s * p[1]], cfg.sigma, &[speed * t[0], speed * t[1]], cfg.m)
    }

    pub fn speed(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn boosted(&self) -> Result<Wavefunction> {
        boost(&self.envelope, &self.xi, self.m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    /// `(i(S_L - I) phi_xi, psi_xi)`.
    pub raw: Complex64,
    /// Line-integral estimate for the mode.
    pub value: Complex64,
    pub t_scat: f64,
    pub stability: Option<f64>,
    pub flagged: bool,
}

/// First `T` on a 5% ladder at which the free packet has left the potential at both `+-T`.
/// On the periodic box a fast packet comes back, so the search stops once the packet could
/// wrap around before `1.25 T`.
fn lab_exit_time(phi: &Wavefunction, ham: &HamiltonianOp, state: &ProbeState, target: f64) -> Result<f64> {
    let speed = 2.0 * state.m * state.speed();
    if !(speed > 0.0) {
        return Err(invalid("xi", "probe needs a nonzero boost to pick T_scat"));
    }
    let period = 2.0 * phi.grid().half_width();
    let mut t = state.sigma / speed;
    while STABILITY_FACTOR * speed * t < period {
        if packet_overlap(phi, ham, -t) < target && packet_overlap(phi, ham, t) < target {
            return Ok(t);
        }
        t *= 1.05;
    }
    Err(invalid(
        "t_scat",
        format!("probe at |xi| = {} does not clear the potential within one box period {period}", state.speed()),
    ))
}

/// What the probes scatter off.
#[derive(Clone, Copy)]
pub enum Medium<'a> {
    /// Boosted packets evolved on the lab grid of `ham`.
    Lab(&'a HamiltonianOp),
    /// Envelopes evolved on `grid` in the frame moving with the packet; potentials are
    /// evaluated from `desc` in closed form.
    Comoving {
        desc: &'a PotentialDescriptor,
        grid: &'a Arc<Grid>,
    },
}

fn finish(raw: Complex64, norm: f64, speed: f64, m: f64, target: ProbeTarget) -> Complex64 {
    match target {
        ProbeTarget::ATangential => raw / norm,
        ProbeTarget::V => raw * (-2.0 * m * speed / norm),
    }
}

/// Scattering pairing `P = (i(S_L - I) phi_xi, psi_xi)` on line `(theta, s)` with
/// `psi_0 = phi_0`; `audit` repeats the run at `1.25 T_scat`.
pub fn pairing(
    theta: f64,
    s: f64,
    speed: f64,
    medium: Medium<'_>,
    target: ProbeTarget,
    cfg: &ProbeConfig,
    audit: bool,
) -> Result<ProbeValue> {
    cfg.validate()?;
    // P(T) for a given horizon
    let (t_scat, norm, mut run): (f64, f64, Box<dyn FnMut(f64) -> Result<Complex64> + '_>) = match medium {
        Medium::Lab(ham) => {
            let state = ProbeState::on_line(ham.grid(), theta, s, speed, cfg)?;
            let phi = state.boosted()?;
            let t = match cfg.t_scat {
                Some(t) => t,
                None => lab_exit_time(&phi, ham, &state, cfg.overlap)?,
            };
            let norm = state.envelope.mass();
            let run = move |t: f64| {
                let spec = ScatterSpec::linear(t, cfg.dt).without_stability_check();
                let out = linear_s(&phi, ham, &spec)?;
                Ok(I * out.output.sub(&phi)?.inner(&phi)?)
            };
            (t, norm, Box::new(run))
        }
        Medium::Comoving { desc, grid } => {
            if grid.dim() != 2 {
                return Err(Error::InvalidGrid("line probes need a 2-D grid".into()));
            }
            band_error(grid, 0.0, cfg.sigma, "moving-frame envelope".into())?;
            let (t_dir, p_dir) = directions(theta);
            let centre = [s * p_dir[0], s * p_dir[1]];
            let kick = [cfg.m * speed * t_dir[0], cfg.m * speed * t_dir[1]];
            let frame = MovingFrame::new(grid, desc, &centre, &kick)?;
            let phi = Wavefunction::gaussian(grid, &[0.0, 0.0], cfg.sigma, &[0.0, 0.0], 1.0);
            let t = match cfg.t_scat {
                Some(t) => t,
                None => frame.exit_time(&phi, cfg.sigma, cfg.overlap)?,
            };
            let norm = phi.mass();
            let run = move |t: f64| {
                let out = frame.scatter(&phi, t, cfg.dt)?;
                Ok(I * out.sub(&phi)?.inner(&phi)?)
            };
            (t, norm, Box::new(run))
        }
    };
    let raw = run(t_scat)?;
    let (stability, flagged) = if audit {
        let change = (run(STABILITY_FACTOR * t_scat)? - raw).norm() / norm;
        if change > cfg.tol_t {
            warn!("probe (theta={theta:.4}, s={s:.4}) moves by {change:.2e} between T and 1.25 T");
        }
        (Some(change), change > cfg.tol_t)
    } else {
        (None, false)
    };
    Ok(ProbeValue {
        raw,
        value: finish(raw, norm, speed, cfg.m, target),
        t_scat,
        stability,
        flagged,
    })
}

/// One line probed over a `|xi|` ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub theta: f64,
    pub s: f64,
    pub speeds: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Linear extrapolation in `1/|xi|` to `|xi| = infinity`, when trusted.
    pub extrapolated: Option<Complex64>,
    pub target: ProbeTarget,
}

/// Least-squares line in `1/|xi|` through each of the real and imaginary parts; only used
/// when the two fastest values differ by less than [`EXTRAPOLATION_GAP`].
pub fn extrapolate(speeds: &[f64], values: &[Complex64]) -> Result<Option<Complex64>> {
    if speeds.len() != values.len() || speeds.len() < 2 {
        return Err(invalid("xi_ladder", "need at least two speeds with values"));
    }
    let mut order: Vec<usize> = (0..speeds.len()).collect();
    order.sort_by(|a, b| speeds[*b].total_cmp(&speeds[*a]));
    let (a, b) = (values[order[0]], values[order[1]]);
    if (a - b).norm() >= EXTRAPOLATION_GAP * a.norm().max(b.norm()) {
        return Ok(None);
    }
    let re: Vec<(f64, f64)> = speeds.iter().zip(values).map(|(s, v)| (1.0 / s, v.re)).collect();
    let im: Vec<(f64, f64)> = speeds.iter().zip(values).map(|(s, v)| (1.0 / s, v.im)).collect();
    let (_, r0) = linear_fit(&re)?;
    let (_, i0) = linear_fit(&im)?;
    Ok(Some(Complex64::new(r0, i0)))
}

pub fn probe_ray(
    medium: Medium<'_>,
    theta: f64,
    s: f64,
    speeds: &[f64],
    target: ProbeTarget,
    cfg: &ProbeConfig,
) -> Result<RaySample> {
    let values = speeds
        .iter()
        .map(|&v| Ok(pairing(theta, s, v, medium, target, cfg, cfg.audit != StabilityAudit::None)?.value))
        .collect::<Result<Vec<_>>>()?;
    let extrapolated = if speeds.len() >= 2 { extrapolate(speeds, &values)? } else { None };
    Ok(RaySample {
        theta,
        s,
        speeds: speeds.to_vec(),
        values,
        extrapolated,
        target,
    })
}

/// Per-probe record kept alongside an assembled sinogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub theta_index: usize,
    pub s_index: usize,
    pub t_scat: f64,
    pub stability: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeManifest {
    pub speed: f64,
    pub target: ProbeTarget,
    pub source: Source,
    pub config: Option<ProbeConfig>,
    pub records: Vec<ProbeRecord>,
    /// Largest relative change seen by the audited probes.
    pub worst_stability: Option<f64>,
    pub flagged: usize,
}

/// Where a sinogram's values come from.
#[derive(Clone, Copy)]
pub enum SinogramInput<'a> {
    Scattering { medium: Medium<'a>, cfg: &'a ProbeConfig },
    /// Smeared line integrals of the descriptor with envelope width `sigma`.
    Oracle { desc: &'a PotentialDescriptor, sigma: f64 },
}

pub fn assemble_sinogram(
    angles: &[f64],
    offsets: &[f64],
    speed: f64,
    target: ProbeTarget,
    input: SinogramInput<'_>,
) -> Result<(Sinogram, ProbeManifest)> {
    let jobs: Vec<(usize, usize)> = (0..angles.len())
        .flat_map(|i| (0..offsets.len()).map(move |j| (i, j)))
        .collect();
    match input {
        SinogramInput::Oracle { desc, sigma } => {
            let values = jobs
                .iter()
                .map(|&(i, j)| {
                    Complex64::new(desc.smeared_line_integral(target.line_target(), angles[i], offsets[j], sigma), 0.0)
                })
                .collect();
            let sino = Sinogram::new(angles.to_vec(), offsets.to_vec(), values, Source::Oracle, target.into(), Some(speed))?;
            let manifest = ProbeManifest {
                speed,
                target,
                source: Source::Oracle,
                config: None,
                records: Vec::new(),
                worst_stability: None,
                flagged: 0,
            };
            Ok((sino, manifest))
        }
        SinogramInput::Scattering { medium, cfg } => {
            cfg.validate()?;
            let (grid, lab_speed) = match medium {
                Medium::Lab(ham) => (ham.grid(), cfg.m * speed),
                Medium::Comoving { grid, .. } => (grid, 0.0),
            };
            if grid.dim() != 2 {
                return Err(Error::InvalidGrid("sinograms need a 2-D grid".into()));
            }
            if let Err((needed, n)) = band_check(grid, lab_speed, cfg.sigma) {
                let failing: Vec<String> = jobs
                    .iter()
                    .map(|&(i, j)| format!("(theta={:.4}, s={:.4})", angles[i], offsets[j]))
                    .collect();
                return Err(Error::BandLimit {
                    detail: format!(
                        "{} probes at |xi| = {speed} need k = {needed:.2}: {}",
                        failing.len(),
                        failing.join(", ")
                    ),
                    required_n: n,
                });
            }
            let central = offsets
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(j, _)| j)
                .unwrap_or(0);
            info!("assembling {} probes at |xi| = {speed}", jobs.len());
            let results: Vec<ProbeValue> = jobs
                .par_iter()
                .map(|&(i, j)| {
                    let audit = match cfg.audit {
                        StabilityAudit::None => false,
                        StabilityAudit::Central => j == central,
                        StabilityAudit::All => true,
                    };
                    pairing(angles[i], offsets[j], speed, medium, target, cfg, audit)
                })
                .collect::<Result<_>>()?;
            let records: Vec<ProbeRecord> = jobs
                .iter()
                .zip(&results)
                .map(|(&(i, j), r)| ProbeRecord {
                    theta_index: i,
                    s_index: j,
                    t_scat: r.t_scat,
                    stability: r.stability,
                    flagged: r.flagged,
                })
                .collect();
            let flagged = records.iter().filter(|r| r.flagged).count();
            if flagged > 0 {
                warn!("{flagged} probes failed the T_scat stability audit");
            }
            let worst_stability = records.iter().filter_map(|r| r.stability).reduce(f64::max);
            let values = results.iter().map(|r| r.value).collect();
            let sino = Sinogram::new(
                angles.to_vec(),
                offsets.to_vec(),
                values,
                Source::Scattering,
                target.into(),
                Some(speed),
            )?;
            Ok((
                sino,
                ProbeManifest {
                    speed,
                    target,
                    source: Source::Scattering,
                    config: Some(*cfg),
                    records,
                    worst_stability,
                    flagged,
                },
            ))
        }
    }
}

impl From<ProbeTarget> for Target {
    fn from(t: ProbeTarget) -> Self {
        match t {
            ProbeTarget::ATangential => Target::ATangential,
            ProbeTarget::V => Target::V,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{build_potentials, Bump, Component};
    use crate::tomography::{uniform_angles, uniform_offsets};
    use std::f64::consts::PI;

    #[test]
    fn zero_boost_is_identity_and_modulus_is_kept() {
        let g = make_grid(2, 64, 6.0).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.5, -0.3], 0.8, &[0.0, 0.0], 1.0);
        assert_eq!(boost(&phi, &[0.0, 0.0], 1.0).unwrap().data(), phi.data());
        let b = boost(&phi, &[3.0, -2.0], 1.0).unwrap();
        for (x, y) in b.data().iter().zip(phi.data()) {
            assert!((x.norm() - y.norm()).abs() < 1e-15);
        }
        assert!((b.l2_norm() - phi.l2_norm()).abs() < 1e-13);
    }

    #[test]
    fn boost_relocates_spectral_peak() {
        let g = make_grid(2, 64, 2.0 * PI).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 1.0, &[0.0, 0.0], 1.0);
        let b = boost(&phi, &[4.0, -3.0], 1.0).unwrap();
        let spec = b.spectrum(&mut g.spectral());
        let (arg, _) = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(g.k_spec(0)[arg], 4.0);
        assert_eq!(g.k_spec(1)[arg], -3.0);
    }

    #[test]
    fn band_violation_names_required_size() {
        let g = make_grid(2, 32, 4.0).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 0.5, &[0.0, 0.0], 1.0);
        match boost(&phi, &[30.0, 0.0], 1.0) {
            Err(Error::BandLimit { required_n, .. }) => {
                assert!(required_n > 32);
                let big = make_grid(2, required_n, 4.0).unwrap();
                let phi = Wavefunction::gaussian(&big, &[0.0, 0.0], 0.5, &[0.0, 0.0], 1.0);
                assert!(boost(&phi, &[30.0, 0.0], 1.0).is_ok());
            }
            other => panic!("expected band error, got {other:?}"),
        }
    }

    #[test]
    fn spectral_width_matches_gaussian() {
        let g = make_grid(2, 64, 8.0).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 0.7, &[0.0, 0.0], 1.0);
        assert!((spectral_width(&phi) - 0.7).abs() < 1e-6);
    }

    #[test]
    fn zero_potential_gives_zero_sinogram() {
        let g = make_grid(2, 96, 6.0).unwrap();
        let ham = HamiltonianOp::free(&g);
        let cfg = ProbeConfig {
            t_scat: Some(0.3),
            ..ProbeConfig::new(0.5, 1e-3)
        };
        let (sino, _) = assemble_sinogram(
            &uniform_angles(3),
            &uniform_offsets(3, 1.0),
            8.0,
            ProbeTarget::ATangential,
            SinogramInput::Scattering { medium: Medium::Lab(&ham), cfg: &cfg },
        )
        .unwrap();
        assert!(sino.max_abs() < 1e-8);
    }

    #[test]
    fn oracle_sinogram_of_isotropic_v_is_angle_independent() {
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.0, 0.0], 1.0, &[0.8, 0.8])]);
        let (sino, _) = assemble_sinogram(
            &uniform_angles(8),
            &uniform_offsets(9, 3.0),
            16.0,
            ProbeTarget::V,
            SinogramInput::Oracle { desc: &desc, sigma: 0.3 },
        )
        .unwrap();
        for i in 1..8 {
            for (a, b) in sino.row(i).iter().zip(sino.row(0)) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn oracle_tangential_flips_with_direction() {
        let desc = PotentialDescriptor::new(vec![
            Bump::new(Component::A1, &[0.3, 0.1], 0.5, &[0.7, 0.9]),
            Bump::new(Component::A2, &[-0.2, 0.4], 0.3, &[0.8, 0.6]),
        ]);
        for &(theta, s) in &[(0.3, 0.2), (1.1, -0.7), (2.5, 0.0)] {
            let a = desc.smeared_line_integral(LineTarget::ATangential, theta, s, 0.4);
            // reversing theta also reverses theta_perp, so the same line has offset -s
            let b = desc.smeared_line_integral(LineTarget::ATangential, theta + PI, -s, 0.4);
            assert!((a + b).abs() < 1e-14, "{a} {b}");
        }
    }

    #[test]
    fn band_failures_enumerate_probes() {
        let g = make_grid(2, 32, 6.0).unwrap();
        let ham = HamiltonianOp::free(&g);
        let cfg = ProbeConfig::new(0.4, 1e-3);
        let r = assemble_sinogram(
            &uniform_angles(2),
            &uniform_offsets(3, 1.0),
            32.0,
            ProbeTarget::ATangential,
            SinogramInput::Scattering { medium: Medium::Lab(&ham), cfg: &cfg },
        );
        match r {
            Err(Error::BandLimit { detail, .. }) => assert_eq!(detail.matches("theta=").count(), 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extrapolation_is_gated() {
        let speeds = [8.0, 16.0, 32.0];
        let exact = Complex64::new(1.0, 0.0);
        let vals: Vec<Complex64> = speeds.iter().map(|s| exact + Complex64::new(0.5 / s, 0.1 / s)).collect();
        let e = extrapolate(&speeds, &vals).unwrap().unwrap();
        assert!((e - exact).norm() < 1e-12);
        let far: Vec<Complex64> = speeds.iter().map(|s| exact + Complex64::new(20.0 / s, 0.0)).collect();
        assert!(extrapolate(&speeds, &far).unwrap().is_none());
    }

    fn a_desc() -> PotentialDescriptor {
        PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.1, 0.0], 0.05, &[0.6, 0.6])])
    }

    #[test]
    fn lab_and_moving_frames_agree() {
        let desc = a_desc();
        let lab = make_grid(2, 80, 7.0).unwrap();
        let ham = HamiltonianOp::new(&build_potentials(&desc, &lab).unwrap());
        let frame = make_grid(2, 56, 7.0).unwrap();
        let cfg = ProbeConfig {
            audit: StabilityAudit::None,
            ..ProbeConfig::new(0.8, 2e-3)
        };
        for &(theta, s) in &[(0.2, 0.3), (1.9, -0.4)] {
            let a = pairing(theta, s, 8.0, Medium::Lab(&ham), ProbeTarget::ATangential, &cfg, false).unwrap();
            let b = pairing(
                theta,
                s,
                8.0,
                Medium::Comoving { desc: &desc, grid: &frame },
                ProbeTarget::ATangential,
                &cfg,
                false,
            )
            .unwrap();
            let dev = (a.value - b.value).norm() / b.value.norm();
            assert!(dev < 1e-3, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn a_mode_pairing_approaches_oracle() {
        let desc = a_desc();
        let frame = make_grid(2, 56, 7.0).unwrap();
        let cfg = ProbeConfig::new(0.8, 1e-3);
        let (theta, s) = (0.2, 0.3);
        let oracle = desc.smeared_line_integral(LineTarget::ATangential, theta, s, cfg.sigma);
        let errs: Vec<f64> = [8.0, 16.0]
            .iter()
            .map(|&v| {
                let p = pairing(theta, s, v, Medium::Comoving { desc: &desc, grid: &frame }, ProbeTarget::ATangential, &cfg, true)
                    .unwrap();
                assert!(!p.flagged, "{:?}", p.stability);
                assert!(p.value.im.abs() < 0.1 * p.value.re.abs());
                (p.value.re - oracle).abs() / oracle.abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[1] < 0.1, "{errs:?}");
    }

    fn comoving_value(desc: &PotentialDescriptor, frame: &Arc<Grid>, theta: f64, s: f64, v: f64, target: ProbeTarget, cfg: &ProbeConfig) -> Complex64 {
        pairing(theta, s, v, Medium::Comoving { desc, grid: frame }, target, cfg, false).unwrap().value
    }

    #[test]
    fn v_mode_remainder_decays_like_inverse_speed() {
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.0, 0.2], 0.5, &[0.6, 0.6])]);
        let frame = make_grid(2, 56, 7.0).unwrap();
        let cfg = ProbeConfig::new(0.8, 1e-3);
        let (theta, s) = (0.4, 0.1);
        let oracle = desc.smeared_line_integral(LineTarget::V, theta, s, cfg.sigma);
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0]
            .iter()
            .map(|&v| {
                let val = comoving_value(&desc, &frame, theta, s, v, ProbeTarget::V, &cfg);
                (f64::ln(v), (val - oracle).norm().ln())
            })
            .collect();
        let (slope, _) = linear_fit(&pts).unwrap();
        assert!((slope + 1.0).abs() < 0.2, "{slope}");
    }

    #[test]
    fn translation_shifts_offsets() {
        let desc = a_desc();
        let theta = 0.7;
        let (_, p) = directions(theta);
        let shift = 0.35;
        let moved = desc.translated(&[shift * p[0], shift * p[1]]);
        let frame = make_grid(2, 48, 7.0).unwrap();
        let cfg = ProbeConfig::new(0.8, 2e-3);
        let a = comoving_value(&desc, &frame, theta, 0.2, 12.0, ProbeTarget::ATangential, &cfg);
        let b = comoving_value(&moved, &frame, theta, 0.2 + shift, 12.0, ProbeTarget::ATangential, &cfg);
        assert!((a - b).norm() < 1e-9 * a.norm(), "{a} {b}");
    }

    #[test]
    fn pairing_is_additive_in_weak_potentials() {
        let a1 = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.3, 0.0], 0.02, &[0.6, 0.6])]);
        let a2 = PotentialDescriptor::new(vec![Bump::new(Component::A2, &[-0.2, 0.3], 0.02, &[0.7, 0.5])]);
        let both = PotentialDescriptor::new(a1.bumps.iter().chain(&a2.bumps).cloned().collect());
        let frame = make_grid(2, 48, 7.0).unwrap();
        let cfg = ProbeConfig::new(0.8, 2e-3);
        let (theta, s) = (1.0, 0.1);
        let f = |d: &PotentialDescriptor| comoving_value(d, &frame, theta, s, 12.0, ProbeTarget::ATangential, &cfg);
        let sum = f(&a1) + f(&a2);
        let joint = f(&both);
        assert!((joint - sum).norm() < 0.03 * joint.norm(), "{joint} {sum}");
    }
}
