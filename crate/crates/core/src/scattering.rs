//! Wave operators and linear/nonlinear scattering maps by finite-time evolution.
//!
//! With `U_H(t)` the linear magnetic flow and `T = T_scat`:
//!
//! * `W_- phi = U_H(T) e^{-iT H_0} phi`, `W_+ phi = U_H(-T) e^{iT H_0} phi`
//! * `S_L = W_+^* W_- = e^{-iT H_0} U_H(2T) e^{-iT H_0}`
//! * nonlinear: `u(-T) = e^{-iTG} phi_-`, nonlinear flow over `2T`, `phi_+ = e^{-iTG} u(T)`,
//!   with `G = H` or `G = H_0` depending on the mode.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fft::Spectral;
use crate::grid::Wavefunction;
use crate::propagate::{free_propagate, EvolutionSpec, Evolver, HamiltonianOp};

pub const DEFAULT_TOL_T: f64 = 1e-6;
/// Overlap of the packet with the potential allowed at `+-T_scat`.
pub const OVERLAP_LIMIT: f64 = 1e-8;
/// Stricter overlap targeted by [`auto_t_scat`]: the output amplitude moves roughly with the
/// square root of the mass overlap, so `1e-12` keeps the `1.25 T` check below `1e-6`.
pub const AUTO_OVERLAP: f64 = 1e-12;
pub const STABILITY_FACTOR: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterMode {
    Linear,
    #[serde(rename = "nonlinear_vs_H")]
    NonlinearVsH,
    NonlinearVsFree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSpec {
    pub t_scat: f64,
    pub evolution: EvolutionSpec,
    pub mode: ScatterMode,
    /// Relative change allowed between `T_scat` and `1.25 T_scat`.
    pub tol_t: f64,
    pub check_stability: bool,
    /// Smallness radius for `||phi_-||_{H^1}`; exceeding it only warns.
    pub smallness: Option<f64>,
}

impl ScatterSpec {
    pub fn new(t_scat: f64, evolution: EvolutionSpec, mode: ScatterMode) -> Self {
        ScatterSpec {
            t_scat,
            evolution,
            mode,
            tol_t: DEFAULT_TOL_T,
            check_stability: true,
            smallness: None,
        }
    }

    pub fn linear(t_scat: f64, dt: f64) -> Self {
        ScatterSpec::new(t_scat, EvolutionSpec::linear(dt), ScatterMode::Linear)
    }

    pub fn without_stability_check(mut self) -> Self {
        self.check_stability = false;
        self
    }

    pub fn with_mode(mut self, mode: ScatterMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_scat > 0.0) || !self.t_scat.is_finite() {
            return Err(invalid("t_scat", "must be positive"));
        }
        if !(self.tol_t > 0.0) {
            return Err(invalid("tol_t", "must be positive"));
        }
        Ok(())
    }
}

/// Serializable summary of one scattering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterDiagnostics {
    pub mode: ScatterMode,
    pub t_scat: f64,
    /// Relative change of the output between `T_scat` and `1.25 T_scat`.
    pub stability: Option<f64>,
    pub mass_in: f64,
    pub mass_out: f64,
    pub flagged: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ScatterOutcome {
    pub output: Wavefunction,
    pub diagnostics: ScatterDiagnostics,
}

impl ScatterOutcome {
    pub fn flagged(&self) -> bool {
        self.diagnostics.flagged
    }
}

/// Which group the asymptotic states are compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reference {
    Free,
    Magnetic,
}

/// Linear and nonlinear integrators over one Hamiltonian.
struct Flows<'a> {
    linear: Evolver<'a>,
    nonlinear: Option<Evolver<'a>>,
}

impl<'a> Flows<'a> {
    fn new(ham: &'a HamiltonianOp, evolution: EvolutionSpec, nonlinear: bool) -> Result<Self> {
        Ok(Flows {
            linear: Evolver::new(ham, evolution.as_linear())?,
            nonlinear: if nonlinear {
                let mut spec = evolution;
                spec.include_nonlinearity = true;
                Some(Evolver::new(ham, spec)?)
            } else {
                None
            },
        })
    }

    fn reference(&mut self, u: &mut Wavefunction, t: f64, r: Reference) -> Result<()> {
        match r {
            Reference::Free => {
                *u = free_propagate(u, t);
                Ok(())
            }
            Reference::Magnetic => self.linear.propagate(u, t),
        }
    }

    fn full(&mut self, u: &mut Wavefunction, t: f64) -> Result<()> {
        match self.nonlinear.as_mut() {
            Some(ev) => ev.propagate(u, t),
            None => self.linear.propagate(u, t),
        }
    }
}

fn relative_change(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    let diff = a.sub(b)?.l2_norm();
    let scale = a.l2_norm();
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Runs `raw` at `T` and, when requested, at `1.25 T`, flagging instability.
fn stabilized(
    phi: &Wavefunction,
    spec: &ScatterSpec,
    mode: ScatterMode,
    mut raw: impl FnMut(f64) -> Result<Wavefunction>,
) -> Result<ScatterOutcome> {
    spec.validate()?;
    let output = raw(spec.t_scat)?;
    let mut notes = Vec::new();
    let stability = if spec.check_stability {
        let longer = raw(STABILITY_FACTOR * spec.t_scat)?;
        Some(relative_change(&output, &longer)?)
    } else {
        None
    };
    let mut flagged = false;
    if let Some(s) = stability {
        if s > spec.tol_t {
            flagged = true;
            notes.push(format!(
                "output moved by {s:.3e} between T and {STABILITY_FACTOR}T (tol {:.1e})",
                spec.tol_t
            ));
        }
    }
    if !output.is_finite() {
        flagged = true;
        notes.push("non-finite output".into());
    }
    Ok(ScatterOutcome {
        diagnostics: ScatterDiagnostics {
            mode,
            t_scat: spec.t_scat,
            stability,
            mass_in: phi.mass(),
            mass_out: output.mass(),
            flagged,
            notes,
        },
        output,
    })
}

/// `W_- phi = U_H(T) e^{-iTH_0} phi` or `W_+ phi = U_H(-T) e^{iTH_0} phi`.
pub fn wave_operator(phi: &Wavefunction, sign: Sign, ham: &HamiltonianOp, spec: &ScatterSpec) -> Result<ScatterOutcome> {
    let mut flows = Flows::new(ham, spec.evolution, false)?;
    let s = match sign {
        Sign::Minus => 1.0,
        Sign::Plus => -1.0,
    };
    stabilized(phi, spec, ScatterMode::Linear, |t| {
        let mut u = free_propagate(phi, -s * t);
        flows.linear.propagate(&mut u, s * t)?;
        Ok(u)
    })
}

/// `W_-^* phi = e^{iTH_0} U_H(-T) phi` or `W_+^* phi = e^{-iTH_0} U_H(T) phi`.
pub fn wave_operator_adjoint(
    phi: &Wavefunction,
    sign: Sign,
    ham: &HamiltonianOp,
    spec: &ScatterSpec,
) -> Result<ScatterOutcome> {
    let mut flows = Flows::new(ham, spec.evolution, false)?;
    let s = match sign {
        Sign::Minus => 1.0,
        Sign::Plus => -1.0,
    };
    stabilized(phi, spec, ScatterMode::Linear, |t| {
        let mut u = phi.clone();
        flows.linear.propagate(&mut u, -s * t)?;
        Ok(free_propagate(&u, s * t))
    })
}

/// `S_L phi = e^{-iTH_0} U_H(2T) e^{-iTH_0} phi`.
pub fn linear_s(phi: &Wavefunction, ham: &HamiltonianOp, spec: &ScatterSpec) -> Result<ScatterOutcome> {
    let mut flows = Flows::new(ham, spec.evolution, false)?;
    stabilized(phi, spec, ScatterMode::Linear, |t| {
        let mut u = free_propagate(phi, -t);
        flows.linear.propagate(&mut u, 2.0 * t)?;
        Ok(free_propagate(&u, -t))
    })
}

fn reference_of(mode: ScatterMode) -> Reference {
    match mode {
        ScatterMode::NonlinearVsH => Reference::Magnetic,
        ScatterMode::Linear | ScatterMode::NonlinearVsFree => Reference::Free,
    }
}

fn smallness_note(phi: &Wavefunction, spec: &ScatterSpec) -> Option<String> {
    let delta = spec.smallness?;
    let h1 = phi.h1_norm(&mut phi.grid().spectral());
    (h1 > delta).then(|| {
        let msg = format!("||phi_-||_H1 = {h1:.3e} exceeds smallness radius {delta:.3e}");
        warn!("{msg}");
        msg
    })
}

/// Scattering map `phi_- -> phi_+` of the full nonlinear flow in `spec.mode`.
pub fn nonlinear_s(phi: &Wavefunction, ham: &HamiltonianOp, spec: &ScatterSpec) -> Result<ScatterOutcome> {
    if spec.mode == ScatterMode::Linear {
        return linear_s(phi, ham, spec);
    }
    let r = reference_of(spec.mode);
    let note = smallness_note(phi, spec);
    let mut flows = Flows::new(ham, spec.evolution, spec.evolution.include_nonlinearity)?;
    let mut out = stabilized(phi, spec, spec.mode, |t| {
        let mut u = phi.clone();
        flows.reference(&mut u, -t, r)?;
        flows.full(&mut u, 2.0 * t)?;
        flows.reference(&mut u, -t, r)?;
        Ok(u)
    })?;
    out.diagnostics.notes.extend(note);
    Ok(out)
}

/// Inverse scattering map `phi_+ -> phi_-`, running the flow backwards.
pub fn nonlinear_s_inverse(phi_plus: &Wavefunction, ham: &HamiltonianOp, spec: &ScatterSpec) -> Result<ScatterOutcome> {
    let r = reference_of(spec.mode);
    let nonlinear = spec.mode != ScatterMode::Linear && spec.evolution.include_nonlinearity;
    let mut flows = Flows::new(ham, spec.evolution, nonlinear)?;
    stabilized(phi_plus, spec, spec.mode, |t| {
        let mut u = phi_plus.clone();
        flows.reference(&mut u, t, r)?;
        flows.full(&mut u, -2.0 * t)?;
        flows.reference(&mut u, t, r)?;
        Ok(u)
    })
}

/// Magnetic `H^1` norm `(||u||^2 + ||(grad + iA) u||^2)^{1/2}`.
pub fn magnetic_h1_norm(u: &Wavefunction, ham: &HamiltonianOp, sp: &mut Spectral) -> f64 {
    let grads = ham.magnetic_gradient(u, sp);
    let dv = u.grid().cell_volume();
    let g2: f64 = grads.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() * dv;
    (u.mass() + g2).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub h1_minus: f64,
    pub h1_plus: f64,
    /// `||phi_+||_{H^1} / ||phi_-||_{H^1}` with the flat norm.
    pub ratio: f64,
    /// Same ratio with the magnetic norm, as a diagnostic.
    pub ratio_magnetic: f64,
}

pub fn norm_equivalence_check(phi_minus: &Wavefunction, phi_plus: &Wavefunction, ham: &HamiltonianOp) -> Result<NormReport> {
    phi_minus.check_same_grid(phi_plus)?;
    let mut sp = phi_minus.grid().spectral();
    let h1_minus = phi_minus.h1_norm(&mut sp);
    let h1_plus = phi_plus.h1_norm(&mut sp);
    let m_minus = magnetic_h1_norm(phi_minus, ham, &mut sp);
    let m_plus = magnetic_h1_norm(phi_plus, ham, &mut sp);
    Ok(NormReport {
        h1_minus,
        h1_plus,
        ratio: h1_plus / h1_minus,
        ratio_magnetic: m_plus / m_minus,
    })
}

/// Mean wavenumber `<k>` of a packet.
pub fn mean_wavevector(u: &Wavefunction) -> Vec<f64> {
    let grid = u.grid();
    let spec = u.spectrum(&mut grid.spectral());
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    (0..grid.dim())
        .map(|j| {
            spec.iter()
                .zip(grid.k_spec(j))
                .map(|(z, k)| k * z.norm_sqr())
                .sum::<f64>()
                / total
        })
        .collect()
}

/// Normalized potential weight `(|A| + |V|) / max(|A| + |V|)`, or `None` for zero potential.
fn potential_weight(ham: &HamiltonianOp) -> Option<Vec<f64>> {
    let len = ham.grid().len();
    let mut w = vec![0.0; len];
    for aj in ham.a() {
        for p in 0..len {
            w[p] += aj[p] * aj[p];
        }
    }
    for x in &mut w {
        *x = x.sqrt();
    }
    if let Some(v) = ham.v() {
        for p in 0..len {
            w[p] += v[p].abs();
        }
    }
    let peak = w.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    for x in &mut w {
        *x /= peak;
    }
    Some(w)
}

/// `int W |e^{itH_0} phi|^2 / ||phi||^2` with `W` the normalized potential weight.
pub fn packet_overlap(phi: &Wavefunction, ham: &HamiltonianOp, t: f64) -> f64 {
    let Some(w) = potential_weight(ham) else {
        return 0.0;
    };
    overlap_with(&w, &free_propagate(phi, t))
}

fn overlap_with(w: &[f64], u: &Wavefunction) -> f64 {
    let mass: f64 = u.data().iter().map(|z| z.norm_sqr()).sum();
    if mass == 0.0 {
        return 0.0;
    }
    u.data()
        .iter()
        .zip(w)
        .map(|(z, w)| w * z.norm_sqr())
        .sum::<f64>()
        / mass
}

/// Smallest `T` of the form `T_0 1.25^k` at which the free packet has left the potential
/// at both `+-T` (overlap below [`AUTO_OVERLAP`]). `T_0` is the time for the packet centre to cross `reach` plus the
/// distance to the origin.
pub fn auto_t_scat(phi: &Wavefunction, ham: &HamiltonianOp, reach: f64) -> Result<f64> {
    let Some(w) = potential_weight(ham) else {
        return Ok(1.0);
    };
    let k = mean_wavevector(phi);
    let speed = 2.0 * k.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(speed > 1e-6) {
        return Err(invalid("phi", "packet has no mean momentum; choose T_scat explicitly"));
    }
    let grid = phi.grid();
    let mass = phi.mass();
    let dv = grid.cell_volume();
    let mut centre = [0.0; 2];
    for (p, z) in phi.data().iter().enumerate() {
        let c = grid.coords(p);
        centre[0] += c[0] * z.norm_sqr() * dv / mass;
        centre[1] += c[1] * z.norm_sqr() * dv / mass;
    }
    let offset = (centre[0] * centre[0] + centre[1] * centre[1]).sqrt();
    let mut t = (reach + offset) / speed;
    for _ in 0..60 {
        let before = overlap_with(&w, &free_propagate(phi, -t));
        let after = overlap_with(&w, &free_propagate(phi, t));
        if speed * t > 2.0 * grid.half_width() {
            return Err(invalid(
                "t_scat",
                format!(
                    "packet wraps around the box before leaving the potential (overlap {:.1e} at T = {t:.3}); \
                     increase L or |k0| sigma",
                    before.max(after)
                ),
            ));
        }
        if before < AUTO_OVERLAP && after < AUTO_OVERLAP {
            if 2.0 * speed * t > 2.0 * grid.half_width() {
                warn!("packet travels {:.2} over [-T, T], more than the box period", 2.0 * speed * t);
            }
            return Ok(t);
        }
        t *= STABILITY_FACTOR;
    }
    Err(invalid("t_scat", "packet never leaves the potential's support"))
}

/// `(S phi, psi) / eps`.
pub fn scaled_pairing(s_phi: &Wavefunction, psi: &Wavefunction, eps: f64) -> Result<Complex64> {
    Ok(s_phi.inner(psi)? / eps)
}
