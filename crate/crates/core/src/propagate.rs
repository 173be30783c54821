//! Free, linear magnetic and nonlinear time evolution.
//!
//! Convention: `u_t = i (H + V) u - i |u|^{p-1} u` with
//! `H = Delta + 2i A.grad + i div A - |A|^2`. The flow is split as
//! `exp(i dt/2 Delta) . R(dt) . exp(i dt/2 Delta)`, where the remainder
//! `R` solves `u_t = -2 A.grad u + (-div A + i (V - |A|^2)) u - i |u|^{p-1} u`
//! with one classical fourth-order Runge-Kutta step.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Spectral;
use crate::grid::{Grid, Wavefunction, I, ZERO};
use crate::potential::PotentialSet;

pub const SPLITTING_ORDER: usize = 2;

/// `dt |k_max|^2` above which a warning is logged.
pub const CFL_WARN: f64 = 2.0;
/// `dt |k_max|^2` above which evolution is refused.
pub const CFL_LIMIT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub dt: f64,
    /// Total evolution time used by [`evolve`].
    #[serde(rename = "T", default)]
    pub t_final: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub include_nonlinearity: bool,
    #[serde(default = "yes")]
    pub include_v: bool,
}

fn default_p() -> f64 {
    3.0
}
fn yes() -> bool {
    true
}

impl EvolutionSpec {
    pub fn linear(dt: f64) -> Self {
        EvolutionSpec {
            dt,
            t_final: 0.0,
            p: default_p(),
            include_nonlinearity: false,
            include_v: true,
        }
    }

    pub fn nonlinear(dt: f64, p: f64) -> Self {
        EvolutionSpec {
            include_nonlinearity: true,
            p,
            ..EvolutionSpec::linear(dt)
        }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t_final = t;
        self
    }

    pub fn as_linear(mut self) -> Self {
        self.include_nonlinearity = false;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive and finite"));
        }
        if !(self.t_final >= 0.0) {
            return Err(invalid("T", "must be non-negative"));
        }
        if !(self.p > 1.0) {
            return Err(invalid("p", "must exceed 1"));
        }
        if self.include_nonlinearity && self.p <= 1.0 + 2.0 / n as f64 {
            warn!(
                "p = {} is not above 1 + 2/n = {}; weighted-space decay regime not covered",
                self.p,
                1.0 + 2.0 / n as f64
            );
        }
        Ok(())
    }

    /// `dt |k_max|^2` for the fastest mode of `grid`.
    pub fn cfl_number(&self, grid: &Grid) -> f64 {
        self.dt * grid.dim() as f64 * grid.k_max().powi(2)
    }

    fn check_cfl(&self, grid: &Grid) -> Result<()> {
        let c = self.cfl_number(grid);
        if c > CFL_LIMIT {
            return Err(invalid(
                "dt",
                format!("dt |k_max|^2 = {c:.2} exceeds {CFL_LIMIT}"),
            ));
        }
        if c > CFL_WARN {
            warn!("dt |k_max|^2 = {c:.2} above {CFL_WARN}");
        }
        Ok(())
    }
}

/// Test hook corrupting the operator on purpose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the `i div A` term, breaking self-adjointness.
    FlipDivergence,
}

/// Sampled linear generator `H + V`.
#[derive(Clone, Debug)]
pub struct HamiltonianOp {
    grid: Arc<Grid>,
    a: Vec<Vec<f64>>,
    div_a: Vec<f64>,
    a_sq: Vec<f64>,
    v: Option<Vec<f64>>,
    fault: Fault,
}

impl HamiltonianOp {
    pub fn new(pot: &PotentialSet) -> Self {
        let grid = pot.grid().clone();
        let len = grid.len();
        HamiltonianOp {
            a: pot.a.clone(),
            div_a: if pot.has_a() { pot.div_a.clone() } else { vec![0.0; len] },
            a_sq: if pot.has_a() { pot.a_sq.clone() } else { vec![0.0; len] },
            v: pot.v.clone(),
            grid,
            fault: Fault::None,
        }
    }

    /// `H = Delta`.
    pub fn free(grid: &Arc<Grid>) -> Self {
        HamiltonianOp {
            grid: grid.clone(),
            a: Vec::new(),
            div_a: vec![0.0; grid.len()],
            a_sq: vec![0.0; grid.len()],
            v: None,
            fault: Fault::None,
        }
    }

    /// Operator from raw samples, without admissibility checks.
    pub fn from_fields(grid: &Arc<Grid>, a: Vec<Vec<f64>>, v: Option<Vec<f64>>) -> Result<Self> {
        let len = grid.len();
        if !(a.is_empty() || a.len() == grid.dim()) || a.iter().any(|c| c.len() != len) {
            return Err(Error::GridMismatch("vector potential samples".into()));
        }
        if v.as_ref().is_some_and(|v| v.len() != len) {
            return Err(Error::GridMismatch("scalar potential samples".into()));
        }
        let mut sp = grid.spectral();
        let mut div_a = vec![0.0; len];
        let mut a_sq = vec![0.0; len];
        for (j, aj) in a.iter().enumerate() {
            let d = grid.derivative_real(aj, j, &mut sp);
            for p in 0..len {
                div_a[p] += d[p];
                a_sq[p] += aj[p] * aj[p];
            }
        }
        Ok(HamiltonianOp {
            grid: grid.clone(),
            a,
            div_a,
            a_sq,
            v,
            fault: Fault::None,
        })
    }

    /// Spatially constant vector potential.
    pub fn constant_a(grid: &Arc<Grid>, a: &[f64]) -> Result<Self> {
        let fields = a.iter().map(|&c| vec![c; grid.len()]).collect();
        HamiltonianOp::from_fields(grid, fields, None)
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = fault;
        self
    }

    pub fn without_v(&self) -> Self {
        HamiltonianOp {
            v: None,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn has_a(&self) -> bool {
        !self.a.is_empty()
    }
    pub fn has_v(&self) -> bool {
        self.v.is_some()
    }
    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }
    pub fn v(&self) -> Option<&[f64]> {
        self.v.as_deref()
    }

    fn div_sign(&self) -> f64 {
        match self.fault {
            Fault::None => 1.0,
            Fault::FlipDivergence => -1.0,
        }
    }

    /// `(H + V) u` with spectral derivatives and pointwise products.
    pub fn apply(&self, u: &Wavefunction, sp: &mut Spectral) -> Result<Wavefunction> {
        self.grid.check_same(u.grid())?;
        let hat = u.spectrum(sp);
        let mut lap: Vec<Complex64> = hat
            .iter()
            .zip(self.grid.k2_spec())
            .map(|(z, k2)| -z * k2)
            .collect();
        sp.inverse(&mut lap);
        let mut out = lap;
        let data = u.data();
        let sign = self.div_sign();
        for j in 0..self.a.len() {
            let g = spectral_derivative(&hat, &self.grid, j, sp);
            for p in 0..out.len() {
                out[p] += 2.0 * I * self.a[j][p] * g[p];
            }
        }
        for p in 0..out.len() {
            let mut m = Complex64::new(-self.a_sq[p], sign * self.div_a[p]);
            if let Some(v) = &self.v {
                m.re += v[p];
            }
            out[p] += m * data[p];
        }
        Wavefunction::from_vec(&self.grid, out)
    }

    /// `(grad + iA) u`, one field per axis.
    pub fn magnetic_gradient(&self, u: &Wavefunction, sp: &mut Spectral) -> Vec<Vec<Complex64>> {
        let hat = u.spectrum(sp);
        (0..self.grid.dim())
            .map(|j| {
                let mut g = spectral_derivative(&hat, &self.grid, j, sp);
                if let Some(aj) = self.a.get(j) {
                    for (gp, (a, z)) in g.iter_mut().zip(aj.iter().zip(u.data())) {
                        *gp += I * a * z;
                    }
                }
                g
            })
            .collect()
    }
}

fn spectral_derivative(hat: &[Complex64], grid: &Grid, axis: usize, sp: &mut Spectral) -> Vec<Complex64> {
    let mut g: Vec<Complex64> = hat
        .iter()
        .zip(grid.k_spec(axis))
        .map(|(z, &k)| z * I * k)
        .collect();
    sp.inverse(&mut g);
    g
}

/// `(H + V) u`.
pub fn apply_h(u: &Wavefunction, ham: &HamiltonianOp) -> Result<Wavefunction> {
    ham.apply(u, &mut ham.grid.spectral())
}

fn kinetic_multiplier(grid: &Grid, t: f64) -> Vec<Complex64> {
    grid.k2_spec()
        .iter()
        .map(|k2| Complex64::from_polar(1.0, -t * k2))
        .collect()
}

/// Exact `e^{it Delta} u`, the Fourier multiplier `e^{-it|k|^2}`.
pub fn free_propagate(u: &Wavefunction, t: f64) -> Wavefunction {
    if t == 0.0 {
        return u.clone();
    }
    let grid = u.grid();
    let mut sp = grid.spectral();
    let mut hat = u.spectrum(&mut sp);
    for (z, k2) in hat.iter_mut().zip(grid.k2_spec()) {
        *z *= Complex64::from_polar(1.0, -t * k2);
    }
    sp.inverse(&mut hat);
    Wavefunction::from_vec(grid, hat).expect("free propagation keeps the grid")
}

/// Right-hand side of the remainder sub-flow.
struct Remainder<'a> {
    grid: &'a Grid,
    a: &'a [Vec<f64>],
    /// `-div A + i (V - |A|^2)`.
    c0: Vec<Complex64>,
    nonlinear: Option<f64>,
    grad: Vec<Complex64>,
}

impl Remainder<'_> {
    fn is_trivial(&self) -> bool {
        self.a.is_empty() && self.nonlinear.is_none() && self.c0.iter().all(|c| *c == ZERO)
    }

    /// `out = f(v)`; `vhat` is the spectrum of `v` when already known.
    fn eval(&mut self, sp: &mut Spectral, v: &[Complex64], vhat: Option<&[Complex64]>, out: &mut [Complex64]) {
        for p in 0..v.len() {
            out[p] = self.c0[p] * v[p];
        }
        if !self.a.is_empty() {
            let owned;
            let hat = match vhat {
                Some(h) => h,
                None => {
                    let mut h = v.to_vec();
                    sp.forward(&mut h);
                    owned = h;
                    &owned
                }
            };
            for j in 0..self.a.len() {
                let k = self.grid.k_spec(j);
                for s in 0..hat.len() {
                    self.grad[s] = hat[s] * I * k[s];
                }
                sp.inverse(&mut self.grad);
                let aj = &self.a[j];
                for p in 0..v.len() {
                    out[p] -= 2.0 * aj[p] * self.grad[p];
                }
            }
        }
        if let Some(p_exp) = self.nonlinear {
            let half = 0.5 * (p_exp - 1.0);
            for p in 0..v.len() {
                let r2 = v[p].norm_sqr();
                let mag = if p_exp == 3.0 { r2 } else { r2.powf(half) };
                out[p] -= I * mag * v[p];
            }
        }
    }
}

/// Observer callback: `(step index, elapsed time, state)`.
pub type Observer<'o> = dyn FnMut(usize, f64, &Wavefunction) -> Result<()> + 'o;

/// Reusable Strang-splitting integrator with its own transform workspace.
pub struct Evolver<'a> {
    grid: Arc<Grid>,
    spec: EvolutionSpec,
    sp: Spectral,
    rem: Remainder<'a>,
    hat: Vec<Complex64>,
    w: Vec<Complex64>,
    stage: Vec<Complex64>,
    acc: Vec<Complex64>,
    k: Vec<Complex64>,
    kin: Vec<(f64, Vec<Complex64>)>,
}

impl<'a> Evolver<'a> {
    pub fn new(ham: &'a HamiltonianOp, spec: EvolutionSpec) -> Result<Self> {
        let grid = ham.grid.clone();
        spec.validate(grid.dim())?;
        let sign = ham.div_sign();
        let c0 = (0..grid.len())
            .map(|p| {
                let v = if spec.include_v {
                    ham.v.as_ref().map_or(0.0, |v| v[p])
                } else {
                    0.0
                };
                Complex64::new(-sign * ham.div_a[p], v - ham.a_sq[p])
            })
            .collect();
        let rem = Remainder {
            grid: &ham.grid,
            a: &ham.a,
            c0,
            nonlinear: spec.include_nonlinearity.then_some(spec.p),
            grad: vec![ZERO; grid.len()],
        };
        if !rem.is_trivial() {
            spec.check_cfl(&grid)?;
        }
        let len = grid.len();
        Ok(Evolver {
            sp: grid.spectral(),
            spec,
            rem,
            hat: vec![ZERO; len],
            w: vec![ZERO; len],
            stage: vec![ZERO; len],
            acc: vec![ZERO; len],
            k: vec![ZERO; len],
            kin: Vec::new(),
            grid,
        })
    }

    pub fn spec(&self) -> &EvolutionSpec {
        &self.spec
    }

    /// Number of steps and effective step for a signed time `t`.
    pub fn step_plan(&self, t: f64) -> (usize, f64) {
        let n = ((t.abs() / self.spec.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, t / n as f64)
    }

    fn apply_kinetic(&mut self, t: f64) {
        let idx = match self.kin.iter().position(|(tt, _)| *tt == t) {
            Some(i) => i,
            None => {
                if self.kin.len() >= 4 {
                    self.kin.remove(0);
                }
                self.kin.push((t, kinetic_multiplier(&self.grid, t)));
                self.kin.len() - 1
            }
        };
        for (z, m) in self.hat.iter_mut().zip(&self.kin[idx].1) {
            *z *= m;
        }
    }

    /// One RK4 step of the remainder; `self.hat` holds the spectrum of the input
    /// on entry and of the output on exit.
    fn remainder_step(&mut self, h: f64) {
        self.w.copy_from_slice(&self.hat);
        self.sp.inverse(&mut self.w);
        let len = self.w.len();
        let Evolver {
            sp, rem, hat, w, stage, acc, k, ..
        } = self;
        rem.eval(sp, w, Some(hat), k);
        for p in 0..len {
            acc[p] = k[p];
            stage[p] = w[p] + 0.5 * h * k[p];
        }
        rem.eval(sp, stage, None, k);
        for p in 0..len {
            acc[p] += 2.0 * k[p];
            stage[p] = w[p] + 0.5 * h * k[p];
        }
        rem.eval(sp, stage, None, k);
        for p in 0..len {
            acc[p] += 2.0 * k[p];
            stage[p] = w[p] + h * k[p];
        }
        rem.eval(sp, stage, None, k);
        for p in 0..len {
            w[p] += h / 6.0 * (acc[p] + k[p]);
        }
        hat.copy_from_slice(w);
        sp.forward(hat);
    }

    /// Evolves `u` in place by the signed time `t`.
    pub fn propagate(&mut self, u: &mut Wavefunction, t: f64) -> Result<()> {
        self.run(u, t, 0, None)
    }

    /// Like [`Evolver::propagate`], calling `observer` at step 0 and every `stride` steps
    /// (and always at the final step).
    pub fn propagate_observed(
        &mut self,
        u: &mut Wavefunction,
        t: f64,
        stride: usize,
        observer: &mut Observer<'_>,
    ) -> Result<()> {
        self.run(u, t, stride.max(1), Some(observer))
    }

    fn run(&mut self, u: &mut Wavefunction, t: f64, stride: usize, mut observer: Option<&mut Observer<'_>>) -> Result<()> {
        self.grid.check_same(u.grid())?;
        if let Some(obs) = observer.as_deref_mut() {
            obs(0, 0.0, u)?;
        }
        if t == 0.0 {
            return Ok(());
        }
        let (n, h) = self.step_plan(t);
        self.hat.copy_from_slice(u.data());
        self.sp.forward(&mut self.hat);

        if self.rem.is_trivial() && observer.is_none() {
            self.apply_kinetic(t);
        } else {
            let trivial = self.rem.is_trivial();
            let mut half_pending = false;
            for step in 0..n {
                if trivial {
                    self.apply_kinetic(h);
                } else {
                    self.apply_kinetic(if half_pending { h } else { 0.5 * h });
                    self.remainder_step(h);
                    if self.hat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(Error::Blowup {
                            step: step + 1,
                            time: (step + 1) as f64 * h,
                        });
                    }
                    half_pending = true;
                }
                let last = step + 1 == n;
                let observe = observer.is_some() && ((step + 1) % stride == 0 || last);
                if half_pending && (observe || last) {
                    self.apply_kinetic(0.5 * h);
                    half_pending = false;
                }
                if observe {
                    let mut snap = self.hat.clone();
                    self.sp.inverse(&mut snap);
                    let state = Wavefunction::from_vec(&self.grid, snap)?;
                    if let Some(obs) = observer.as_deref_mut() {
                        obs(step + 1, (step + 1) as f64 * h, &state)?;
                    }
                }
            }
        }
        self.sp.inverse(&mut self.hat);
        let data = u.data_mut();
        data.copy_from_slice(&self.hat);
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Blowup { step: n, time: t });
        }
        Ok(())
    }
}

/// States sampled along an evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Wavefunction>,
}

/// Evolves `u0` for `spec.t_final`, keeping every `stride`-th state.
pub fn evolve(u0: &Wavefunction, ham: &HamiltonianOp, spec: &EvolutionSpec, stride: usize) -> Result<Trajectory> {
    let mut ev = Evolver::new(ham, *spec)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
    };
    let mut u = u0.clone();
    ev.propagate_observed(&mut u, spec.t_final, stride, &mut |_, t, s| {
        traj.times.push(t);
        traj.states.push(s.clone());
        Ok(())
    })?;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub mass: f64,
    pub energy: f64,
}

/// Mass and `E = int 1/2 |(grad + iA) u|^2 - 1/2 V |u|^2 + |u|^{p+1} / (p+1)`;
/// the last term is dropped when `p` is `None`.
pub fn conserved_quantities(u: &Wavefunction, ham: &HamiltonianOp, p: Option<f64>) -> Result<Conserved> {
    ham.grid.check_same(u.grid())?;
    let mut sp = ham.grid.spectral();
    let dv = ham.grid.cell_volume();
    let mass = u.mass();
    let grads = ham.magnetic_gradient(u, &mut sp);
    let mut energy = 0.0;
    for g in &grads {
        energy += 0.5 * g.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if let Some(v) = &ham.v {
        energy -= 0.5 * u.data().iter().zip(v).map(|(z, v)| v * z.norm_sqr()).sum::<f64>();
    }
    if let Some(p) = p {
        energy += u
            .data()
            .iter()
            .map(|z| z.norm_sqr().powf(0.5 * (p + 1.0)))
            .sum::<f64>()
            / (p + 1.0);
    }
    Ok(Conserved {
        mass,
        energy: energy * dv,
    })
}

/// `(t, mass, energy)` rows along an evolution of length `spec.t_final`.
pub fn conservation_series(
    u0: &Wavefunction,
    ham: &HamiltonianOp,
    spec: &EvolutionSpec,
    stride: usize,
) -> Result<Vec<(f64, Conserved)>> {
    let mut ev = Evolver::new(ham, *spec)?;
    let p = spec.include_nonlinearity.then_some(spec.p);
    let ham_e = if spec.include_v { ham.clone() } else { ham.without_v() };
    let mut rows = Vec::new();
    let mut u = u0.clone();
    ev.propagate_observed(&mut u, spec.t_final, stride, &mut |_, t, s| {
        rows.push((t, conserved_quantities(s, &ham_e, p)?));
        Ok(())
    })?;
    Ok(rows)
}

/// Largest relative deviation of mass and energy from their initial values.
pub fn relative_drift(rows: &[(f64, Conserved)]) -> (f64, f64) {
    let Some((_, first)) = rows.first() else {
        return (0.0, 0.0);
    };
    let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
    rows.iter().fold((0.0, 0.0), |(m, e), (_, c)| {
        (m.max(rel(c.mass, first.mass)), e.max(rel(c.energy, first.energy)))
    })
}

/// Fit of `sup |e^{itH} phi| ~ C t^{exponent}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Measures sup-norm decay of the linear flow at the given positive times.
pub fn dispersive_decay(phi: &Wavefunction, ham: &HamiltonianOp, dt: f64, times: &[f64]) -> Result<DecayFit> {
    if times.len() < 2 || times.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("times", "need at least two positive times"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ev = Evolver::new(ham, EvolutionSpec::linear(dt))?;
    let mut u = phi.clone();
    let mut now = 0.0;
    let mut samples = Vec::new();
    for &t in &sorted {
        ev.propagate(&mut u, t - now)?;
        now = t;
        samples.push((t, u.max_abs()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(t, m)| (t.ln(), m.ln())).collect();
    let (slope, intercept) = crate::stats::linear_fit(&pts)?;
    Ok(DecayFit {
        exponent: slope,
        prefactor: intercept.exp(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{build_potentials, Bump, Component, PotentialDescriptor};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bump_a_1d(grid: &Arc<Grid>) -> HamiltonianOp {
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.0], 0.5, &[1.0])]);
        HamiltonianOp::new(&build_potentials(&desc, grid).unwrap())
    }

    fn bump_a_2d(grid: &Arc<Grid>) -> HamiltonianOp {
        let desc = PotentialDescriptor::new(vec![
            Bump::new(Component::A1, &[0.3, 0.0], 0.4, &[1.0, 0.8]),
            Bump::new(Component::A2, &[0.0, -0.2], -0.3, &[0.9, 1.0]),
            Bump::new(Component::V, &[0.1, 0.1], 0.5, &[1.0, 1.0]),
        ]);
        HamiltonianOp::new(&build_potentials(&desc, grid).unwrap())
    }

    #[test]
    fn free_propagate_identity_and_plane_wave() {
        let g = make_grid(1, 64, 5.0).unwrap();
        let k0 = g.lattice()[5];
        let u = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, k0 * x[0]));
        assert_eq!(free_propagate(&u, 0.0).data(), u.data());
        let t = 0.37;
        let out = free_propagate(&u, t);
        for (a, b) in out.data().iter().zip(u.data()) {
            assert!((a - Complex64::from_polar(1.0, -t * k0 * k0) * b).norm() < 1e-12);
        }
    }

    /// Direct quadrature of the Fourier integral of a Gaussian.
    fn gaussian_free_quadrature(x: f64, t: f64) -> Complex64 {
        let dk = 1e-3;
        (-12000..=12000)
            .map(|i| {
                let k = i as f64 * dk;
                Complex64::from_polar((-0.5 * k * k).exp(), k * x - t * k * k)
            })
            .sum::<Complex64>()
            * dk
            / (2.0 * PI).sqrt()
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let g = make_grid(1, 512, 30.0).unwrap();
        let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], 1.0);
        let t = 1.0;
        let out = free_propagate(&u, t);
        let a = Complex64::new(1.0, 2.0 * t);
        let mut worst = 0.0f64;
        for (p, z) in out.data().iter().enumerate() {
            let x = g.coords(p)[0];
            let exact = a.powf(-0.5) * (-(x * x) / (2.0 * a)).exp();
            worst = worst.max((z - exact).norm());
            if p % 64 == 0 {
                assert!((gaussian_free_quadrature(x, t) - exact).norm() < 1e-10);
            }
        }
        assert!(worst < 1e-10, "{worst}");
        assert!((out.l2_norm() / u.l2_norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn apply_h_free_and_constant_a() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let mut sp = g.spectral();
        let (kx, ky) = (g.lattice()[2], g.lattice()[13]);
        let u = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
        let free = HamiltonianOp::free(&g).apply(&u, &mut sp).unwrap();
        for (a, b) in free.data().iter().zip(u.data()) {
            assert!((a + (kx * kx + ky * ky) * b).norm() < 1e-11);
        }
        let a = [0.3, -0.7];
        let ham = HamiltonianOp::constant_a(&g, &a).unwrap();
        let out = ham.apply(&u, &mut sp).unwrap();
        let sym = (kx + a[0]).powi(2) + (ky + a[1]).powi(2);
        for (x, y) in out.data().iter().zip(u.data()) {
            assert!((x + sym * y).norm() < 1e-12 * sym.max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn h_is_symmetric(seed in any::<u64>()) {
            let g = make_grid(2, 64, 8.0).unwrap();
            let ham = bump_a_2d(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Wavefunction::random_smooth(&g, &mut rng, 2.0);
            let v = Wavefunction::random_smooth(&g, &mut rng, 2.0);
            let mut sp = g.spectral();
            let hu = ham.apply(&u, &mut sp).unwrap();
            let hv = ham.apply(&v, &mut sp).unwrap();
            let lhs = hu.inner(&v).unwrap();
            let rhs = u.inner(&hv).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
        }

        #[test]
        fn apply_h_is_linear(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let g = make_grid(2, 64, 8.0).unwrap();
            let ham = bump_a_2d(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Wavefunction::random_smooth(&g, &mut rng, 2.0);
            let v = Wavefunction::random_smooth(&g, &mut rng, 2.0);
            let c = Complex64::new(re, im);
            let mut sp = g.spectral();
            let mut comb = u.scaled(c);
            comb.axpy(Complex64::new(1.0, 0.0), &v).unwrap();
            let lhs = ham.apply(&comb, &mut sp).unwrap();
            let mut rhs = ham.apply(&u, &mut sp).unwrap().scaled(c);
            rhs.axpy(Complex64::new(1.0, 0.0), &ham.apply(&v, &mut sp).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-10 * rhs.l2_norm().max(1.0));
        }
    }

    #[test]
    fn fault_breaks_symmetry() {
        let g = make_grid(2, 64, 8.0).unwrap();
        let ham = bump_a_2d(&g).with_fault(Fault::FlipDivergence);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Wavefunction::random_smooth(&g, &mut rng, 2.0);
        let v = Wavefunction::random_smooth(&g, &mut rng, 2.0);
        let mut sp = g.spectral();
        let lhs = ham.apply(&u, &mut sp).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&ham.apply(&v, &mut sp).unwrap()).unwrap();
        assert!((lhs - rhs).norm() > 1e-4);
    }

    #[test]
    fn linear_free_evolution_matches_free_propagator() {
        let g = make_grid(1, 256, 20.0).unwrap();
        let u0 = Wavefunction::gaussian(&g, &[-2.0], 1.0, &[1.5], 1.0);
        let ham = HamiltonianOp::free(&g);
        let traj = evolve(&u0, &ham, &EvolutionSpec::linear(1e-3).with_time(1.0), 1000).unwrap();
        let end = traj.states.last().unwrap();
        let exact = free_propagate(&u0, 1.0);
        assert!(end.sub(&exact).unwrap().l2_norm() < 1e-10);
        assert_eq!(traj.times.len(), 2);
    }

    #[test]
    fn constant_a_matches_shifted_symbol() {
        let g = make_grid(2, 32, 6.0).unwrap();
        let a = [0.4, -0.25];
        let ham = HamiltonianOp::constant_a(&g, &a).unwrap();
        let mut ev = Evolver::new(&ham, EvolutionSpec::linear(1e-3)).unwrap();
        for (mx, my) in [(1usize, 2usize), (3, 30), (0, 5)] {
            let (kx, ky) = (g.lattice()[mx], g.lattice()[my]);
            let u0 = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
            let mut u = u0.clone();
            let t = 1.0;
            ev.propagate(&mut u, t).unwrap();
            let phase = Complex64::from_polar(1.0, -t * ((kx + a[0]).powi(2) + (ky + a[1]).powi(2)));
            for (z, z0) in u.data().iter().zip(u0.data()) {
                assert!((z - phase * z0).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn linear_flow_is_unitary_and_reversible() {
        let g = make_grid(1, 512, 30.0).unwrap();
        let ham = bump_a_1d(&g);
        let u0 = Wavefunction::gaussian(&g, &[-6.0], 1.0, &[2.0], 1.0);
        let mut ev = Evolver::new(&ham, EvolutionSpec::linear(1e-3)).unwrap();
        let mut u = u0.clone();
        ev.propagate(&mut u, 10.0).unwrap();
        assert!((u.l2_norm() / u0.l2_norm() - 1.0).abs() < 1e-8);
        ev.propagate(&mut u, -10.0).unwrap();
        assert!(u.sub(&u0).unwrap().l2_norm() < 1e-7);
    }

    #[test]
    fn strang_error_is_second_order() {
        let g = make_grid(1, 256, 20.0).unwrap();
        let ham = bump_a_1d(&g);
        let u0 = Wavefunction::gaussian(&g, &[-3.0], 1.0, &[1.0], 1.0);
        let run = |dt: f64| {
            let mut ev = Evolver::new(&ham, EvolutionSpec::nonlinear(dt, 3.0)).unwrap();
            let mut u = u0.clone();
            ev.propagate(&mut u, 1.0).unwrap();
            u
        };
        let reference = run(1e-3 / 8.0);
        let e1 = run(2e-3).sub(&reference).unwrap().l2_norm();
        let e2 = run(1e-3).sub(&reference).unwrap().l2_norm();
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn gauge_shift_reindexes_plane_waves() {
        // A and A + c on the same plane wave differ by the symbol shift k -> k + c
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        let c = g.lattice()[1];
        let base = HamiltonianOp::constant_a(&g, &[0.3]).unwrap();
        let shifted = HamiltonianOp::constant_a(&g, &[0.3 + c]).unwrap();
        let k = g.lattice()[4];
        let wave = |k: f64| Wavefunction::from_fn(&g, move |x| Complex64::from_polar(1.0, k * x[0]));
        let mut u1 = wave(k + c);
        let mut u2 = wave(k);
        Evolver::new(&base, EvolutionSpec::linear(1e-3)).unwrap().propagate(&mut u1, 0.5).unwrap();
        Evolver::new(&shifted, EvolutionSpec::linear(1e-3)).unwrap().propagate(&mut u2, 0.5).unwrap();
        let amp1 = u1.inner(&wave(k + c)).unwrap();
        let amp2 = u2.inner(&wave(k)).unwrap();
        assert!((amp1 - amp2).norm() < 1e-10);
    }

    #[test]
    fn conserved_quantities_basic() {
        let g = make_grid(1, 256, 12.0).unwrap();
        let ham = bump_a_1d(&g);
        let z = conserved_quantities(&Wavefunction::zeros(&g), &ham, Some(3.0)).unwrap();
        assert_eq!((z.mass, z.energy), (0.0, 0.0));
        let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], PI.powf(-0.25));
        let c = conserved_quantities(&u, &HamiltonianOp::free(&g), None).unwrap();
        assert!((c.mass - 1.0).abs() < 1e-10);
        // |u'|^2 integrates to 1/2 for the normalized Gaussian
        assert!((c.energy - 0.25).abs() < 1e-10);
    }

    #[test]
    fn nonlinear_flow_conserves_mass_and_energy() {
        let g = make_grid(1, 512, 30.0).unwrap();
        let ham = bump_a_1d(&g);
        let u0 = Wavefunction::gaussian(&g, &[-5.0], 1.0, &[1.0], 1.0);
        let spec = EvolutionSpec::nonlinear(1e-3, 3.0).with_time(5.0);
        let rows = conservation_series(&u0, &ham, &spec, 500).unwrap();
        let (dm, de) = relative_drift(&rows);
        assert!(dm < 1e-6 && de < 1e-6, "{dm} {de}");
    }

    #[test]
    fn blowup_is_reported() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let ham = HamiltonianOp::free(&g);
        let mut u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], 1e200);
        let mut ev = Evolver::new(&ham, EvolutionSpec::nonlinear(1e-3, 3.0)).unwrap();
        assert!(matches!(ev.propagate(&mut u, 0.01), Err(Error::Blowup { step: 1, .. })));
    }

    #[test]
    fn cfl_limit_is_enforced() {
        let g = make_grid(1, 256, 8.0).unwrap();
        let ham = bump_a_1d(&g);
        assert!(Evolver::new(&ham, EvolutionSpec::linear(0.1)).is_err());
        // exact free flow needs no stability bound
        assert!(Evolver::new(&HamiltonianOp::free(&g), EvolutionSpec::linear(0.1)).is_ok());
    }

    #[test]
    fn free_dispersive_decay_exponent() {
        let g = make_grid(1, 1024, 100.0).unwrap();
        let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], 1.0);
        let fit = dispersive_decay(&u, &HamiltonianOp::free(&g), 1e-2, &[4.0, 8.0, 16.0]).unwrap();
        assert!((fit.exponent + 0.5).abs() < 0.02, "{}", fit.exponent);
    }
}
