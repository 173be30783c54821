//! Small-scale invariant suite (`n = 1, N = 256` and `n = 2, N = 128`).

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amplitude::{fit_order, EpsSweep};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid, Wavefunction};
use crate::picard::{picard_solve, PicardSpec};
use crate::potential::{build_potentials, Bump, Component, LineTarget, PotentialDescriptor};
use crate::probe::{pairing, Medium, ProbeConfig, ProbeTarget};
use crate::propagate::{free_propagate, relative_drift, conservation_series, EvolutionSpec, Fault, HamiltonianOp};
use crate::scattering::{linear_s, nonlinear_s, ScatterMode, ScatterSpec};
use crate::tomography::{fbp_invert, uniform_angles, uniform_offsets, xray_forward, XrayField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Module or check names to run; all when `None`.
    pub select: Option<Vec<String>>,
    pub fault: Fault,
    pub seed: u64,
}

struct Check {
    module: &'static str,
    name: &'static str,
    limit: f64,
    run: fn(&VerifyOptions) -> Result<f64>,
}

const CHECKS: &[Check] = &[
    Check { module: "grid_core", name: "parseval", limit: 1e-12, run: parseval },
    Check { module: "grid_core", name: "spectral_derivative", limit: 1e-10, run: spectral_derivative },
    Check { module: "grid_core", name: "gauge_line_integral", limit: 1e-12, run: gauge_line_integral },
    Check { module: "propagators", name: "free_unitarity", limit: 1e-12, run: free_unitarity },
    Check { module: "propagators", name: "free_group_property", limit: 1e-12, run: free_group },
    Check { module: "propagators", name: "magnetic_unitarity", limit: 1e-9, run: magnetic_unitarity },
    Check { module: "propagators", name: "nonlinear_energy_drift", limit: 1e-6, run: nonlinear_energy },
    Check { module: "scattering_ops", name: "free_identity", limit: 1e-10, run: free_identity },
    Check { module: "scattering_ops", name: "picard_vs_time_domain", limit: 1e-5, run: picard_agreement },
    Check { module: "amplitude_probe", name: "synthetic_order", limit: 1e-6, run: synthetic_order },
    Check { module: "velocity_probe", name: "zero_potential_pairing", limit: 1e-8, run: zero_pairing },
    Check { module: "velocity_probe", name: "oracle_sign_flip", limit: 1e-12, run: sign_flip },
    Check { module: "tomography", name: "xray_dual_path", limit: 1e-6, run: xray_dual_path },
    Check { module: "tomography", name: "fbp_gaussian", limit: 0.05, run: fbp_gaussian },
];

pub fn check_names() -> Vec<String> {
    CHECKS.iter().map(|c| format!("{}/{}", c.module, c.name)).collect()
}

/// Runs the selected checks; an empty selection is an error.
pub fn verify(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let selected: Vec<&Check> = CHECKS
        .iter()
        .filter(|c| match &opts.select {
            None => true,
            Some(names) => names.iter().any(|n| n == c.module || n == c.name),
        })
        .collect();
    if selected.is_empty() {
        return Err(Error::Config {
            path: "verify.select".into(),
            reason: format!("selection matches no checks; available: {}", check_names().join(", ")),
        });
    }
    Ok(selected
        .iter()
        .map(|c| {
            let (value, pass) = match (c.run)(opts) {
                Ok(v) => (v, v <= c.limit),
                Err(e) => {
                    log::error!("{}/{}: {e}", c.module, c.name);
                    (f64::NAN, false)
                }
            };
            CheckResult {
                module: c.module.into(),
                name: c.name.into(),
                value,
                limit: c.limit,
                pass,
            }
        })
        .collect())
}

pub fn table(results: &[CheckResult]) -> String {
    let mut s = format!("{:<4} {:<16} {:<24} {:>12} {:>10}\n", "", "module", "check", "value", "limit");
    for r in results {
        s.push_str(&format!(
            "{:<4} {:<16} {:<24} {:>12.3e} {:>10.1e}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.module,
            r.name,
            r.value,
            r.limit
        ));
    }
    s
}

fn grid1() -> Result<Arc<Grid>> {
    make_grid(1, 256, 20.0)
}

fn grid2() -> Result<Arc<Grid>> {
    make_grid(2, 128, 10.0)
}

fn a_bump(n: usize) -> PotentialDescriptor {
    let c = vec![0.0; n];
    let w = vec![1.0; n];
    let comp = if n == 1 { Component::A1 } else { Component::A2 };
    PotentialDescriptor::new(vec![Bump::new(comp, &c, 0.5, &w)])
}

fn parseval(o: &VerifyOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut worst: f64 = 0.0;
    for g in [grid1()?, grid2()?] {
        let u = Wavefunction::random_smooth(&g, &mut rng, 0.5 * g.k_max());
        let a = u.l2_norm();
        let b = u.l2_norm_spectral(&mut g.spectral());
        worst = worst.max((a - b).abs() / a);
    }
    Ok(worst)
}

fn spectral_derivative(_: &VerifyOptions) -> Result<f64> {
    let g = grid1()?;
    let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], 1.0);
    let du = u.derivative(0, &mut g.spectral());
    let exact = Wavefunction::from_fn(&g, |x| Complex64::new(-x[0] * (-0.5 * x[0] * x[0]).exp(), 0.0));
    Ok(du.sub(&exact)?.max_abs())
}

fn gauge_line_integral(_: &VerifyOptions) -> Result<f64> {
    let desc = PotentialDescriptor::new(vec![Bump::new(Component::Gauge, &[0.3, -0.2], 0.7, &[1.0, 0.8])]);
    let mut worst: f64 = 0.0;
    for t in uniform_angles(8) {
        for s in [-1.0, 0.0, 0.5] {
            worst = worst.max(desc.line_integral(LineTarget::ATangential, t, s).abs());
        }
    }
    Ok(worst)
}

fn free_unitarity(o: &VerifyOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut worst: f64 = 0.0;
    for g in [grid1()?, grid2()?] {
        let u = Wavefunction::random_smooth(&g, &mut rng, 0.5 * g.k_max());
        let v = free_propagate(&u, 0.7);
        worst = worst.max((v.mass() - u.mass()).abs() / u.mass());
    }
    Ok(worst)
}

fn free_group(_: &VerifyOptions) -> Result<f64> {
    let g = grid2()?;
    let u = Wavefunction::gaussian(&g, &[0.5, 0.0], 1.0, &[1.0, -0.5], 1.0);
    let a = free_propagate(&free_propagate(&u, 0.3), 0.4);
    let b = free_propagate(&u, 0.7);
    Ok(a.sub(&b)?.l2_norm() / u.l2_norm())
}

fn magnetic_unitarity(o: &VerifyOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in [grid1()?, grid2()?] {
        let n = g.dim();
        let ham = HamiltonianOp::new(&build_potentials(&a_bump(n), &g)?).with_fault(o.fault);
        let u = Wavefunction::gaussian(&g, &vec![-1.0; n], 1.0, &vec![1.5; n], 1.0);
        let spec = EvolutionSpec::linear(2e-3).with_time(0.4);
        let rows = conservation_series(&u, &ham, &spec, 50)?;
        worst = worst.max(relative_drift(&rows).0);
    }
    Ok(worst)
}

fn nonlinear_energy(_: &VerifyOptions) -> Result<f64> {
    let g = grid1()?;
    let ham = HamiltonianOp::new(&build_potentials(&a_bump(1), &g)?);
    let u = Wavefunction::gaussian(&g, &[-2.0], 1.0, &[1.0], 1.0);
    let spec = EvolutionSpec::nonlinear(1e-3, 3.0).with_time(1.0);
    let rows = conservation_series(&u, &ham, &spec, 100)?;
    let (mass, energy) = relative_drift(&rows);
    Ok(energy.max(mass))
}

fn free_identity(_: &VerifyOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in [grid1()?, grid2()?] {
        let n = g.dim();
        let ham = HamiltonianOp::free(&g);
        let u = Wavefunction::gaussian(&g, &vec![0.0; n], 1.0, &vec![1.0; n], 1.0);
        let out = linear_s(&u, &ham, &ScatterSpec::linear(2.0, 1e-2))?;
        worst = worst.max(out.output.sub(&u)?.l2_norm() / u.l2_norm());
    }
    Ok(worst)
}

fn picard_agreement(_: &VerifyOptions) -> Result<f64> {
    let g = make_grid(1, 256, 25.0)?;
    let desc = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.0], 0.3, &[1.0])]);
    let ham = HamiltonianOp::new(&build_potentials(&desc, &g)?);
    let phi = Wavefunction::gaussian(&g, &[0.0], 1.0, &[2.0], 0.3);
    let dt = 2e-3;
    let res = picard_solve(&phi, &ham, &PicardSpec::new(1.0, dt, 3.0))?;
    let spec = ScatterSpec::new(1.0, EvolutionSpec::nonlinear(dt, 3.0), ScatterMode::NonlinearVsH)
        .without_stability_check();
    let td = nonlinear_s(&phi, &ham, &spec)?;
    Ok(res.phi_plus.sub(&td.output)?.l2_norm() / phi.l2_norm())
}

fn synthetic_order(_: &VerifyOptions) -> Result<f64> {
    let ladder = vec![0.1, 0.05, 0.025, 0.0125, 0.00625];
    let r = Complex64::new(0.4, -0.3);
    let c = Complex64::new(2.0, 1.0);
    let sweep = EpsSweep {
        values: ladder.iter().map(|e| r + c * e * e).collect(),
        ladder,
        diagnostics: Vec::new(),
        flagged: false,
    };
    let fit = fit_order(&sweep, r)?;
    Ok((fit.order - 2.0).abs().max(fit.relative_error))
}

fn zero_pairing(_: &VerifyOptions) -> Result<f64> {
    let frame = make_grid(2, 48, 6.0)?;
    let desc = PotentialDescriptor::default();
    let mut cfg = ProbeConfig::new(0.8, 4e-3);
    cfg.t_scat = Some(0.2);
    let v = pairing(0.3, 0.5, 16.0, Medium::Comoving { desc: &desc, grid: &frame }, ProbeTarget::ATangential, &cfg, false)?;
    Ok(v.value.norm())
}

fn sign_flip(_: &VerifyOptions) -> Result<f64> {
    let desc = a_bump(2).translated(&[0.4, 0.1]);
    let mut worst: f64 = 0.0;
    for t in uniform_angles(6) {
        let a = desc.smeared_line_integral(LineTarget::ATangential, t, 0.3, 0.4);
        let b = desc.smeared_line_integral(LineTarget::ATangential, t + std::f64::consts::PI, -0.3, 0.4);
        worst = worst.max((a + b).abs());
    }
    Ok(worst)
}

fn xray_dual_path(_: &VerifyOptions) -> Result<f64> {
    let g = grid2()?;
    let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.3, -0.2], 1.0, &[1.0, 0.8])]);
    let angles = uniform_angles(8);
    let offsets = uniform_offsets(33, 6.5);
    let a = xray_forward(XrayField::Descriptor { desc: &desc, target: LineTarget::V }, &angles, &offsets)?;
    let samples = g.sample(|x| desc.v(x));
    let b = xray_forward(XrayField::Samples { grid: &g, values: &samples }, &angles, &offsets)?;
    Ok(a.max_deviation(&b)? / a.max_abs())
}

fn fbp_gaussian(_: &VerifyOptions) -> Result<f64> {
    let g = grid2()?;
    let desc = PotentialDescriptor::new(vec![Bump::unit_gaussian(Component::V, &[0.0, 0.0], 1.0)]);
    let sino = xray_forward(
        XrayField::Descriptor { desc: &desc, target: LineTarget::V },
        &uniform_angles(90),
        &uniform_offsets(129, 6.0),
    )?;
    let recon = fbp_invert(&sino, &g)?;
    let truth = g.sample(|x| desc.v(x));
    Ok(recon.errors_against(&truth)?.relative_l2)
}
