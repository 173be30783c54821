//! Small-amplitude limit `q(eps) = (S(eps phi), psi) / eps -> (S_L phi, psi)` and its rate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Wavefunction;
use crate::propagate::HamiltonianOp;
use crate::scattering::{nonlinear_s, ScatterDiagnostics, ScatterMode, ScatterSpec};
use crate::stats::linear_fit;

/// Residuals at or below this are treated as numerical noise.
pub const RESIDUAL_FLOOR: f64 = 1e-10;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsSweep {
    pub ladder: Vec<f64>,
    pub values: Vec<Complex64>,
    pub diagnostics: Vec<ScatterDiagnostics>,
    /// Set when any run failed its stability check.
    pub flagged: bool,
}

/// `m` amplitudes `eps_1 r^k` with `eps_1 ||phi||_{H^1} = delta / 2`.
pub fn default_ladder(phi: &Wavefunction, delta: f64, ratio: f64, m: usize) -> Vec<f64> {
    let h1 = phi.h1_norm(&mut phi.grid().spectral());
    let first = 0.5 * delta / h1;
    (0..m).map(|k| first * ratio.powi(k as i32)).collect()
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 2 {
        return Err(invalid("eps_ladder", "need at least two amplitudes to extrapolate"));
    }
    if ladder.iter().any(|e| !(*e > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("eps_ladder", "must be positive and strictly decreasing"));
    }
    Ok(())
}

/// Computes `q(eps)` for every ladder entry with the map relative to free dynamics.
pub fn sweep(
    phi: &Wavefunction,
    psi: &Wavefunction,
    ham: &HamiltonianOp,
    ladder: &[f64],
    spec: &ScatterSpec,
) -> Result<EpsSweep> {
    let mut out = sweep_pairs(phi, std::slice::from_ref(psi), ham, ladder, spec)?;
    Ok(out.remove(0))
}

/// One sweep per test function `psi`, sharing the scattering runs.
pub fn sweep_pairs(
    phi: &Wavefunction,
    psis: &[Wavefunction],
    ham: &HamiltonianOp,
    ladder: &[f64],
    spec: &ScatterSpec,
) -> Result<Vec<EpsSweep>> {
    validate_ladder(ladder)?;
    for psi in psis {
        phi.check_same_grid(psi)?;
    }
    let spec = spec.with_mode(ScatterMode::NonlinearVsFree);
    let runs: Vec<(Vec<Complex64>, ScatterDiagnostics)> = ladder
        .par_iter()
        .map(|&eps| {
            let out = nonlinear_s(&phi.scaled(Complex64::new(eps, 0.0)), ham, &spec)?;
            let qs = psis
                .iter()
                .map(|psi| Ok(out.output.inner(psi)? / eps))
                .collect::<Result<_>>()?;
            Ok((qs, out.diagnostics))
        })
        .collect::<Result<_>>()?;
    let flagged = runs.iter().any(|(_, d)| d.flagged);
    let diagnostics: Vec<ScatterDiagnostics> = runs.iter().map(|(_, d)| d.clone()).collect();
    Ok((0..psis.len())
        .map(|k| EpsSweep {
            ladder: ladder.to_vec(),
            values: runs.iter().map(|(q, _)| q[k]).collect(),
            diagnostics: diagnostics.clone(),
            flagged,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Least-squares slope of `ln |q(eps) - reference|` against `ln eps`.
    pub order: f64,
    /// Richardson extrapolation of the two smallest amplitudes with the fitted order.
    pub extrapolated: Complex64,
    pub residuals: Vec<f64>,
    /// `|extrapolated - reference| / |reference|`.
    pub relative_error: f64,
}

pub fn fit_order(sweep: &EpsSweep, reference: Complex64) -> Result<OrderFit> {
    validate_ladder(&sweep.ladder)?;
    let residuals: Vec<f64> = sweep.values.iter().map(|q| (q - reference).norm()).collect();
    let pts: Vec<(f64, f64)> = sweep
        .ladder
        .iter()
        .zip(&residuals)
        .filter(|(_, r)| **r > RESIDUAL_FLOOR)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{} of {} residuals above the floor {RESIDUAL_FLOOR:.0e}; need {MIN_FIT_POINTS}",
            pts.len(),
            residuals.len()
        )));
    }
    let (order, _) = linear_fit(&pts)?;
    let m = sweep.ladder.len();
    let (e1, e2) = (sweep.ladder[m - 2], sweep.ladder[m - 1]);
    let (q1, q2) = (sweep.values[m - 2], sweep.values[m - 1]);
    let (w1, w2) = (e1.powf(order), e2.powf(order));
    let extrapolated = (q2 * w1 - q1 * w2) / (w1 - w2);
    let relative_error = (extrapolated - reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
    Ok(OrderFit {
        order,
        extrapolated,
        residuals,
        relative_error,
    })
}

/// Hermite-type test function `H_a(x_1/s) H_b(x_2/s) exp(-|x - c|^2 / (2 s^2))` with an
/// optional carrier `e^{i k0.x}`; physicists' Hermite polynomials.
pub fn hermite_gaussian(
    grid: &std::sync::Arc<crate::grid::Grid>,
    center: &[f64],
    sigma: f64,
    k0: &[f64],
    orders: &[usize],
) -> Wavefunction {
    let n = grid.dim();
    Wavefunction::from_fn(grid, |x| {
        let mut amp = 1.0;
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for j in 0..n {
            let y = (x[j] - center[j]) / sigma;
            amp *= hermite(orders.get(j).copied().unwrap_or(0), y);
            r2 += y * y;
            phase += k0.get(j).copied().unwrap_or(0.0) * x[j];
        }
        Complex64::from_polar(amp * (-0.5 * r2).exp(), phase)
    })
}

fn hermite(order: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if order == 0 {
        return h0;
    }
    for k in 1..order {
        let next = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = next;
    }
    h1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::propagate::EvolutionSpec;

    fn synthetic(ladder: &[f64], reference: Complex64, c: Complex64, order: f64) -> EpsSweep {
        EpsSweep {
            ladder: ladder.to_vec(),
            values: ladder.iter().map(|e| reference + c * e.powf(order)).collect(),
            diagnostics: Vec::new(),
            flagged: false,
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let ladder = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let r = Complex64::new(0.7, -0.2);
        let fit = fit_order(&synthetic(&ladder, r, Complex64::new(3.0, 1.0), 2.0), r).unwrap();
        assert!((fit.order - 2.0).abs() < 1e-6);
        assert!(fit.relative_error < 1e-12);
        assert!(fit.residuals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn short_or_unordered_ladders_are_rejected() {
        let r = Complex64::new(1.0, 0.0);
        assert!(fit_order(&synthetic(&[0.1], r, r, 2.0), r).is_err());
        assert!(fit_order(&synthetic(&[0.1, 0.2, 0.05, 0.01], r, r, 2.0), r).is_err());
    }

    #[test]
    fn residuals_at_floor_are_degenerate() {
        let ladder = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let r = Complex64::new(1.0, 0.0);
        let s = synthetic(&ladder, r, Complex64::new(1e-12, 0.0), 2.0);
        assert!(matches!(fit_order(&s, r), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn phase_rotation_keeps_order() {
        let ladder = [0.1, 0.05, 0.025, 0.0125];
        let r = Complex64::new(0.3, 0.4);
        let s = synthetic(&ladder, r, Complex64::new(1.0, 2.0), 2.0);
        let rot = Complex64::from_polar(1.0, 1.1);
        let mut s2 = s.clone();
        s2.values.iter_mut().for_each(|q| *q *= rot);
        let a = fit_order(&s, r).unwrap();
        let b = fit_order(&s2, r * rot).unwrap();
        assert!((a.order - b.order).abs() < 1e-12);
    }

    #[test]
    fn hermite_recurrence() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert!((hermite(2, 0.5) - (4.0 * 0.25 - 2.0)).abs() < 1e-15);
        assert!((hermite(3, 0.5) - (8.0 * 0.125 - 12.0 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn free_sweep_tends_to_plain_pairing() {
        let g = make_grid(1, 256, 30.0).unwrap();
        let ham = HamiltonianOp::free(&g);
        let phi = Wavefunction::gaussian(&g, &[0.0], 1.5, &[2.0], 1.0);
        let psi = hermite_gaussian(&g, &[0.5], 1.5, &[2.0], &[1]);
        let spec = ScatterSpec::new(2.0, EvolutionSpec::nonlinear(2e-3, 3.0), ScatterMode::NonlinearVsFree)
            .without_stability_check();
        let ladder = [0.08, 0.04, 0.02, 0.01, 0.005];
        let s = sweep(&phi, &psi, &ham, &ladder, &spec).unwrap();
        let reference = phi.inner(&psi).unwrap();
        let fit = fit_order(&s, reference).unwrap();
        assert!((fit.order - 2.0).abs() < 0.1, "{}", fit.order);
        assert!(fit.relative_error < 1e-4);
    }
}
