//! Picard iteration on the Duhamel form
//! `u(t) = e^{itH} phi_- - i int_{-T}^{t} e^{i(t-s)H} |u|^{p-1} u(s) ds`
//! over uniform nodes on `[-T, T]`, with trapezoidal time quadrature.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Wavefunction, I};
use crate::propagate::{EvolutionSpec, Evolver, HamiltonianOp};

/// Consecutive non-contracting iterations tolerated before giving up.
pub const DIVERGENCE_STREAK: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardSpec {
    pub max_iter: usize,
    /// Stop once the largest node update falls below `tol` times the largest node norm.
    pub tol: f64,
    /// Quadrature step.
    pub dt_q: f64,
    pub t_scat: f64,
    pub p: f64,
    pub include_nonlinearity: bool,
    /// Smallness radius for `||phi_-||_{H^1}`; exceeding it only warns.
    pub delta: Option<f64>,
}

impl PicardSpec {
    pub fn new(t_scat: f64, dt_q: f64, p: f64) -> Self {
        PicardSpec {
            max_iter: 60,
            tol: 1e-13,
            dt_q,
            t_scat,
            p,
            include_nonlinearity: true,
            delta: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be positive"));
        }
        if !(self.dt_q > 0.0) || !(self.t_scat > 0.0) {
            return Err(invalid("dt_q", "step and horizon must be positive"));
        }
        if !(self.p > 1.0) {
            return Err(invalid("p", "must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub times: Vec<f64>,
    pub trajectory: Vec<Wavefunction>,
    pub phi_plus: Wavefunction,
    /// `max_j ||u^{k+1}_j - u^k_j||` per iteration.
    pub updates: Vec<f64>,
    /// Ratios of successive updates.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    /// Final update, i.e. the integral-equation residual at the nodes.
    pub residual: f64,
}

fn nonlinearity(u: &[Complex64], p: f64, out: &mut [Complex64]) {
    let half = 0.5 * (p - 1.0);
    for (o, z) in out.iter_mut().zip(u) {
        let r2 = z.norm_sqr();
        let mag = if p == 3.0 { r2 } else { r2.powf(half) };
        *o = z * mag;
    }
}

fn max_diff(a: &[Vec<Complex64>], b: &[Vec<Complex64>], dv: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            (x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>() * dv).sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn picard_solve(phi_minus: &Wavefunction, ham: &HamiltonianOp, pic: &PicardSpec) -> Result<PicardResult> {
    pic.validate()?;
    ham.grid().check_same(phi_minus.grid())?;
    if let Some(delta) = pic.delta {
        let h1 = phi_minus.h1_norm(&mut phi_minus.grid().spectral());
        if h1 > delta {
            warn!("||phi_-||_H1 = {h1:.3e} exceeds delta = {delta:.3e}; contraction not guaranteed");
        }
    }
    let grid = phi_minus.grid().clone();
    let dv = grid.cell_volume();
    let mut ev = Evolver::new(ham, EvolutionSpec::linear(pic.dt_q))?;
    let t = pic.t_scat;
    let m = ((2.0 * t / pic.dt_q) - 1e-9).ceil().max(1.0) as usize;
    let h = 2.0 * t / m as f64;
    let times: Vec<f64> = (0..=m).map(|j| -t + j as f64 * h).collect();

    // free iterate e^{itH} phi_- on the nodes
    let mut u = phi_minus.clone();
    ev.propagate(&mut u, -t)?;
    let mut base = Vec::with_capacity(m + 1);
    base.push(u.data().to_vec());
    for _ in 0..m {
        ev.propagate(&mut u, h)?;
        base.push(u.data().to_vec());
    }

    let mut current = base.clone();
    let mut updates = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    let len = grid.len();
    let mut n_buf = vec![Complex64::new(0.0, 0.0); len];
    let coef = -I * (0.5 * h);
    let scale = base
        .iter()
        .map(|x| (x.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv).sqrt())
        .fold(0.0, f64::max);

    let mut iterations = 0;
    for _ in 0..pic.max_iter {
        iterations += 1;
        let mut next = Vec::with_capacity(m + 1);
        next.push(base[0].clone());
        if pic.include_nonlinearity {
            let mut acc = Wavefunction::zeros(&grid);
            for j in 0..m {
                nonlinearity(&current[j], pic.p, &mut n_buf);
                for (a, nv) in acc.data_mut().iter_mut().zip(&n_buf) {
                    *a += coef * nv;
                }
                ev.propagate(&mut acc, h)?;
                nonlinearity(&current[j + 1], pic.p, &mut n_buf);
                let mut node = base[j + 1].clone();
                for ((nd, a), nv) in node.iter_mut().zip(acc.data_mut().iter_mut()).zip(&n_buf) {
                    *a += coef * nv;
                    *nd += *a;
                }
                next.push(node);
            }
        } else {
            next.extend(base[1..].iter().cloned());
        }
        let update = max_diff(&next, &current, dv);
        if let Some(&prev) = updates.last() {
            let r: f64 = if prev > 0.0 { update / prev } else { 0.0 };
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
            if streak >= DIVERGENCE_STREAK {
                return Err(Error::PicardDivergence { ratios });
            }
        }
        updates.push(update);
        current = next;
        if update <= pic.tol * scale {
            break;
        }
    }

    let trajectory: Vec<Wavefunction> = current
        .into_iter()
        .map(|d| Wavefunction::from_vec(&grid, d))
        .collect::<Result<_>>()?;
    let mut phi_plus = trajectory[m].clone();
    ev.propagate(&mut phi_plus, -t)?;
    Ok(PicardResult {
        times,
        trajectory,
        phi_plus,
        residual: *updates.last().unwrap_or(&0.0),
        updates,
        ratios,
        iterations,
    })
}

/// Largest amplitude from `candidates` (scales of `phi`) whose first contraction ratio is
/// at most `0.5`; returns the matching `H^1` radius.
pub fn adaptive_delta(phi: &Wavefunction, ham: &HamiltonianOp, pic: &PicardSpec, candidates: &[f64]) -> Result<f64> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut probe = *pic;
    probe.max_iter = 3;
    probe.tol = 0.0;
    probe.delta = None;
    let h1 = phi.h1_norm(&mut phi.grid().spectral());
    for eps in sorted {
        let scaled = phi.scaled(Complex64::new(eps, 0.0));
        match picard_solve(&scaled, ham, &probe) {
            Ok(res) if res.ratios.first().is_some_and(|r| *r <= 0.5) => return Ok(eps * h1),
            Ok(_) | Err(Error::PicardDivergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(invalid("delta", "no candidate amplitude contracts with ratio <= 0.5"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{build_potentials, Bump, Component, PotentialDescriptor};
    use crate::scattering::{nonlinear_s, ScatterMode, ScatterSpec};

    fn setup() -> (HamiltonianOp, Wavefunction) {
        let g = make_grid(1, 256, 25.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.0], 0.3, &[1.0])]);
        let ham = HamiltonianOp::new(&build_potentials(&desc, &g).unwrap());
        let phi = Wavefunction::gaussian(&g, &[0.0], 1.0, &[2.0], 1.0);
        (ham, phi)
    }

    #[test]
    fn linear_case_converges_immediately() {
        let (ham, phi) = setup();
        let mut pic = PicardSpec::new(1.0, 5e-3, 3.0);
        pic.include_nonlinearity = false;
        let res = picard_solve(&phi, &ham, &pic).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.phi_plus.sub(&phi).unwrap().l2_norm() < 1e-9);
    }

    #[test]
    fn matches_time_domain_solver() {
        let (ham, phi) = setup();
        let phi = phi.scaled(Complex64::new(0.3, 0.0));
        let dt = 2e-3;
        let pic = PicardSpec::new(1.0, dt, 3.0);
        let res = picard_solve(&phi, &ham, &pic).unwrap();
        let spec = ScatterSpec::new(1.0, EvolutionSpec::nonlinear(dt, 3.0), ScatterMode::NonlinearVsH)
            .without_stability_check();
        let td = nonlinear_s(&phi, &ham, &spec).unwrap();
        let dev = res.phi_plus.sub(&td.output).unwrap().l2_norm() / phi.l2_norm();
        assert!(dev < 1e-5, "{dev}");
        assert!(res.ratios.iter().all(|r| *r < 1.0));
        assert!(res.residual < 1e-10);
    }

    #[test]
    fn contraction_ratio_scales_quadratically() {
        let (ham, phi) = setup();
        let mut pic = PicardSpec::new(1.0, 5e-3, 3.0);
        pic.max_iter = 3;
        pic.tol = 0.0;
        let ratio = |eps: f64| picard_solve(&phi.scaled(Complex64::new(eps, 0.0)), &ham, &pic).unwrap().ratios[0];
        let q = ratio(0.2) / ratio(0.1);
        assert!((q - 4.0).abs() < 0.4, "{q}");
    }

    #[test]
    fn large_data_diverges_with_history() {
        let (ham, phi) = setup();
        let pic = PicardSpec::new(1.0, 5e-3, 3.0);
        match picard_solve(&phi.scaled(Complex64::new(6.0, 0.0)), &ham, &pic) {
            Err(Error::PicardDivergence { ratios }) => assert!(ratios.len() >= DIVERGENCE_STREAK),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.ratios)),
        }
    }

    #[test]
    fn adaptive_delta_picks_contracting_amplitude() {
        let (ham, phi) = setup();
        let pic = PicardSpec::new(1.0, 5e-3, 3.0);
        let delta = adaptive_delta(&phi, &ham, &pic, &[4.0, 2.0, 1.0, 0.5, 0.25]).unwrap();
        let h1 = phi.h1_norm(&mut phi.grid().spectral());
        assert!(delta > 0.0 && delta <= 4.0 * h1);
    }
}
