//! Linear magnetic scattering of a boosted packet, evaluated in the frame moving with it.
//!
//! With `u = e^{i(m xi.x - m^2|xi|^2 t)} v(x - 2m xi t, t)` the flow `u_t = i(H + V)u` becomes
//! `v_t = i Delta v - 2A.grad v + (-div A + i(V - |A|^2 - 2m xi.A)) v`, every coefficient
//! sampled at `y + c + 2m xi t`. The free group is unchanged by the transformation, so
//! `S_L phi_xi = e^{i m xi.x} e^{-iTH_0} U_v(T, -T) e^{-iTH_0} phi_0` and the grid only has
//! to resolve the envelope, not the carrier.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Wavefunction, I, ZERO};
use crate::potential::{Component, PotentialDescriptor};
use crate::propagate::free_propagate;
use crate::scattering::STABILITY_FACTOR;

/// Mass fraction allowed in the outer tenth of the frame box at `+-T`.
pub const FRAME_TAIL: f64 = 1e-8;

/// Coefficients of the moving-frame remainder at one instant.
struct Coefficients {
    a: Vec<Vec<f64>>,
    c0: Vec<Complex64>,
}

pub struct MovingFrame<'a> {
    grid: Arc<Grid>,
    desc: &'a PotentialDescriptor,
    center: Vec<f64>,
    /// `m xi`.
    kick: Vec<f64>,
    has_a: bool,
}

impl<'a> MovingFrame<'a> {
    /// Frame following a packet centred at `center` with momentum `m xi`; `grid` is centred on the packet.
    pub fn new(grid: &Arc<Grid>, desc: &'a PotentialDescriptor, center: &[f64], kick: &[f64]) -> Result<Self> {
        let n = grid.dim();
        if center.len() != n || kick.len() != n {
            return Err(invalid("center", format!("expected {n} components")));
        }
        if desc.bumps.iter().any(|b| b.center.len() != n) {
            return Err(Error::GridMismatch("descriptor dimension differs from the frame grid".into()));
        }
        Ok(MovingFrame {
            grid: grid.clone(),
            desc,
            center: center.to_vec(),
            kick: kick.to_vec(),
            has_a: desc.has_a(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn lab_point(&self, p: usize, t: f64) -> [f64; 2] {
        let y = self.grid.coords(p);
        let mut x = [0.0; 2];
        for j in 0..self.grid.dim() {
            x[j] = y[j] + self.center[j] + 2.0 * self.kick[j] * t;
        }
        x
    }

    fn coefficients(&self, t: f64) -> Coefficients {
        let n = self.grid.dim();
        let len = self.grid.len();
        let mut a = if self.has_a { vec![vec![0.0; len]; n] } else { Vec::new() };
        let c0 = (0..len)
            .map(|p| {
                let x = self.lab_point(p, t);
                let x = &x[..n];
                let v = self.desc.v(x);
                if !self.has_a {
                    return Complex64::new(0.0, v);
                }
                let mut a2 = 0.0;
                let mut drift = 0.0;
                for j in 0..n {
                    let aj = self.desc.a_component(x, j);
                    a[j][p] = aj;
                    a2 += aj * aj;
                    drift += 2.0 * self.kick[j] * aj;
                }
                Complex64::new(-self.desc.div_a(x), v - a2 - drift)
            })
            .collect();
        Coefficients { a, c0 }
    }

    /// `int W(y + c + 2m xi t) |e^{itH_0} phi|^2 / ||phi||^2` with `W` the summed bump profiles
    /// normalized to peak at most one.
    pub fn overlap(&self, phi: &Wavefunction, t: f64) -> f64 {
        let scale: f64 = self.desc.bumps.iter().map(|b| b.amplitude.abs()).sum();
        if scale == 0.0 {
            return 0.0;
        }
        let u = free_propagate(phi, t);
        let n = self.grid.dim();
        let mut num = 0.0;
        let mut mass = 0.0;
        for (p, z) in u.data().iter().enumerate() {
            let x = self.lab_point(p, t);
            let w: f64 = self
                .desc
                .bumps
                .iter()
                .map(|b| {
                    let profile = b.value(&x[..n]) / b.amplitude;
                    let amp = if b.component == Component::Gauge {
                        b.amplitude / b.widths.iter().cloned().fold(f64::INFINITY, f64::min)
                    } else {
                        b.amplitude
                    };
                    amp.abs() * profile
                })
                .sum();
            num += w * z.norm_sqr();
            mass += z.norm_sqr();
        }
        if mass == 0.0 {
            0.0
        } else {
            num / (mass * scale)
        }
    }

    /// First `T` on a 5% ladder from `sigma / (2m|xi|)` with overlap below `target` at
    /// both `+-T`; fails when the spread packet no longer fits the frame box.
    pub fn exit_time(&self, phi: &Wavefunction, sigma: f64, target: f64) -> Result<f64> {
        let speed = 2.0 * self.kick.iter().map(|k| k * k).sum::<f64>().sqrt();
        if !(speed > 0.0) {
            return Err(invalid("xi", "moving frame needs a nonzero boost"));
        }
        let mut t = sigma / speed;
        for _ in 0..400 {
            if self.overlap(phi, -t) < target && self.overlap(phi, t) < target {
                self.check_contained(phi, STABILITY_FACTOR * t)?;
                return Ok(t);
            }
            self.check_contained(phi, t)?;
            t *= 1.05;
        }
        Err(invalid("t_scat", "packet never leaves the potential in the moving frame"))
    }

    /// The free packet at `+-t` must not reach the outer tenth of the box.
    pub fn check_contained(&self, phi: &Wavefunction, t: f64) -> Result<()> {
        let l = self.grid.half_width();
        let n = self.grid.dim();
        let u = free_propagate(phi, t);
        let mass = u.mass();
        let dv = self.grid.cell_volume();
        let outer: f64 = u
            .data()
            .iter()
            .enumerate()
            .filter(|(p, _)| {
                let y = self.grid.coords(*p);
                y[..n].iter().any(|c| c.abs() > 0.9 * l)
            })
            .map(|(_, z)| z.norm_sqr() * dv)
            .sum();
        if outer > FRAME_TAIL * mass {
            return Err(Error::InvalidGrid(format!(
                "moving-frame box L = {l} too small: {:.1e} of the mass reaches its edge at T = {t:.4}",
                outer / mass
            )));
        }
        Ok(())
    }

    /// Envelope `v_out` with `S_L phi_xi = e^{i m xi.x} v_out` for the envelope `phi`.
    pub fn scatter(&self, phi: &Wavefunction, t_scat: f64, dt: f64) -> Result<Wavefunction> {
        self.grid.check_same(phi.grid())?;
        if !(t_scat > 0.0) || !(dt > 0.0) {
            return Err(invalid("t_scat", "horizon and step must be positive"));
        }
        let grid = self.grid.clone();
        let len = grid.len();
        let n_steps = ((2.0 * t_scat / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = 2.0 * t_scat / n_steps as f64;
        let mut sp = grid.spectral();
        let half: Vec<Complex64> = grid
            .k2_spec()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -0.5 * h * k2))
            .collect();

        let start = free_propagate(phi, -t_scat);
        let mut w = start.into_data();
        let mut hat = vec![ZERO; len];
        let mut grad = vec![ZERO; len];
        let mut acc = vec![ZERO; len];
        let mut stage = vec![ZERO; len];
        let mut k = vec![ZERO; len];

        let mut eval = |sp: &mut crate::fft::Spectral, c: &Coefficients, v: &[Complex64], out: &mut [Complex64]| {
            for p in 0..len {
                out[p] = c.c0[p] * v[p];
            }
            if !c.a.is_empty() {
                hat.copy_from_slice(v);
                sp.forward(&mut hat);
                for (j, aj) in c.a.iter().enumerate() {
                    for ((g, z), kj) in grad.iter_mut().zip(&hat).zip(grid.k_spec(j)) {
                        *g = z * I * kj;
                    }
                    sp.inverse(&mut grad);
                    for p in 0..len {
                        out[p] -= 2.0 * aj[p] * grad[p];
                    }
                }
            }
        };

        let kinetic = |sp: &mut crate::fft::Spectral, w: &mut Vec<Complex64>| {
            sp.forward(w);
            for (z, m) in w.iter_mut().zip(&half) {
                *z *= m;
            }
            sp.inverse(w);
        };

        let mut t = -t_scat;
        let mut c_now = self.coefficients(t);
        for step in 0..n_steps {
            kinetic(&mut sp, &mut w);
            let c_mid = self.coefficients(t + 0.5 * h);
            let c_end = self.coefficients(t + h);
            eval(&mut sp, &c_now, &w, &mut k);
            for p in 0..len {
                acc[p] = k[p];
                stage[p] = w[p] + 0.5 * h * k[p];
            }
            eval(&mut sp, &c_mid, &stage, &mut k);
            for p in 0..len {
                acc[p] += 2.0 * k[p];
                stage[p] = w[p] + 0.5 * h * k[p];
            }
            eval(&mut sp, &c_mid, &stage, &mut k);
            for p in 0..len {
                acc[p] += 2.0 * k[p];
                stage[p] = w[p] + h * k[p];
            }
            eval(&mut sp, &c_end, &stage, &mut k);
            for p in 0..len {
                w[p] += h / 6.0 * (acc[p] + k[p]);
            }
            kinetic(&mut sp, &mut w);
            if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Blowup {
                    step: step + 1,
                    time: t + h,
                });
            }
            c_now = c_end;
            t += h;
        }
        let v = Wavefunction::from_vec(&grid, w)?;
        Ok(free_propagate(&v, -t_scat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{build_potentials, Bump};
    use crate::propagate::HamiltonianOp;
    use crate::scattering::{linear_s, ScatterSpec};

    #[test]
    fn free_frame_is_identity() {
        let g = make_grid(2, 32, 5.0).unwrap();
        let desc = PotentialDescriptor::default();
        let f = MovingFrame::new(&g, &desc, &[0.0, 0.0], &[4.0, 0.0]).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 0.6, &[0.0, 0.0], 1.0);
        let out = f.scatter(&phi, 0.4, 1e-2).unwrap();
        assert!(out.sub(&phi).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn matches_lab_frame_in_one_dimension() {
        let desc = PotentialDescriptor::new(vec![
            Bump::new(Component::A1, &[0.0], 0.4, &[1.0]),
            Bump::new(Component::V, &[0.5], 0.3, &[0.8]),
        ]);
        let speed = 6.0;
        let sigma = 1.0;
        let x0 = -0.3;
        let t_scat = 1.6;

        let lab = make_grid(1, 1024, 40.0).unwrap();
        let ham = HamiltonianOp::new(&build_potentials(&desc, &lab).unwrap());
        let phi_lab = Wavefunction::gaussian(&lab, &[x0], sigma, &[speed], 1.0);
        let spec = ScatterSpec::linear(t_scat, 1e-3).without_stability_check();
        let s_lab = linear_s(&phi_lab, &ham, &spec).unwrap().output;
        let p_lab = s_lab.inner(&phi_lab).unwrap();

        let frame_grid = make_grid(1, 256, 24.0).unwrap();
        let f = MovingFrame::new(&frame_grid, &desc, &[x0], &[speed]).unwrap();
        let phi = Wavefunction::gaussian(&frame_grid, &[0.0], sigma, &[0.0], 1.0);
        let v = f.scatter(&phi, t_scat, 1e-3).unwrap();
        let p_frame = v.inner(&phi).unwrap();
        let dev = (p_lab - p_frame).norm() / phi.mass();
        assert!(dev < 1e-6, "{p_lab} vs {p_frame}");
    }

    #[test]
    fn exit_time_clears_the_potential() {
        let g = make_grid(2, 64, 8.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::A2, &[0.0, 0.5], 0.5, &[1.0, 1.0])]);
        let f = MovingFrame::new(&g, &desc, &[0.0, 0.0], &[12.0, 0.0]).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 0.6, &[0.0, 0.0], 1.0);
        let t = f.exit_time(&phi, 0.6, 1e-8).unwrap();
        assert!(f.overlap(&phi, t) < 1e-8);
        assert!(f.overlap(&phi, 0.0) > 1e-3);
    }

    #[test]
    fn small_box_is_refused() {
        let g = make_grid(2, 32, 2.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.0, 0.0], 0.5, &[1.0, 1.0])]);
        let f = MovingFrame::new(&g, &desc, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
        let phi = Wavefunction::gaussian(&g, &[0.0, 0.0], 0.3, &[0.0, 0.0], 1.0);
        assert!(matches!(f.exit_time(&phi, 0.3, 1e-8), Err(Error::InvalidGrid(_))));
    }
}
