//! Analytic potential descriptors, their grid samples, and closed-form line integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Which field a bump contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    /// First component of the vector potential.
    A1,
    /// Second component of the vector potential.
    A2,
    /// Scalar potential.
    V,
    /// Gauge term: the bump is a scalar `chi` and `grad chi` is added to `A`.
    #[serde(rename = "gauge")]
    Gauge,
}

/// Anisotropic Gaussian `amplitude * exp(-1/2 sum_j ((x_j - c_j) / w_j)^2)`.
///
/// `widths` are standard deviations per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub component: Component,
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub widths: Vec<f64>,
}

impl Bump {
    pub fn new(component: Component, center: &[f64], amplitude: f64, widths: &[f64]) -> Self {
        Bump {
            component,
            center: center.to_vec(),
            amplitude,
            widths: widths.to_vec(),
        }
    }

    /// Isotropic bump proportional to `exp(-|x - c|^2)`.
    pub fn unit_gaussian(component: Component, center: &[f64], amplitude: f64) -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        Bump::new(component, center, amplitude, &vec![w; center.len()])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut q = 0.0;
        for j in 0..self.center.len() {
            let d = (x[j] - self.center[j]) / self.widths[j];
            q += d * d;
        }
        self.amplitude * (-0.5 * q).exp()
    }

    pub fn partial(&self, x: &[f64], axis: usize) -> f64 {
        let w = self.widths[axis];
        -(x[axis] - self.center[axis]) / (w * w) * self.value(x)
    }

    pub fn second_partial(&self, x: &[f64], a: usize, b: usize) -> f64 {
        let da = (x[a] - self.center[a]) / (self.widths[a] * self.widths[a]);
        let db = (x[b] - self.center[b]) / (self.widths[b] * self.widths[b]);
        let diag = if a == b {
            1.0 / (self.widths[a] * self.widths[a])
        } else {
            0.0
        };
        (da * db - diag) * self.value(x)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.center.len() != n || self.widths.len() != n {
            return Err(Error::InvalidPotential(format!(
                "bump for {:?} has center/widths of length {}/{}, expected {n}",
                self.component,
                self.center.len(),
                self.widths.len()
            )));
        }
        if self.component == Component::A2 && n < 2 {
            return Err(Error::InvalidPotential("A2 requires n = 2".into()));
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) || !self.amplitude.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "bump for {:?} needs positive widths and finite amplitude",
                self.component
            )));
        }
        Ok(())
    }

    /// Closed-form integral along the line `s theta_perp + tau theta`.
    pub fn line_integral(&self, theta: f64, s: f64) -> f64 {
        let (alpha, kappa, sc) = self.line_geometry(theta);
        self.amplitude * (2.0 * PI / alpha).sqrt() * (-0.5 * kappa * (s - sc) * (s - sc)).exp()
    }

    /// Line integral convolved across lines with the profile `|phi_0|^2 / ||phi_0||^2`
    /// of a Gaussian envelope `exp(-|x|^2 / (2 sigma^2))`.
    pub fn smeared_line_integral(&self, theta: f64, s: f64, sigma: f64) -> f64 {
        let (alpha, kappa, sc) = self.line_geometry(theta);
        let spread = 1.0 + 0.5 * kappa * sigma * sigma;
        self.amplitude * (2.0 * PI / alpha).sqrt() / spread.sqrt()
            * (-0.5 * kappa / spread * (s - sc) * (s - sc)).exp()
    }

    /// d/ds of the smeared line integral.
    pub fn smeared_line_integral_ds(&self, theta: f64, s: f64, sigma: f64) -> f64 {
        let (_, kappa, sc) = self.line_geometry(theta);
        let spread = 1.0 + 0.5 * kappa * sigma * sigma;
        -kappa / spread * (s - sc) * self.smeared_line_integral(theta, s, sigma)
    }

    /// `(alpha, kappa, s_c)` with `alpha = theta^T M theta`, `kappa = det M / alpha`.
    fn line_geometry(&self, theta: f64) -> (f64, f64, f64) {
        let (t, p) = directions(theta);
        let m1 = 1.0 / (self.widths[0] * self.widths[0]);
        let m2 = 1.0 / (self.widths[1] * self.widths[1]);
        let alpha = m1 * t[0] * t[0] + m2 * t[1] * t[1];
        let kappa = m1 * m2 / alpha;
        let sc = p[0] * self.center[0] + p[1] * self.center[1];
        (alpha, kappa, sc)
    }
}

/// `(theta, theta_perp)` for the angle `theta`, with `theta_perp = (-sin, cos)`.
pub fn directions(theta: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    ([c, s], [-s, c])
}

/// Which line-integral family to evaluate from a descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineTarget {
    V,
    /// `theta . A` integrated along the line.
    ATangential,
    /// One Cartesian component of `A` integrated along the line.
    AComponent(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDescriptor {
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
}

fn default_gamma0() -> f64 {
    1.0
}

impl Default for PotentialDescriptor {
    fn default() -> Self {
        PotentialDescriptor {
            bumps: Vec::new(),
            gamma0: default_gamma0(),
        }
    }
}

impl PotentialDescriptor {
    pub fn new(bumps: Vec<Bump>) -> Self {
        PotentialDescriptor {
            bumps,
            gamma0: default_gamma0(),
        }
    }

    pub fn has_a(&self) -> bool {
        self.bumps.iter().any(|b| b.component != Component::V)
    }

    pub fn has_v(&self) -> bool {
        self.bumps.iter().any(|b| b.component == Component::V)
    }

    /// Copy with every bump moved by `d`.
    pub fn translated(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            for (c, dj) in b.center.iter_mut().zip(d) {
                *c += dj;
            }
        }
        out
    }

    /// Only the bumps feeding `A` (including gauge terms).
    pub fn magnetic_part(&self) -> Self {
        PotentialDescriptor {
            bumps: self
                .bumps
                .iter()
                .filter(|b| b.component != Component::V)
                .cloned()
                .collect(),
            gamma0: self.gamma0,
        }
    }

    /// Only the `V` bumps.
    pub fn electric_part(&self) -> Self {
        PotentialDescriptor {
            bumps: self.bumps.iter().filter(|b| b.component == Component::V).cloned().collect(),
            gamma0: self.gamma0,
        }
    }

    pub fn a_component(&self, x: &[f64], j: usize) -> f64 {
        self.bumps
            .iter()
            .map(|b| match b.component {
                Component::A1 if j == 0 => b.value(x),
                Component::A2 if j == 1 => b.value(x),
                Component::Gauge => b.partial(x, j),
                _ => 0.0,
            })
            .sum()
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .filter(|b| b.component == Component::V)
            .map(|b| b.value(x))
            .sum()
    }

    /// `B_12 = d_1 A_2 - d_2 A_1` from the analytic descriptor.
    pub fn b12(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .map(|b| match b.component {
                Component::A2 => b.partial(x, 0),
                Component::A1 => -b.partial(x, 1),
                _ => 0.0,
            })
            .sum()
    }

    pub fn div_a(&self, x: &[f64]) -> f64 {
        let n = x.len();
        self.bumps
            .iter()
            .map(|b| match b.component {
                Component::A1 => b.partial(x, 0),
                Component::A2 => b.partial(x, 1),
                Component::Gauge => (0..n).map(|j| b.second_partial(x, j, j)).sum(),
                Component::V => 0.0,
            })
            .sum()
    }

    /// Exact line integral of the requested target along `(theta, s)`.
    pub fn line_integral(&self, target: LineTarget, theta: f64, s: f64) -> f64 {
        self.line_value(target, theta, |b| b.line_integral(theta, s), |b| {
            // d/ds of the line integral of chi
            let (_, kappa, sc) = b.line_geometry(theta);
            -kappa * (s - sc) * b.line_integral(theta, s)
        })
    }

    /// Line integral smeared by a Gaussian probe of width `sigma`, normalized by its mass.
    pub fn smeared_line_integral(&self, target: LineTarget, theta: f64, s: f64, sigma: f64) -> f64 {
        self.line_value(
            target,
            theta,
            |b| b.smeared_line_integral(theta, s, sigma),
            |b| b.smeared_line_integral_ds(theta, s, sigma),
        )
    }

    fn line_value(
        &self,
        target: LineTarget,
        theta: f64,
        scalar: impl Fn(&Bump) -> f64,
        chi_ds: impl Fn(&Bump) -> f64,
    ) -> f64 {
        let (t, p) = directions(theta);
        self.bumps
            .iter()
            .map(|b| match (target, b.component) {
                (LineTarget::V, Component::V) => scalar(b),
                (LineTarget::ATangential, Component::A1) => t[0] * scalar(b),
                (LineTarget::ATangential, Component::A2) => t[1] * scalar(b),
                (LineTarget::AComponent(0), Component::A1) => scalar(b),
                (LineTarget::AComponent(1), Component::A2) => scalar(b),
                // grad chi = theta (d/dtau chi) + theta_perp (d/ds chi); the first integrates to zero
                (LineTarget::AComponent(j), Component::Gauge) => p[j] * chi_ds(b),
                _ => 0.0,
            })
            .sum()
    }

    /// Largest distance from the origin at which any bump exceeds `1e-10` of its peak.
    pub fn effective_radius(&self) -> f64 {
        let reach = (2.0 * (1e10f64).ln()).sqrt();
        self.bumps
            .iter()
            .map(|b| {
                let c: f64 = b.center.iter().map(|c| c * c).sum::<f64>().sqrt();
                let w = b.widths.iter().cloned().fold(0.0, f64::max);
                c + reach * w
            })
            .fold(0.0, f64::max)
    }

    /// Smallest bump width, or `None` without bumps.
    pub fn min_width(&self) -> Option<f64> {
        self.bumps
            .iter()
            .flat_map(|b| b.widths.iter().cloned())
            .reduce(f64::min)
    }
}

/// Pass/fail flags of the decay and regularity surrogates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `|A| e^{gamma0 <x>}` on the outer ring stays below `1e-6` of its grid maximum.
    pub a_decay: bool,
    /// `(1+|x|)^{n+1/2} |d^alpha B|`, `alpha in {0, 1}`, likewise negligible on the outer ring.
    pub b_decay: bool,
    /// Every bump is below `1e-10` of its peak on the box boundary.
    pub boundary: bool,
    /// `min V` on the grid; the positive lower bound is informational only.
    pub v_min: Option<f64>,
}

impl Admissibility {
    pub fn all_pass(&self) -> bool {
        self.a_decay && self.b_decay && self.boundary
    }
}

/// Descriptor plus grid samples of `A`, `V`, `div A`, `|A|^2` and `B_12`.
#[derive(Clone, Debug)]
pub struct PotentialSet {
    grid: Arc<Grid>,
    pub descriptor: PotentialDescriptor,
    /// One sample vector per component of `A`; empty when `A = 0`.
    pub a: Vec<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub div_a: Vec<f64>,
    pub a_sq: Vec<f64>,
    /// Spectral `d_1 A_2 - d_2 A_1`; `None` in one dimension.
    pub b12: Option<Vec<f64>>,
    pub admissibility: Admissibility,
}

const BOUNDARY_TOL: f64 = 1e-10;
const DECAY_TOL: f64 = 1e-6;

pub fn build_potentials(desc: &PotentialDescriptor, grid: &Arc<Grid>) -> Result<PotentialSet> {
    let n = grid.dim();
    if !(desc.gamma0 > 0.0) {
        return Err(Error::InvalidPotential(format!(
            "gamma0 must be positive, got {}",
            desc.gamma0
        )));
    }
    let h = grid.spacing();
    let l = grid.half_width();
    for b in &desc.bumps {
        b.validate(n)?;
        if let Some(w) = b.widths.iter().find(|&&w| w < 3.0 * h) {
            return Err(Error::InvalidPotential(format!(
                "bump width {w} below 3h = {}",
                3.0 * h
            )));
        }
        for j in 0..n {
            let gap = l - b.center[j].abs();
            let edge = if gap <= 0.0 {
                1.0
            } else {
                (-0.5 * (gap / b.widths[j]).powi(2)).exp()
            };
            if edge >= BOUNDARY_TOL {
                return Err(Error::InvalidPotential(format!(
                    "bump for {:?} is {edge:.2e} of its peak at the box boundary",
                    b.component
                )));
            }
        }
    }

    let mut sp = grid.spectral();
    let a: Vec<Vec<f64>> = if desc.has_a() {
        (0..n)
            .map(|j| grid.sample(|x| desc.a_component(x, j)))
            .collect()
    } else {
        Vec::new()
    };
    let v = desc.has_v().then(|| grid.sample(|x| desc.v(x)));
    let mut div_a = vec![0.0; grid.len()];
    let mut a_sq = vec![0.0; grid.len()];
    for (j, aj) in a.iter().enumerate() {
        let d = grid.derivative_real(aj, j, &mut sp);
        for p in 0..grid.len() {
            div_a[p] += d[p];
            a_sq[p] += aj[p] * aj[p];
        }
    }
    let b12 = if n == 2 {
        Some(if a.is_empty() {
            vec![0.0; grid.len()]
        } else {
            let d1a2 = grid.derivative_real(&a[1], 0, &mut sp);
            let d2a1 = grid.derivative_real(&a[0], 1, &mut sp);
            d1a2.iter().zip(&d2a1).map(|(x, y)| x - y).collect()
        })
    } else {
        None
    };

    let ring = |p: usize| {
        let c = grid.coords(p);
        c[..n].iter().any(|x| x.abs() >= 0.9 * l)
    };
    let a_mag: Vec<f64> = (0..grid.len()).map(|p| a_sq[p].sqrt()).collect();
    let weight_a = |p: usize| (desc.gamma0 * (1.0 + grid.radius_sq(p)).sqrt()).exp();
    let a_decay = ring_negligible(grid.len(), &ring, |p| a_mag[p] * weight_a(p));
    let b_decay = match &b12 {
        Some(b) => {
            let poly = |p: usize| (1.0 + grid.radius_sq(p).sqrt()).powf(n as f64 + 0.5);
            let mut ok = ring_negligible(grid.len(), &ring, |p| b[p].abs() * poly(p));
            for j in 0..n {
                let db = grid.derivative_real(b, j, &mut sp);
                ok &= ring_negligible(grid.len(), &ring, |p| db[p].abs() * poly(p));
            }
            ok
        }
        None => true,
    };
    let v_min = v.as_ref().map(|v| v.iter().cloned().fold(f64::INFINITY, f64::min));

    Ok(PotentialSet {
        grid: grid.clone(),
        descriptor: desc.clone(),
        a,
        v,
        div_a,
        a_sq,
        b12,
        admissibility: Admissibility {
            a_decay,
            b_decay,
            boundary: true,
            v_min,
        },
    })
}

fn ring_negligible(len: usize, ring: &impl Fn(usize) -> bool, f: impl Fn(usize) -> f64) -> bool {
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for p in 0..len {
        let val = f(p);
        peak = peak.max(val);
        if ring(p) {
            edge = edge.max(val);
        }
    }
    edge <= DECAY_TOL * peak || peak == 0.0
}

impl PotentialSet {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn has_a(&self) -> bool {
        !self.a.is_empty()
    }

    pub fn has_v(&self) -> bool {
        self.v.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn zero_potential_is_admissible() {
        let g = make_grid(2, 32, 6.0).unwrap();
        let set = build_potentials(&PotentialDescriptor::default(), &g).unwrap();
        assert!(set.a.is_empty() && set.v.is_none());
        assert!(set.b12.as_ref().unwrap().iter().all(|&b| b == 0.0));
        assert!(set.admissibility.all_pass());
    }

    #[test]
    fn b12_of_single_a2_bump() {
        let g = make_grid(2, 128, 8.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::unit_gaussian(Component::A2, &[0.0, 0.0], 1.0)]);
        let set = build_potentials(&desc, &g).unwrap();
        let b = set.b12.as_ref().unwrap();
        let mut worst = 0.0f64;
        for p in 0..g.len() {
            let c = g.coords(p);
            let exact = -2.0 * c[0] * (-(c[0] * c[0] + c[1] * c[1])).exp();
            worst = worst.max((b[p] - exact).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        assert!(set.admissibility.all_pass());
    }

    #[test]
    fn one_dimensional_b_is_empty() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.0], 0.5, &[1.0])]);
        let set = build_potentials(&desc, &g).unwrap();
        assert!(set.b12.is_none());
    }

    #[test]
    fn rejects_unresolved_bump() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let h = g.spacing();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.0], 1.0, &[h / 2.0])]);
        assert!(matches!(build_potentials(&desc, &g), Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn rejects_bump_touching_boundary() {
        let g = make_grid(1, 64, 4.0).unwrap();
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::V, &[2.0], 1.0, &[1.0])]);
        assert!(build_potentials(&desc, &g).is_err());
    }

    #[test]
    fn analytic_div_a_matches_spectral() {
        let g = make_grid(2, 96, 8.0).unwrap();
        let desc = PotentialDescriptor::new(vec![
            Bump::new(Component::A1, &[0.5, -0.3], 0.4, &[1.0, 0.8]),
            Bump::new(Component::Gauge, &[-0.4, 0.2], 0.7, &[0.9, 1.1]),
        ]);
        let set = build_potentials(&desc, &g).unwrap();
        for p in (0..g.len()).step_by(37) {
            let c = g.coords(p);
            assert!((set.div_a[p] - desc.div_a(&c)).abs() < 1e-9);
            assert!((set.b12.as_ref().unwrap()[p] - desc.b12(&c)).abs() < 1e-9);
        }
    }

    /// Brute-force trapezoid quadrature along a line.
    fn quad_line(f: impl Fn(&[f64]) -> f64, theta: f64, s: f64) -> f64 {
        let (t, p) = directions(theta);
        let dt = 1e-3;
        (-20000..=20000)
            .map(|i| {
                let tau = i as f64 * dt;
                f(&[s * p[0] + tau * t[0], s * p[1] + tau * t[1]])
            })
            .sum::<f64>()
            * dt
    }

    #[test]
    fn unit_gaussian_line_integral() {
        let b = Bump::unit_gaussian(Component::V, &[0.0, 0.0], 1.0);
        for theta in [0.0, 0.7, 2.1] {
            for s in [-1.3f64, 0.0, 0.4] {
                let exact = PI.sqrt() * (-s * s).exp();
                assert!((b.line_integral(theta, s) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn line_integrals_match_quadrature() {
        let desc = PotentialDescriptor::new(vec![
            Bump::new(Component::A1, &[0.5, -0.3], 0.4, &[1.0, 0.6]),
            Bump::new(Component::A2, &[-0.2, 0.1], -0.3, &[0.7, 1.2]),
            Bump::new(Component::Gauge, &[0.3, 0.3], 0.8, &[0.9, 0.7]),
            Bump::new(Component::V, &[0.1, -0.6], 1.5, &[0.5, 0.9]),
        ]);
        for theta in [0.3, 1.9] {
            let (t, _) = directions(theta);
            for s in [-0.8, 0.0, 1.1] {
                let v = quad_line(|x| desc.v(x), theta, s);
                assert!((desc.line_integral(LineTarget::V, theta, s) - v).abs() < 1e-10);
                let tan = quad_line(|x| t[0] * desc.a_component(x, 0) + t[1] * desc.a_component(x, 1), theta, s);
                assert!((desc.line_integral(LineTarget::ATangential, theta, s) - tan).abs() < 1e-10);
                for j in 0..2 {
                    let comp = quad_line(|x| desc.a_component(x, j), theta, s);
                    assert!((desc.line_integral(LineTarget::AComponent(j), theta, s) - comp).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn smeared_integral_matches_quadrature() {
        let b = Bump::new(Component::V, &[0.4, -0.2], 1.0, &[1.0, 0.6]);
        let sigma = 0.4;
        let theta = 0.9;
        let s = 0.3;
        // weight across lines: sqrt(pi) sigma exp(-u^2/sigma^2) over ||phi_0||^2 = pi sigma^2
        let du = 1e-3;
        let smeared: f64 = (-4000..=4000)
            .map(|i| {
                let u = i as f64 * du;
                b.line_integral(theta, s + u) * (-u * u / (sigma * sigma)).exp() / (PI.sqrt() * sigma)
            })
            .sum::<f64>()
            * du;
        assert!((b.smeared_line_integral(theta, s, sigma) - smeared).abs() < 1e-12);
    }

    #[test]
    fn pure_gauge_tangential_integral_vanishes() {
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::Gauge, &[0.2, 0.0], 1.0, &[0.8, 0.8])]);
        for theta in [0.0, 1.0, 2.5] {
            assert_eq!(desc.line_integral(LineTarget::ATangential, theta, 0.3), 0.0);
            let q = quad_line(
                |x| {
                    let (t, _) = directions(theta);
                    t[0] * desc.a_component(x, 0) + t[1] * desc.a_component(x, 1)
                },
                theta,
                0.3,
            );
            assert!(q.abs() < 1e-12);
        }
    }

    #[test]
    fn descriptor_json_roundtrip() {
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::Gauge, &[0.2, 0.0], 1.0, &[0.8, 0.8])]);
        let text = serde_json::to_string(&desc).unwrap();
        assert!(text.contains("\"gauge\""));
        let back: PotentialDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back, desc);
    }
}
