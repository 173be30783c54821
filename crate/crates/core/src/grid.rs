//! Periodic grids, complex fields on them, and the norms used throughout.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::{FftPlan, Spectral};

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Fraction of spectral energy allowed outside two thirds of the band.
pub const RESOLUTION_TAIL: f64 = 1e-8;

/// Shape of a periodic grid, serializable as part of configs and dump headers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

/// Uniform periodic sampling of `[-L, L)^n` with its wavenumber lattice.
#[derive(Debug)]
pub struct Grid {
    shape: GridShape,
    spacing: f64,
    /// Sample coordinates along one axis, `x_i = -L + i h`.
    axis: Vec<f64>,
    /// Wavenumbers along one axis in FFT order, `(pi/L) m`.
    lattice: Vec<f64>,
    /// Wavenumber component per axis, indexed in spectral layout.
    k_spec: Vec<Vec<f64>>,
    k2_spec: Vec<f64>,
    plan: FftPlan,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

pub fn make_grid(n: usize, points: usize, half_width: f64) -> Result<Arc<Grid>> {
    Grid::new(GridShape {
        n,
        points,
        half_width,
    })
    .map(Arc::new)
}

impl Grid {
    pub fn new(shape: GridShape) -> Result<Self> {
        let GridShape {
            n,
            points,
            half_width,
        } = shape;
        if n != 1 && n != 2 {
            return Err(Error::InvalidGrid(format!("dimension {n} not in {{1, 2}}")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {points}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        let h = 2.0 * half_width / points as f64;
        let axis: Vec<f64> = (0..points).map(|i| -half_width + i as f64 * h).collect();
        let dk = PI / half_width;
        let lattice: Vec<f64> = (0..points)
            .map(|i| {
                let m = if i < points / 2 {
                    i as i64
                } else {
                    i as i64 - points as i64
                };
                dk * m as f64
            })
            .collect();
        let total = points.pow(n as u32);
        let mut k_spec = vec![vec![0.0; total]; n];
        for s in 0..total {
            if n == 1 {
                k_spec[0][s] = lattice[s];
            } else {
                // transposed layout: s = ky_index * N + kx_index
                k_spec[0][s] = lattice[s % points];
                k_spec[1][s] = lattice[s / points];
            }
        }
        let k2_spec = (0..total)
            .map(|s| k_spec.iter().map(|k| k[s] * k[s]).sum())
            .collect();
        Ok(Grid {
            shape,
            spacing: h,
            axis,
            lattice,
            k_spec,
            k2_spec,
            plan: FftPlan::new(n, points),
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }
    pub fn dim(&self) -> usize {
        self.shape.n
    }
    pub fn points(&self) -> usize {
        self.shape.points
    }
    pub fn half_width(&self) -> f64 {
        self.shape.half_width
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn len(&self) -> usize {
        self.shape.points.pow(self.shape.n as u32)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.shape.n as i32)
    }
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }
    /// Largest resolved wavenumber per axis, `pi / h`.
    pub fn k_max(&self) -> f64 {
        PI / self.spacing
    }
    pub fn k_spec(&self, axis: usize) -> &[f64] {
        &self.k_spec[axis]
    }
    pub fn k2_spec(&self) -> &[f64] {
        &self.k2_spec
    }

    pub fn spectral(&self) -> Spectral {
        Spectral::new(self.plan.clone())
    }

    /// Coordinates of spatial sample `p` (row-major, first axis slowest).
    #[inline]
    pub fn coords(&self, p: usize) -> [f64; 2] {
        let n = self.shape.points;
        if self.shape.n == 1 {
            [self.axis[p], 0.0]
        } else {
            [self.axis[p / n], self.axis[p % n]]
        }
    }

    pub fn radius_sq(&self, p: usize) -> f64 {
        let c = self.coords(p);
        c[0] * c[0] + c[1] * c[1]
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )))
        }
    }

    /// Samples `f` at every grid point.
    pub fn sample<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        (0..self.len())
            .map(|p| {
                let c = self.coords(p);
                f(&c[..self.shape.n])
            })
            .collect()
    }

    /// Spectral derivative of a real field along `axis`.
    pub fn derivative_real(&self, f: &[f64], axis: usize, sp: &mut Spectral) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        sp.forward(&mut buf);
        for (z, &k) in buf.iter_mut().zip(&self.k_spec[axis]) {
            *z *= I * k;
        }
        sp.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// Points per axis needed to resolve wavenumbers up to `k_needed` on this box.
    pub fn required_points(&self, k_needed: f64) -> usize {
        let n = (k_needed * 2.0 * self.shape.half_width / PI).ceil() as usize;
        (n + n % 2).max(8)
    }
}

/// Regularity exponents of the weighted space Sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
}

impl SigmaParams {
    pub fn new(n: usize, s1: f64, s2: f64) -> Result<Self> {
        let s = s1 + s2;
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(invalid("sigma", "s1 and s2 must be positive"));
        }
        if !(s > n as f64 / 2.0) {
            return Err(invalid("sigma", format!("s = {s} must exceed n/2")));
        }
        Ok(SigmaParams { s, s1, s2 })
    }

    /// `s = n/2 + 1/2` split evenly.
    pub fn default_for(n: usize) -> Self {
        let s = n as f64 / 2.0 + 0.5;
        SigmaParams {
            s,
            s1: s / 2.0,
            s2: s / 2.0,
        }
    }
}

/// Complex field on a [`Grid`].
#[derive(Clone, Debug)]
pub struct Wavefunction {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl Wavefunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Wavefunction {
            grid: grid.clone(),
            data: vec![ZERO; grid.len()],
        }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "data length {} vs grid size {}",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("wavefunction".into()));
        }
        Ok(Wavefunction {
            grid: grid.clone(),
            data,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl FnMut(&[f64]) -> Complex64) -> Self {
        Wavefunction {
            grid: grid.clone(),
            data: grid.sample(f),
        }
    }

    /// Gaussian `amp * exp(-|x - c|^2 / (2 sigma^2) + i k0.x)`.
    pub fn gaussian(grid: &Arc<Grid>, center: &[f64], sigma: f64, k0: &[f64], amp: f64) -> Self {
        let n = grid.dim();
        Wavefunction::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for j in 0..n {
                let d = x[j] - center.get(j).copied().unwrap_or(0.0);
                r2 += d * d;
                phase += k0.get(j).copied().unwrap_or(0.0) * x[j];
            }
            Complex64::from_polar(amp * (-r2 / (2.0 * sigma * sigma)).exp(), phase)
        })
    }

    /// Random band-limited field: Gaussian spectral coefficients inside `|k| < k_cut`.
    pub fn random_smooth<R: Rng>(grid: &Arc<Grid>, rng: &mut R, k_cut: f64) -> Self {
        let mut sp = grid.spectral();
        let mut data: Vec<Complex64> = (0..grid.len())
            .map(|s| {
                if grid.k2_spec()[s] < k_cut * k_cut {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                } else {
                    ZERO
                }
            })
            .collect();
        sp.inverse(&mut data);
        let mut u = Wavefunction {
            grid: grid.clone(),
            data,
        };
        let norm = u.l2_norm();
        if norm > 0.0 {
            u.scale(Complex64::new(1.0 / norm, 0.0));
        }
        u
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_same_grid(&self, other: &Wavefunction) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Wavefunction) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Wavefunction) -> Result<Wavefunction> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Wavefunction) -> Result<Wavefunction> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    /// `h^n sum u conj(v)`, conjugate-linear in the second slot.
    pub fn inner(&self, other: &Wavefunction) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let sum: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn spectrum(&self, sp: &mut Spectral) -> Vec<Complex64> {
        let mut buf = self.data.clone();
        sp.forward(&mut buf);
        buf
    }

    /// Parseval weight converting `sum |u_hat|^2` to the L2 norm squared.
    fn spectral_weight(&self) -> f64 {
        self.grid.cell_volume() / self.grid.len() as f64
    }

    pub fn l2_norm_spectral(&self, sp: &mut Spectral) -> f64 {
        let spec = self.spectrum(sp);
        (spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spectral_weight()).sqrt()
    }

    /// Flat Sobolev norm with symbol `(1 + |k|^2)^{1/2}`.
    pub fn h1_norm(&self, sp: &mut Spectral) -> f64 {
        let spec = self.spectrum(sp);
        let sum: f64 = spec
            .iter()
            .zip(self.grid.k2_spec())
            .map(|(z, k2)| (1.0 + k2) * z.norm_sqr())
            .sum();
        (sum * self.spectral_weight()).sqrt()
    }

    /// Spectral derivative along `axis`.
    pub fn derivative(&self, axis: usize, sp: &mut Spectral) -> Wavefunction {
        let mut buf = self.spectrum(sp);
        for (z, &k) in buf.iter_mut().zip(self.grid.k_spec(axis)) {
            *z *= I * k;
        }
        sp.inverse(&mut buf);
        Wavefunction {
            grid: self.grid.clone(),
            data: buf,
        }
    }

    /// Fraction of spectral energy with some `|k_j|` beyond two thirds of `k_max`.
    pub fn spectral_tail(&self, sp: &mut Spectral) -> f64 {
        let spec = self.spectrum(sp);
        let cut = 2.0 / 3.0 * self.grid.k_max();
        let n = self.grid.dim();
        let mut total = 0.0;
        let mut tail = 0.0;
        for (s, z) in spec.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if (0..n).any(|a| self.grid.k_spec(a)[s].abs() > cut) {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    pub fn check_resolved(&self, sp: &mut Spectral) -> Result<()> {
        let tail = self.spectral_tail(sp);
        if tail > RESOLUTION_TAIL {
            Err(Error::Unresolved {
                tail,
                limit: RESOLUTION_TAIL,
            })
        } else {
            Ok(())
        }
    }

    /// `(||(-Delta)^{s/2} u||^2 + |||x|^s u||^2 + |||x|^{s2} (-Delta)^{s1/2} u||^2)^{1/2}`.
    pub fn sigma_norm(&self, params: &SigmaParams, sp: &mut Spectral) -> Result<f64> {
        self.check_resolved(sp)?;
        let grid = &self.grid;
        let spec = self.spectrum(sp);
        let frac = |k2: f64, s: f64| if k2 == 0.0 { 0.0 } else { k2.powf(s / 2.0) };
        let t1: f64 = spec
            .iter()
            .zip(grid.k2_spec())
            .map(|(z, &k2)| frac(k2, params.s).powi(2) * z.norm_sqr())
            .sum::<f64>()
            * self.spectral_weight();
        let dv = grid.cell_volume();
        let t2: f64 = self
            .data
            .iter()
            .enumerate()
            .map(|(p, z)| grid.radius_sq(p).powf(params.s) * z.norm_sqr())
            .sum::<f64>()
            * dv;
        let mut mixed: Vec<Complex64> = spec
            .iter()
            .zip(grid.k2_spec())
            .map(|(z, &k2)| z * frac(k2, params.s1))
            .collect();
        sp.inverse(&mut mixed);
        let t3: f64 = mixed
            .iter()
            .enumerate()
            .map(|(p, z)| grid.radius_sq(p).powf(params.s2) * z.norm_sqr())
            .sum::<f64>()
            * dv;
        Ok((t1 + t2 + t3).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_1d_lattice() {
        let g = make_grid(1, 8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        let expected = [0.0, 0.25, 0.5, 0.75, -1.0, -0.75, -0.5, -0.25].map(|m| m * PI);
        for (k, e) in g.lattice().iter().zip(expected) {
            assert!((k - e).abs() < 1e-15);
        }
        assert_eq!(g.axis()[0], -4.0);
    }

    #[test]
    fn grid_2d_tensor() {
        let g = make_grid(2, 8, 4.0).unwrap();
        assert_eq!(g.len(), 64);
        // spectral index 8*3 + 1 -> (kx, ky) = (lattice[1], lattice[3])
        assert!((g.k_spec(0)[25] - PI / 4.0).abs() < 1e-15);
        assert!((g.k_spec(1)[25] - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(make_grid(1, 7, 4.0).is_err());
        assert!(make_grid(3, 8, 4.0).is_err());
        assert!(make_grid(1, 8, 0.0).is_err());
        assert!(make_grid(1, 6, 1.0).is_err());
    }

    #[test]
    fn normalized_gaussian_has_unit_mass() {
        let g = make_grid(1, 256, 12.0).unwrap();
        let norm = PI.powf(-0.25);
        let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], norm);
        let ip = u.inner(&u).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-10 && ip.im.abs() < 1e-15);
        let zero = Wavefunction::zeros(&g);
        assert_eq!(u.inner(&zero).unwrap(), ZERO);
    }

    #[test]
    fn fourier_modes_are_orthogonal() {
        let g = make_grid(1, 32, 3.0).unwrap();
        let k1 = g.lattice()[3];
        let k2 = g.lattice()[7];
        let a = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, k1 * x[0]));
        let b = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, k2 * x[0]));
        assert!(a.inner(&b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn derivative_of_lattice_modes_is_exact() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let mut sp = g.spectral();
        for (mx, my) in [(1usize, 0usize), (3, 5), (8, 2), (15, 9)] {
            let kx = g.lattice()[mx];
            let ky = g.lattice()[my];
            let u = Wavefunction::from_fn(&g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
            for (axis, k) in [(0, kx), (1, ky)] {
                let du = u.derivative(axis, &mut sp);
                for (d, z) in du.data().iter().zip(u.data()) {
                    assert!((d - I * k * z).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = Wavefunction::zeros(&make_grid(1, 16, 2.0).unwrap());
        let b = Wavefunction::zeros(&make_grid(1, 16, 3.0).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch(_))));
    }

    /// Direct O(N^2) DFT, independent of the FFT path.
    fn direct_dft(data: &[Complex64], lattice: &[f64], axis: &[f64]) -> Vec<Complex64> {
        lattice
            .iter()
            .map(|&k| {
                data.iter()
                    .zip(axis)
                    .map(|(z, &x)| z * Complex64::from_polar(1.0, -k * (x - axis[0])))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn sigma_norm_matches_direct_quadrature() {
        let g = make_grid(1, 256, 16.0).unwrap();
        let mut sp = g.spectral();
        let u = Wavefunction::gaussian(&g, &[0.0], 1.0, &[0.0], 1.0);
        let p = SigmaParams::new(1, 0.5, 0.5).unwrap();
        let value = u.sigma_norm(&p, &mut sp).unwrap();

        // oracle: continuum integrals for the first two terms are Gamma(3/2) = sqrt(pi)/2
        let t1_cont = PI.sqrt() / 2.0;
        let t2_cont = PI.sqrt() / 2.0;
        // third term through a direct DFT synthesis on the same torus
        let h = g.spacing();
        let n = g.points() as f64;
        let coeffs = direct_dft(u.data(), g.lattice(), g.axis());
        let t1_direct: f64 = coeffs
            .iter()
            .zip(g.lattice())
            .map(|(c, &k)| k * k * c.norm_sqr())
            .sum::<f64>()
            * h
            / n;
        assert!((t1_direct - t1_cont).abs() < 1e-10);
        let t3: f64 = g
            .axis()
            .iter()
            .map(|&x| {
                let f: Complex64 = coeffs
                    .iter()
                    .zip(g.lattice())
                    .map(|(c, &k)| c * k.abs().sqrt() * Complex64::from_polar(1.0, k * (x - g.axis()[0])))
                    .sum::<Complex64>()
                    / n;
                x.abs() * f.norm_sqr()
            })
            .sum::<f64>()
            * h;
        let oracle = (t1_cont + t2_cont + t3).sqrt();
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
    }

    #[test]
    fn sigma_norm_rejects_unresolved() {
        let g = make_grid(1, 32, 16.0).unwrap();
        let mut sp = g.spectral();
        let u = Wavefunction::gaussian(&g, &[0.0], 0.3, &[0.0], 1.0);
        assert!(matches!(
            u.sigma_norm(&SigmaParams::default_for(1), &mut sp),
            Err(Error::Unresolved { .. })
        ));
    }

    #[test]
    fn sigma_params_validation() {
        assert!(SigmaParams::new(2, 0.5, 0.4).is_err());
        assert!(SigmaParams::new(1, 0.0, 1.0).is_err());
        let d = SigmaParams::default_for(2);
        assert_eq!(d.s, 1.5);
        assert_eq!(d.s1 + d.s2, d.s);
    }

    fn smooth_grid() -> Arc<Grid> {
        make_grid(2, 32, 6.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_holds(seed in any::<u64>()) {
            let g = make_grid(2, 32, 5.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Wavefunction::from_fn(&g, |_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>()));
            let mut sp = g.spectral();
            let a = u.l2_norm();
            let b = u.l2_norm_spectral(&mut sp);
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn sigma_norm_homogeneous_and_subadditive(seed in any::<u64>()) {
            let g = smooth_grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Wavefunction::random_smooth(&g, &mut rng, 3.0);
            let v = Wavefunction::random_smooth(&g, &mut rng, 3.0);
            let p = SigmaParams::default_for(2);
            let mut sp = g.spectral();
            let nu = u.sigma_norm(&p, &mut sp).unwrap();
            let nv = v.sigma_norm(&p, &mut sp).unwrap();
            let n2u = u.scaled(Complex64::new(2.0, 0.0)).sigma_norm(&p, &mut sp).unwrap();
            prop_assert!((n2u - 2.0 * nu).abs() <= 1e-12 * nu);
            let nsum = u.add(&v).unwrap().sigma_norm(&p, &mut sp).unwrap();
            prop_assert!(nsum <= nu + nv + 1e-10);
        }

        #[test]
        fn inner_product_conjugate_symmetric(seed in any::<u64>()) {
            let g = smooth_grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Wavefunction::random_smooth(&g, &mut rng, 4.0);
            let v = Wavefunction::random_smooth(&g, &mut rng, 4.0);
            let uv = u.inner(&v).unwrap();
            let vu = v.inner(&u).unwrap();
            prop_assert!((uv - vu.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn sigma_norm_of_zero() {
        let g = smooth_grid();
        let mut sp = g.spectral();
        let z = Wavefunction::zeros(&g);
        assert_eq!(z.sigma_norm(&SigmaParams::default_for(2), &mut sp).unwrap(), 0.0);
    }
}
