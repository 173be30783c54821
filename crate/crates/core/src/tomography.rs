//! Parallel-beam X-ray transform, filtered backprojection and B-field recovery in 2-D.
//!
//! Lines are parameterized as `{s theta_perp + tau theta}` with `theta = (cos, sin)` and
//! `theta_perp = (-sin, cos)`, angles uniform on `[0, pi)`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Spectral;
use crate::grid::{Grid, ZERO};
use crate::io::{fmt_f64, CsvWriter};
use crate::potential::{directions, LineTarget, PotentialDescriptor, PotentialSet};

pub const MIN_ANGLES: usize = 16;
pub const MIN_OFFSETS_FOR_B: usize = 65;
pub const NOISE_LIMIT: f64 = 10.0;
/// Imaginary-to-real ratio above which sinogram quality is flagged.
pub const IMAG_FLAG: f64 = 0.1;
/// Spectral upsampling factor used before interpolating grid samples.
pub const UPSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Scattering,
    Oracle,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Scattering => "scattering",
            Source::Oracle => "oracle",
        }
    }
}

/// What a sinogram or reconstruction represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    V,
    ATangential,
    AComponent(usize),
    B,
    Scalar,
}

impl From<LineTarget> for Target {
    fn from(t: LineTarget) -> Self {
        match t {
            LineTarget::V => Target::V,
            LineTarget::ATangential => Target::ATangential,
            LineTarget::AComponent(j) => Target::AComponent(j),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Row-major `[angle][offset]`.
    pub values: Vec<Complex64>,
    pub source: Source,
    pub target: Target,
    /// Probe speed for scattering-derived data.
    pub xi: Option<f64>,
}

/// `n` angles `i pi / n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * PI / n as f64).collect()
}

/// `n` offsets evenly covering `[-half_range, half_range]`.
pub fn uniform_offsets(n: usize, half_range: f64) -> Vec<f64> {
    let ds = 2.0 * half_range / (n - 1) as f64;
    (0..n).map(|j| -half_range + j as f64 * ds).collect()
}

fn check_uniform(v: &[f64], name: &str) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::Sinogram(format!("{name} needs at least two samples")));
    }
    let d = v[1] - v[0];
    if !(d > 0.0) || v.windows(2).any(|w| ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs().max(1.0)) {
        return Err(Error::Sinogram(format!("{name} must be uniform and increasing")));
    }
    Ok(d)
}

impl Sinogram {
    pub fn new(
        angles: Vec<f64>,
        offsets: Vec<f64>,
        values: Vec<Complex64>,
        source: Source,
        target: Target,
        xi: Option<f64>,
    ) -> Result<Self> {
        check_uniform(&angles, "angles")?;
        check_uniform(&offsets, "offsets")?;
        if angles[0] < 0.0 || *angles.last().unwrap() >= PI {
            return Err(Error::Sinogram("angles must lie in [0, pi)".into()));
        }
        if offsets.len() % 2 == 0 || offsets[offsets.len() / 2].abs() > 1e-12 {
            return Err(Error::Sinogram("offsets must be odd in count and centred on s = 0".into()));
        }
        if values.len() != angles.len() * offsets.len() {
            return Err(Error::Sinogram(format!(
                "{} values for {} x {} samples",
                values.len(),
                angles.len(),
                offsets.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("sinogram".into()));
        }
        Ok(Sinogram {
            angles,
            offsets,
            values,
            source,
            target,
            xi,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }
    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }
    pub fn offset_step(&self) -> f64 {
        self.offsets[1] - self.offsets[0]
    }
    pub fn half_range(&self) -> f64 {
        *self.offsets.last().unwrap()
    }
    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.n_offsets();
        &self.values[i * n..(i + 1) * n]
    }

    /// Largest imaginary part relative to the largest real part.
    pub fn imag_fraction(&self) -> f64 {
        let re = self.values.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let im = self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if re == 0.0 {
            if im == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            im / re
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Same layout with values `f(self) - f(other)`, checking geometry.
    pub fn max_deviation(&self, other: &Sinogram) -> Result<f64> {
        if self.angles != other.angles || self.offsets != other.offsets {
            return Err(Error::Sinogram("sinogram geometries differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV rows `(theta_index, theta, s, re, im, source, xi)`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path, &["theta_index", "theta", "s", "re", "im", "source", "xi"])?;
        let xi = self.xi.map(fmt_f64).unwrap_or_default();
        for (i, &theta) in self.angles.iter().enumerate() {
            for (j, &s) in self.offsets.iter().enumerate() {
                let z = self.values[i * self.n_offsets() + j];
                w.row(&[
                    i.to_string(),
                    fmt_f64(theta),
                    fmt_f64(s),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    self.source.label().to_string(),
                    xi.clone(),
                ])?;
            }
        }
        w.finish()
    }
}

/// Input of [`xray_forward`].
#[derive(Clone, Copy, Debug)]
pub enum XrayField<'a> {
    /// Closed-form line integrals of an analytic descriptor.
    Descriptor {
        desc: &'a PotentialDescriptor,
        target: LineTarget,
    },
    /// Real samples on a 2-D grid.
    Samples { grid: &'a Grid, values: &'a [f64] },
}

/// Fraction of the field peak allowed beyond the offset range.
const SUPPORT_TOL: f64 = 1e-6;

pub fn xray_forward(field: XrayField<'_>, angles: &[f64], offsets: &[f64]) -> Result<Sinogram> {
    let half = offsets.last().copied().unwrap_or(0.0);
    let (values, target) = match field {
        XrayField::Descriptor { desc, target } => {
            let mut vals = Vec::with_capacity(angles.len() * offsets.len());
            let mut edge = 0.0f64;
            let mut peak = 0.0f64;
            for &theta in angles {
                for &s in offsets {
                    let v = desc.line_integral(target, theta, s);
                    peak = peak.max(v.abs());
                    vals.push(Complex64::new(v, 0.0));
                }
                for s in [-half, half] {
                    edge = edge.max(desc.line_integral(target, theta, s).abs());
                }
            }
            if edge > SUPPORT_TOL * peak {
                return Err(Error::Sinogram(format!(
                    "field reaches {:.2e} of its peak at |s| = {half}; widen the offset range",
                    edge / peak
                )));
            }
            (vals, target.into())
        }
        XrayField::Samples { grid, values } => (sample_projections(grid, values, angles, offsets)?, Target::Scalar),
    };
    Sinogram::new(angles.to_vec(), offsets.to_vec(), values, Source::Oracle, target, None)
}

/// Spectral zero-padding of a real 2-D field to `factor` times the points per axis.
fn upsample(grid: &Grid, values: &[f64], factor: usize) -> Vec<f64> {
    let n = grid.points();
    let big = n * factor;
    let mut sp = grid.spectral();
    let mut hat: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    sp.forward(&mut hat);
    // hat is in transposed layout: index ky * n + kx
    let mut padded = vec![ZERO; big * big];
    let map = |m: usize| if m < n / 2 { m } else { m + big - n };
    for ky in 0..n {
        for kx in 0..n {
            let mut z = hat[ky * n + kx];
            // split the Nyquist row/column symmetrically so the result stays real
            if kx == n / 2 {
                z *= 0.5;
            }
            if ky == n / 2 {
                z *= 0.5;
            }
            let targets_x: &[usize] = if kx == n / 2 { &[n / 2, big - n / 2] } else { &[map(kx)] };
            let targets_y: &[usize] = if ky == n / 2 { &[n / 2, big - n / 2] } else { &[map(ky)] };
            for &tx in targets_x {
                for &ty in targets_y {
                    padded[ty * big + tx] += z;
                }
            }
        }
    }
    let mut sp_big = Spectral::new(crate::fft::FftPlan::new(2, big));
    sp_big.inverse(&mut padded);
    let scale = (factor * factor) as f64;
    padded.iter().map(|z| z.re * scale).collect()
}

/// Four-point Lagrange weights for fractional position `t` in `[0, 1)` over nodes -1..=2.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn sample_projections(grid: &Grid, values: &[f64], angles: &[f64], offsets: &[f64]) -> Result<Vec<Complex64>> {
    if grid.dim() != 2 || values.len() != grid.len() {
        return Err(Error::GridMismatch("X-ray samples must live on a 2-D grid".into()));
    }
    let half = offsets.last().copied().unwrap_or(0.0);
    let peak = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let outside = (0..grid.len())
        .filter(|&p| grid.radius_sq(p).sqrt() > half)
        .map(|p| values[p].abs())
        .fold(0.0, f64::max);
    if outside > SUPPORT_TOL * peak {
        return Err(Error::Sinogram(format!(
            "samples reach {:.2e} of their peak outside |x| = {half}",
            outside / peak
        )));
    }
    let fine = upsample(grid, values, UPSAMPLE);
    let nf = grid.points() * UPSAMPLE;
    let hf = grid.spacing() / UPSAMPLE as f64;
    let l = grid.half_width();
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nf as isize || j >= nf as isize {
            0.0
        } else {
            fine[i as usize * nf + j as usize]
        }
    };
    let interp = |x: f64, y: f64| -> f64 {
        let fx = (x + l) / hf;
        let fy = (y + l) / hf;
        let (ix, iy) = (fx.floor(), fy.floor());
        let (wx, wy) = (cubic_weights(fx - ix), cubic_weights(fy - iy));
        let (ix, iy) = (ix as isize, iy as isize);
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            for (b, wb) in wy.iter().enumerate() {
                acc += wa * wb * at(ix + a as isize - 1, iy + b as isize - 1);
            }
        }
        acc
    };
    let step = 0.5 * hf;
    let reach = half.max(l) * 2f64.sqrt();
    let nt = (reach / step).ceil() as isize;
    let mut out = Vec::with_capacity(angles.len() * offsets.len());
    for &theta in angles {
        let (t, p) = directions(theta);
        for &s in offsets {
            let mut acc = 0.0;
            for k in -nt..=nt {
                let tau = k as f64 * step;
                acc += interp(s * p[0] + tau * t[0], s * p[1] + tau * t[1]);
            }
            out.push(Complex64::new(acc * step, 0.0));
        }
    }
    Ok(out)
}

/// Reconstructed real field with optional error metrics.
#[derive(Clone, Debug)]
pub struct ReconGrid {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub target: Target,
    /// Largest imaginary part of the input sinogram relative to its real part.
    pub imag_fraction: f64,
    /// Set when `imag_fraction` exceeds [`IMAG_FLAG`].
    pub quality_flag: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub relative_l2: f64,
    pub max_abs: f64,
}

impl ReconGrid {
    pub fn errors_against(&self, truth: &[f64]) -> Result<ErrorMetrics> {
        if truth.len() != self.values.len() {
            return Err(Error::GridMismatch("reconstruction and truth sizes differ".into()));
        }
        let mut diff = 0.0;
        let mut norm = 0.0;
        let mut max_abs = 0.0f64;
        for (r, t) in self.values.iter().zip(truth) {
            diff += (r - t) * (r - t);
            norm += t * t;
            max_abs = max_abs.max((r - t).abs());
        }
        Ok(ErrorMetrics {
            relative_l2: if norm == 0.0 { diff.sqrt() } else { (diff / norm).sqrt() },
            max_abs,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Spatial Ram-Lak kernel sampled at spacing `ds`, circularly arranged for length `len`.
fn ramp_kernel(len: usize, ds: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            let k = if i <= len / 2 { i as i64 } else { i as i64 - len as i64 };
            let v = if k == 0 {
                1.0 / (4.0 * ds * ds)
            } else if k % 2 != 0 {
                -1.0 / ((k * k) as f64 * PI * PI * ds * ds)
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect()
}

/// Per-angle ramp filtering with a Hann window. The zero-padded rows extend `pad` samples
/// past both ends of the offset range, so lines beyond the measured range still see the
/// (negative) tails of the filtered projections.
fn filter_rows(sino: &Sinogram, pad: usize) -> Vec<Vec<f64>> {
    let ns = sino.n_offsets();
    let ds = sino.offset_step();
    let span = ns + 2 * pad;
    // circular convolution stays wrap-free over the padded span
    let len = (2 * span).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut kernel = ramp_kernel(len, ds);
    fwd.process(&mut kernel);
    for (i, z) in kernel.iter_mut().enumerate() {
        let f = if i <= len / 2 { i } else { len - i } as f64 / (len / 2) as f64;
        *z *= 0.5 * (1.0 + (PI * f).cos());
    }
    (0..sino.n_angles())
        .map(|a| {
            let mut buf = vec![ZERO; len];
            for (b, z) in buf[pad..].iter_mut().zip(sino.row(a)) {
                *b = Complex64::new(z.re, 0.0);
            }
            fwd.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k;
            }
            inv.process(&mut buf);
            buf[..span].iter().map(|z| z.re * ds / len as f64).collect()
        })
        .collect()
}

/// Filtered backprojection of the real part of `sino` onto a 2-D grid.
pub fn fbp_invert(sino: &Sinogram, out_grid: &Arc<Grid>) -> Result<ReconGrid> {
    if out_grid.dim() != 2 {
        return Err(Error::InvalidGrid("reconstruction grid must be 2-D".into()));
    }
    let na = sino.n_angles();
    if na < MIN_ANGLES {
        warn!(
            "{na} angles < {MIN_ANGLES}: expect streak artifacts of relative size ~{:.2}",
            PI / (2.0 * na as f64)
        );
    }
    let imag_fraction = sino.imag_fraction();
    let quality_flag = imag_fraction > IMAG_FLAG;
    if imag_fraction > 0.0 {
        info!("dropping imaginary part of sinogram (fraction {imag_fraction:.3e})");
    }
    let ds = sino.offset_step();
    let reach = out_grid.half_width() * std::f64::consts::SQRT_2;
    let pad = ((reach - sino.half_range()).max(0.0) / ds).ceil() as usize + 1;
    let q = filter_rows(sino, pad);
    let s0 = sino.offsets[0] - pad as f64 * ds;
    let ns = q.first().map_or(0, Vec::len);
    let dirs: Vec<[f64; 2]> = sino.angles.iter().map(|&t| directions(t).1).collect();
    let weight = PI / na as f64;
    let values = (0..out_grid.len())
        .map(|p| {
            let c = out_grid.coords(p);
            let mut acc = 0.0;
            // fixed angle order keeps the sum bitwise reproducible
            for (row, perp) in q.iter().zip(&dirs) {
                let s = c[0] * perp[0] + c[1] * perp[1];
                let f = (s - s0) / ds;
                if f < 0.0 || f > (ns - 1) as f64 {
                    continue;
                }
                let i = (f.floor() as usize).min(ns - 2);
                let t = f - i as f64;
                acc += (1.0 - t) * row[i] + t * row[i + 1];
            }
            acc * weight
        })
        .collect();
    Ok(ReconGrid {
        grid: out_grid.clone(),
        values,
        target: sino.target,
        imag_fraction,
        quality_flag,
    })
}

/// Spectral `d/ds` of each row, zero-padded; `half_band` keeps only the lower half of the band.
fn differentiate_rows(sino: &Sinogram, half_band: bool) -> Vec<Complex64> {
    let ns = sino.n_offsets();
    let ds = sino.offset_step();
    let len = (2 * ns).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut out = Vec::with_capacity(sino.values.len());
    for a in 0..sino.n_angles() {
        let mut buf = vec![ZERO; len];
        buf[..ns].copy_from_slice(sino.row(a));
        fwd.process(&mut buf);
        for (i, z) in buf.iter_mut().enumerate() {
            let m = if i < len / 2 { i as f64 } else if i == len / 2 { 0.0 } else { i as f64 - len as f64 };
            let omega = 2.0 * PI * m / (len as f64 * ds);
            if half_band && m.abs() > len as f64 / 4.0 {
                *z = ZERO;
            } else {
                *z *= Complex64::new(0.0, omega);
            }
        }
        inv.process(&mut buf);
        out.extend(buf[..ns].iter().map(|z| z / len as f64));
    }
    out
}

/// `B_12` from tangential data via `d_s g = -X[B_12]`; returns the reconstruction and the
/// noise-amplification factor `||D g|| / ||D_{half band} g||`.
pub fn b_field_from_tangential(sino_tan: &Sinogram, out_grid: &Arc<Grid>) -> Result<(ReconGrid, f64)> {
    if sino_tan.target != Target::ATangential {
        return Err(invalid("sinogram", "B recovery needs tangential data"));
    }
    if sino_tan.n_offsets() < MIN_OFFSETS_FOR_B {
        return Err(invalid(
            "offsets",
            format!("need at least {MIN_OFFSETS_FOR_B} offsets, got {}", sino_tan.n_offsets()),
        ));
    }
    let full = differentiate_rows(sino_tan, false);
    let half = differentiate_rows(sino_tan, true);
    let norm = |v: &[Complex64]| v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let (nf, nh) = (norm(&full), norm(&half));
    let factor = if nh == 0.0 {
        if nf == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        nf / nh
    };
    if factor > NOISE_LIMIT {
        return Err(Error::NoiseAmplification {
            factor,
            limit: NOISE_LIMIT,
        });
    }
    let derived = Sinogram {
        values: full.iter().map(|z| -z).collect(),
        target: Target::B,
        ..sino_tan.clone()
    };
    let mut recon = fbp_invert(&derived, out_grid)?;
    recon.imag_fraction = sino_tan.imag_fraction();
    recon.quality_flag = recon.imag_fraction > IMAG_FLAG;
    Ok((recon, factor))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetErrors {
    pub target: Target,
    pub relative_l2: f64,
    pub max_abs: f64,
}

/// Error metrics of each reconstruction against the sampled truth.
pub fn reconstruction_report(truth: &PotentialSet, recons: &[ReconGrid]) -> Result<Vec<TargetErrors>> {
    recons
        .iter()
        .map(|r| {
            truth.grid().check_same(&r.grid)?;
            let zeros;
            let reference: &[f64] = match r.target {
                Target::V => match &truth.v {
                    Some(v) => v,
                    None => {
                        zeros = vec![0.0; r.values.len()];
                        &zeros
                    }
                },
                Target::AComponent(j) => match truth.a.get(j) {
                    Some(a) => a,
                    None => {
                        zeros = vec![0.0; r.values.len()];
                        &zeros
                    }
                },
                Target::B => truth
                    .b12
                    .as_deref()
                    .ok_or_else(|| invalid("truth", "B needs a 2-D potential"))?,
                Target::ATangential | Target::Scalar => {
                    return Err(invalid("target", "no pointwise truth for this target"))
                }
            };
            let m = r.errors_against(reference)?;
            Ok(TargetErrors {
                target: r.target,
                relative_l2: m.relative_l2,
                max_abs: m.max_abs,
            })
        })
        .collect()
}
