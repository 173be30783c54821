//! One function per subcommand. Each writes its artifacts under `out` and returns a report.

use std::path::Path;
use std::sync::Arc;

use log::info;
use num_complex::Complex64;
use serde::Serialize;

use crate::amplitude::{default_ladder, fit_order, hermite_gaussian, sweep_pairs};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid, Wavefunction};
use crate::io::{fmt_f64, write_json, write_real_dump, write_wavefunction, CsvWriter};
use crate::potential::{build_potentials, Bump, Component, PotentialDescriptor, PotentialSet};
use crate::probe::{assemble_sinogram, Medium, ProbeConfig, ProbeManifest, ProbeTarget, SinogramInput};
use crate::propagate::{conserved_quantities, relative_drift, EvolutionSpec, Evolver, HamiltonianOp};
use crate::scattering::{auto_t_scat, linear_s, nonlinear_s, ScatterDiagnostics, ScatterMode, ScatterSpec};
use crate::stats::loglog_slope;
use crate::tomography::{
    b_field_from_tangential, fbp_invert, reconstruction_report, uniform_angles, uniform_offsets, xray_forward,
    ReconGrid, Sinogram, Source, Target, XrayField,
};
use crate::LineTarget;

use super::config::{Experiment, ScenarioConfig};
use super::report::Report;

fn scenario_grid(cfg: &ScenarioConfig) -> Result<Arc<Grid>> {
    make_grid(cfg.grid.n, cfg.grid.points, cfg.grid.half_width)
}

pub fn initial_state(cfg: &ScenarioConfig, grid: &Arc<Grid>) -> Wavefunction {
    let n = grid.dim();
    let pad = |v: &Vec<f64>| if v.is_empty() { vec![0.0; n] } else { v.clone() };
    let i = &cfg.initial;
    Wavefunction::gaussian(grid, &pad(&i.center), i.sigma, &pad(&i.k0), i.amplitude)
}

fn evolution_spec(cfg: &ScenarioConfig) -> EvolutionSpec {
    let d = &cfg.dynamics;
    let spec = if d.nonlinear {
        EvolutionSpec::nonlinear(d.dt, d.p)
    } else {
        EvolutionSpec::linear(d.dt)
    };
    spec.with_time(d.t_final)
}

fn horizon(cfg: &ScenarioConfig, phi: &Wavefunction, ham: &HamiltonianOp) -> Result<f64> {
    match cfg.dynamics.t_scat {
        Some(t) => Ok(t),
        None => auto_t_scat(phi, ham, cfg.potential.effective_radius()),
    }
}

/// Time evolution with conservation series and checkpoints.
pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let grid = scenario_grid(cfg)?;
    let pot = build_potentials(&cfg.potential, &grid)?;
    let ham = HamiltonianOp::new(&pot);
    let spec = evolution_spec(cfg);
    let p = spec.include_nonlinearity.then_some(spec.p);
    let mut u = initial_state(cfg, &grid);
    let mut csv = CsvWriter::create(&out.join("conservation.csv"), &["t", "mass", "energy"])?;
    let mut rows = Vec::new();
    let mut ev = Evolver::new(&ham, spec)?;
    ev.propagate_observed(&mut u, spec.t_final, cfg.dynamics.stride, &mut |step, t, s| {
        let c = conserved_quantities(s, &ham, p)?;
        csv.row(&[fmt_f64(t), fmt_f64(c.mass), fmt_f64(c.energy)])?;
        write_wavefunction(&out.join(format!("checkpoints/u_{step:08}.bin")), "u", s)?;
        rows.push((t, c));
        Ok(())
    })?;
    csv.finish()?;
    let (mass, energy) = relative_drift(&rows);
    let mut report = Report::new("simulate", cfg.experiment, cfg.seed);
    report.metric("steps_recorded", rows.len() as f64);
    report.at_most("mass_drift", mass, 1e-9);
    report.at_most("energy_drift", energy, 1e-6);
    Ok(report)
}

#[derive(Serialize)]
struct ScatterRecord<'a> {
    input_id: String,
    mode: ScatterMode,
    #[serde(rename = "T_scat")]
    t_scat: f64,
    output: &'a str,
    diagnostics: &'a ScatterDiagnostics,
}

/// One scattering run on the configured initial state.
pub fn scatter(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let grid = scenario_grid(cfg)?;
    let pot = build_potentials(&cfg.potential, &grid)?;
    let ham = HamiltonianOp::new(&pot);
    let phi = initial_state(cfg, &grid);
    let t_scat = horizon(cfg, &phi, &ham)?;
    let mode = if cfg.experiment == Some(Experiment::FreeIdentity) {
        ScatterMode::Linear
    } else {
        cfg.dynamics.mode
    };
    let spec = ScatterSpec::new(t_scat, evolution_spec(cfg), mode);
    let outcome = if mode == ScatterMode::Linear {
        linear_s(&phi, &ham, &spec)?
    } else {
        nonlinear_s(&phi, &ham, &spec)?
    };
    write_wavefunction(&out.join("scatter/output.bin"), "phi_plus", &outcome.output)?;
    write_json(
        &out.join("scatter/result.json"),
        &ScatterRecord {
            input_id: "initial".into(),
            mode,
            t_scat,
            output: "output.bin",
            diagnostics: &outcome.diagnostics,
        },
    )?;
    let mut report = Report::new("scatter", cfg.experiment, cfg.seed);
    report.metric("T_scat", t_scat);
    report.metric("mass_out", outcome.diagnostics.mass_out);
    if let Some(s) = outcome.diagnostics.stability {
        report.metric("stability", s);
    }
    report.unflagged("t_scat_stability", outcome.flagged() as usize);
    if cfg.experiment == Some(Experiment::FreeIdentity) {
        let dev = outcome.output.sub(&phi)?.l2_norm() / phi.l2_norm();
        report.at_most("identity_deviation", dev, 1e-10);
    }
    for n in &outcome.diagnostics.notes {
        report.flag(n.clone());
    }
    Ok(report)
}

/// Hermite test functions of increasing order sharing the initial state's envelope.
fn test_functions(cfg: &ScenarioConfig, grid: &Arc<Grid>, count: usize) -> Vec<Wavefunction> {
    let n = grid.dim();
    let pad = |v: &Vec<f64>| if v.is_empty() { vec![0.0; n] } else { v.clone() };
    let orders: Vec<Vec<usize>> = if n == 1 {
        (0..count).map(|k| vec![k]).collect()
    } else {
        (0..)
            .flat_map(|total: usize| (0..=total).map(move |a| vec![a, total - a]))
            .take(count)
            .collect()
    };
    orders
        .iter()
        .map(|o| hermite_gaussian(grid, &pad(&cfg.initial.center), cfg.initial.sigma, &pad(&cfg.initial.k0), o))
        .collect()
}

#[derive(Serialize)]
struct PairSummary {
    pair: usize,
    fitted_order: f64,
    extrapolated_value: Complex64,
    reference: Complex64,
    relative_error: f64,
    pass: bool,
}

/// Small-amplitude sweep: `(S(eps phi), psi) / eps` against the linear pairing.
pub fn smallamp(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let grid = scenario_grid(cfg)?;
    let pot = build_potentials(&cfg.potential, &grid)?;
    let ham = HamiltonianOp::new(&pot);
    let phi = initial_state(cfg, &grid);
    let psis = test_functions(cfg, &grid, cfg.probes.pairs);
    let t_scat = horizon(cfg, &phi, &ham)?;
    let evo = EvolutionSpec::nonlinear(cfg.dynamics.dt, cfg.dynamics.p);
    let lin = linear_s(&phi, &ham, &ScatterSpec::new(t_scat, evo.as_linear(), ScatterMode::Linear))?;
    let ladder = match &cfg.probes.eps_ladder {
        Some(l) => l.clone(),
        None => default_ladder(&phi, cfg.probes.delta, 0.5, 5),
    };
    let spec = ScatterSpec::new(t_scat, evo, ScatterMode::NonlinearVsFree);
    let sweeps = sweep_pairs(&phi, &psis, &ham, &ladder, &spec)?;
    let target = cfg.dynamics.p - 1.0;
    let (lo, hi) = (target - 0.3, target + 0.3);
    let mut csv = CsvWriter::create(&out.join("smallamp.csv"), &["pair", "eps", "re_q", "im_q", "residual"])?;
    let mut summaries = Vec::new();
    let mut report = Report::new("smallamp", cfg.experiment, cfg.seed);
    report.metric("T_scat", t_scat);
    let mut worst_rel: f64 = 0.0;
    let mut orders = Vec::new();
    for (k, (psi, sw)) in psis.iter().zip(&sweeps).enumerate() {
        let reference = lin.output.inner(psi)?;
        let fit = fit_order(sw, reference)?;
        for ((e, q), r) in sw.ladder.iter().zip(&sw.values).zip(&fit.residuals) {
            csv.row(&[k.to_string(), fmt_f64(*e), fmt_f64(q.re), fmt_f64(q.im), fmt_f64(*r)])?;
        }
        let pass = (lo..=hi).contains(&fit.order) && fit.relative_error <= 1e-4;
        worst_rel = worst_rel.max(fit.relative_error);
        orders.push(fit.order);
        summaries.push(PairSummary {
            pair: k,
            fitted_order: fit.order,
            extrapolated_value: fit.extrapolated,
            reference,
            relative_error: fit.relative_error,
            pass,
        });
    }
    csv.finish()?;
    write_json(&out.join("smallamp.json"), &summaries)?;
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_order = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    report.within("fitted_order_min", min_order, lo, hi);
    report.within("fitted_order_max", max_order, lo, hi);
    report.at_most("extrapolation_relative_error", worst_rel, 1e-4);
    report.unflagged("t_scat_stability", sweeps.iter().any(|s| s.flagged) as usize + lin.flagged() as usize);
    Ok(report)
}

/// Probe settings derived from the scenario.
pub fn probe_config(cfg: &ScenarioConfig) -> ProbeConfig {
    let mut pc = ProbeConfig::new(cfg.probe_sigma(), cfg.probes.dt);
    pc.audit = cfg.probes.audit;
    pc
}

fn frame_grid(cfg: &ScenarioConfig) -> Result<Arc<Grid>> {
    let f = &cfg.probes.frame;
    make_grid(f.n, f.points, f.half_width)
}

fn require_2d(cfg: &ScenarioConfig, what: &str) -> Result<()> {
    if cfg.grid.n != 2 {
        return Err(Error::Config {
            path: "grid.n".into(),
            reason: format!("{what} needs n = 2"),
        });
    }
    Ok(())
}

/// Sinogram of `desc` at `speed` from the configured source.
pub fn probe_sinogram(
    cfg: &ScenarioConfig,
    desc: &PotentialDescriptor,
    target: ProbeTarget,
    speed: f64,
    source: Source,
) -> Result<(Sinogram, ProbeManifest)> {
    let angles = uniform_angles(cfg.probes.angles);
    let offsets = uniform_offsets(cfg.probes.offsets, cfg.half_range());
    let pc = probe_config(cfg);
    match source {
        Source::Oracle => assemble_sinogram(
            &angles,
            &offsets,
            speed,
            target,
            SinogramInput::Oracle {
                desc,
                sigma: pc.sigma,
            },
        ),
        Source::Scattering => {
            let frame = frame_grid(cfg)?;
            assemble_sinogram(
                &angles,
                &offsets,
                speed,
                target,
                SinogramInput::Scattering {
                    medium: Medium::Comoving { desc, grid: &frame },
                    cfg: &pc,
                },
            )
        }
    }
}

fn target_label(t: ProbeTarget) -> &'static str {
    match t {
        ProbeTarget::ATangential => "a_tangential",
        ProbeTarget::V => "v",
    }
}

/// Sinograms over the speed ladder, compared against the oracle.
pub fn probe(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    require_2d(cfg, "probing")?;
    let target = cfg.probes.target;
    let label = target_label(target);
    let mut report = Report::new("probe", cfg.experiment, cfg.seed);
    let mut manifests = Vec::new();
    let mut residuals = Vec::new();
    let mut flagged = 0;
    for &speed in &cfg.probes.xi_ladder {
        let (oracle, _) = probe_sinogram(cfg, &cfg.potential, target, speed, Source::Oracle)?;
        oracle.write_csv(&out.join(format!("sinograms/{label}_oracle_xi{speed}.csv")))?;
        if cfg.probes.source == Source::Oracle {
            continue;
        }
        let (sino, manifest) = probe_sinogram(cfg, &cfg.potential, target, speed, Source::Scattering)?;
        sino.write_csv(&out.join(format!("sinograms/{label}_scattering_xi{speed}.csv")))?;
        let dev = sino.max_deviation(&oracle)?;
        let rel = dev / oracle.max_abs().max(f64::MIN_POSITIVE);
        report.metric(&format!("max_deviation_xi{speed}"), dev);
        report.metric(&format!("relative_deviation_xi{speed}"), rel);
        report.metric(&format!("imag_fraction_xi{speed}"), sino.imag_fraction());
        residuals.push((speed, dev));
        flagged += manifest.flagged;
        manifests.push(manifest);
    }
    write_json(&out.join("probe_manifest.json"), &manifests)?;
    if let Some(&(speed, dev)) = residuals.last() {
        let (oracle, _) = probe_sinogram(cfg, &cfg.potential, target, speed, Source::Oracle)?;
        report.at_most("relative_deviation_fastest", dev / oracle.max_abs().max(f64::MIN_POSITIVE), 0.05);
    }
    if residuals.len() >= 2 && residuals.iter().all(|(_, d)| *d > 0.0) {
        report.within("remainder_slope", loglog_slope(&residuals)?, -1.2, -0.8);
    }
    report.unflagged("t_scat_stability", flagged);
    Ok(report)
}

/// Reference scale for pure-gauge checks: `||B||` of one `A_2` bump with the gauge
/// bump's peak gradient and widths.
fn gauge_reference(desc: &PotentialDescriptor, grid: &Arc<Grid>) -> Result<Option<f64>> {
    let Some(g) = desc.bumps.iter().find(|b| b.component == Component::Gauge) else {
        return Ok(None);
    };
    let w = g.widths.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp = g.amplitude.abs() / (w * 0.5f64.exp().sqrt());
    let single = PotentialDescriptor::new(vec![Bump::new(Component::A2, &g.center, amp, &g.widths)]);
    let set = build_potentials(&single, grid)?;
    Ok(set.b12.map(|b| l2(&b, grid)))
}

fn l2(v: &[f64], grid: &Grid) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt()
}

fn dump_recon(out: &Path, name: &str, r: &ReconGrid) -> Result<()> {
    write_real_dump(&out.join(format!("recon/{name}.bin")), name, r.grid.shape(), &r.values)
}

fn recon_grid(cfg: &ScenarioConfig) -> Result<Arc<Grid>> {
    match cfg.reconstruct.grid {
        Some(g) => make_grid(g.n, g.points, g.half_width),
        None => scenario_grid(cfg),
    }
}

/// Thresholds per source.
fn limit(source: Source, target: Target) -> f64 {
    match (source, target) {
        (Source::Oracle, Target::V) => 0.05,
        _ => 0.15,
    }
}

/// Magnetic (and, for the joint experiment or any `V` present, electric) recovery.
pub fn reconstruct(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    require_2d(cfg, "reconstruction")?;
    let grid = recon_grid(cfg)?;
    let truth: PotentialSet = build_potentials(&cfg.potential, &grid)?;
    let source = cfg.probes.source;
    let speed = cfg.probes.xi_ladder.iter().cloned().fold(0.0, f64::max);
    let magnetic = cfg.potential.magnetic_part();
    let electric = cfg.potential.electric_part();
    let want_v = match cfg.experiment {
        Some(Experiment::MagneticReconstruct) => false,
        Some(Experiment::JointReconstruct) => true,
        _ => cfg.potential.has_v(),
    };
    let mut report = Report::new("reconstruct", cfg.experiment, cfg.seed);
    let mut manifests = Vec::new();
    let mut recons = Vec::new();
    let mut flagged = 0;

    if magnetic.has_a() || !want_v {
        info!("tangential probes for B at |xi| = {speed}");
        let (sino, manifest) = probe_sinogram(cfg, &magnetic, ProbeTarget::ATangential, speed, source)?;
        sino.write_csv(&out.join(format!("sinograms/a_tangential_{}.csv", source.label())))?;
        flagged += manifest.flagged;
        manifests.push(manifest);
        let (b, noise) = b_field_from_tangential(&sino, &grid)?;
        report.metric("b_noise_factor", noise);
        report.metric("b_imag_fraction", b.imag_fraction);
        if b.quality_flag {
            report.flag(format!("tangential sinogram imaginary fraction {:.3}", b.imag_fraction));
        }
        dump_recon(out, "B12", &b)?;
        let b_norm = b.l2_norm();
        report.metric("b_recon_l2", b_norm);
        let pure_gauge = magnetic.bumps.iter().all(|b| b.component == Component::Gauge) && magnetic.has_a();
        if pure_gauge {
            let scale = match cfg.reconstruct.reference_scale {
                Some(s) => s,
                None => gauge_reference(&magnetic, &grid)?.unwrap_or(1.0),
            };
            report.metric("b_reference_scale", scale);
            report.at_most("pure_gauge_b_ratio", b_norm / scale, 0.05);
        } else {
            recons.push(b);
        }
        if cfg.reconstruct.literal {
            let angles = uniform_angles(cfg.probes.angles);
            let offsets = uniform_offsets(cfg.probes.offsets, cfg.half_range());
            for j in 0..2 {
                let s = xray_forward(
                    XrayField::Descriptor {
                        desc: &magnetic,
                        target: LineTarget::AComponent(j),
                    },
                    &angles,
                    &offsets,
                )?;
                let r = fbp_invert(&s, &grid)?;
                dump_recon(out, &format!("A{}", j + 1), &r)?;
                recons.push(r);
            }
        }
    }

    if want_v {
        info!("V probes at |xi| = {speed}");
        let (sino, manifest) = probe_sinogram(cfg, &electric, ProbeTarget::V, speed, source)?;
        sino.write_csv(&out.join(format!("sinograms/v_{}.csv", source.label())))?;
        flagged += manifest.flagged;
        manifests.push(manifest);
        let v = fbp_invert(&sino, &grid)?;
        dump_recon(out, "V", &v)?;
        recons.push(v);
    }

    for e in reconstruction_report(&truth, &recons)? {
        let name = match e.target {
            Target::B => "b".to_string(),
            Target::V => "v".to_string(),
            Target::AComponent(j) => format!("a{}", j + 1),
            _ => continue,
        };
        report.metric(&format!("{name}_max_abs"), e.max_abs);
        match e.target {
            Target::AComponent(_) => report.metric(&format!("{name}_relative_l2"), e.relative_l2),
            t => report.at_most(&format!("{name}_relative_l2"), e.relative_l2, limit(source, t)),
        }
    }
    write_json(&out.join("probe_manifest.json"), &manifests)?;
    report.unflagged("t_scat_stability", flagged);
    Ok(report)
}
