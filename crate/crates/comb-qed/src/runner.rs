//! Batch orchestration: execute one [`ExperimentConfig`], write CSV/JSON
//! artifacts into an output directory, and return a machine-readable summary.
//!
//! Output files are byte-reproducible for a fixed config: floats are printed
//! with Rust's shortest round-trip formatting, rows are assembled in input
//! order even when the sweep itself runs on a thread pool, and everything
//! run-dependent (wall time) lives only in the summary JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{extract_revivals, predict_revival_time, spectral_overlap};
use crate::calibration::{currents_for_comb, flux_to_frequency};
use crate::config::{ExperimentConfig, GridSpec};
use crate::dynamics::{
    pulse_envelope, propagate, steady_state_response, QuantumState, TimeTrace,
};
use crate::error::{CombError, Result};
use crate::hilbert::{dressed_sweep, single_excitation_modes, HilbertConfig};
use crate::model::{collective_coupling, CavityParams, PulseSpec, ANG};
use crate::spectra::{spectrum_map, transmission_trace};

/// One failed sweep point; the rest of the sweep still completes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    /// Human-readable sweep coordinate, e.g. "spacing=45" or "eta=6.2,omega=5878".
    pub label: String,
    pub error: String,
}

/// Machine-readable record of one run, also written to
/// `{prefix}_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: String,
    pub crate_version: String,
    pub jobs: usize,
    pub seed: u64,
    /// Wall-clock duration in seconds; run-dependent by nature, so it is the
    /// one field excluded from reproducibility guarantees.
    pub wall_time_s: f64,
    /// File names (relative to the output directory) written by this run.
    pub outputs: Vec<String>,
    /// Kind-specific derived quantities (collective coupling, fits, τ, …).
    pub derived: serde_json::Value,
    pub failures: Vec<PointFailure>,
}

fn fmt_f64(x: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips.
    format!("{x}")
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CombError::Config(format!("serialization failed: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn trace_rows(trace: &TimeTrace, prefix_cols: &str) -> Vec<String> {
    let sep = if prefix_cols.is_empty() { "" } else { "," };
    trace
        .times
        .iter()
        .zip(&trace.a_expect)
        .zip(&trace.photon_number)
        .map(|((t, a), n)| {
            format!(
                "{prefix_cols}{sep}{},{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(a.norm_sqr()),
                fmt_f64(*n)
            )
        })
        .collect()
}

/// Amplitude spectrum |∫ env(t)·e^{−i2πf t} dt| of the pulse envelope at
/// offset `f` MHz from the carrier, trapezoid rule on a fine grid.
fn pulse_amplitude_spectrum(pulse: &PulseSpec, f_offset: f64) -> f64 {
    const N: usize = 2048;
    let dt = pulse.duration / (N - 1) as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..N {
        let t = i as f64 * dt;
        let w = if i == 0 || i == N - 1 { 0.5 } else { 1.0 };
        let e = pulse_envelope(pulse, t);
        let ph = ANG * f_offset * t;
        re += w * e * ph.cos();
        im -= w * e * ph.sin();
    }
    (re * re + im * im).sqrt() * dt
}

struct Ctx<'a> {
    out_dir: &'a Path,
    prefix: &'a str,
    outputs: Vec<String>,
    failures: Vec<PointFailure>,
}

impl<'a> Ctx<'a> {
    fn path(&mut self, suffix: &str) -> PathBuf {
        let name = format!("{}_{suffix}", self.prefix);
        self.outputs.push(name.clone());
        self.out_dir.join(name)
    }
}

fn run_spectrum_map(
    cavity: &CavityParams,
    comb: &crate::config::CombConfig,
    freq_grid: &GridSpec,
    spacing_grid: &GridSpec,
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let freqs = freq_grid.values();
    let spacings = spacing_grid.values();
    let map = spectrum_map(
        comb.center,
        &comb.couplings,
        &comb.gammas,
        cavity,
        &freqs,
        &spacings,
    )?;
    let mut rows = Vec::with_capacity(spacings.len() * freqs.len());
    for (i, &dw) in map.spacings.iter().enumerate() {
        for (j, &f) in map.freqs.iter().enumerate() {
            rows.push(format!(
                "{},{},{}",
                fmt_f64(dw),
                fmt_f64(f),
                fmt_f64(map.rows[i][j])
            ));
        }
    }
    write_csv(&ctx.path("map.csv"), "spacing_mhz,freq_mhz,abs_s_sq", &rows)?;

    let table = dressed_sweep(comb.center, &comb.couplings, &comb.gammas, cavity, &spacings)?;
    let mut mode_rows = Vec::new();
    for (i, &dw) in table.spacings.iter().enumerate() {
        for st in &table.rows[i] {
            mode_rows.push(format!(
                "{},{},{},{}",
                fmt_f64(dw),
                fmt_f64(st.freq),
                fmt_f64(st.cavity_weight),
                st.bright
            ));
        }
    }
    write_csv(
        &ctx.path("modes.csv"),
        "spacing_mhz,freq_mhz,cavity_weight,bright",
        &mode_rows,
    )?;

    let g_coll = collective_coupling(&comb.to_ensemble()?);
    Ok(json!({
        "collective_coupling_mhz": g_coll,
        "n_spacings": spacings.len(),
        "n_freqs": freqs.len(),
    }))
}

fn run_time_map(
    cavity: &CavityParams,
    comb: &crate::config::CombConfig,
    pulse: &PulseSpec,
    grid: &crate::model::SimGrid,
    spacings: &[f64],
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let results: Vec<(f64, Result<TimeTrace>)> = spacings
        .par_iter()
        .map(|&dw| {
            let trace = comb.with_spacing(dw).and_then(|ens| {
                let hc = HilbertConfig::new(ens.len(), grid.fock_max)?;
                propagate(&QuantumState::ground_state(hc), &ens, cavity, pulse, grid)
            });
            (dw, trace)
        })
        .collect();

    let mut rows = Vec::new();
    let mut per_spacing = Vec::new();
    for (idx, (dw, res)) in results.iter().enumerate() {
        match res {
            Ok(trace) => {
                rows.extend(trace_rows(trace, &fmt_f64(*dw)));
                let ens = comb.with_spacing(*dw)?;
                let modes = single_excitation_modes(&ens, cavity);
                let eigs: Vec<f64> = modes.iter().map(|m| m.freq).collect();
                let (tau_pred, spread) = predict_revival_time(&eigs)?;
                let report = extract_revivals(trace, pulse.duration, Some(tau_pred)).ok();
                per_spacing.push(json!({
                    "spacing_mhz": dw,
                    "tau_predicted_ns": tau_pred,
                    "tau_spread_ns": spread,
                    "tau_first_ns": report.as_ref().map(|r| r.tau_first),
                    "tau_mean_ns": report.as_ref().map(|r| r.tau_mean),
                    "invariants_ok": trace.invariants.all_valid,
                }));
            }
            Err(e) => ctx.failures.push(PointFailure {
                index: idx,
                label: format!("spacing={dw}"),
                error: e.to_string(),
            }),
        }
    }
    write_csv(
        &ctx.path("map.csv"),
        "spacing_mhz,t_ns,re_a,im_a,abs_a_sq,n_photon",
        &rows,
    )?;
    Ok(json!({ "per_spacing": per_spacing }))
}

fn run_revival(
    cavity: &CavityParams,
    comb: &crate::config::CombConfig,
    pulse: &PulseSpec,
    grid: &crate::model::SimGrid,
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let ens = comb.to_ensemble()?;
    let hc = HilbertConfig::new(ens.len(), grid.fock_max)?;
    let trace = propagate(&QuantumState::ground_state(hc), &ens, cavity, pulse, grid)?;
    write_csv(
        &ctx.path("trace.csv"),
        "t_ns,re_a,im_a,abs_a_sq,n_photon",
        &trace_rows(&trace, ""),
    )?;

    let modes = single_excitation_modes(&ens, cavity);
    let eigs: Vec<f64> = modes.iter().map(|m| m.freq).collect();
    let (tau_pred, spread) = predict_revival_time(&eigs)?;
    let report = extract_revivals(&trace, pulse.duration, Some(tau_pred))?;
    let g_coll = collective_coupling(&ens);
    let derived = json!({
        "collective_coupling_mhz": g_coll,
        "dressed_freqs_mhz": eigs,
        "tau_predicted_ns": tau_pred,
        "tau_spread_ns": spread,
        "revivals": report,
        "invariants": trace.invariants,
    });
    write_json(&ctx.path("report.json"), &derived)?;
    Ok(derived)
}

fn run_power_sweep(
    cavity: &CavityParams,
    comb: &crate::config::CombConfig,
    grid: &crate::model::SimGrid,
    omega_grid: &GridSpec,
    etas: &[f64],
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let ens = comb.to_ensemble()?;
    let omegas = omega_grid.values();
    let points: Vec<(f64, f64)> = etas
        .iter()
        .flat_map(|&e| omegas.iter().map(move |&w| (e, w)))
        .collect();
    let results: Vec<Result<crate::dynamics::SteadyStateResponse>> = points
        .par_iter()
        .map(|&(eta, omega)| steady_state_response(&ens, cavity, eta, omega, grid))
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    let mut peak_photons = vec![0.0f64; etas.len()];
    for (idx, (&(eta, omega), res)) in points.iter().zip(&results).enumerate() {
        match res {
            Ok(ss) => {
                rows.push(format!(
                    "{},{},{},{},{},{}",
                    fmt_f64(eta),
                    fmt_f64(omega),
                    fmt_f64(ss.a_ss.re),
                    fmt_f64(ss.a_ss.im),
                    fmt_f64(ss.a_ss.norm_sqr()),
                    fmt_f64(ss.photon_number)
                ));
                let ei = idx / omegas.len();
                peak_photons[ei] = peak_photons[ei].max(ss.photon_number);
            }
            Err(e) => ctx.failures.push(PointFailure {
                index: idx,
                label: format!("eta={eta},omega={omega}"),
                error: e.to_string(),
            }),
        }
    }
    write_csv(
        &ctx.path("sweep.csv"),
        "eta,freq_mhz,re_a,im_a,abs_a_sq,n_photon",
        &rows,
    )?;
    Ok(json!({
        "etas": etas,
        "peak_photon_number": peak_photons,
    }))
}

fn run_calibration(
    crosstalk: &crate::calibration::CrosstalkModel,
    targets: &[(usize, f64)],
    fixed: &[(usize, f64)],
    branch: crate::calibration::FluxBranch,
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let currents = currents_for_comb(targets, crosstalk, fixed, branch)?;
    let verification: Vec<serde_json::Value> = targets
        .iter()
        .map(|&(k, w)| {
            let achieved = flux_to_frequency(&currents, crosstalk, k)?;
            Ok(json!({
                "qubit": k,
                "target_mhz": w,
                "achieved_mhz": achieved,
                "error_mhz": achieved - w,
            }))
        })
        .collect::<Result<_>>()?;
    let derived = json!({
        "currents_a": currents,
        "verification": verification,
    });
    write_json(&ctx.path("plan.json"), &derived)?;
    Ok(derived)
}

fn run_pulse_overlap(
    cavity: &CavityParams,
    comb: &crate::config::CombConfig,
    pulse: &PulseSpec,
    freq_grid: &GridSpec,
    ctx: &mut Ctx,
) -> Result<serde_json::Value> {
    let ens = comb.to_ensemble()?;
    let freqs = freq_grid.values();
    let spectrum = transmission_trace(&freqs, &ens, cavity, cavity.kappa_load);
    let rows: Vec<String> = spectrum
        .freqs
        .iter()
        .zip(&spectrum.s_complex)
        .map(|(f, s)| {
            format!(
                "{},{},{},{}",
                fmt_f64(*f),
                fmt_f64(s.re),
                fmt_f64(s.im),
                fmt_f64(s.norm_sqr())
            )
        })
        .collect();
    write_csv(&ctx.path("comb.csv"), "freq_mhz,re_s,im_s,abs_s_sq", &rows)?;

    let pulse_rows: Vec<String> = freqs
        .iter()
        .map(|&f| {
            let a = pulse_amplitude_spectrum(pulse, f - pulse.carrier);
            format!("{},{}", fmt_f64(f), fmt_f64(a * a))
        })
        .collect();
    write_csv(&ctx.path("pulse.csv"), "freq_mhz,pulse_power", &pulse_rows)?;

    let overlap = spectral_overlap(pulse, &spectrum)?;
    Ok(json!({ "overlap": overlap }))
}

/// Execute a validated config. `jobs` = 0 uses the rayon default thread
/// count; `seed` is recorded in the summary (every computation here is
/// deterministic, so it only tags the run).
pub fn run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    seed: u64,
) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();

    let mut ctx = Ctx {
        out_dir,
        prefix: cfg.output_prefix(),
        outputs: Vec::new(),
        failures: Vec::new(),
    };

    let body = |ctx: &mut Ctx| -> Result<serde_json::Value> {
        match cfg {
            ExperimentConfig::SpectrumMap {
                cavity,
                comb,
                freq_grid,
                spacing_grid,
                ..
            } => run_spectrum_map(cavity, comb, freq_grid, spacing_grid, ctx),
            ExperimentConfig::TimeMap {
                cavity,
                comb,
                pulse,
                grid,
                spacings,
                ..
            } => run_time_map(cavity, comb, pulse, grid, spacings, ctx),
            ExperimentConfig::RevivalRun {
                cavity,
                comb,
                pulse,
                grid,
                ..
            } => run_revival(cavity, comb, pulse, grid, ctx),
            ExperimentConfig::PowerSweep {
                cavity,
                comb,
                grid,
                omega_grid,
                etas,
                ..
            } => run_power_sweep(cavity, comb, grid, omega_grid, etas, ctx),
            ExperimentConfig::CalibrationPlan {
                crosstalk,
                targets,
                fixed,
                branch,
                ..
            } => run_calibration(crosstalk, targets, fixed, *branch, ctx),
            ExperimentConfig::PulseOverlap {
                cavity,
                comb,
                pulse,
                freq_grid,
                ..
            } => run_pulse_overlap(cavity, comb, pulse, freq_grid, ctx),
        }
    };

    let derived = if jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CombError::Config(format!("thread pool: {e}")))?;
        pool.install(|| body(&mut ctx))?
    } else {
        body(&mut ctx)?
    };

    let mut summary = RunSummary {
        kind: cfg.kind().to_string(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        jobs,
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs,
        failures: ctx.failures,
        derived,
    };
    let summary_name = format!("{}_summary.json", cfg.output_prefix());
    let value = serde_json::to_value(&summary)
        .map_err(|e| CombError::Config(format!("serialization failed: {e}")))?;
    write_json(&out_dir.join(&summary_name), &value)?;
    summary.outputs.push(summary_name);
    Ok(summary)
}
