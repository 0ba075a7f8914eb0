//! Python bindings for the comb-qed simulator. Everything crosses the
//! boundary as plain floats, lists, and JSON strings so the module needs no
//! numpy dependency.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cq::calibration::{CrosstalkModel, FluxBranch};
use cq::config::parse_config;
use cq::dynamics::{propagate, InvariantSummary, QuantumState, TimeTrace};
use cq::hilbert::{single_excitation_modes, HilbertConfig};
use cq::model::{build_comb, CavityParams, PulseShape, PulseSpec, SimGrid};
use cq::spectra::transmission_trace;

fn err(e: cq::CombError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cavity_from(omega_c: f64, kappa_e1: f64, kappa_e2: f64, kappa_i: f64) -> CavityParams {
    CavityParams {
        omega_c,
        kappa_e1,
        kappa_e2,
        kappa_i,
        kappa_load: kappa_e1 + kappa_e2 + kappa_i,
    }
}

/// √(Σ g_k²) in MHz.
#[pyfunction]
fn collective_coupling(couplings: Vec<f64>) -> PyResult<f64> {
    let ens = build_comb(6000.0, 0.0, &couplings, &vec![0.1; couplings.len()]).map_err(err)?;
    Ok(cq::model::collective_coupling(&ens))
}

/// Comb tooth frequencies center + (k − (N−1)/2)·spacing, k = 0..n−1.
#[pyfunction]
fn comb_frequencies(center: f64, spacing: f64, n: usize) -> PyResult<Vec<f64>> {
    let ens = build_comb(center, spacing, &vec![30.0; n], &vec![0.3; n]).map_err(err)?;
    Ok(ens.qubits.iter().map(|q| q.omega).collect())
}

/// One-excitation dressed modes: list of (freq_mhz, cavity_weight, bright).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn dressed_modes(
    center: f64,
    spacing: f64,
    couplings: Vec<f64>,
    gammas: Vec<f64>,
    omega_c: f64,
    kappa_e1: f64,
    kappa_e2: f64,
    kappa_i: f64,
) -> PyResult<Vec<(f64, f64, bool)>> {
    let ens = build_comb(center, spacing, &couplings, &gammas).map_err(err)?;
    let cavity = cavity_from(omega_c, kappa_e1, kappa_e2, kappa_i);
    Ok(single_excitation_modes(&ens, &cavity)
        .iter()
        .map(|m| (m.freq, m.cavity_weight, m.bright))
        .collect())
}

/// Semiclassical |S(ω)|² on a frequency grid.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn transmission_power(
    freqs: Vec<f64>,
    center: f64,
    spacing: f64,
    couplings: Vec<f64>,
    gammas: Vec<f64>,
    omega_c: f64,
    kappa_e1: f64,
    kappa_e2: f64,
    kappa_i: f64,
    amplitude: f64,
) -> PyResult<Vec<f64>> {
    let ens = build_comb(center, spacing, &couplings, &gammas).map_err(err)?;
    let cavity = cavity_from(omega_c, kappa_e1, kappa_e2, kappa_i);
    Ok(transmission_trace(&freqs, &ens, &cavity, amplitude).power)
}

/// Pulsed Lindblad propagation from the global ground state. Returns
/// (times_ns, abs_a_sq, photon_number).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (center, spacing, couplings, gammas, omega_c, kappa_e1, kappa_e2,
                    kappa_i, eta_peak, duration, carrier, sigma, t_end, dt_out,
                    fock_max, rtol=1e-7, atol=1e-10))]
fn propagate_comb(
    center: f64,
    spacing: f64,
    couplings: Vec<f64>,
    gammas: Vec<f64>,
    omega_c: f64,
    kappa_e1: f64,
    kappa_e2: f64,
    kappa_i: f64,
    eta_peak: f64,
    duration: f64,
    carrier: f64,
    sigma: f64,
    t_end: f64,
    dt_out: f64,
    fock_max: usize,
    rtol: f64,
    atol: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let ens = build_comb(center, spacing, &couplings, &gammas).map_err(err)?;
    let cavity = cavity_from(omega_c, kappa_e1, kappa_e2, kappa_i);
    let pulse = PulseSpec {
        eta_peak,
        duration,
        carrier,
        shape: PulseShape::Gaussian,
        sigma: Some(sigma),
    };
    let grid = SimGrid {
        t_start: 0.0,
        t_end,
        dt_out,
        fock_max,
        rtol,
        atol,
    };
    let hc = HilbertConfig::new(ens.len(), fock_max).map_err(err)?;
    let trace = propagate(&QuantumState::ground_state(hc), &ens, &cavity, &pulse, &grid)
        .map_err(err)?;
    Ok((trace.times, trace.abs_sq, trace.photon_number))
}

/// τ = 2π/mean gap and its spread, both in ns, from sorted eigenvalues (MHz).
#[pyfunction]
fn predict_revival_time(eigenvalues: Vec<f64>) -> PyResult<(f64, f64)> {
    cq::analysis::predict_revival_time(&eigenvalues).map_err(err)
}

/// Revival peaks of a |⟨a⟩|² trace. Returns
/// (tau_first, tau_mean, peak_times, peak_heights).
#[pyfunction]
#[pyo3(signature = (times, abs_sq, pulse_end, expected_tau=None))]
fn extract_revivals(
    times: Vec<f64>,
    abs_sq: Vec<f64>,
    pulse_end: f64,
    expected_tau: Option<f64>,
) -> PyResult<(f64, f64, Vec<f64>, Vec<f64>)> {
    let n = times.len();
    let trace = TimeTrace {
        times,
        a_expect: vec![num_complex::Complex64::default(); n],
        abs_sq,
        photon_number: vec![0.0; n],
        invariants: InvariantSummary::default(),
    };
    let report = cq::analysis::extract_revivals(&trace, pulse_end, expected_tau).map_err(err)?;
    Ok((
        report.tau_first,
        report.tau_mean,
        report.peak_times,
        report.peak_heights,
    ))
}

/// Invert the flux-crosstalk model: currents (A) placing each target qubit at
/// its target frequency. `m` is the 7×7 line×qubit matrix in 1/A.
#[pyfunction]
#[pyo3(signature = (m, phi_off, omega_max, targets, fixed=vec![], negative_branch=false))]
fn currents_for_comb(
    m: Vec<Vec<f64>>,
    phi_off: Vec<f64>,
    omega_max: Vec<f64>,
    targets: Vec<(usize, f64)>,
    fixed: Vec<(usize, f64)>,
    negative_branch: bool,
) -> PyResult<Vec<f64>> {
    let model = CrosstalkModel {
        m,
        phi_off,
        omega_max,
    };
    let branch = if negative_branch {
        FluxBranch::Negative
    } else {
        FluxBranch::Principal
    };
    cq::calibration::currents_for_comb(&targets, &model, &fixed, branch).map_err(err)
}

/// Execute a JSON experiment config, writing artifacts into `out_dir`.
/// Returns the run summary as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir, jobs=0, seed=0))]
fn run_config(config_json: &str, out_dir: &str, jobs: usize, seed: u64) -> PyResult<String> {
    let cfg = parse_config(config_json).map_err(err)?;
    let summary =
        cq::runner::run(&cfg, std::path::Path::new(out_dir), jobs, seed).map_err(err)?;
    serde_json::to_string_pretty(&summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn comb_qed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(collective_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(comb_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(dressed_modes, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_power, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_comb, m)?)?;
    m.add_function(wrap_pyfunction!(predict_revival_time, m)?)?;
    m.add_function(wrap_pyfunction!(extract_revivals, m)?)?;
    m.add_function(wrap_pyfunction!(currents_for_comb, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
