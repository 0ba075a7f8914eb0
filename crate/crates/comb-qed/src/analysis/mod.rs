//! Fit and extraction procedures: damped sinusoid, Gaussian, comb-spectrum
//! fit, revival-time extraction, spectral overlap, plus peak detection.

mod lm;
mod peaks;

pub use lm::{fit_least_squares, FitResult};
pub use peaks::{find_peaks, Peak};

use serde::{Deserialize, Serialize};

use crate::dynamics::{pulse_envelope, TimeTrace};
use crate::error::{CombError, Result};
use crate::model::{CavityParams, PulseSpec, ANG};
use crate::spectra::{transmission_semiclassical, SpectrumTrace};

/// Revival structure of a collapse-and-revival trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevivalReport {
    /// Hold time, transmitted-pulse peak to first revival (ns).
    pub tau_first: f64,
    /// Mean inter-peak spacing over the kept revivals (ns).
    pub tau_mean: f64,
    /// Alternative hold-time convention: pulse end to first revival (ns).
    pub tau_from_pulse_end: f64,
    /// Accepted peak times, transmitted pulse first, strictly increasing.
    pub peak_times: Vec<f64>,
    pub peak_heights: Vec<f64>,
    /// Indices into the spacing list dropped by the beat-mode outlier rule.
    pub excluded_peaks: Vec<usize>,
}

/// τ = 2π/mean(ΔE) for sorted eigenvalues in MHz, plus the gap-spread
/// propagated into time units: (τ in ns, spread in ns).
pub fn predict_revival_time(eigenvalues: &[f64]) -> Result<(f64, f64)> {
    if eigenvalues.len() < 2 {
        return Err(CombError::validation("need ≥ 2 eigenvalues"));
    }
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(CombError::validation("eigenvalues must be sorted"));
    }
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if mean <= 0.0 {
        return Err(CombError::validation("degenerate spectrum (zero mean gap)"));
    }
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    let std = var.sqrt();
    // τ = 2π/ΔE with ΔE = ANG·mean rad/ns  ⇒  τ = 1000/mean ns
    let tau = 1000.0 / mean;
    let spread = 1000.0 * std / (mean * mean);
    Ok((tau, spread))
}

/// Rectangular-window periodogram power at frequency f (MHz) of samples
/// (t ns, y−mean).
fn periodogram(ts: &[f64], ys: &[f64], f: f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (&t, &y) in ts.iter().zip(ys) {
        let ph = ANG * f * t;
        re += (y - mean) * ph.cos();
        im -= (y - mean) * ph.sin();
    }
    re * re + im * im
}

fn periodogram_scan(ts: &[f64], ys: &[f64], fmin: f64, fmax: f64, nf: usize) -> (f64, f64, f64) {
    let mut best = (fmin, 0.0);
    let mut powers = Vec::with_capacity(nf);
    for i in 0..nf {
        let f = fmin + (fmax - fmin) * i as f64 / (nf - 1) as f64;
        let p = periodogram(ts, ys, f);
        powers.push(p);
        if p > best.1 {
            best = (f, p);
        }
    }
    powers.sort_by(f64::total_cmp);
    let median = powers[powers.len() / 2];
    (best.0, best.1, median)
}

/// Fit a·e^{−Γt}(sin(Ωt + φ) + 1) to |⟨a⟩|² over `window` = (t_lo, t_hi) ns.
/// Γ and Ω are reported in MHz (non-angular) as `gamma_mhz` / `omega_mhz`.
pub fn fit_damped_sinusoid(trace: &TimeTrace, window: (f64, f64)) -> Result<FitResult> {
    let (w0, w1) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in trace.times.iter().zip(&trace.abs_sq) {
        if t >= w0 && t <= w1 {
            ts.push(t - w0);
            ys.push(y);
        }
    }
    if ts.len() < 8 {
        return Err(CombError::Fit("window contains too few samples".into()));
    }
    let span = ts.last().unwrap() - ts[0];
    let dt = span / (ts.len() - 1) as f64;
    let fmin = 1000.0 / span; // one cycle over the window
    let fmax = 0.5 * 1000.0 / dt; // Nyquist
    let (f0, p_peak, p_median) = periodogram_scan(&ts, &ys, fmin, fmax, 4000);
    if p_peak < 5.0 * p_median.max(1e-300) {
        return Err(CombError::Fit(
            "no oscillation detected (spectral peak below noise floor)".into(),
        ));
    }
    if span * f0 * 1e-3 < 3.0 {
        return Err(CombError::Fit(format!(
            "window holds only {:.1} oscillation periods (need ≥ 3)",
            span * f0 * 1e-3
        )));
    }
    let y_max = ys.iter().fold(0.0f64, |a, &b| a.max(b));
    // decay estimate from the mean of the first vs last third
    let third = ts.len() / 3;
    let m1 = ys[..third].iter().sum::<f64>() / third as f64;
    let m2 = ys[ts.len() - third..].iter().sum::<f64>() / third as f64;
    let gamma0 = if m1 > 0.0 && m2 > 0.0 && m1 > m2 {
        ((m1 / m2).ln() / (ANG * (ts[ts.len() - third] - ts[0]))).clamp(1e-3, 50.0)
    } else {
        0.1
    };
    let model = |t: f64, p: &[f64]| {
        p[0] * (-ANG * p[1] * t).exp() * ((ANG * p[2] * t + p[3]).sin() + 1.0)
    };
    // phase is the only multi-modal init direction left; seed four quadrants
    let mut best: Option<FitResult> = None;
    for phi0 in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::FRAC_PI_2] {
        let init = [0.5 * y_max, gamma0, f0, phi0];
        let bounds = [
            (0.0, f64::INFINITY),
            (0.0, 1e3),
            (0.5 * f0, 1.5 * f0),
            (-7.0, 7.0),
        ];
        let fit = fit_least_squares(
            model,
            &ts,
            &ys,
            &init,
            Some(&bounds),
            &["amplitude", "gamma_mhz", "omega_mhz", "phase"],
        )?;
        best = match best {
            Some(b) if b.residual_norm <= fit.residual_norm => Some(b),
            _ => Some(fit),
        };
    }
    Ok(best.unwrap())
}

/// Fit |S(ω)| with the tooth frequencies ω_k and overall amplitude A free;
/// couplings, linewidths and ω_c stay fixed (the source procedure).
pub fn fit_comb_spectrum(
    spectrum: &SpectrumTrace,
    couplings: &[f64],
    gammas: &[f64],
    kappa_load: f64,
    omega_c: f64,
    init_omegas: &[f64],
) -> Result<FitResult> {
    let n = couplings.len();
    if gammas.len() != n || init_omegas.len() != n {
        return Err(CombError::Fit(
            "couplings/gammas/init_omegas length mismatch".into(),
        ));
    }
    if spectrum.freqs.is_empty() {
        return Err(CombError::Fit("empty spectrum".into()));
    }
    let ys: Vec<f64> = spectrum.power.iter().map(|p| p.sqrt()).collect();
    let cavity = CavityParams {
        omega_c,
        kappa_e1: kappa_load,
        kappa_e2: 0.0,
        kappa_i: 0.0,
        kappa_load,
    };
    let couplings = couplings.to_vec();
    let gammas = gammas.to_vec();
    let model = move |w: f64, p: &[f64]| {
        let qubits = couplings
            .iter()
            .zip(&gammas)
            .enumerate()
            .map(|(k, (&g, &gamma))| crate::model::QubitSpec {
                omega: p[k],
                g,
                gamma,
                label: k,
            })
            .collect();
        let ens = crate::model::EnsembleSpec {
            qubits,
            comb_spacing: 0.0,
        };
        transmission_semiclassical(w, &ens, &cavity, p[p.len() - 1]).norm()
    };
    let y_max = ys.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut init: Vec<f64> = init_omegas.to_vec();
    init.push(y_max * kappa_load);
    let (f_lo, f_hi) = (spectrum.freqs[0], *spectrum.freqs.last().unwrap());
    let mut bounds: Vec<(f64, f64)> = init_omegas.iter().map(|_| (f_lo, f_hi)).collect();
    bounds.push((0.0, f64::INFINITY));
    let names: Vec<String> = (1..=n)
        .map(|k| format!("omega_{k}"))
        .chain(std::iter::once("amplitude".into()))
        .collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    fit_least_squares(model, &spectrum.freqs, &ys, &init, Some(&bounds), &name_refs)
}

/// Fit A·exp(−(x − μ)²/(2σ²)); appends the 2σ bandwidth figure to the
/// parameter list.
pub fn fit_gaussian(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() < 4 {
        return Err(CombError::Fit("need ≥ 4 samples for a Gaussian fit".into()));
    }
    let total: f64 = ys.iter().map(|y| y.max(0.0)).sum();
    if total <= 0.0 {
        return Err(CombError::Fit("non-positive data (no variance estimate)".into()));
    }
    let mu0 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| x * y.max(0.0))
        .sum::<f64>()
        / total;
    let var0 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mu0).powi(2) * y.max(0.0))
        .sum::<f64>()
        / total;
    if !(var0 > 0.0) {
        return Err(CombError::Fit("non-positive variance estimate".into()));
    }
    let a0 = ys.iter().fold(0.0f64, |a, &b| a.max(b));
    let model =
        |x: f64, p: &[f64]| p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
    let mut fit = fit_least_squares(
        model,
        xs,
        ys,
        &[a0, mu0, var0.sqrt()],
        Some(&[(0.0, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY), (1e-12, f64::INFINITY)]),
        &["a", "mu", "sigma"],
    )?;
    let sigma = fit.value("sigma").unwrap();
    fit.params.push(("two_sigma".into(), 2.0 * sigma));
    Ok(fit)
}

/// Coarse period estimate from the autocorrelation of the post-pulse trace.
fn autocorrelation_period(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let n = ys.len();
    if n < 8 {
        return None;
    }
    let mean = ys.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = ys.iter().map(|y| y - mean).collect();
    let dt = (ts[n - 1] - ts[0]) / (n - 1) as f64;
    let max_lag = n / 2;
    let ac = |lag: usize| -> f64 { (0..n - lag).map(|i| d[i] * d[i + lag]).sum() };
    // skip to the first sign change, then take the global max after it
    let mut lag = 1;
    while lag < max_lag && ac(lag) > 0.0 {
        lag += 1;
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for l in lag..max_lag {
        let v = ac(l);
        if v > best.1 {
            best = (l, v);
        }
    }
    if best.0 == 0 {
        None
    } else {
        Some(best.0 as f64 * dt)
    }
}

/// Extract revival peaks from |⟨a⟩|².
///
/// `expected_tau`: predicted revival period (from the eigenvalue gaps); when
/// absent it is estimated from the trace autocorrelation. Peak selection is
/// greedy tallest-first among post-pulse local maxima above 10% of the
/// tallest post-pulse peak, with a minimum separation of 0.6·τ; the mean
/// spacing over the first six revivals is reported after dropping the single
/// worst outlier (the beat-affected peak).
pub fn extract_revivals(
    trace: &TimeTrace,
    pulse_end: f64,
    expected_tau: Option<f64>,
) -> Result<RevivalReport> {
    let ts = &trace.times;
    let ys = &trace.abs_sq;
    if ts.len() < 8 {
        return Err(CombError::Fit("trace too short".into()));
    }
    let maxima: Vec<usize> = (1..ts.len() - 1)
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
        .collect();
    // transmitted pulse = tallest maximum at or before pulse_end
    let pulse_peak = maxima
        .iter()
        .copied()
        .filter(|&i| ts[i] <= pulse_end + 1e-9)
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .ok_or_else(|| CombError::Fit("no transmitted-pulse peak before pulse_end".into()))?;
    let post: Vec<usize> = maxima
        .iter()
        .copied()
        .filter(|&i| ts[i] > pulse_end + 1e-9)
        .collect();
    if post.len() < 2 {
        return Err(CombError::Fit(format!(
            "fewer than 3 peaks found ({} post-pulse)",
            post.len()
        )));
    }
    let tau_pred = match expected_tau {
        Some(t) if t > 0.0 => t,
        _ => {
            let first_post = ts.iter().position(|&t| t > pulse_end).unwrap();
            autocorrelation_period(&ts[first_post..], &ys[first_post..])
                .ok_or_else(|| CombError::Fit("could not estimate revival period".into()))?
        }
    };
    let tallest = post
        .iter()
        .map(|&i| ys[i])
        .fold(0.0f64, f64::max);
    let threshold = 0.10 * tallest;
    let min_sep = 0.6 * tau_pred;
    // greedy tallest-first selection, keeping distance from the pulse peak too
    let mut order: Vec<usize> = post.iter().copied().filter(|&i| ys[i] >= threshold).collect();
    order.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]));
    let mut accepted: Vec<usize> = vec![pulse_peak];
    for i in order {
        if accepted.iter().all(|&j| (ts[i] - ts[j]).abs() >= min_sep) {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    if accepted.len() < 3 {
        return Err(CombError::Fit(format!(
            "fewer than 3 peaks found ({} accepted)",
            accepted.len()
        )));
    }
    // first six revivals after the pulse
    let keep = accepted.len().min(7);
    let accepted = &accepted[..keep];
    let peak_times: Vec<f64> = accepted.iter().map(|&i| ts[i]).collect();
    let peak_heights: Vec<f64> = accepted.iter().map(|&i| ys[i]).collect();
    let spacings: Vec<f64> = peak_times.windows(2).map(|w| w[1] - w[0]).collect();
    // drop the single worst deviation from the median spacing
    let mut sorted = spacings.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let excluded = if spacings.len() > 2 {
        let worst = spacings
            .iter()
            .enumerate()
            .max_by(|a, b| (a.1 - median).abs().total_cmp(&(b.1 - median).abs()))
            .map(|(i, _)| i)
            .unwrap();
        vec![worst]
    } else {
        vec![]
    };
    let kept: Vec<f64> = spacings
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, &s)| s)
        .collect();
    let tau_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    Ok(RevivalReport {
        tau_first: peak_times[1] - peak_times[0],
        tau_mean,
        tau_from_pulse_end: peak_times[1] - pulse_end,
        peak_times,
        peak_heights,
        excluded_peaks: excluded,
    })
}

/// Fraction of the pulse power transmitted by the comb:
/// ∫|E(ω)|²·T_norm(ω)dω / ∫|E(ω)|²dω with T_norm the comb power transmission
/// normalized to unit peak; trapezoidal quadrature on the spectrum grid.
pub fn spectral_overlap(pulse: &PulseSpec, comb_spectrum: &SpectrumTrace) -> Result<f64> {
    pulse.validate()?;
    let freqs = &comb_spectrum.freqs;
    if freqs.len() < 2 {
        return Err(CombError::validation("comb spectrum needs ≥ 2 points"));
    }
    let t_max = comb_spectrum
        .power
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    if t_max <= 0.0 {
        log::warn!("comb transmission identically zero; overlap = 0");
        return Ok(0.0);
    }
    // pulse amplitude spectrum by direct quadrature of the envelope
    let nt = 2048usize;
    let dt = pulse.duration / nt as f64;
    let pulse_power: Vec<f64> = freqs
        .iter()
        .map(|&f| {
            let df = f - pulse.carrier;
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..=nt {
                let t = i as f64 * dt;
                let w = if i == 0 || i == nt { 0.5 } else { 1.0 };
                let env = pulse_envelope(pulse, t);
                let ph = ANG * df * t;
                re += w * env * ph.cos();
                im -= w * env * ph.sin();
            }
            (re * re + im * im) * dt * dt
        })
        .collect();
    let trapz = |vals: &[f64]| -> f64 {
        vals.windows(2)
            .zip(freqs.windows(2))
            .map(|(v, f)| 0.5 * (v[0] + v[1]) * (f[1] - f[0]))
            .sum()
    };
    let weighted: Vec<f64> = pulse_power
        .iter()
        .zip(&comb_spectrum.power)
        .map(|(p, t)| p * t / t_max)
        .collect();
    let denom = trapz(&pulse_power);
    if denom <= 0.0 {
        log::warn!("pulse spectrum carries no power on the comb grid; overlap = 0");
        return Ok(0.0);
    }
    Ok((trapz(&weighted) / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InvariantSummary;
    use crate::model::{build_comb, PulseShape};
    use crate::spectra::transmission_trace;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn synthetic_trace(times: Vec<f64>, abs_sq: Vec<f64>) -> TimeTrace {
        let a_expect = abs_sq
            .iter()
            .map(|&v| Complex64::new(v.max(0.0).sqrt(), 0.0))
            .collect();
        let photon_number = abs_sq.clone();
        TimeTrace {
            times,
            a_expect,
            abs_sq,
            photon_number,
            invariants: InvariantSummary {
                max_trace_dev: 0.0,
                max_herm_dev: 0.0,
                min_eigenvalue: 0.0,
                all_valid: true,
            },
        }
    }

    #[test]
    fn predict_revival_uniform_comb() {
        let eigs = [5800.0, 5850.0, 5900.0, 5950.0];
        let (tau, spread) = predict_revival_time(&eigs).unwrap();
        assert_relative_eq!(tau, 20.0, epsilon = 1e-12);
        assert_relative_eq!(spread, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_revival_collective_pair() {
        let (tau, _) = predict_revival_time(&[5878.0 - 68.95, 5878.0 + 68.95]).unwrap();
        assert_relative_eq!(tau, 1000.0 / 137.9, epsilon = 1e-9);
        assert!((tau - 7.25).abs() < 0.01);
    }

    #[test]
    fn predict_revival_shift_invariant() {
        let eigs = [5800.0, 5851.0, 5897.0, 5951.0];
        let (t1, s1) = predict_revival_time(&eigs).unwrap();
        let shifted: Vec<f64> = eigs.iter().map(|e| e + 123.4).collect();
        let (t2, s2) = predict_revival_time(&shifted).unwrap();
        assert_relative_eq!(t1, t2, epsilon = 1e-9);
        assert_relative_eq!(s1, s2, epsilon = 1e-9);
    }

    #[test]
    fn damped_sinusoid_round_trip() {
        // exact f(t) with Γ = 1.1 MHz recovered to 1e-6
        let (a, gamma, omega, phi) = (0.8, 1.1, 49.6, 0.3);
        let times: Vec<f64> = (0..800).map(|i| 0.1 * i as f64).collect();
        let abs_sq: Vec<f64> = times
            .iter()
            .map(|&t| a * (-ANG * gamma * t).exp() * ((ANG * omega * t + phi).sin() + 1.0))
            .collect();
        let trace = synthetic_trace(times, abs_sq);
        let fit = fit_damped_sinusoid(&trace, (0.0, 79.9)).unwrap();
        assert!(fit.converged, "{}", fit.message);
        assert_relative_eq!(fit.value("gamma_mhz").unwrap(), gamma, max_relative = 1e-6);
        assert_relative_eq!(fit.value("omega_mhz").unwrap(), omega, max_relative = 1e-6);
    }

    #[test]
    fn damped_sinusoid_rejects_flat_data() {
        let times: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        let abs_sq: Vec<f64> = times.iter().map(|&t| (-0.01 * t).exp()).collect();
        let trace = synthetic_trace(times, abs_sq);
        assert!(fit_damped_sinusoid(&trace, (0.0, 99.5)).is_err());
    }

    #[test]
    fn gaussian_fit_round_trip_and_shift() {
        let xs: Vec<f64> = (0..160).map(|i| -200.0 + 2.5 * i as f64).collect();
        let make = |mu: f64| -> Vec<f64> {
            xs.iter()
                .map(|x| 1.7 * (-(x - mu).powi(2) / (2.0 * 40.2 * 40.2)).exp())
                .collect()
        };
        let fit = fit_gaussian(&xs, &make(2.0)).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("mu").unwrap(), 2.0, epsilon = 1e-7);
        assert_relative_eq!(fit.value("sigma").unwrap(), 40.2, max_relative = 1e-8);
        assert_relative_eq!(fit.value("two_sigma").unwrap(), 80.4, max_relative = 1e-8);
        let fit5 = fit_gaussian(&xs, &make(7.0)).unwrap();
        assert_relative_eq!(
            fit5.value("mu").unwrap() - fit.value("mu").unwrap(),
            5.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn comb_fit_round_trip() {
        const COMB_G: [f64; 5] = [30.96, 32.27, 28.24, 32.13, 30.54];
        const COMB_GAMMA: [f64; 5] = [0.414, 0.287, 0.033, 0.350, 0.290];
        let cav = CavityParams {
            omega_c: 5878.0,
            kappa_e1: 0.42,
            kappa_e2: 0.51,
            kappa_i: 0.003,
            kappa_load: 0.93,
        };
        let ens = build_comb(5874.5, 40.0, &COMB_G, &COMB_GAMMA).unwrap();
        let freqs: Vec<f64> = (0..1601)
            .map(|i| 5878.0 - 200.0 + 0.25 * i as f64)
            .collect();
        let spectrum = transmission_trace(&freqs, &ens, &cav, 3.7);
        let truth: Vec<f64> = ens.qubits.iter().map(|q| q.omega).collect();
        let init: Vec<f64> = truth.iter().map(|w| w + 1.5).collect();
        let fit = fit_comb_spectrum(
            &spectrum,
            &COMB_G,
            &COMB_GAMMA,
            cav.kappa_load,
            cav.omega_c,
            &init,
        )
        .unwrap();
        assert!(fit.converged, "{}", fit.message);
        for (k, w) in truth.iter().enumerate() {
            let v = fit.value(&format!("omega_{}", k + 1)).unwrap();
            assert!((v - w).abs() < 0.1, "omega_{}: {} vs {}", k + 1, v, w);
        }
        assert_relative_eq!(fit.value("amplitude").unwrap(), 3.7, max_relative = 1e-4);
        // amplitude linearity: scale data by 10
        let scaled = crate::spectra::SpectrumTrace::new(
            freqs.clone(),
            spectrum.s_complex.iter().map(|s| s * 10.0).collect(),
        );
        let fit10 = fit_comb_spectrum(
            &scaled,
            &COMB_G,
            &COMB_GAMMA,
            cav.kappa_load,
            cav.omega_c,
            &init,
        )
        .unwrap();
        assert_relative_eq!(
            fit10.value("amplitude").unwrap(),
            10.0 * fit.value("amplitude").unwrap(),
            max_relative = 1e-6
        );
        for k in 1..=5 {
            assert_relative_eq!(
                fit10.value(&format!("omega_{k}")).unwrap(),
                fit.value(&format!("omega_{k}")).unwrap(),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn comb_fit_label_invariance() {
        // permuted init order converges to the same sorted tooth frequencies
        const G: [f64; 3] = [30.0, 30.0, 30.0];
        const GAM: [f64; 3] = [0.3, 0.3, 0.3];
        let cav = CavityParams {
            omega_c: 5878.0,
            kappa_e1: 0.93,
            kappa_e2: 0.0,
            kappa_i: 0.0,
            kappa_load: 0.93,
        };
        let ens = build_comb(5878.0, 45.0, &G, &GAM).unwrap();
        let freqs: Vec<f64> = (0..1201).map(|i| 5878.0 - 150.0 + 0.25 * i as f64).collect();
        let spectrum = transmission_trace(&freqs, &ens, &cav, 1.0);
        let run = |init: &[f64]| {
            let fit =
                fit_comb_spectrum(&spectrum, &G, &GAM, cav.kappa_load, cav.omega_c, init).unwrap();
            let mut w: Vec<f64> = (1..=3)
                .map(|k| fit.value(&format!("omega_{k}")).unwrap())
                .collect();
            w.sort_by(f64::total_cmp);
            w
        };
        let a = run(&[5834.0, 5879.0, 5922.0]);
        let b = run(&[5922.0, 5879.0, 5834.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(*x, *y, epsilon = 1e-6);
        }
    }

    #[test]
    fn revivals_periodic_gaussian_train() {
        let dt = 0.1;
        let times: Vec<f64> = (0..2000).map(|i| dt * i as f64).collect();
        let spacing = 20.0;
        let abs_sq: Vec<f64> = times
            .iter()
            .map(|&t| {
                (0..9)
                    .map(|k| {
                        let c = 5.0 + spacing * k as f64;
                        let a = if k == 0 { 1.0 } else { 0.5 };
                        a * (-(t - c).powi(2) / (2.0 * 1.5f64.powi(2))).exp()
                    })
                    .sum()
            })
            .collect();
        let trace = synthetic_trace(times, abs_sq);
        let report = extract_revivals(&trace, 10.0, None).unwrap();
        assert_relative_eq!(report.tau_mean, spacing, epsilon = 1e-9);
        assert_relative_eq!(report.tau_first, spacing, epsilon = 1e-9);
        assert_relative_eq!(report.tau_from_pulse_end, 15.0, epsilon = 1e-9);
    }

    #[test]
    fn revivals_scale_invariant() {
        let dt = 0.1;
        let times: Vec<f64> = (0..1500).map(|i| dt * i as f64).collect();
        let abs_sq: Vec<f64> = times
            .iter()
            .map(|&t| {
                (0..6)
                    .map(|k| {
                        let c = 4.0 + 18.0 * k as f64;
                        (-(t - c).powi(2) / 4.0).exp() * (1.0 / (1.0 + k as f64))
                    })
                    .sum()
            })
            .collect();
        let t1 = synthetic_trace(times.clone(), abs_sq.clone());
        let t2 = synthetic_trace(times, abs_sq.iter().map(|v| v * 250.0).collect());
        let r1 = extract_revivals(&t1, 8.0, Some(18.0)).unwrap();
        let r2 = extract_revivals(&t2, 8.0, Some(18.0)).unwrap();
        assert_eq!(r1.peak_times, r2.peak_times);
        assert_relative_eq!(r1.tau_mean, r2.tau_mean, epsilon = 1e-12);
    }

    #[test]
    fn revivals_monotone_trace_errors() {
        let times: Vec<f64> = (0..400).map(|i| 0.2 * i as f64).collect();
        let abs_sq: Vec<f64> = times.iter().map(|&t| (-(t - 3.0).powi(2) / 8.0).exp()).collect();
        let trace = synthetic_trace(times, abs_sq);
        assert!(extract_revivals(&trace, 6.0, Some(20.0)).is_err());
    }

    #[test]
    fn overlap_trivial_limits() {
        let pulse = PulseSpec {
            eta_peak: 1.0,
            duration: 16.0,
            carrier: 5878.0,
            shape: PulseShape::Gaussian,
            sigma: Some(4.2),
        };
        let freqs: Vec<f64> = (0..801).map(|i| 5878.0 - 200.0 + 0.5 * i as f64).collect();
        let all_pass = SpectrumTrace::new(
            freqs.clone(),
            freqs.iter().map(|_| Complex64::new(1.0, 0.0)).collect(),
        );
        let o = spectral_overlap(&pulse, &all_pass).unwrap();
        assert_relative_eq!(o, 1.0, epsilon = 1e-9);
        let blocked = SpectrumTrace::new(
            freqs.clone(),
            freqs.iter().map(|_| Complex64::default()).collect(),
        );
        assert_relative_eq!(spectral_overlap(&pulse, &blocked).unwrap(), 0.0);
    }
}
