//! Closed-form frequency-domain responses: semiclassical comb transmission,
//! sweep maps, and the Lorentzian doublet of the two-tone characterization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CombError, Result};
use crate::model::{build_comb, CavityParams, EnsembleSpec};

/// Complex transmission with |S|² precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub freqs: Vec<f64>,
    pub s_complex: Vec<Complex64>,
    pub power: Vec<f64>,
}

impl SpectrumTrace {
    pub fn new(freqs: Vec<f64>, s_complex: Vec<Complex64>) -> Self {
        let power = s_complex.iter().map(|s| s.norm_sqr()).collect();
        SpectrumTrace {
            freqs,
            s_complex,
            power,
        }
    }
}

/// Tooth-damping convention for the semiclassical transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToothDamping {
    /// γ_k to the first power (dimensionally consistent susceptibility).
    #[default]
    Linear,
    /// γ_k² as printed in the source fit function; compatibility only.
    PrintedSquared,
}

/// Semiclassical comb transmission
/// S(ω) = A / (κ_load + i(ω_c − ω) + Σ_k g_k²/(γ_k + i(ω_k − ω))).
///
/// A qubit hit exactly on resonance with γ_k = 0 makes a tooth denominator
/// vanish; the limit S → 0 is returned (perfect comb tooth).
pub fn transmission_semiclassical(
    omega: f64,
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
    amplitude: f64,
) -> Complex64 {
    transmission_with_options(omega, ensemble, cavity, amplitude, ToothDamping::Linear)
}

/// Same as [`transmission_semiclassical`] with an explicit damping convention.
pub fn transmission_with_options(
    omega: f64,
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
    amplitude: f64,
    damping: ToothDamping,
) -> Complex64 {
    let mut denom = Complex64::new(cavity.kappa_load, cavity.omega_c - omega);
    for q in &ensemble.qubits {
        let damp = match damping {
            ToothDamping::Linear => q.gamma,
            ToothDamping::PrintedSquared => q.gamma * q.gamma,
        };
        let tooth = Complex64::new(damp, q.omega - omega);
        if tooth.norm_sqr() == 0.0 {
            // singular tooth: S vanishes in the limit
            return Complex64::default();
        }
        denom += Complex64::new(q.g * q.g, 0.0) / tooth;
    }
    Complex64::new(amplitude, 0.0) / denom
}

/// Evaluate |S|² over a frequency grid.
pub fn transmission_trace(
    freqs: &[f64],
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
    amplitude: f64,
) -> SpectrumTrace {
    let s = freqs
        .iter()
        .map(|&w| transmission_semiclassical(w, ensemble, cavity, amplitude))
        .collect();
    SpectrumTrace::new(freqs.to_vec(), s)
}

/// |S(ω)|² over a (comb spacing × frequency) grid; the comb is rebuilt around
/// `center` for every spacing row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMap {
    pub spacings: Vec<f64>,
    pub freqs: Vec<f64>,
    /// rows[i][j] = |S(freqs[j])|² at spacings[i]
    pub rows: Vec<Vec<f64>>,
}

pub fn spectrum_map(
    center: f64,
    couplings: &[f64],
    gammas: &[f64],
    cavity: &CavityParams,
    freqs: &[f64],
    spacings: &[f64],
) -> Result<PowerMap> {
    if freqs.windows(2).any(|w| w[1] <= w[0]) || spacings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CombError::validation("spectrum_map grids must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(spacings.len());
    for &dw in spacings {
        let ens = build_comb(center, dw, couplings, gammas)?;
        rows.push(
            freqs
                .iter()
                .map(|&w| transmission_semiclassical(w, &ens, cavity, 1.0).norm_sqr())
                .collect(),
        );
    }
    Ok(PowerMap {
        spacings: spacings.to_vec(),
        freqs: freqs.to_vec(),
        rows,
    })
}

/// Vacuum-Rabi doublet (Eq.-S1 form):
/// A1/(1 + ((ω − (ω_c − g))/(κ/2))²) + A2/(1 + ((ω − (ω_c + g))/(κ/2))²).
pub fn double_lorentzian(
    omega: f64,
    a1: f64,
    a2: f64,
    omega_c: f64,
    g_k: f64,
    kappa_k: f64,
) -> f64 {
    let half = 0.5 * kappa_k;
    let lo = (omega - (omega_c - g_k)) / half;
    let hi = (omega - (omega_c + g_k)) / half;
    a1 / (1.0 + lo * lo) + a2 / (1.0 + hi * hi)
}
