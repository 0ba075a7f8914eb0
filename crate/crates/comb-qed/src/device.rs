//! Reference parameter set of the measured five-qubit comb device: cavity
//! rates, per-qubit couplings and linewidths, the crosstalk matrix and flux
//! offsets, and the default excitation pulse.

use crate::calibration::CrosstalkModel;
use crate::error::Result;
use crate::model::{build_comb, CavityParams, EnsembleSpec, PulseSpec, PulseShape};

/// Cavity: ω_c/2π = 5878 MHz, κ_e1 = 0.42, κ_e2 = 0.51, κ_i = 0.003,
/// κ_load ≈ 0.93 MHz.
pub fn cavity() -> CavityParams {
    CavityParams {
        omega_c: 5878.0,
        kappa_e1: 0.42,
        kappa_e2: 0.51,
        kappa_i: 0.003,
        kappa_load: 0.93,
    }
}

/// Comb center frequency in MHz.
pub const COMB_CENTER: f64 = 5874.5;

/// Couplings g_k/2π (MHz) of the five comb qubits, in comb order (device
/// qubits {2, 3, 7, 5, 6} from lowest to highest tooth).
pub const COMB_COUPLINGS: [f64; 5] = [30.96, 32.27, 28.24, 32.13, 30.54];

/// Linewidths γ_k/2π (MHz) of the five comb qubits, same order.
pub const COMB_GAMMAS: [f64; 5] = [0.414, 0.287, 0.033, 0.350, 0.290];

/// Nominal decoherence bound γ/2π < 0.5 MHz quoted for all qubits.
pub const GAMMA_NOMINAL: f64 = 0.5;

/// Comb spacings Δω/2π (MHz) at which the device was characterized.
pub const COMB_SPACINGS: [f64; 4] = [35.0, 40.0, 45.0, 50.0];

/// The five-qubit comb at spacing Δω (MHz).
pub fn comb(spacing: f64) -> Result<EnsembleSpec> {
    build_comb(COMB_CENTER, spacing, &COMB_COUPLINGS, &COMB_GAMMAS)
}

/// Default excitation pulse: Gaussian with a fitted spectral bandwidth of
/// 2σ_f = 80.4 MHz (σ_t ≈ 4.2 ns in a 16 ns window), η = 2.5 κ_load,
/// carrier at the cavity.
pub fn default_pulse() -> PulseSpec {
    PulseSpec {
        eta_peak: 2.5,
        duration: 16.0,
        carrier: 5878.0,
        shape: PulseShape::Gaussian,
        sigma: Some(4.1994),
    }
}

/// Crosstalk matrix entries in 1/A: rows are tuning lines (6 on-chip + coil),
/// columns are qubits.
pub const CROSSTALK_M: [[f64; 7]; 7] = [
    [-7.0, 450.0, -12.0, -22.0, -10.0, 0.2, 0.16],
    [-0.16, 2.5, 439.0, 27.0, 2.5, -0.3, 0.1],
    [-3.3, -0.8, -3.1, 427.0, -12.0, 2.0, 0.14],
    [-0.33, -0.13, -0.13, -4.0, 421.0, 6.6, 0.9],
    [0.33, 0.05, 0.05, 1.0, 12.0, 441.0, -3.6],
    [0.33, 0.02, 0.02, 0.02, 2.5, -14.9, 437.0],
    [12820.0, 23809.0, -23696.0, 25974.0, 26455.0, 26247.0, 21505.0],
];

/// Flux offset vector (dimensionless flux quanta).
pub const PHI_OFF: [f64; 7] = [-0.26, 0.34, -0.27, -0.31, -0.27, 0.3, 0.1];

/// Crosstalk model with a uniform synthetic ω_max (the maxima are not part
/// of the published set and must come from configuration in real use).
pub fn crosstalk_model(omega_max: f64) -> CrosstalkModel {
    CrosstalkModel {
        m: CROSSTALK_M.iter().map(|row| row.to_vec()).collect(),
        phi_off: PHI_OFF.to_vec(),
        omega_max: vec![omega_max; 7],
    }
}
