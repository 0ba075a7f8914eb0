//! Domain types and unit conventions shared by every other module.
//!
//! All stored frequencies and rates are *non-angular* (the value of ω/2π in
//! MHz); time is in ns. Modules that build generators multiply by [`ANG`] to
//! get rad/ns.

use serde::{Deserialize, Serialize};

use crate::error::{CombError, Result};

/// rad/ns per (non-angular) MHz: 2π × 10⁻³.
pub const ANG: f64 = std::f64::consts::TAU * 1e-3;

/// Cavity frequency and loss/coupling rates, all in MHz (ω/2π convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Cavity frequency ω_c/2π.
    pub omega_c: f64,
    /// Input port coupling κ_e1/2π.
    pub kappa_e1: f64,
    /// Output port coupling κ_e2/2π.
    pub kappa_e2: f64,
    /// Internal loss κ_i/2π.
    pub kappa_i: f64,
    /// Loaded linewidth κ_load/2π; stored, not derived, with a consistency
    /// check against the sum of the three contributions.
    pub kappa_load: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(CombError::validation("omega_c must be finite and > 0"));
        }
        for (name, r) in [
            ("kappa_e1", self.kappa_e1),
            ("kappa_e2", self.kappa_e2),
            ("kappa_i", self.kappa_i),
            ("kappa_load", self.kappa_load),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(CombError::validation(format!("{name} must be ≥ 0")));
            }
        }
        let sum = self.kappa_e1 + self.kappa_e2 + self.kappa_i;
        if (self.kappa_load - sum).abs() > 0.01 {
            return Err(CombError::validation(format!(
                "kappa_load = {} inconsistent with kappa_e1+kappa_e2+kappa_i = {}",
                self.kappa_load, sum
            )));
        }
        Ok(())
    }
}

/// One two-level emitter: frequency, coupling, decoherence (MHz) and a label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    /// Transition frequency ω_k/2π.
    pub omega: f64,
    /// Cavity coupling g_k/2π.
    pub g: f64,
    /// Decoherence rate γ_k/2π.
    pub gamma: f64,
    /// Qubit index (device numbering, informational).
    pub label: usize,
}

impl QubitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(CombError::validation("qubit omega must be > 0"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(CombError::validation("qubit g must be > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(CombError::validation("qubit gamma must be ≥ 0"));
        }
        Ok(())
    }
}

/// Ordered qubit list plus the comb geometry it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub qubits: Vec<QubitSpec>,
    /// Comb tooth spacing Δω/2π in MHz; 0 means a homogeneous ensemble.
    pub comb_spacing: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(CombError::validation("ensemble must contain ≥ 1 qubit"));
        }
        self.qubits.iter().try_for_each(QubitSpec::validate)
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }
}

/// Drive pulse envelope shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Gaussian,
    Rectangular,
}

/// Drive pulse: peak amplitude in units of κ_load, window, carrier, shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Peak amplitude η/κ_load (dimensionless multiplier).
    pub eta_peak: f64,
    /// Full pulse window length in ns; the envelope is truncated to it.
    pub duration: f64,
    /// Carrier (drive) frequency ω_d/2π in MHz.
    pub carrier: f64,
    pub shape: PulseShape,
    /// Gaussian width parameter in ns; required iff shape = gaussian.
    pub sigma: Option<f64>,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(CombError::validation("pulse duration must be > 0"));
        }
        if !(self.eta_peak.is_finite() && self.eta_peak >= 0.0) {
            return Err(CombError::validation("eta_peak must be ≥ 0"));
        }
        if !(self.carrier.is_finite() && self.carrier > 0.0) {
            return Err(CombError::validation("pulse carrier must be > 0"));
        }
        match (self.shape, self.sigma) {
            (PulseShape::Gaussian, Some(s)) if s.is_finite() && s > 0.0 => Ok(()),
            (PulseShape::Gaussian, _) => Err(CombError::validation(
                "gaussian pulse requires sigma > 0",
            )),
            (PulseShape::Rectangular, _) => Ok(()),
        }
    }
}

/// Simulation window, output grid, truncation and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub t_start: f64,
    pub t_end: f64,
    /// Output sample spacing in ns.
    pub dt_out: f64,
    /// Fock truncation n_max (photon count).
    pub fock_max: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl SimGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(CombError::validation("t_end must exceed t_start"));
        }
        if !(self.dt_out > 0.0) {
            return Err(CombError::validation("dt_out must be > 0"));
        }
        if self.fock_max < 1 {
            return Err(CombError::validation("fock_max must be ≥ 1"));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(CombError::validation("rtol and atol must be > 0"));
        }
        Ok(())
    }
}

/// Build an equally spaced comb centered on `center`.
///
/// Qubit k (0-indexed) is placed at `center + (k − (N−1)/2)·spacing`;
/// couplings/gammas keep their input order.
pub fn build_comb(
    center: f64,
    spacing: f64,
    couplings: &[f64],
    gammas: &[f64],
) -> Result<EnsembleSpec> {
    if couplings.len() != gammas.len() {
        return Err(CombError::validation(format!(
            "couplings (len {}) and gammas (len {}) must have equal length",
            couplings.len(),
            gammas.len()
        )));
    }
    if couplings.is_empty() {
        return Err(CombError::validation("comb must contain ≥ 1 qubit"));
    }
    let n = couplings.len();
    let mid = (n as f64 - 1.0) / 2.0;
    let qubits = couplings
        .iter()
        .zip(gammas)
        .enumerate()
        .map(|(k, (&g, &gamma))| QubitSpec {
            omega: center + (k as f64 - mid) * spacing,
            g,
            gamma,
            label: k,
        })
        .collect();
    let ens = EnsembleSpec {
        qubits,
        comb_spacing: spacing,
    };
    ens.validate()?;
    Ok(ens)
}

/// Collective coupling G/2π = √(Σ g_k²) in MHz.
pub fn collective_coupling(ensemble: &EnsembleSpec) -> f64 {
    ensemble
        .qubits
        .iter()
        .map(|q| q.g * q.g)
        .sum::<f64>()
        .sqrt()
}

/// Input-photon bookkeeping for a drive of amplitude `eta_multiplier`·κ_load:
/// the empty-cavity photon-number convention (η/κ_load)².
pub fn drive_photon_number(eta_multiplier: f64) -> f64 {
    eta_multiplier * eta_multiplier
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const COMB_G: [f64; 5] = [30.96, 32.27, 28.24, 32.13, 30.54];
    const COMB_GAMMA: [f64; 5] = [0.414, 0.287, 0.033, 0.350, 0.290];

    #[test]
    fn comb_frequencies_dw50() {
        let ens = build_comb(5874.5, 50.0, &COMB_G, &COMB_GAMMA).unwrap();
        let freqs: Vec<f64> = ens.qubits.iter().map(|q| q.omega).collect();
        let expect = [5774.5, 5824.5, 5874.5, 5924.5, 5974.5];
        for (f, e) in freqs.iter().zip(expect) {
            assert_relative_eq!(*f, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn comb_frequencies_dw35() {
        let ens = build_comb(5874.5, 35.0, &COMB_G, &COMB_GAMMA).unwrap();
        let freqs: Vec<f64> = ens.qubits.iter().map(|q| q.omega).collect();
        let expect = [5804.5, 5839.5, 5874.5, 5909.5, 5944.5];
        for (f, e) in freqs.iter().zip(expect) {
            assert_relative_eq!(*f, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn comb_zero_spacing_single() {
        let ens = build_comb(5878.0, 0.0, &[30.0], &[0.3]).unwrap();
        assert_eq!(ens.len(), 1);
        assert_relative_eq!(ens.qubits[0].omega, 5878.0);
    }

    #[test]
    fn comb_length_mismatch_rejected() {
        assert!(build_comb(5878.0, 10.0, &[30.0, 30.0], &[0.3]).is_err());
    }

    #[test]
    fn collective_coupling_paper_value() {
        let ens = build_comb(5874.5, 50.0, &COMB_G, &COMB_GAMMA).unwrap();
        let g = collective_coupling(&ens);
        assert!((g - 68.95).abs() < 0.1, "G = {g}");
    }

    #[test]
    fn collective_coupling_trivial() {
        let one = build_comb(5000.0, 0.0, &[30.0], &[0.0]).unwrap();
        assert_relative_eq!(collective_coupling(&one), 30.0);
        let pyth = build_comb(5000.0, 1.0, &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(collective_coupling(&pyth), 5.0);
    }

    #[test]
    fn photon_number_convention() {
        assert_relative_eq!(drive_photon_number(42.0), 1764.0);
        assert_relative_eq!(drive_photon_number(0.0), 0.0);
        assert_relative_eq!(drive_photon_number(6.2), 38.44);
    }

    #[test]
    fn cavity_consistency_check() {
        let good = CavityParams {
            omega_c: 5878.0,
            kappa_e1: 0.42,
            kappa_e2: 0.51,
            kappa_i: 0.003,
            kappa_load: 0.93,
        };
        good.validate().unwrap();
        let bad = CavityParams {
            kappa_load: 1.2,
            ..good
        };
        assert!(bad.validate().is_err());
        let negative = CavityParams {
            kappa_i: -0.1,
            ..good
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn pulse_validation() {
        let p = PulseSpec {
            eta_peak: 2.5,
            duration: 16.0,
            carrier: 5878.0,
            shape: PulseShape::Gaussian,
            sigma: Some(4.2),
        };
        p.validate().unwrap();
        let no_sigma = PulseSpec { sigma: None, ..p };
        assert!(no_sigma.validate().is_err());
        let rect = PulseSpec {
            shape: PulseShape::Rectangular,
            sigma: None,
            ..p
        };
        rect.validate().unwrap();
    }
}
