//! JSON experiment configurations: one experiment per file, snake_case
//! fields, validated before any computation starts.

use serde::{Deserialize, Serialize};

use crate::calibration::{CrosstalkModel, FluxBranch};
use crate::error::{CombError, Result};
use crate::model::{build_comb, CavityParams, EnsembleSpec, PulseSpec, SimGrid};

/// Inclusive arithmetic grid start, start+step, …, ≤ stop (+ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.stop >= self.start) {
            return Err(CombError::Config(format!(
                "invalid grid: start {}, stop {}, step {}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Equally spaced comb description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombConfig {
    pub center: f64,
    pub spacing: f64,
    pub couplings: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl CombConfig {
    pub fn to_ensemble(&self) -> Result<EnsembleSpec> {
        build_comb(self.center, self.spacing, &self.couplings, &self.gammas)
    }

    pub fn with_spacing(&self, spacing: f64) -> Result<EnsembleSpec> {
        build_comb(self.center, spacing, &self.couplings, &self.gammas)
    }
}

/// One experiment; `kind` selects the variant and its required fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// |S(ω)|² over a (comb spacing × frequency) grid plus dressed states.
    SpectrumMap {
        cavity: CavityParams,
        comb: CombConfig,
        freq_grid: GridSpec,
        spacing_grid: GridSpec,
        output_prefix: String,
    },
    /// |⟨a⟩|²(t) for a list of comb spacings, one propagation each.
    TimeMap {
        cavity: CavityParams,
        comb: CombConfig,
        pulse: PulseSpec,
        grid: SimGrid,
        spacings: Vec<f64>,
        output_prefix: String,
    },
    /// Single pulsed propagation plus revival extraction.
    RevivalRun {
        cavity: CavityParams,
        comb: CombConfig,
        pulse: PulseSpec,
        grid: SimGrid,
        output_prefix: String,
    },
    /// Steady-state response over probe frequency and drive amplitude.
    PowerSweep {
        cavity: CavityParams,
        comb: CombConfig,
        grid: SimGrid,
        omega_grid: GridSpec,
        /// Drive amplitudes in units of κ_load.
        etas: Vec<f64>,
        output_prefix: String,
    },
    /// Invert the crosstalk model for a list of target frequencies.
    CalibrationPlan {
        crosstalk: CrosstalkModel,
        /// (qubit index, target ω in MHz)
        targets: Vec<(usize, f64)>,
        /// (line index, held current in A)
        #[serde(default)]
        fixed: Vec<(usize, f64)>,
        #[serde(default)]
        branch: FluxBranch,
        output_prefix: String,
    },
    /// Pulse spectrum, comb transmission, and their overlap fraction.
    PulseOverlap {
        cavity: CavityParams,
        comb: CombConfig,
        pulse: PulseSpec,
        freq_grid: GridSpec,
        output_prefix: String,
    },
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::SpectrumMap { .. } => "spectrum_map",
            ExperimentConfig::TimeMap { .. } => "time_map",
            ExperimentConfig::RevivalRun { .. } => "revival_run",
            ExperimentConfig::PowerSweep { .. } => "power_sweep",
            ExperimentConfig::CalibrationPlan { .. } => "calibration_plan",
            ExperimentConfig::PulseOverlap { .. } => "pulse_overlap",
        }
    }

    pub fn output_prefix(&self) -> &str {
        match self {
            ExperimentConfig::SpectrumMap { output_prefix, .. }
            | ExperimentConfig::TimeMap { output_prefix, .. }
            | ExperimentConfig::RevivalRun { output_prefix, .. }
            | ExperimentConfig::PowerSweep { output_prefix, .. }
            | ExperimentConfig::CalibrationPlan { output_prefix, .. }
            | ExperimentConfig::PulseOverlap { output_prefix, .. } => output_prefix,
        }
    }

    /// Kind-specific validation; runs before any computation.
    pub fn validate(&self) -> Result<()> {
        let prefix = self.output_prefix();
        if prefix.is_empty() || prefix.contains(['/', '\\']) {
            return Err(CombError::Config(
                "output_prefix must be a non-empty file stem without path separators".into(),
            ));
        }
        match self {
            ExperimentConfig::SpectrumMap {
                cavity,
                comb,
                freq_grid,
                spacing_grid,
                ..
            } => {
                cavity.validate()?;
                comb.to_ensemble()?.validate()?;
                freq_grid.validate()?;
                spacing_grid.validate()
            }
            ExperimentConfig::TimeMap {
                cavity,
                comb,
                pulse,
                grid,
                spacings,
                ..
            } => {
                cavity.validate()?;
                pulse.validate()?;
                grid.validate()?;
                if spacings.is_empty() {
                    return Err(CombError::Config("time_map needs ≥ 1 spacing".into()));
                }
                for &dw in spacings {
                    comb.with_spacing(dw)?.validate()?;
                }
                Ok(())
            }
            ExperimentConfig::RevivalRun {
                cavity,
                comb,
                pulse,
                grid,
                ..
            } => {
                cavity.validate()?;
                comb.to_ensemble()?.validate()?;
                pulse.validate()?;
                grid.validate()
            }
            ExperimentConfig::PowerSweep {
                cavity,
                comb,
                grid,
                omega_grid,
                etas,
                ..
            } => {
                cavity.validate()?;
                comb.to_ensemble()?.validate()?;
                grid.validate()?;
                omega_grid.validate()?;
                if etas.is_empty() || etas.iter().any(|&e| !(e >= 0.0)) {
                    return Err(CombError::Config("etas must be non-empty and ≥ 0".into()));
                }
                Ok(())
            }
            ExperimentConfig::CalibrationPlan {
                crosstalk, targets, ..
            } => {
                crosstalk.validate()?;
                if targets.is_empty() {
                    return Err(CombError::Config("calibration_plan needs ≥ 1 target".into()));
                }
                Ok(())
            }
            ExperimentConfig::PulseOverlap {
                cavity,
                comb,
                pulse,
                freq_grid,
                ..
            } => {
                cavity.validate()?;
                comb.to_ensemble()?.validate()?;
                pulse.validate()?;
                freq_grid.validate()
            }
        }
    }
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| CombError::Config(format!("bad config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
