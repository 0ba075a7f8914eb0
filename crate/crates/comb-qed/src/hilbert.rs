//! Operators on the truncated (Fock ⊗ N-qubit) Hilbert space, the
//! Tavis–Cummings and drive Hamiltonians, and dressed-state eigenvalues.
//!
//! Basis ordering: index = n·2^N + q, where n is the photon number and bit k
//! of q marks qubit k excited. Hamiltonians are returned in rad/ns.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CombError, Result};
use crate::model::{CavityParams, EnsembleSpec, ANG};

/// Eigenvector cavity weight below which a dressed state is flagged dark.
pub const DARK_WEIGHT_THRESHOLD: f64 = 1e-6;

/// Truncated Hilbert-space geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertConfig {
    pub n_qubits: usize,
    pub fock_max: usize,
}

impl HilbertConfig {
    pub fn new(n_qubits: usize, fock_max: usize) -> Result<Self> {
        let cfg = HilbertConfig { n_qubits, fock_max };
        if cfg.dim() < 2 {
            return Err(CombError::validation("Hilbert dimension must be ≥ 2"));
        }
        Ok(cfg)
    }

    /// Total dimension 2^N · (n_max + 1).
    pub fn dim(&self) -> usize {
        (1usize << self.n_qubits) * (self.fock_max + 1)
    }
}

/// Dense complex operator together with a Hermiticity marker.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<Complex64>,
    pub hermitian: bool,
}

impl OperatorMatrix {
    /// Wrap a matrix; if `hermitian` is claimed, it is verified to
    /// max|A − A†| ≤ 1e-12 · max|A|.
    pub fn new(matrix: DMatrix<Complex64>, hermitian: bool) -> Result<Self> {
        let op = OperatorMatrix { matrix, hermitian };
        if hermitian {
            let dev = op.hermiticity_deviation();
            let scale = op.max_abs().max(1e-300);
            if dev > 1e-12 * scale {
                return Err(CombError::validation(format!(
                    "operator flagged hermitian but max|A − A†| = {dev:.3e}"
                )));
            }
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Cavity annihilation operator a, tensored with qubit identities.
pub fn annihilation(config: HilbertConfig) -> OperatorMatrix {
    let dim = config.dim();
    let nq = 1usize << config.n_qubits;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..=config.fock_max {
        let amp = Complex64::new((n as f64).sqrt(), 0.0);
        for q in 0..nq {
            m[((n - 1) * nq + q, n * nq + q)] = amp;
        }
    }
    OperatorMatrix {
        matrix: m,
        hermitian: false,
    }
}

/// Lowering operator σ_k^− on qubit slot k, identities elsewhere.
pub fn qubit_lowering(config: HilbertConfig, k: usize) -> Result<OperatorMatrix> {
    if k >= config.n_qubits {
        return Err(CombError::IndexOutOfRange {
            index: k,
            len: config.n_qubits,
        });
    }
    let dim = config.dim();
    let nq = 1usize << config.n_qubits;
    let bit = 1usize << k;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..=config.fock_max {
        for q in 0..nq {
            if q & bit != 0 {
                m[(n * nq + (q & !bit), n * nq + q)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    Ok(OperatorMatrix {
        matrix: m,
        hermitian: false,
    })
}

/// Undriven Tavis–Cummings Hamiltonian in the frame rotating at `frame` MHz,
/// in rad/ns:
/// H = 2π[(ω_c − f)a†a + Σ_k ((ω_k − f)/2)σ_k^z + Σ_k g_k(σ_k^− a† + σ_k^+ a)].
pub fn tc_hamiltonian(
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
    config: HilbertConfig,
    frame: f64,
) -> Result<OperatorMatrix> {
    if ensemble.len() != config.n_qubits {
        return Err(CombError::DimensionMismatch {
            expected: config.n_qubits,
            got: ensemble.len(),
            context: "ensemble size vs HilbertConfig.n_qubits",
        });
    }
    ensemble.validate()?;
    cavity.validate()?;
    let dim = config.dim();
    let nq = 1usize << config.n_qubits;
    let mut m: DMatrix<Complex64> = DMatrix::zeros(dim, dim);

    // diagonal part: photons + σ_z terms
    for n in 0..=config.fock_max {
        for q in 0..nq {
            let mut e = (cavity.omega_c - frame) * n as f64;
            for (k, qb) in ensemble.qubits.iter().enumerate() {
                let sz = if q & (1 << k) != 0 { 0.5 } else { -0.5 };
                e += (qb.omega - frame) * sz;
            }
            m[(n * nq + q, n * nq + q)] = Complex64::new(ANG * e, 0.0);
        }
    }

    // exchange coupling g_k (σ_k^− a† + σ_k^+ a)
    for (k, qb) in ensemble.qubits.iter().enumerate() {
        let bit = 1usize << k;
        let g = Complex64::new(ANG * qb.g, 0.0);
        for n in 1..=config.fock_max {
            let amp = g * (n as f64).sqrt();
            for q in 0..nq {
                if q & bit != 0 {
                    // σ_k^+ a : |n, …e_k…⟩ ← |n+? ; here ⟨n-1? mapping:
                    // a lowers photons, σ^+ raises qubit:
                    // ⟨n−1, q | σ^+ a | n, q\bit⟩ = √n
                    let row = (n - 1) * nq + q;
                    let col = n * nq + (q & !bit);
                    m[(row, col)] += amp;
                    m[(col, row)] += amp; // h.c.
                }
            }
        }
    }
    OperatorMatrix::new(m, true)
}

/// The Hermitian drive operator i(a† − a); the full drive term is
/// H_drive(t) = 2π·η(t)·κ_load · i(a† − a) in the frame rotating at ω_d.
pub fn drive_operator(config: HilbertConfig) -> OperatorMatrix {
    let a = annihilation(config).matrix;
    let m = (a.adjoint() - a).map(|z| Complex64::new(0.0, 1.0) * z);
    OperatorMatrix {
        matrix: m,
        hermitian: true,
    }
}

/// Single-excitation Hamiltonian in MHz on the basis
/// {|1 photon, all down⟩, |0 photons, qubit k up⟩}: diagonal {ω_c, ω_k},
/// off-diagonal H[0][k] = g_k. Eigenvalues are the dressed-state frequencies.
pub fn single_excitation_hamiltonian(
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
) -> DMatrix<f64> {
    let n = ensemble.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = cavity.omega_c;
    for (k, qb) in ensemble.qubits.iter().enumerate() {
        m[(k + 1, k + 1)] = qb.omega;
        m[(0, k + 1)] = qb.g;
        m[(k + 1, 0)] = qb.g;
    }
    m
}

/// One dressed state of the single-excitation problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedState {
    /// Eigenfrequency E_i/2π in MHz.
    pub freq: f64,
    /// |⟨1 photon|ψ⟩|², the transmission visibility of the state.
    pub cavity_weight: f64,
    /// False when cavity_weight is numerically zero (dark state).
    pub bright: bool,
}

/// Dressed-state table over a comb-spacing sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedTable {
    pub spacings: Vec<f64>,
    /// One row per spacing, states sorted by ascending frequency.
    pub rows: Vec<Vec<DressedState>>,
}

/// Diagonalize the single-excitation Hamiltonian; states sorted ascending.
pub fn single_excitation_modes(
    ensemble: &EnsembleSpec,
    cavity: &CavityParams,
) -> Vec<DressedState> {
    let h = single_excitation_hamiltonian(ensemble, cavity);
    let eig = SymmetricEigen::new(h);
    let mut states: Vec<DressedState> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let w = eig.eigenvectors[(0, i)].powi(2);
            DressedState {
                freq: e,
                cavity_weight: w,
                bright: w > DARK_WEIGHT_THRESHOLD,
            }
        })
        .collect();
    states.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    states
}

/// Sweep the comb spacing, rebuilding the comb around `center` for each Δω.
pub fn dressed_sweep(
    center: f64,
    couplings: &[f64],
    gammas: &[f64],
    cavity: &CavityParams,
    spacings: &[f64],
) -> Result<DressedTable> {
    if spacings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CombError::validation("spacing grid must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(spacings.len());
    for &dw in spacings {
        let ens = crate::model::build_comb(center, dw, couplings, gammas)?;
        rows.push(single_excitation_modes(&ens, cavity));
    }
    Ok(DressedTable {
        spacings: spacings.to_vec(),
        rows,
    })
}
