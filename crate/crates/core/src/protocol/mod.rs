//! Cascaded-channel estimation from pilot blocks.
//!
//! [`stages`] holds the three-stage coupling-aware estimator; [`baselines`]
//! the coupling-unaware, Direct-OMP and SBL comparisons. This module carries
//! the shared pieces: equivalent measurements, Kronecker sensing matrices,
//! dictionaries and the NMSE metric.

pub mod baselines;
pub mod stages;

use log::warn;

use crate::array::{SpatialAngle, UpaGeometry};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, CMat, C64};
use crate::sparse::{grid_dictionary, grid_dictionary_1d, GridDictionary};

pub use baselines::{direct_omp_bytes, direct_omp_estimate, mc_unaware_estimate, sbl_estimate, DirectOmpOptions};
pub use stages::{
    grouped_omp,
    estimate_reference_column, estimate_remaining_columns, extract_common_aod, extract_ris_aoa,
    stage3_estimate, three_stage_estimate, ReferenceColumn, StageInput, StageOptions, StageTimings,
    StopRule, ThreeStageOutput,
};

/// Grid dictionaries used on the RIS and user sides.
#[derive(Debug, Clone)]
pub struct Dictionaries {
    /// RIS-side (common AoD) dictionary `Ã_M`.
    pub ris: GridDictionary,
    /// User-side dictionary `Ã_{M,k}`.
    pub user: GridDictionary,
    /// Horizontal user-side axis dictionary `Ã_{M_h}` and its frequencies.
    pub user_h: (CMat, Vec<f64>),
    /// Vertical user-side axis dictionary `Ã_{M_v}` and its frequencies.
    pub user_v: (CMat, Vec<f64>),
}

impl Dictionaries {
    pub fn new(ris_geom: &UpaGeometry, ris_res: (usize, usize), user_res: (usize, usize)) -> Self {
        let d = ris_geom.max_frequency();
        Self {
            ris: grid_dictionary(ris_geom, ris_res.0, ris_res.1),
            user: grid_dictionary(ris_geom, user_res.0, user_res.1),
            user_h: grid_dictionary_1d(ris_geom.count_h, user_res.1, d),
            user_v: grid_dictionary_1d(ris_geom.count_v, user_res.0, d),
        }
    }
}

/// Per-user estimate of the cascaded channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedEstimate {
    pub user_index: usize,
    /// `Â_N`, `N × L̂`.
    pub bs_steering: CMat,
    /// `[ĥ_RIS,1 … ĥ_RIS,L̂]`; `M² × L̂` for the coupled model, `M × L̂` otherwise.
    pub ris_columns: CMat,
    /// `Â_{M,k}`, `M × Ĵ_k` (empty for estimators that do not produce it).
    pub user_ris_steering: CMat,
    pub user_angles: Vec<SpatialAngle>,
    /// `Â_M`, only for the typical user.
    pub common_aod_steering: Option<CMat>,
    /// `Ĝ_k = Â_N [ĥ_RIS]^H`.
    pub cascaded: CMat,
}

impl CascadedEstimate {
    pub fn assemble(
        user_index: usize,
        bs_steering: CMat,
        ris_columns: CMat,
        user_ris_steering: CMat,
        user_angles: Vec<SpatialAngle>,
        common_aod_steering: Option<CMat>,
    ) -> Self {
        let cascaded = &bs_steering * ris_columns.adjoint();
        Self {
            user_index,
            bs_steering,
            ris_columns,
            user_ris_steering,
            user_angles,
            common_aod_steering,
            cascaded,
        }
    }

    /// A zero channel of the given shape.
    pub fn zero(user_index: usize, n: usize, cols: usize) -> Self {
        Self::assemble(user_index, CMat::zeros(n, 0), CMat::zeros(cols, 0), CMat::zeros(0, 0), Vec::new(), None)
    }

    /// Predicted noise-free pilots `√p·Ĝ·Θ`.
    pub fn predict(&self, training: &CMat, power_w: f64) -> CMat {
        &self.cascaded * training * C64::new(power_w.sqrt(), 0.0)
    }
}

/// `Y̆ = (Â_N^H Y / (N√p))^H`, shape `τ × L̂`.
pub fn equivalent_measurement(block: &CMat, bs_steering: &CMat, power_w: f64) -> Result<CMat> {
    if bs_steering.nrows() != block.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "steering matrix has {} rows, block has {}",
            bs_steering.nrows(),
            block.nrows()
        )));
    }
    let scale = 1.0 / (block.nrows() as f64 * power_w.sqrt());
    Ok((bs_steering.adjoint() * block).adjoint() * C64::new(scale, 0.0))
}

/// Column with the largest energy; ties go to the lowest index.
pub fn select_reference(eq: &CMat) -> usize {
    column_order(eq)[0]
}

/// Column indices sorted by decreasing energy, ties by index.
pub fn column_order(eq: &CMat) -> Vec<usize> {
    let energy: Vec<f64> = eq.column_iter().map(|c| c.norm_squared()).collect();
    let mut order: Vec<usize> = (0..eq.ncols()).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    order
}

/// `Θ_mc^H (U^* ⊗ R)`, a `τ × (u·r)` sensing matrix.
///
/// Column `u·r + g` is computed as `conj((R^H B_t U)[g, u])` per slot, which
/// avoids forming the Kronecker product.
pub fn lifted_sensing(responses: &[CMat], user_atoms: &CMat, ris_atoms: &CMat) -> CMat {
    let nu = user_atoms.ncols();
    let nr = ris_atoms.ncols();
    let mut out = CMat::zeros(responses.len(), nu * nr);
    let rh = ris_atoms.adjoint();
    for (t, b) in responses.iter().enumerate() {
        let p = &rh * b * user_atoms;
        for u in 0..nu {
            for g in 0..nr {
                out[(t, u * nr + g)] = p[(g, u)].conj();
            }
        }
    }
    out
}

/// `(U^* ⊗ R)·b` for a coefficient vector over the Kronecker atoms.
pub fn kron_synthesis(user_atoms: &CMat, ris_atoms: &CMat, support: &[usize], coefficients: &[C64]) -> crate::linalg::CVec {
    let m_u = user_atoms.nrows();
    let m_r = ris_atoms.nrows();
    let nr = ris_atoms.ncols();
    let mut out = crate::linalg::CVec::zeros(m_u * m_r);
    for (&idx, &c) in support.iter().zip(coefficients) {
        let (u, g) = (idx / nr, idx % nr);
        for j in 0..m_u {
            let x = user_atoms[(j, u)].conj() * c;
            for i in 0..m_r {
                out[j * m_r + i] += x * ris_atoms[(i, g)];
            }
        }
    }
    out
}

/// Residual-energy fraction at which OMP stops, from the expected noise level.
///
/// `noise_energy` is the expected noise energy in the measurement; the rule
/// is `max(1e-6, 3·noise/‖y‖²)`, capped below one so at least one atom can be
/// tried.
pub fn stop_fraction(noise_energy: f64, measurement_energy: f64) -> f64 {
    if measurement_energy <= 0.0 {
        return 1e-6;
    }
    (3.0 * noise_energy / measurement_energy).clamp(1e-6, 0.9)
}

/// Lower bound `J·⌈log2(L̂·D_k)⌉` on the per-user pilot length.
pub fn pilot_bound(paths_j: usize, paths_l: usize, user_atoms: usize) -> usize {
    let n = (paths_l * user_atoms).max(2) as f64;
    paths_j * n.log2().ceil() as usize
}

/// Warns when `τ` falls below [`pilot_bound`]; returns whether it is sufficient.
pub fn check_pilot_length(user: usize, tau: usize, paths_j: usize, paths_l: usize, user_atoms: usize) -> bool {
    let bound = pilot_bound(paths_j, paths_l, user_atoms);
    if tau < bound {
        warn!("user {user}: pilot length {tau} is below the sparse-recovery bound {bound}");
        false
    } else {
        true
    }
}

/// `Σ‖Ŷ_k − Ȳ_k‖² / Σ‖Ȳ_k‖²`.
pub fn nmse(predictions: &[CMat], truths: &[CMat]) -> f64 {
    let num: f64 = predictions.iter().zip(truths).map(|(p, t)| frob_sq(&(p - t))).sum();
    let den: f64 = truths.iter().map(frob_sq).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}
