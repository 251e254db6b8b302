//! Stages II and III: per-column sparse recovery on the lifted model.

use std::time::{Duration, Instant};

use crate::array::{steering_matrix, SpatialAngle, UpaGeometry};
use crate::doa::SteeringEstimate;
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, lstsq, permutations, project_onto, CMat, CVec};
use crate::sparse::{omp, omp_joint, OmpStop, SparseSolution};

use super::{
    check_pilot_length, column_order, equivalent_measurement, kron_synthesis, lifted_sensing, stop_fraction,
    CascadedEstimate, Dictionaries,
};

/// Noise-aware OMP stopping rule for one equivalent measurement column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Expected noise energy of one column.
    pub noise_energy: f64,
    pub max_sparsity: usize,
}

impl StopRule {
    /// Rule for columns of `Y̆`: noise energy `τ·σ1²/(N·p)`.
    pub fn for_equivalent(tau: usize, bs_elements: usize, noise_bs_w: f64, power_w: f64, max_sparsity: usize) -> Self {
        Self {
            noise_energy: tau as f64 * noise_bs_w / (bs_elements as f64 * power_w),
            max_sparsity,
        }
    }

    pub fn stop_for(&self, y: &CVec) -> OmpStop {
        OmpStop::new(stop_fraction(self.noise_energy, y.norm_squared()), self.max_sparsity)
    }
}

/// Recovered reference column of `H_RIS`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceColumn {
    /// Index `r` within the columns of `Y̆`.
    pub column: usize,
    /// `ĥ_RIS,r`, length `M²`.
    pub h: CVec,
    pub solution: SparseSolution,
    /// RIS-side atom of the strongest coefficient.
    pub ris_atom: usize,
}

fn strongest(solution: &SparseSolution) -> Option<usize> {
    (0..solution.support.len())
        .max_by(|&a, &b| {
            solution.coefficients[(a, 0)]
                .norm()
                .total_cmp(&solution.coefficients[(b, 0)].norm())
                .then(b.cmp(&a))
        })
        .map(|i| solution.support[i])
}

/// OMP restricted to the atoms that share one RIS-side atom, keeping the RIS
/// atom with the smallest residual.
///
/// Each column of `H_RIS` leaves the RIS along a single direction, so only
/// user-side atoms vary within its support.
pub fn grouped_omp(sensing: &CMat, user_count: usize, ris_count: usize, y: &CVec, rule: StopRule) -> SparseSolution {
    let stop = rule.stop_for(y);
    let mut best: Option<(usize, SparseSolution)> = None;
    for g in 0..ris_count {
        let sub = CMat::from_fn(sensing.nrows(), user_count, |t, u| sensing[(t, u * ris_count + g)]);
        let sol = omp(&sub, y, stop);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                sol.residual_norm < b.residual_norm * (1.0 - 1e-9)
                    || (sol.residual_norm <= b.residual_norm && sol.support.len() < b.support.len())
            }
        };
        if better {
            best = Some((g, sol));
        }
    }
    match best {
        Some((g, mut sol)) => {
            for a in &mut sol.support {
                *a = *a * ris_count + g;
            }
            sol
        }
        None => SparseSolution::empty(1, y.norm()),
    }
}

/// Sparse recovery of the strongest column of `Y̆` on `sensing = Θ^H(U^* ⊗ R)`.
///
/// Columns are tried in decreasing energy order until one yields a non-empty
/// support.
pub fn estimate_reference_column(
    eq: &CMat,
    sensing: &CMat,
    user_atoms: &CMat,
    ris_atoms: &CMat,
    rule: StopRule,
) -> Result<ReferenceColumn> {
    let nr = ris_atoms.ncols();
    for r in column_order(eq) {
        let y = eq.column(r).into_owned();
        let solution = grouped_omp(sensing, user_atoms.ncols(), nr, &y, rule);
        if let Some(best) = strongest(&solution) {
            let h = kron_synthesis(user_atoms, ris_atoms, &solution.support, &solution.coefficient_vec());
            return Ok(ReferenceColumn {
                column: r,
                h,
                ris_atom: best % nr,
                solution,
            });
        }
    }
    Err(Error::MissingSupport { column: 0 })
}

/// `Ĥ[m_u, m] = ĥ[m_u·M + m]`.
fn as_matrix(h: &CVec, m: usize) -> CMat {
    CMat::from_fn(m, m, |mu, mm| h[mu * m + mm])
}

fn axis_frequencies(data: &CMat, dict: &(CMat, Vec<f64>), count: usize, paths: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    let atoms = dict.0.map(|z| z.conj());
    let sol = omp_joint(&atoms, data, OmpStop::new(1e-6, paths.clamp(1, count - 1)));
    swap_refine(&atoms, data, sol.support).iter().map(|&g| dict.1[g]).collect()
}

/// Single-atom exchanges on a greedy support while the least-squares
/// residual keeps dropping. Neighbouring grid atoms on a short axis are
/// nearly collinear, and OMP alone often settles between two true ones.
fn swap_refine(atoms: &CMat, data: &CMat, mut support: Vec<usize>) -> Vec<usize> {
    let residual = |sup: &[usize]| {
        let basis = CMat::from_fn(atoms.nrows(), sup.len(), |r, c| atoms[(r, sup[c])]);
        frob_sq(&(data - &basis * lstsq(&basis, data)))
    };
    let mut best = residual(&support);
    let tol = 1e-12 * frob_sq(data);
    let mut improved = true;
    while improved && best > tol {
        improved = false;
        for slot in 0..support.len() {
            for cand in 0..atoms.ncols() {
                if support.contains(&cand) {
                    continue;
                }
                let mut trial = support.clone();
                trial[slot] = cand;
                let r = residual(&trial);
                if r < best * (1.0 - 1e-9) {
                    best = r;
                    support = trial;
                    improved = true;
                }
            }
        }
    }
    support
}

/// All maps from the larger frequency set onto the smaller one (or
/// permutations when both have the same size), as `(z, y)` index pairs.
fn candidate_pairings(nz: usize, ny: usize) -> Vec<Vec<(usize, usize)>> {
    if nz == ny {
        return permutations(nz)
            .into_iter()
            .map(|p| p.into_iter().enumerate().collect())
            .collect();
    }
    let (big, small) = (nz.max(ny), nz.min(ny));
    let total = small.pow(big as u32);
    (0..total)
        .map(|mut code| {
            (0..big)
                .map(|i| {
                    let j = code % small;
                    code /= small;
                    if nz > ny {
                        (i, j)
                    } else {
                        (j, i)
                    }
                })
                .collect()
        })
        .collect()
}

/// User-side angle extraction from the `M²` entries of `ĥ_RIS,r`.
///
/// The vector is rearranged into one matrix per RIS axis whose rows follow
/// that axis of the user-side steering vector; a joint OMP on the conjugated
/// 1-D dictionary gives the per-axis frequencies, and the pairing that keeps
/// most energy of `Ĥ` in the span of `conj(a(pair))` is returned. Each axis
/// is treated as `paths`-sparse.
pub fn extract_ris_aoa(h: &CVec, geom: &UpaGeometry, dicts: &Dictionaries, paths: usize) -> Result<(CMat, Vec<SpatialAngle>)> {
    let m = geom.len();
    let (mh, mv) = (geom.count_h, geom.count_v);
    if h.len() != m * m {
        return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", m * m, h.len())));
    }
    let y_h = CMat::from_fn(mh, mv * m, |r, c| {
        let (v, mm) = (c / m, c % m);
        h[(v * mh + r) * m + mm]
    });
    let y_v = CMat::from_fn(mv, mh * m, |r, c| h[r * m * mh + c]);
    let fy = axis_frequencies(&y_h, &dicts.user_h, mh, paths);
    let fz = axis_frequencies(&y_v, &dicts.user_v, mv, paths);
    if fy.is_empty() || fz.is_empty() {
        return Err(Error::MissingSupport { column: 0 });
    }
    let hmat = as_matrix(h, m);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for pairing in candidate_pairings(fz.len(), fy.len()) {
        let angles: Vec<SpatialAngle> = pairing.iter().map(|&(i, j)| SpatialAngle::new(fz[i], fy[j])).collect();
        let a = steering_matrix(geom, &angles).map(|z| z.conj());
        let s = frob_sq(&project_onto(&a, &hmat));
        if s > best.0 {
            best = (s, angles);
        }
    }
    let mut angles = best.1;
    angles.sort_by(|a, b| a.z_freq.total_cmp(&b.z_freq).then(a.y_freq.total_cmp(&b.y_freq)));
    angles.dedup();
    Ok((steering_matrix(geom, &angles), angles))
}

/// Sparse recovery of every column except `skip` on a shared sensing matrix.
///
/// Returns `(ĥ, strongest RIS atom)` per column; `None` at `skip`, and a zero
/// vector without atom for columns whose support comes back empty. The
/// stages pass no `skip`, so the reference column is refitted on the reduced
/// dictionary as well.
pub fn estimate_remaining_columns(
    eq: &CMat,
    skip: Option<usize>,
    sensing: &CMat,
    user_atoms: &CMat,
    ris_atoms: &CMat,
    rule: StopRule,
) -> Vec<Option<(CVec, Option<usize>)>> {
    let nr = ris_atoms.ncols();
    (0..eq.ncols())
        .map(|l| {
            if Some(l) == skip {
                return None;
            }
            let y = eq.column(l).into_owned();
            let sol = grouped_omp(sensing, user_atoms.ncols(), nr, &y, rule);
            let h = kron_synthesis(user_atoms, ris_atoms, &sol.support, &sol.coefficient_vec());
            Some((h, strongest(&sol).map(|a| a % nr)))
        })
        .collect()
}

/// `Â_M` from the RIS atom picked in each column.
pub fn extract_common_aod(atoms: &[Option<usize>], ris_dictionary: &CMat) -> Result<CMat> {
    let mut out = CMat::zeros(ris_dictionary.nrows(), atoms.len());
    for (l, a) in atoms.iter().enumerate() {
        let g = a.ok_or(Error::MissingSupport { column: l })?;
        out.set_column(l, &ris_dictionary.column(g));
    }
    Ok(out)
}

/// Per-user inputs of the estimator.
#[derive(Debug, Clone, Copy)]
pub struct StageInput<'a> {
    pub user_index: usize,
    /// Received pilots, `N × τ_k`.
    pub block: &'a CMat,
    /// `B_t` for every pilot slot of this user.
    pub responses: &'a [CMat],
}

/// Settings shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOptions {
    pub power_w: f64,
    pub noise_bs_w: f64,
    /// Configured number of user-side paths; OMP is capped at `J + 2`.
    pub paths_j: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    /// Sensing-matrix construction plus OMP for the typical user's reference column.
    pub stage2_reference: Duration,
    /// Complete Stage III per non-typical user.
    pub stage3_per_user: Vec<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeStageOutput {
    pub estimates: Vec<CascadedEstimate>,
    pub common_aod: CMat,
    pub timings: StageTimings,
}

fn assemble_columns(reference: &ReferenceColumn, rest: &[Option<(CVec, Option<usize>)>], m2: usize) -> CMat {
    let mut cols = CMat::zeros(m2, rest.len());
    for (l, r) in rest.iter().enumerate() {
        match r {
            None => cols.set_column(l, &reference.h),
            Some((h, _)) => cols.set_column(l, h),
        }
    }
    cols
}

/// Stage II for the typical user (first entry of `users`) followed by Stage III
/// for every other user.
pub fn three_stage_estimate(
    stage1: &SteeringEstimate,
    users: &[StageInput<'_>],
    ris_geom: &UpaGeometry,
    dicts: &Dictionaries,
    options: StageOptions,
) -> Result<ThreeStageOutput> {
    let Some((first, others)) = users.split_first() else {
        return Err(Error::ShapeMismatch("no users".into()));
    };
    let a_n = &stage1.steering_matrix;
    let cap = options.paths_j + 2;
    let m2 = ris_geom.len() * ris_geom.len();
    let eq = equivalent_measurement(first.block, a_n, options.power_w)?;
    let rule = StopRule::for_equivalent(eq.nrows(), a_n.nrows(), options.noise_bs_w, options.power_w, cap);

    let started = Instant::now();
    let sensing = lifted_sensing(first.responses, &dicts.user.atoms, &dicts.ris.atoms);
    let reference = estimate_reference_column(&eq, &sensing, &dicts.user.atoms, &dicts.ris.atoms, rule)?;
    let stage2_reference = started.elapsed();

    let (user_steering, user_angles) = extract_ris_aoa(&reference.h, ris_geom, dicts, options.paths_j)?;
    let sensing = lifted_sensing(first.responses, &user_steering, &dicts.ris.atoms);
    let rest = estimate_remaining_columns(&eq, None, &sensing, &user_steering, &dicts.ris.atoms, rule);
    let atoms: Vec<Option<usize>> = rest
        .iter()
        .enumerate()
        .map(|(l, r)| match r {
            Some((_, Some(a))) => Some(*a),
            _ if l == reference.column => Some(reference.ris_atom),
            _ => None,
        })
        .collect();
    let common_aod = extract_common_aod(&atoms, &dicts.ris.atoms)?;
    let cols = assemble_columns(&reference, &rest, m2);
    let mut estimates = vec![CascadedEstimate::assemble(
        first.user_index,
        a_n.clone(),
        cols,
        user_steering,
        user_angles,
        Some(common_aod.clone()),
    )];

    let mut stage3_per_user = Vec::with_capacity(others.len());
    for user in others {
        let started = Instant::now();
        let est = stage3_estimate(user, a_n, &common_aod, ris_geom, dicts, options)?;
        stage3_per_user.push(started.elapsed());
        estimates.push(est);
    }
    Ok(ThreeStageOutput {
        estimates,
        common_aod,
        timings: StageTimings {
            stage2_reference,
            stage3_per_user,
        },
    })
}

/// Stage III for one user, reusing the BS angles and the common AoD.
pub fn stage3_estimate(
    user: &StageInput<'_>,
    bs_steering: &CMat,
    common_aod: &CMat,
    ris_geom: &UpaGeometry,
    dicts: &Dictionaries,
    options: StageOptions,
) -> Result<CascadedEstimate> {
    let cap = options.paths_j + 2;
    let m2 = ris_geom.len() * ris_geom.len();
    let eq = equivalent_measurement(user.block, bs_steering, options.power_w)?;
    check_pilot_length(user.user_index, eq.nrows(), options.paths_j, common_aod.ncols(), dicts.user.len());
    let rule = StopRule::for_equivalent(eq.nrows(), bs_steering.nrows(), options.noise_bs_w, options.power_w, cap);
    let sensing = lifted_sensing(user.responses, &dicts.user.atoms, common_aod);
    let reference = estimate_reference_column(&eq, &sensing, &dicts.user.atoms, common_aod, rule)?;
    let (user_steering, user_angles) = extract_ris_aoa(&reference.h, ris_geom, dicts, options.paths_j)?;
    let sensing = lifted_sensing(user.responses, &user_steering, common_aod);
    let rest = estimate_remaining_columns(&eq, None, &sensing, &user_steering, common_aod, rule);
    let cols = assemble_columns(&reference, &rest, m2);
    Ok(CascadedEstimate::assemble(
        user.user_index,
        bs_steering.clone(),
        cols,
        user_steering,
        user_angles,
        None,
    ))
}
