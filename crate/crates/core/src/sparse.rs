//! Grid dictionaries, orthogonal matching pursuit and sparse Bayesian learning.

use crate::array::{steering_1d, SpatialAngle, UpaGeometry};
use crate::linalg::{frob_sq, kron_vec, lstsq, CMat, CVec, C64};

/// Overcomplete steering dictionary on a uniform frequency grid.
///
/// Column `g_v·D_h + g_h` is `a_v(f_{g_v}) ⊗ a_h(f_{g_h})` with
/// `f_g = (−1 + 2g/D)·d/λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDictionary {
    pub atoms: CMat,
    pub grid_freqs: Vec<SpatialAngle>,
    pub resolution: (usize, usize),
}

/// Grid point `g` of a `points`-point grid over `[-d, d)`.
pub fn grid_frequency(g: usize, points: usize, max_freq: f64) -> f64 {
    (-1.0 + 2.0 * g as f64 / points as f64) * max_freq
}

/// One-dimensional grid dictionary and its frequencies.
pub fn grid_dictionary_1d(n: usize, points: usize, max_freq: f64) -> (CMat, Vec<f64>) {
    let freqs: Vec<f64> = (0..points).map(|g| grid_frequency(g, points, max_freq)).collect();
    let mut atoms = CMat::zeros(n, points);
    for (g, &f) in freqs.iter().enumerate() {
        atoms.set_column(g, &steering_1d(n, f));
    }
    (atoms, freqs)
}

pub fn grid_dictionary(geom: &UpaGeometry, d_v: usize, d_h: usize) -> GridDictionary {
    let d = geom.max_frequency();
    let (av, fv) = grid_dictionary_1d(geom.count_v, d_v, d);
    let (ah, fh) = grid_dictionary_1d(geom.count_h, d_h, d);
    let mut atoms = CMat::zeros(geom.len(), d_v * d_h);
    let mut grid_freqs = Vec::with_capacity(d_v * d_h);
    for gv in 0..d_v {
        for gh in 0..d_h {
            let col = kron_vec(&av.column(gv).into_owned(), &ah.column(gh).into_owned());
            atoms.set_column(gv * d_h + gh, &col);
            grid_freqs.push(SpatialAngle::new(fv[gv], fh[gh]));
        }
    }
    GridDictionary {
        atoms,
        grid_freqs,
        resolution: (d_v, d_h),
    }
}

impl GridDictionary {
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }
}

/// A linear map whose columns are the atoms searched by OMP.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn atoms(&self) -> usize;
    /// Euclidean norm of every atom.
    fn atom_norms(&self) -> Vec<f64>;
    /// `D^H · r` for every column of `r` (`atoms × r.ncols()`).
    fn correlate(&self, residual: &CMat) -> CMat;
    /// Explicit column `index`.
    fn atom(&self, index: usize) -> CVec;
}

impl SensingOperator for CMat {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn atoms(&self) -> usize {
        self.ncols()
    }

    fn atom_norms(&self) -> Vec<f64> {
        self.column_iter().map(|c| c.norm()).collect()
    }

    fn correlate(&self, residual: &CMat) -> CMat {
        self.adjoint() * residual
    }

    fn atom(&self, index: usize) -> CVec {
        self.column(index).into_owned()
    }
}

/// Stopping rule: residual energy fraction or sparsity cap, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpStop {
    /// Stop once `‖r‖² ≤ residual_threshold · ‖y‖²`.
    pub residual_threshold: f64,
    pub max_sparsity: usize,
}

impl OmpStop {
    pub fn new(residual_threshold: f64, max_sparsity: usize) -> Self {
        Self {
            residual_threshold,
            max_sparsity,
        }
    }
}

/// Result of a sparse solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// Selected atoms, in selection order (OMP) or ascending (SBL).
    pub support: Vec<usize>,
    /// One row per support atom, one column per measurement vector.
    pub coefficients: CMat,
    /// Final residual Frobenius norm.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after every iteration, starting with `‖y‖`.
    pub residual_trace: Vec<f64>,
    pub converged: bool,
}

impl SparseSolution {
    pub fn empty(cols: usize, norm: f64) -> Self {
        Self {
            support: Vec::new(),
            coefficients: CMat::zeros(0, cols),
            residual_norm: norm,
            iterations: 0,
            residual_trace: vec![norm],
            converged: true,
        }
    }

    /// Dense coefficient vector of length `atoms` for measurement column `col`.
    pub fn dense(&self, atoms: usize, col: usize) -> CVec {
        let mut out = CVec::zeros(atoms);
        for (i, &s) in self.support.iter().enumerate() {
            out[s] += self.coefficients[(i, col)];
        }
        out
    }

    /// Coefficients of the first measurement column in support order.
    pub fn coefficient_vec(&self) -> Vec<C64> {
        (0..self.support.len()).map(|i| self.coefficients[(i, 0)]).collect()
    }
}

/// OMP for a single measurement vector.
pub fn omp<D: SensingOperator + ?Sized>(dictionary: &D, measurement: &CVec, stop: OmpStop) -> SparseSolution {
    let y = CMat::from_column_slice(measurement.len(), 1, measurement.as_slice());
    omp_joint(dictionary, &y, stop)
}

/// Simultaneous OMP: every column of `measurements` shares one support.
///
/// Each iteration picks the unused atom with the largest normalised
/// correlation energy summed over columns (ties to the lowest index), refits
/// all coefficients by least squares on the support and updates the residual.
pub fn omp_joint<D: SensingOperator + ?Sized>(
    dictionary: &D,
    measurements: &CMat,
    stop: OmpStop,
) -> SparseSolution {
    let cols = measurements.ncols();
    let y_energy = frob_sq(measurements);
    if y_energy == 0.0 || stop.max_sparsity == 0 {
        return SparseSolution::empty(cols, y_energy.sqrt());
    }
    let norms = dictionary.atom_norms();
    let n_atoms = dictionary.atoms();
    let mut selected = vec![false; n_atoms];
    let mut support: Vec<usize> = Vec::new();
    let mut basis = CMat::zeros(dictionary.rows(), 0);
    let mut coef = CMat::zeros(0, cols);
    let mut residual = measurements.clone();
    let mut trace = vec![y_energy.sqrt()];
    let target = stop.residual_threshold * y_energy;
    let mut res_energy = y_energy;

    while res_energy > target && support.len() < stop.max_sparsity.min(n_atoms) {
        let corr = dictionary.correlate(&residual);
        let mut best = (0.0, usize::MAX);
        for a in 0..n_atoms {
            if selected[a] || norms[a] == 0.0 {
                continue;
            }
            let e: f64 = corr.row(a).iter().map(|z| z.norm_sqr()).sum::<f64>() / (norms[a] * norms[a]);
            if e > best.0 {
                best = (e, a);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let a = best.1;
        selected[a] = true;
        support.push(a);
        let k = basis.ncols();
        basis = basis.insert_column(k, C64::new(0.0, 0.0));
        basis.set_column(k, &dictionary.atom(a));
        coef = lstsq(&basis, measurements);
        residual = measurements - &basis * &coef;
        res_energy = frob_sq(&residual);
        trace.push(res_energy.sqrt());
    }
    SparseSolution {
        iterations: support.len(),
        support,
        coefficients: coef,
        residual_norm: res_energy.sqrt(),
        residual_trace: trace,
        converged: res_energy <= target,
    }
}

/// Largest normalised inner product between two distinct columns.
pub fn mutual_coherence(d: &CMat) -> f64 {
    let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    let gram = d.adjoint() * d;
    let mut mu: f64 = 0.0;
    for j in 0..d.ncols() {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].norm() / (norms[i] * norms[j]));
        }
    }
    mu.min(1.0)
}

/// Settings of the SBL solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SblOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Hyperparameters below `prune · max γ` are removed.
    pub prune: f64,
}

impl Default for SblOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-3,
            prune: 1e-8,
        }
    }
}

/// Expectation-maximisation sparse Bayesian learning.
///
/// Every atom carries a variance hyperparameter `γ_i`; the noise variance is
/// re-estimated jointly each iteration. The data and atoms are normalised
/// internally and the posterior mean is returned in the original scale on
/// the atoms that survive pruning.
pub fn sbl_recover(dictionary: &CMat, measurement: &CVec, options: SblOptions) -> SparseSolution {
    let m = dictionary.nrows();
    let y_norm = measurement.norm();
    if y_norm == 0.0 {
        return SparseSolution::empty(1, 0.0);
    }
    let norms: Vec<f64> = dictionary.column_iter().map(|c| c.norm()).collect();
    let mut active: Vec<usize> = (0..dictionary.ncols()).filter(|&i| norms[i] > 0.0).collect();
    let phi_all = CMat::from_fn(m, dictionary.ncols(), |r, c| {
        if norms[c] > 0.0 {
            dictionary[(r, c)] / norms[c]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let y = measurement / C64::new(y_norm, 0.0);
    let mut gamma: Vec<f64> = vec![1.0; dictionary.ncols()];
    let mut sigma2 = 0.1 / m as f64;
    let mut mu = CVec::zeros(0);
    let mut converged = false;
    let mut trace = vec![y_norm];
    let mut iterations = 0;

    for _ in 0..options.max_iter {
        iterations += 1;
        let phi = phi_all.select_columns(&active);
        let g = CVec::from_iterator(active.len(), active.iter().map(|&i| C64::new(gamma[i], 0.0)));
        let mut phi_g = phi.clone();
        for (j, mut col) in phi_g.column_iter_mut().enumerate() {
            col *= g[j];
        }
        let mut sy = &phi_g * phi.adjoint();
        for i in 0..m {
            sy[(i, i)] += C64::new(sigma2, 0.0);
        }
        let Some(sy_inv) = sy.try_inverse() else {
            break;
        };
        let w = &sy_inv * &y;
        mu = phi_g.adjoint() * &w;
        let sy_phi = &sy_inv * &phi;
        let old: Vec<f64> = active.iter().map(|&i| gamma[i]).collect();
        let mut trace_term = 0.0;
        for (j, &i) in active.iter().enumerate() {
            let q = phi.column(j).dotc(&sy_phi.column(j)).re;
            let sigma_ii = (gamma[i] - gamma[i] * gamma[i] * q).max(0.0);
            gamma[i] = mu[j].norm_sqr() + sigma_ii;
            trace_term += 1.0 - sigma_ii / old[j].max(f64::MIN_POSITIVE);
        }
        let resid = &y - &phi * &mu;
        trace.push(resid.norm() * y_norm);
        sigma2 = ((resid.norm_squared() + sigma2 * trace_term) / m as f64).max(1e-16);

        let change = active
            .iter()
            .zip(&old)
            .map(|(&i, o)| (gamma[i] - o).powi(2))
            .sum::<f64>()
            .sqrt()
            / old.iter().map(|o| o * o).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

        let gmax = active.iter().map(|&i| gamma[i]).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..active.len())
            .filter(|&j| gamma[active[j]] > options.prune * gmax)
            .collect();
        if keep.len() < active.len() {
            mu = CVec::from_iterator(keep.len(), keep.iter().map(|&j| mu[j]));
            active = keep.iter().map(|&j| active[j]).collect();
        }
        if change < options.tol {
            converged = true;
            break;
        }
    }
    // posterior mean in the caller's scale
    let coefficients = CMat::from_iterator(
        active.len(),
        1,
        active.iter().enumerate().map(|(j, &i)| mu[j] * (y_norm / norms[i])),
    );
    let recon = dictionary.select_columns(&active) * &coefficients;
    let residual_norm = (measurement - recon.column(0)).norm();
    SparseSolution {
        support: active,
        coefficients,
        residual_norm,
        iterations,
        residual_trace: trace,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn bernoulli(rng: &mut impl Rng, m: usize, n: usize) -> CMat {
        CMat::from_fn(m, n, |_, _| if rng.random_bool(0.5) { ONE } else { -ONE })
    }

    #[test]
    fn critical_grid_is_orthogonal() {
        let g = UpaGeometry::new(4, 4, 0.5).unwrap();
        let d = grid_dictionary(&g, 4, 4);
        let gram = &d.atoms * d.atoms.adjoint();
        assert!((gram - CMat::identity(16, 16) * C64::new(16.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn oversampled_grid_layout_and_gram() {
        let g = UpaGeometry::new(4, 4, 0.5).unwrap();
        let d = grid_dictionary(&g, 8, 8);
        assert_eq!(d.len(), 64);
        assert_eq!(d.grid_freqs[0], SpatialAngle::new(-0.5, -0.5));
        let first = crate::array::steering_vector(&g, SpatialAngle::new(-0.5, -0.5));
        assert!((d.atoms.column(0) - first).norm() < 1e-14);
        assert_eq!(d.grid_freqs[8 + 3], SpatialAngle::new(grid_frequency(1, 8, 0.5), grid_frequency(3, 8, 0.5)));
        assert!(d.atoms.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let gram = &d.atoms * d.atoms.adjoint();
        let dev = (gram - CMat::identity(16, 16) * C64::new(64.0, 0.0)).norm() / (64.0 * 4.0);
        assert!(dev <= 0.05, "{dev}");
    }

    #[test]
    fn omp_zero_measurement() {
        let d = CMat::identity(4, 6);
        let s = omp(&d, &CVec::zeros(4), OmpStop::new(1e-6, 3));
        assert!(s.support.is_empty());
        assert_eq!(s.residual_norm, 0.0);
    }

    #[test]
    fn omp_single_atom_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let d = bernoulli(&mut rng, 40, 64);
        let y = d.column(7) * C64::new(3.0, 0.0);
        let s = omp(&d, &y, OmpStop::new(1e-12, 4));
        assert_eq!(s.support, vec![7]);
        assert!((s.coefficients[(0, 0)] - C64::new(3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn omp_two_atoms_match_true_support_ls() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let d = bernoulli(&mut rng, 40, 128);
        let y = d.column(3) * ONE + d.column(17) * C64::new(-0.5, 0.0);
        let s = omp(&d, &y, OmpStop::new(1e-12, 5));
        let mut sup = s.support.clone();
        sup.sort();
        assert_eq!(sup, vec![3, 17]);
        let oracle = lstsq(&d.select_columns(&[3, 17]), &CMat::from_column_slice(40, 1, y.as_slice()));
        let dense = s.dense(128, 0);
        assert!((dense[3] - oracle[(0, 0)]).norm() < 1e-8);
        assert!((dense[17] - oracle[(1, 0)]).norm() < 1e-8);
    }

    #[test]
    fn omp_residual_orthogonal_and_nonincreasing() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let d = crate::array::complex_gaussian_matrix(&mut rng, 20, 50, 1.0);
        let y = crate::array::complex_gaussian_matrix(&mut rng, 20, 1, 1.0).column(0).into_owned();
        let s = omp(&d, &y, OmpStop::new(0.0, 8));
        assert_eq!(s.support.len(), 8);
        let mut sup = s.support.clone();
        sup.dedup();
        assert_eq!(sup.len(), 8);
        assert!(s.residual_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let r = &y - d.select_columns(&s.support) * s.coefficients.column(0);
        for &a in &s.support {
            assert!(d.column(a).dotc(&r).norm() < 1e-10);
        }
    }

    #[test]
    fn omp_tie_breaks_to_lowest_index() {
        let d = CMat::from_column_slice(2, 3, &[ONE, ONE, ONE, -ONE, ONE, ONE]);
        let y = CVec::from_column_slice(&[ONE, C64::new(0.0, 0.0)]);
        let s = omp(&d, &y, OmpStop::new(0.0, 1));
        assert_eq!(s.support, vec![0]);
    }

    #[test]
    fn coherence_cases() {
        assert_eq!(mutual_coherence(&CMat::identity(5, 5)), 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut d = bernoulli(&mut rng, 16, 32);
        let oracle = {
            let mut mu: f64 = 0.0;
            for i in 0..32 {
                for j in 0..32 {
                    if i != j {
                        let ip = d.column(i).dotc(&d.column(j)).norm();
                        mu = mu.max(ip / (d.column(i).norm() * d.column(j).norm()));
                    }
                }
            }
            mu
        };
        assert!((mutual_coherence(&d) - oracle).abs() < 1e-12);
        let c = d.column(3).into_owned();
        d.set_column(9, &c);
        assert!((mutual_coherence(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sbl_zero_measurement() {
        let d = CMat::identity(4, 6);
        let s = sbl_recover(&d, &CVec::zeros(4), SblOptions::default());
        assert!(s.support.is_empty());
    }

    #[test]
    fn sbl_dominant_atom_agrees_with_omp() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let d = crate::array::complex_gaussian_matrix(&mut rng, 30, 90, 1.0);
        let signal = d.column(41) * C64::new(2.0, -1.0);
        let noise_var = signal.norm_squared() / 30.0 * 1e-3;
        let noise = crate::array::complex_gaussian_matrix(&mut rng, 30, 1, noise_var);
        let y = signal + noise.column(0);
        let s = sbl_recover(&d, &y, SblOptions::default());
        let o = omp(&d, &y, OmpStop::new(1e-2, 3));
        let top = s
            .support
            .iter()
            .zip(s.coefficients.column(0).iter())
            .max_by(|a, b| (a.1.norm() * d.column(*a.0).norm()).total_cmp(&(b.1.norm() * d.column(*b.0).norm())))
            .map(|x| *x.0)
            .unwrap();
        assert_eq!(top, o.support[0]);
        assert_eq!(top, 41);
    }

    #[test]
    fn sbl_iteration_cap_flags_non_convergence() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let d = crate::array::complex_gaussian_matrix(&mut rng, 10, 40, 1.0);
        let y = crate::array::complex_gaussian_matrix(&mut rng, 10, 1, 1.0).column(0).into_owned();
        let opts = SblOptions {
            max_iter: 2,
            tol: 1e-12,
            ..SblOptions::default()
        };
        let s = sbl_recover(&d, &y, opts);
        assert_eq!(s.iterations, 2);
        assert!(!s.converged);
    }
}
