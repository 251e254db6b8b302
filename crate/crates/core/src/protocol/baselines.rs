//! Comparison estimators: coupling-unaware OMP, Direct-OMP on the full
//! vectorised model and SBL after the same BS-angle stage.

use crate::array::UpaGeometry;
use crate::doa::SteeringEstimate;
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, CMat, CVec, C64};
use crate::sparse::{omp, sbl_recover, GridDictionary, OmpStop, SblOptions, SensingOperator};

use super::stages::{StageInput, StageOptions, StopRule};
use super::{equivalent_measurement, kron_synthesis, lifted_sensing, stop_fraction, CascadedEstimate, Dictionaries};

/// Coupling-unaware estimate: the BS stage is shared, but every column of `Y̆`
/// is recovered on `Θ_cv^H Ã_M`, treating `B_t` as `diag(γ_t)`.
///
/// `gamma` is the `M × τ` phase schedule actually transmitted. The result
/// predicts pilots as `√p·Ĝ·Θ_cv` with `Ĝ` of size `N × M`.
pub fn mc_unaware_estimate(
    stage1: &SteeringEstimate,
    user_index: usize,
    block: &CMat,
    gamma: &CMat,
    ris_dictionary: &GridDictionary,
    options: StageOptions,
) -> Result<CascadedEstimate> {
    let a_n = &stage1.steering_matrix;
    let eq = equivalent_measurement(block, a_n, options.power_w)?;
    let rule = StopRule::for_equivalent(eq.nrows(), a_n.nrows(), options.noise_bs_w, options.power_w, options.paths_j + 2);
    let sensing = gamma.adjoint() * &ris_dictionary.atoms;
    let mut cols = CMat::zeros(gamma.nrows(), eq.ncols());
    for l in 0..eq.ncols() {
        let y = eq.column(l).into_owned();
        let sol = omp(&sensing, &y, rule.stop_for(&y));
        for (i, &a) in sol.support.iter().enumerate() {
            let c = sol.coefficients[(i, 0)];
            let mut col = cols.column_mut(l);
            col += ris_dictionary.atoms.column(a) * c;
        }
    }
    Ok(CascadedEstimate::assemble(
        user_index,
        a_n.clone(),
        cols,
        CMat::zeros(0, 0),
        Vec::new(),
        None,
    ))
}

/// Settings of the Direct-OMP baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOmpOptions {
    pub power_w: f64,
    pub noise_bs_w: f64,
    /// Sparsity cap, normally `L²·J`.
    pub max_sparsity: usize,
    /// Budget for the implicit correlation buffers.
    pub memory_cap_bytes: usize,
}

/// `(Θ^T X) ⊗ Ã_N` applied implicitly.
///
/// Atom `(u·D_M + g)·D_N + n` is `(Θ^T x_{ug}) ⊗ ã_n` with
/// `x_{ug} = ã_u ⊗ conj(ã_g)`; correlations reduce to
/// `Ã_N^H R conj(Θ^T X)` for the residual reshaped to `N × τ`.
struct DirectOperator {
    bs_atoms: CMat,
    theta_x: CMat,
    norms: Vec<f64>,
}

impl SensingOperator for DirectOperator {
    fn rows(&self) -> usize {
        self.bs_atoms.nrows() * self.theta_x.nrows()
    }

    fn atoms(&self) -> usize {
        self.bs_atoms.ncols() * self.theta_x.ncols()
    }

    fn atom_norms(&self) -> Vec<f64> {
        self.norms.clone()
    }

    fn correlate(&self, residual: &CMat) -> CMat {
        let (n, tau) = (self.bs_atoms.nrows(), self.theta_x.nrows());
        let conj_tx = self.theta_x.map(|z| z.conj());
        let mut out = CMat::zeros(self.atoms(), residual.ncols());
        for c in 0..residual.ncols() {
            let r = CMat::from_iterator(n, tau, residual.column(c).iter().copied());
            let corr = self.bs_atoms.adjoint() * r * &conj_tx;
            out.set_column(c, &CVec::from_column_slice(corr.as_slice()));
        }
        out
    }

    fn atom(&self, index: usize) -> CVec {
        let d_n = self.bs_atoms.ncols();
        kron_vec(
            &self.theta_x.column(index / d_n).into_owned(),
            &self.bs_atoms.column(index % d_n).into_owned(),
        )
    }
}

/// Bytes held by the implicit Direct-OMP operator and one correlation buffer.
pub fn direct_omp_bytes(bs_atoms: usize, lifted_atoms: usize, tau: usize) -> usize {
    (bs_atoms * lifted_atoms + tau * lifted_atoms) * std::mem::size_of::<C64>()
}

/// OMP on `vec(Y) = √p (Θ^T ⊗ I_N) vec(G)` with a Kronecker grid dictionary
/// over the BS, user and RIS angles jointly; no Stage I.
pub fn direct_omp_estimate(
    user: &StageInput<'_>,
    bs_dictionary: &GridDictionary,
    dicts: &Dictionaries,
    options: DirectOmpOptions,
) -> Result<CascadedEstimate> {
    let (n, tau) = (user.block.nrows(), user.block.ncols());
    if bs_dictionary.atoms.nrows() != n || user.responses.len() != tau {
        return Err(Error::ShapeMismatch("direct-omp inputs disagree on N or τ".into()));
    }
    let lifted_atoms = dicts.user.len() * dicts.ris.len();
    let required = direct_omp_bytes(bs_dictionary.len(), lifted_atoms, tau);
    if required > options.memory_cap_bytes {
        return Err(Error::DictionaryTooLarge {
            required_bytes: required,
            cap_bytes: options.memory_cap_bytes,
        });
    }
    let theta_x = lifted_sensing(user.responses, &dicts.user.atoms, &dicts.ris.atoms).map(|z| z.conj());
    let bs_norms: Vec<f64> = bs_dictionary.atoms.column_iter().map(|c| c.norm()).collect();
    let mut norms = Vec::with_capacity(bs_norms.len() * lifted_atoms);
    for c in theta_x.column_iter() {
        let cn = c.norm();
        norms.extend(bs_norms.iter().map(|b| b * cn));
    }
    let op = DirectOperator {
        bs_atoms: bs_dictionary.atoms.clone(),
        theta_x,
        norms,
    };
    let y = CVec::from_column_slice(user.block.as_slice()) / C64::new(options.power_w.sqrt(), 0.0);
    let noise = (n * tau) as f64 * options.noise_bs_w / options.power_w;
    let sol = omp(&op, &y, OmpStop::new(stop_fraction(noise, y.norm_squared()), options.max_sparsity));

    // Ĝ = Σ c·ã_n·x^T, stored as bs columns and conj(c·x) RIS columns
    let d_n = bs_dictionary.len();
    let mut bs_cols = CMat::zeros(n, sol.support.len());
    let mut ris_cols = CMat::zeros(dicts.user.atoms.nrows() * dicts.ris.atoms.nrows(), sol.support.len());
    for (j, &idx) in sol.support.iter().enumerate() {
        let (ug, bn) = (idx / d_n, idx % d_n);
        bs_cols.set_column(j, &bs_dictionary.atoms.column(bn));
        let x = kron_synthesis(&dicts.user.atoms, &dicts.ris.atoms, &[ug], &[sol.coefficients[(j, 0)].conj()]);
        ris_cols.set_column(j, &x);
    }
    Ok(CascadedEstimate::assemble(
        user.user_index,
        bs_cols,
        ris_cols,
        CMat::zeros(0, 0),
        Vec::new(),
        None,
    ))
}

/// SBL on the full lifted dictionary `Θ^H(Ã_u^* ⊗ Ã_M)` per column of `Y̆`.
pub fn sbl_estimate(
    stage1: &SteeringEstimate,
    user: &StageInput<'_>,
    ris_geom: &UpaGeometry,
    dicts: &Dictionaries,
    options: StageOptions,
    sbl: SblOptions,
) -> Result<CascadedEstimate> {
    let a_n = &stage1.steering_matrix;
    let eq = equivalent_measurement(user.block, a_n, options.power_w)?;
    let sensing = lifted_sensing(user.responses, &dicts.user.atoms, &dicts.ris.atoms);
    let m2 = ris_geom.len() * ris_geom.len();
    let mut cols = CMat::zeros(m2, eq.ncols());
    for l in 0..eq.ncols() {
        let sol = sbl_recover(&sensing, &eq.column(l).into_owned(), sbl);
        let h = kron_synthesis(&dicts.user.atoms, &dicts.ris.atoms, &sol.support, &sol.coefficient_vec());
        cols.set_column(l, &h);
    }
    Ok(CascadedEstimate::assemble(
        user.user_index,
        a_n.clone(),
        cols,
        CMat::zeros(0, 0),
        Vec::new(),
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::grid_dictionary;

    #[test]
    fn implicit_operator_matches_explicit() {
        let bs = UpaGeometry::new(2, 2, 0.5).unwrap();
        let ris = UpaGeometry::new(2, 1, 0.5).unwrap();
        let dicts = Dictionaries::new(&ris, (1, 4), (1, 4));
        let bs_dict = grid_dictionary(&bs, 2, 2);
        let responses: Vec<CMat> = (0..3)
            .map(|t| CMat::from_fn(2, 2, |i, j| C64::new(1.0 + (i * 2 + j + t) as f64, (t as f64) - (i as f64))))
            .collect();
        let theta_x = lifted_sensing(&responses, &dicts.user.atoms, &dicts.ris.atoms).map(|z| z.conj());
        let op = DirectOperator {
            bs_atoms: bs_dict.atoms.clone(),
            theta_x,
            norms: Vec::new(),
        };
        let explicit = CMat::from_columns(&(0..op.atoms()).map(|i| op.atom(i)).collect::<Vec<_>>());
        let r = CMat::from_fn(op.rows(), 1, |i, _| C64::new(i as f64 * 0.3, 1.0 - i as f64 * 0.1));
        assert!((op.correlate(&r) - explicit.adjoint() * &r).norm() < 1e-9);

        // atom (u, g, n) is vec(ã_n x^T Θ) with x = ã_u ⊗ conj(ã_g)
        let mut theta = CMat::zeros(4, 3);
        for (t, b) in responses.iter().enumerate() {
            theta.set_column(t, &CVec::from_column_slice(b.as_slice()));
        }
        let (u, g, nb) = (2, 1, 3);
        let x = kron_vec(
            &dicts.user.atoms.column(u).into_owned(),
            &dicts.ris.atoms.column(g).map(|z| z.conj()),
        );
        let gm = bs_dict.atoms.column(nb) * x.transpose() * &theta;
        let idx = (u * 4 + g) * bs_dict.len() + nb;
        assert!((op.atom(idx) - CVec::from_column_slice(gm.as_slice())).norm() < 1e-12);
    }

    #[test]
    fn memory_cap_enforced() {
        let bs = UpaGeometry::new(2, 2, 0.5).unwrap();
        let ris = UpaGeometry::new(2, 1, 0.5).unwrap();
        let dicts = Dictionaries::new(&ris, (1, 4), (1, 4));
        let bs_dict = grid_dictionary(&bs, 2, 2);
        let block = CMat::zeros(4, 3);
        let responses = vec![CMat::identity(2, 2); 3];
        let user = StageInput {
            user_index: 0,
            block: &block,
            responses: &responses,
        };
        let opts = DirectOmpOptions {
            power_w: 1.0,
            noise_bs_w: 0.0,
            max_sparsity: 4,
            memory_cap_bytes: 10,
        };
        assert!(matches!(
            direct_omp_estimate(&user, &bs_dict, &dicts, opts),
            Err(Error::DictionaryTooLarge { .. })
        ));
        let est = direct_omp_estimate(&user, &bs_dict, &dicts, DirectOmpOptions { memory_cap_bytes: 1 << 20, ..opts }).unwrap();
        assert_eq!(est.cascaded, CMat::zeros(4, 4));
    }
}
