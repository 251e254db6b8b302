//! Dense complex linear-algebra helpers shared by every stage.
//!
//! Thin wrappers around `nalgebra` for the products and decompositions the
//! estimators need: Kronecker and Khatri-Rao products, sorted Hermitian
//! eigendecompositions, general complex eigenvalues, polynomial roots and
//! conditioned inversion.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two column vectors.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        for (p, &y) in b.iter().enumerate() {
            out[i * b.len() + p] = x * y;
        }
    }
    out
}

/// Column-wise Kronecker (Khatri-Rao) product `a ⋄ b`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols(), "khatri-rao needs equal column counts");
    let mut out = CMat::zeros(a.nrows() * b.nrows(), a.ncols());
    for j in 0..a.ncols() {
        let col = kron_vec(&a.column(j).into_owned(), &b.column(j).into_owned());
        out.set_column(j, &col);
    }
    out
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Returns the eigenvalues and the matching eigenvectors as columns.
pub fn hermitian_eigen_desc(r: &CMat) -> (Vec<f64>, CMat) {
    let n = r.nrows();
    // symmetrize to remove round-off before the solver sees it
    let sym = (r + r.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a general square complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let t = m.clone().schur().unpack().1;
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Roots of a polynomial given by its coefficients, highest degree first.
///
/// Leading zero coefficients are dropped. Roots come from the companion
/// matrix eigenvalues and are polished with a few Newton steps.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let first = coeffs.iter().position(|c| c.norm() > 1e-14 * scale);
    let Some(first) = first else {
        return Vec::new();
    };
    let c = &coeffs[first..];
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let mut companion = CMat::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..degree {
        companion[(i, i - 1)] = ONE;
    }
    eigenvalues(&companion)
        .into_iter()
        .map(|z| newton_polish(c, z))
        .collect()
}

fn newton_polish(c: &[C64], mut z: C64) -> C64 {
    for _ in 0..3 {
        let (mut p, mut dp) = (ZERO, ZERO);
        for &a in c {
            dp = dp * z + p;
            p = p * z + a;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
            break;
        }
        z -= step;
    }
    z
}

/// Two-norm condition number from the singular values.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of `m`, refusing matrices whose condition number exceeds `max_condition`.
pub fn inverse_checked(m: &CMat, max_condition: f64) -> Result<CMat> {
    let condition = condition_number(m);
    if !(condition <= max_condition) {
        return Err(Error::SingularMatrix { condition });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { condition })
}

/// Least-squares solution of `a x ≈ b` through the SVD.
pub fn lstsq(a: &CMat, b: &CMat) -> CMat {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps)
        .unwrap_or_else(|_| CMat::zeros(a.ncols(), b.ncols()))
}

/// Orthogonal projection of the columns of `y` onto the column span of `basis`.
pub fn project_onto(basis: &CMat, y: &CMat) -> CMat {
    let coef = lstsq(basis, y);
    basis * coef
}

/// Wraps a spatial frequency into `[-1/2, 1/2)`.
pub fn wrap_frequency(f: f64) -> f64 {
    let w = f - f.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_matches_definition() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let b = CMat::from_row_slice(2, 1, &[c(1.0, 1.0), c(-2.0, 0.0)]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 2));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    assert_eq!(k[(i * 2 + p, j)], a[(i, j)] * b[(p, 0)]);
                }
            }
        }
    }

    #[test]
    fn poly_roots_recovers_known_roots() {
        let roots = [c(0.3, 0.9), c(-1.2, 0.1), c(0.0, -0.5), C64::from_polar(1.0, 0.7)];
        let mut p = vec![ONE];
        for r in roots {
            let mut q = vec![ZERO; p.len() + 1];
            for (i, a) in p.iter().enumerate() {
                q[i] += *a;
                q[i + 1] -= a * r;
            }
            p = q;
        }
        let found = poly_roots(&p);
        assert_eq!(found.len(), 4);
        for r in roots {
            let best = found.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "root {r} missed by {best}");
        }
    }

    #[test]
    fn hermitian_eigen_is_sorted_and_reconstructs() {
        let h = CMat::from_fn(5, 5, |i, j| {
            if i == j {
                c(i as f64 + 1.0, 0.0)
            } else {
                c(0.1 * (i + j) as f64, 0.05 * (i as f64 - j as f64))
            }
        });
        let (vals, vecs) = hermitian_eigen_desc(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = CMat::from_diagonal(&CVec::from_iterator(5, vals.iter().map(|&v| c(v, 0.0))));
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - h).norm() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_refused() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        assert!(matches!(inverse_checked(&m, 1e12), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn wrap_frequency_range() {
        assert_eq!(wrap_frequency(0.5), -0.5);
        assert!((wrap_frequency(0.75) + 0.25).abs() < 1e-15);
        assert!((wrap_frequency(-0.6) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
    }
}
