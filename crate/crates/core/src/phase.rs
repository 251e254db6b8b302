//! RIS training-matrix design on the complex circle manifold.
//!
//! The lifted training matrix `Θ_mc` has column `t` equal to `vec(B_t)`,
//! `B_t = (Diag(γ_t)⁻¹ − S)⁻¹`. The design minimises
//! `‖Θ_mc Θ_mc^H − I‖²_F = ‖Θ_mc^H Θ_mc − I_τ‖²_F + M² − τ` over unit-modulus
//! `γ` with Polak-Ribière conjugate gradient.
//!
//! Gradient: with `F = Θ^HΘ − I` and `R_t = mat((ΘF)_{:,t})`,
//! `dB_t = B_t Diag(γ_t^{-2} dγ_t) B_t`, so
//! `df = 4 Re Σ_m γ_m^{-2} [B_t R_t^H B_t]_{mm} dγ_m`. The Euclidean gradient
//! (the steepest-ascent direction in `ℝ²` per entry) is therefore
//! `G_{m,t} = 4·conj(γ_m^{-2} [B_t R_t^H B_t]_{mm})`.

use rand::Rng;

use crate::coupling::mc_response;
use crate::error::Result;
use crate::linalg::{CMat, C64, ONE};

/// Training matrix `Θ_cv` with its coupled lift `Θ_mc`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    /// `M × τ` unit-modulus phases.
    pub gamma: CMat,
    /// `M² × τ`, column `t` is `vec(B_t)` (column-major).
    pub lifted: CMat,
    /// Coupled responses `B_t`.
    pub responses: Vec<CMat>,
    /// Scattering matrix the lift was computed with.
    pub scattering: CMat,
}

impl PhaseSchedule {
    pub fn new(gamma: CMat, scattering: &CMat) -> Result<Self> {
        let m = gamma.nrows();
        let mut responses = Vec::with_capacity(gamma.ncols());
        let mut lifted = CMat::zeros(m * m, gamma.ncols());
        for (t, col) in gamma.column_iter().enumerate() {
            let b = mc_response(&col.into_owned(), scattering)?;
            lifted.set_column(t, &CMat::from_column_slice(m * m, 1, b.as_slice()).column(0));
            responses.push(b);
        }
        Ok(Self {
            gamma,
            lifted,
            responses,
            scattering: scattering.clone(),
        })
    }

    /// Entries drawn independently from `{−1, +1}`.
    pub fn bernoulli<R: Rng + ?Sized>(m: usize, tau: usize, scattering: &CMat, rng: &mut R) -> Result<Self> {
        Self::new(bernoulli_phases(m, tau, rng), scattering)
    }

    pub fn elements(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn pilots(&self) -> usize {
        self.gamma.ncols()
    }

    /// The first `tau` slots of this schedule.
    pub fn truncated(&self, tau: usize) -> Self {
        let tau = tau.min(self.pilots());
        Self {
            gamma: self.gamma.columns(0, tau).into_owned(),
            lifted: self.lifted.columns(0, tau).into_owned(),
            responses: self.responses[..tau].to_vec(),
            scattering: self.scattering.clone(),
        }
    }
}

pub fn bernoulli_phases<R: Rng + ?Sized>(m: usize, tau: usize, rng: &mut R) -> CMat {
    CMat::from_fn(m, tau, |_, _| if rng.random_bool(0.5) { ONE } else { -ONE })
}

fn gram_residual(lifted: &CMat) -> CMat {
    let tau = lifted.ncols();
    lifted.adjoint() * lifted - CMat::identity(tau, tau)
}

/// `‖Θ_mc Θ_mc^H − I_{M²}‖²_F` through the `τ × τ` Gram matrix.
pub fn objective(schedule: &PhaseSchedule) -> f64 {
    lifted_objective(&schedule.lifted)
}

pub fn lifted_objective(lifted: &CMat) -> f64 {
    let rows = lifted.nrows() as f64;
    let tau = lifted.ncols() as f64;
    gram_residual(lifted).norm_squared() + rows - tau
}

/// Euclidean gradient with respect to `γ` (real-pair convention, see module docs).
pub fn euclidean_gradient(schedule: &PhaseSchedule) -> CMat {
    let m = schedule.elements();
    let f = gram_residual(&schedule.lifted);
    let r_all = &schedule.lifted * f;
    let mut grad = CMat::zeros(m, schedule.pilots());
    for (t, b) in schedule.responses.iter().enumerate() {
        let r_t = CMat::from_column_slice(m, m, r_all.column(t).as_slice());
        let core = b * r_t.adjoint() * b;
        for i in 0..m {
            let g = schedule.gamma[(i, t)];
            grad[(i, t)] = (core[(i, i)] / (g * g)).conj() * 4.0;
        }
    }
    grad
}

/// Projection onto the tangent space of the complex circle at `gamma`.
pub fn riemannian_gradient(euclidean: &CMat, gamma: &CMat) -> CMat {
    euclidean.zip_map(gamma, |g, y| g - y * (g * y.conj()).re)
}

/// Real inner product `Re Σ conj(a)·b`.
fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn retract(gamma: &CMat, direction: &CMat, step: f64) -> CMat {
    gamma.zip_map(direction, |g, d| {
        let z = g + d * step;
        let n = z.norm();
        if n > 0.0 {
            z / n
        } else {
            g
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub restart_every: usize,
}

impl OptimizerOptions {
    /// Defaults for an `M × τ` problem: 300 iterations, tolerance `1e-6·M·τ`.
    pub fn for_size(m: usize, tau: usize) -> Self {
        Self {
            max_iter: 300,
            grad_tol: 1e-6 * (m * tau) as f64,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            restart_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Objective after every accepted step, starting with the initial value.
    pub objective_trace: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub line_search_failed: bool,
}

/// Polak-Ribière conjugate gradient on the complex circle manifold.
///
/// Directions are transported by tangent projection and reset to steepest
/// descent when the PR coefficient is negative, every `restart_every`
/// iterations, or when the direction stops being a descent direction. Steps
/// use Armijo backtracking from `1/‖G^R‖_F`.
pub fn optimize(init: &PhaseSchedule, options: OptimizerOptions) -> Result<(PhaseSchedule, OptimizerState)> {
    let s = init.scattering.clone();
    let mut current = init.clone();
    let mut f = objective(&current);
    let mut trace = vec![f];
    let mut grad = riemannian_gradient(&euclidean_gradient(&current), &current.gamma);
    let mut direction = -grad.clone();
    let mut prev_grad_sq = grad.norm_squared();
    let mut converged = false;
    let mut failed = false;
    let mut iterations = 0;

    for k in 0..options.max_iter {
        let gnorm = grad.norm();
        if gnorm <= options.grad_tol {
            converged = true;
            break;
        }
        let mut slope = inner(&grad, &direction);
        if slope >= 0.0 {
            direction = -grad.clone();
            slope = -grad.norm_squared();
        }
        let mut step = 1.0 / gnorm;
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let gamma = retract(&current.gamma, &direction, step);
            if let Ok(cand) = PhaseSchedule::new(gamma, &s) {
                let fc = objective(&cand);
                if fc <= f + options.armijo * step * slope {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= options.shrink;
        }
        let Some((next, fnext)) = accepted else {
            failed = true;
            break;
        };
        iterations = k + 1;
        current = next;
        f = fnext;
        trace.push(f);

        let new_grad = riemannian_gradient(&euclidean_gradient(&current), &current.gamma);
        let transported_grad = riemannian_gradient(&grad, &current.gamma);
        let transported_dir = riemannian_gradient(&direction, &current.gamma);
        let beta = inner(&new_grad, &(&new_grad - transported_grad)) / prev_grad_sq.max(f64::MIN_POSITIVE);
        let restart = beta < 0.0 || (k + 1) % options.restart_every == 0;
        direction = if restart {
            -new_grad.clone()
        } else {
            -new_grad.clone() + transported_dir * C64::new(beta, 0.0)
        };
        prev_grad_sq = new_grad.norm_squared();
        grad = new_grad;
    }
    let state = OptimizerState {
        objective_trace: trace,
        gradient_norm: grad.norm(),
        iterations,
        converged,
        line_search_failed: failed,
    };
    Ok((current, state))
}

/// Phase angle of every entry, for finite-difference checks.
pub fn phases(gamma: &CMat) -> Vec<f64> {
    gamma.iter().map(|z| z.arg()).collect()
}

/// Schedule from column-major phase angles.
pub fn from_phases(m: usize, tau: usize, theta: &[f64]) -> CMat {
    CMat::from_iterator(m, tau, theta.iter().map(|&t| C64::from_polar(1.0, t)))
}

/// Directional derivative of the objective along tangent phase perturbation `v`.
///
/// A phase perturbation `dθ` moves `γ` by `iγ·dθ`, so the derivative is
/// `Σ Re(conj(G)·iγ)·v`.
pub fn directional_derivative(gradient: &CMat, gamma: &CMat, v: &[f64]) -> f64 {
    gradient
        .iter()
        .zip(gamma.iter())
        .zip(v)
        .map(|((g, y), dv)| (g.conj() * C64::new(0.0, 1.0) * y).re * dv)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::complex_gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_s(rng: &mut ChaCha20Rng, m: usize, scale: f64) -> CMat {
        complex_gaussian_matrix(rng, m, m, scale * scale)
    }

    fn fd_check(s: &CMat, m: usize, tau: usize, seed: u64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let theta: Vec<f64> = (0..m * tau).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gamma = from_phases(m, tau, &theta);
        let sched = PhaseSchedule::new(gamma.clone(), s).unwrap();
        let g = riemannian_gradient(&euclidean_gradient(&sched), &gamma);
        let f = |th: &[f64]| objective(&PhaseSchedule::new(from_phases(m, tau, th), s).unwrap());
        for _ in 0..10 {
            let v: Vec<f64> = (0..m * tau).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps = 1e-6;
            let plus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + eps * d).collect();
            let minus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - eps * d).collect();
            let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
            let an = directional_derivative(&g, &gamma, &v);
            assert!((fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()), "fd {fd} analytic {an}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_without_coupling() {
        fd_check(&CMat::zeros(4, 4), 4, 3, 1);
    }

    #[test]
    fn gradient_matches_finite_differences_with_coupling() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let s = small_s(&mut rng, 4, 0.3);
        fd_check(&s, 4, 3, 3);
    }

    #[test]
    fn objective_via_gram_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let s = small_s(&mut rng, 4, 0.2);
        let sched = PhaseSchedule::bernoulli(4, 6, &s, &mut rng).unwrap();
        let big = &sched.lifted * sched.lifted.adjoint() - CMat::identity(16, 16);
        let direct = big.norm_squared();
        assert!((objective(&sched) - direct).abs() <= 1e-8 * direct);
    }

    #[test]
    fn orthonormal_lift_gives_constant() {
        let q = CMat::identity(9, 4);
        assert!((lifted_objective(&q) - 5.0).abs() < 1e-12);
        let mut one = CMat::zeros(9, 1);
        one[(2, 0)] = ONE;
        assert!((lifted_objective(&one) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn riemannian_projection_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let gamma = from_phases(3, 2, &(0..6).map(|i| i as f64 * 0.7).collect::<Vec<_>>());
        let radial = gamma.map(|y| y * 2.5);
        assert!(riemannian_gradient(&radial, &gamma).norm() < 1e-14);
        let tangent = gamma.map(|y| y * C64::new(0.0, 1.3));
        assert!((riemannian_gradient(&tangent, &gamma) - &tangent).norm() < 1e-14);
        let any = complex_gaussian_matrix(&mut rng, 3, 2, 1.0);
        let g = riemannian_gradient(&any, &gamma);
        for (a, y) in g.iter().zip(gamma.iter()) {
            assert!((a * y.conj()).re.abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_single_element_does_not_move() {
        let s = CMat::zeros(1, 1);
        let init = PhaseSchedule::new(CMat::from_element(1, 1, ONE), &s).unwrap();
        let (out, state) = optimize(&init, OptimizerOptions::for_size(1, 1)).unwrap();
        assert_eq!(state.iterations, 0);
        assert!(state.converged);
        assert_eq!(out.gamma, init.gamma);
    }

    #[test]
    fn optimizer_descends_and_keeps_unit_modulus() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let s = small_s(&mut rng, 4, 0.3);
        let init = PhaseSchedule::bernoulli(4, 8, &s, &mut rng).unwrap();
        let mut opts = OptimizerOptions::for_size(4, 8);
        opts.max_iter = 60;
        let (out, state) = optimize(&init, opts).unwrap();
        assert!(state.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(objective(&out) < objective(&init));
        assert!(out.gamma.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let rebuilt = PhaseSchedule::new(out.gamma.clone(), &s).unwrap();
        assert!((rebuilt.lifted - &out.lifted).norm() <= 1e-10 * out.lifted.norm());
    }
}
