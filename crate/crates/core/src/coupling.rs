//! Thin-wire mutual impedance, scattering matrix and coupled RIS response.
//!
//! Every RIS element is a thin dipole along the z axis. The mutual impedance
//! kernel depends on the two integration variables only through their
//! difference `u = z − ξ`, so the double integral is evaluated as
//!
//! ```text
//! Z = C ∫ K(u) W(u) du,    W(u) = ∫ s_p(ξ) s_q(ξ + u) dξ
//! ```
//!
//! with `s` the sinusoidal current profiles. `W` is integrated exactly
//! piecewise (the profiles only kink at the wire centres), and the outer
//! integral uses composite Gauss-Legendre panels graded geometrically toward
//! the near-singular point `u = −ρ2`, whose width is `ρ1`. For the self term
//! `ρ1 = a`, which makes the peak roughly fifteen times narrower than the
//! wire, so a uniform tensor rule would need far more nodes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{inverse_checked, CMat, CVec, C64, ONE};

/// Free-space wave impedance in ohms.
pub const ETA0: f64 = 376.730_313_668;

/// Condition number above which a matrix counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative change tolerated between the base and refined quadrature.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Geometry of the RIS wires.
#[derive(Debug, Clone, PartialEq)]
pub struct WireGeometry {
    /// Element length in meters.
    pub length: f64,
    /// Wire radius in meters.
    pub radius: f64,
    /// Element centres in meters; the wire axis is z.
    pub positions: Vec<[f64; 3]>,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub free_space_impedance: f64,
}

impl WireGeometry {
    pub fn new(length: f64, radius: f64, positions: Vec<[f64; 3]>, wavelength: f64) -> Result<Self> {
        if !(length > 0.0 && radius > 0.0 && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(
                "wire length, radius and wavelength must be positive".into(),
            ));
        }
        if radius > length / 10.0 {
            return Err(Error::InvalidGeometry(format!(
                "radius {radius} exceeds a tenth of the length {length}"
            )));
        }
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("no wire positions".into()));
        }
        for (i, p) in positions.iter().enumerate() {
            for q in &positions[i + 1..] {
                let (rho1, rho2) = offsets(p, q);
                if rho1 < radius && rho2.abs() < length {
                    return Err(Error::InvalidGeometry(format!(
                        "wires at {p:?} and {q:?} overlap"
                    )));
                }
            }
        }
        Ok(Self {
            length,
            radius,
            positions,
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
            free_space_impedance: ETA0,
        })
    }

    /// Wires on the UPA grid: element `(v, h)` at `(0, h·spacing, v·spacing)`.
    pub fn planar(
        count_h: usize,
        count_v: usize,
        spacing: f64,
        length: f64,
        radius: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let mut positions = Vec::with_capacity(count_h * count_v);
        for v in 0..count_v {
            for h in 0..count_h {
                positions.push([0.0, h as f64 * spacing, v as f64 * spacing]);
            }
        }
        Self::new(length, radius, positions, wavelength)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `1 / sin²(k0·l/2)`, the gain of the current-profile normalisation.
    pub fn normalization_amplification(&self) -> f64 {
        let s = (self.wavenumber * self.length / 2.0).sin();
        1.0 / (s * s)
    }

    /// Transverse distance `ρ1` and axial offset `ρ2` between elements `p` and `q`.
    pub fn pair_offsets(&self, p: usize, q: usize) -> (f64, f64) {
        if p == q {
            (self.radius, 0.0)
        } else {
            offsets(&self.positions[p], &self.positions[q])
        }
    }
}

fn offsets(p: &[f64; 3], q: &[f64; 3]) -> (f64, f64) {
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    ((dx * dx + dy * dy).sqrt(), q[2] - p[2])
}

/// Impedance, reference impedance and scattering matrix of one RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringModel {
    pub impedance: CMat,
    pub z0: f64,
    pub scattering: CMat,
}

impl ScatteringModel {
    pub fn from_geometry(geom: &WireGeometry, z0: f64, nodes: usize) -> Result<Self> {
        let impedance = impedance_matrix(geom, nodes)?;
        let scattering = scattering_matrix(&impedance, z0)?;
        Ok(Self {
            impedance,
            z0,
            scattering,
        })
    }

    /// A coupling-free RIS (`S = 0`).
    pub fn uncoupled(m: usize, z0: f64) -> Self {
        Self {
            impedance: CMat::identity(m, m) * C64::new(z0, 0.0),
            z0,
            scattering: CMat::zeros(m, m),
        }
    }

    pub fn len(&self) -> usize {
        self.scattering.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Precomputed Gauss-Legendre rule on `[-1, 1]`.
struct Rule {
    pairs: Vec<(f64, f64)>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).expect("positive");
        let g = GaussLegendre::new(n);
        Self {
            pairs: g.as_node_weight_pairs().to_vec(),
        }
    }

    fn for_each(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        for &(x, w) in &self.pairs {
            f(mid + half * x, w * half);
        }
    }
}

/// Normalised current profile `sin(k0(l/2 − |x|)) / sin(k0 l/2)`.
fn profile(k0: f64, len: f64, x: f64) -> f64 {
    (k0 * (len / 2.0 - x.abs())).sin() / (k0 * len / 2.0).sin()
}

/// Radiation kernel as a function of the axial separation `w` (already shifted by `ρ2`).
fn kernel(k0: f64, rho1: f64, w: f64) -> C64 {
    let r = (rho1 * rho1 + w * w).sqrt();
    let w2 = w * w;
    let j = C64::new(0.0, 1.0);
    let bracket = C64::new(k0 * k0, 0.0) - j * (k0 / r) - C64::new((k0 * k0 * w2 + 1.0) / (r * r), 0.0)
        + j * (3.0 * k0 * w2 / (r * r * r))
        + C64::new(3.0 * w2 / (r * r * r * r), 0.0);
    C64::from_polar(1.0 / r, -k0 * r) * bracket
}

fn push_inside(points: &mut Vec<f64>, x: f64, lo: f64, hi: f64) {
    if x > lo && x < hi {
        points.push(x);
    }
}

/// Overlap weight `W(u) = ∫ s_p(ξ) s_q(ξ + u) dξ`.
fn overlap(rule: &Rule, k0: f64, lp: f64, lq: f64, u: f64) -> f64 {
    let lo = (-lp / 2.0).max(-lq / 2.0 - u);
    let hi = (lp / 2.0).min(lq / 2.0 - u);
    if hi <= lo {
        return 0.0;
    }
    let mut edges = vec![lo, hi];
    push_inside(&mut edges, 0.0, lo, hi);
    push_inside(&mut edges, -u, lo, hi);
    edges.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in edges.windows(2) {
        rule.for_each(w[0], w[1], |x, wt| {
            acc += wt * profile(k0, lp, x) * profile(k0, lq, x + u);
        });
    }
    acc
}

/// Panel edges on `[lo, hi]` graded geometrically away from `peak` with first width `scale`.
fn graded_edges(lo: f64, hi: f64, peak: f64, scale: f64) -> Vec<f64> {
    let mut edges = vec![lo, hi];
    for sign in [-1.0, 1.0] {
        let mut step = scale;
        loop {
            let x = peak + sign * step;
            if x <= lo || x >= hi {
                break;
            }
            edges.push(x);
            step *= 2.0;
        }
    }
    edges
}

/// `Z_qp` for given offsets and lengths with a fixed node count per panel.
fn impedance_with_offsets(geom: &WireGeometry, rho1: f64, rho2: f64, nodes: usize) -> C64 {
    let rule = Rule::new(nodes);
    let k0 = geom.wavenumber;
    let (lp, lq) = (geom.length, geom.length);
    let u_lo = -(lp + lq) / 2.0;
    let u_hi = (lp + lq) / 2.0;

    let mut breaks = vec![u_lo, u_hi];
    // W(u) kinks wherever a profile kink meets the other kink or an overlap end
    for x in [0.0, lp / 2.0, lq / 2.0, (lp - lq) / 2.0] {
        push_inside(&mut breaks, x, u_lo, u_hi);
        push_inside(&mut breaks, -x, u_lo, u_hi);
    }
    let peak = -rho2;
    let near = peak > u_lo - 4.0 * rho1 && peak < u_hi + 4.0 * rho1;
    if near {
        push_inside(&mut breaks, peak, u_lo, u_hi);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (u_hi - u_lo));

    let mut acc = C64::new(0.0, 0.0);
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let panels = if near && rho1 < (b - a) {
            let mut e = graded_edges(a, b, peak.clamp(a, b), rho1);
            e.sort_by(f64::total_cmp);
            e
        } else {
            vec![a, b]
        };
        for p in panels.windows(2) {
            rule.for_each(p[0], p[1], |u, wt| {
                let w = overlap(&rule, k0, lp, lq, u);
                if w != 0.0 {
                    acc += kernel(k0, rho1, u + rho2) * (wt * w);
                }
            });
        }
    }
    C64::new(0.0, geom.free_space_impedance / (4.0 * PI * k0)) * acc
}

/// `Z_qp` evaluated with a fixed node count and no convergence check.
pub fn mutual_impedance_fixed(geom: &WireGeometry, p: usize, q: usize, nodes: usize) -> C64 {
    let (rho1, rho2) = geom.pair_offsets(p, q);
    impedance_with_offsets(geom, rho1, rho2, nodes)
}

fn refined(geom: &WireGeometry, p: usize, q: usize, rho1: f64, rho2: f64, nodes: usize) -> Result<C64> {
    let base = impedance_with_offsets(geom, rho1, rho2, nodes);
    let fine = impedance_with_offsets(geom, rho1, rho2, 2 * nodes);
    let relative_change = (fine - base).norm() / fine.norm().max(f64::MIN_POSITIVE);
    if relative_change > QUADRATURE_TOL {
        return Err(Error::QuadratureNotConverged {
            p,
            q,
            relative_change,
        });
    }
    Ok(fine)
}

/// Mutual impedance `Z_qp` in ohms.
///
/// Evaluated with `nodes` Gauss-Legendre points per panel and checked
/// against `2·nodes`; the refined value is returned.
pub fn mutual_impedance(geom: &WireGeometry, p: usize, q: usize, nodes: usize) -> Result<C64> {
    let (rho1, rho2) = geom.pair_offsets(p, q);
    refined(geom, p, q, rho1, rho2, nodes)
}

/// Key of an element pair: the impedance depends only on `ρ1` and `|ρ2|`.
fn offset_key(geom: &WireGeometry, rho1: f64, rho2: f64) -> (i64, i64) {
    let quantum = geom.wavelength * 1e-9;
    ((rho1 / quantum).round() as i64, (rho2.abs() / quantum).round() as i64)
}

/// Full impedance matrix, one quadrature per distinct element offset.
pub fn impedance_matrix(geom: &WireGeometry, nodes: usize) -> Result<CMat> {
    let m = geom.len();
    let amp = geom.normalization_amplification();
    if amp > 1e6 {
        warn!("current-profile normalisation amplifies the kernel by {amp:.3e}");
    }
    let mut cache: HashMap<(i64, i64), C64> = HashMap::new();
    let mut z = CMat::zeros(m, m);
    for p in 0..m {
        for q in p..m {
            let (rho1, rho2) = geom.pair_offsets(p, q);
            let key = offset_key(geom, rho1, rho2);
            let value = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = refined(geom, p, q, rho1, rho2, nodes)?;
                    cache.insert(key, v);
                    v
                }
            };
            z[(q, p)] = value;
            z[(p, q)] = value;
        }
    }
    Ok(z)
}

/// `S = (Z + z0·I)⁻¹ (Z − z0·I)`.
pub fn scattering_matrix(z: &CMat, z0: f64) -> Result<CMat> {
    let m = z.nrows();
    let shift = CMat::identity(m, m) * C64::new(z0, 0.0);
    let inv = inverse_checked(&(z + &shift), MAX_CONDITION)?;
    Ok(inv * (z - shift))
}

/// Coupled RIS response `B = (Diag(γ)⁻¹ − S)⁻¹`.
pub fn mc_response(gamma: &CVec, s: &CMat) -> Result<CMat> {
    let mut a = -s.clone();
    for (m, g) in gamma.iter().enumerate() {
        a[(m, m)] += ONE / g;
    }
    inverse_checked(&a, MAX_CONDITION)
}

/// Coupled responses for every column of a training matrix.
pub fn mc_responses(gamma: &CMat, s: &CMat) -> Result<Vec<CMat>> {
    gamma
        .column_iter()
        .map(|c| mc_response(&c.into_owned(), s))
        .collect()
}
