//! Dimension-reduced subspace estimation of the common BS angles of arrival.
//!
//! The `N_v·N_h` BS rows are rearranged into per-axis snapshot matrices, each
//! axis is estimated with Root-MUSIC or TLS-ESPRIT, and the two frequency
//! sets are paired into 2-D angles.

use std::f64::consts::PI;

use crate::array::{steering_matrix, ReceivedBlock, SpatialAngle, UpaGeometry};
use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, frob_sq, hermitian_eigen_desc, permutations, poly_roots, project_onto,
    wrap_frequency, CMat, C64, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaMethod {
    RootMusic,
    Esprit,
}

/// Snapshots of one axis: `N_h × N_v·Q` (horizontal) or `N_v × N_h·Q` (vertical).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSnapshots {
    pub axis: Axis,
    pub data: CMat,
}

/// Estimated common angles and the matching BS steering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringEstimate {
    pub angles: Vec<SpatialAngle>,
    pub path_count: usize,
    pub steering_matrix: CMat,
}

impl SteeringEstimate {
    pub fn from_angles(geom: &UpaGeometry, angles: Vec<SpatialAngle>) -> Self {
        let steering_matrix = steering_matrix(geom, &angles);
        Self {
            path_count: angles.len(),
            angles,
            steering_matrix,
        }
    }
}

/// Rearranges a block so that one axis indexes rows.
///
/// Horizontal: slice `v` holds rows `v·N_h .. (v+1)·N_h`. Vertical: slice `h`
/// holds rows `h, h + N_h, …`. Slices are concatenated along columns.
pub fn dimension_reduce(block: &CMat, geom: &UpaGeometry, axis: Axis) -> Result<ReducedSnapshots> {
    let (nh, nv) = (geom.count_h, geom.count_v);
    if block.nrows() != nh * nv {
        return Err(Error::ShapeMismatch(format!(
            "block has {} rows, array has {} elements",
            block.nrows(),
            nh * nv
        )));
    }
    let q = block.ncols();
    let data = match axis {
        Axis::Horizontal => CMat::from_fn(nh, nv * q, |h, c| block[((c / q) * nh + h, c % q)]),
        Axis::Vertical => CMat::from_fn(nv, nh * q, |v, c| block[(v * nh + c / q, c % q)]),
    };
    Ok(ReducedSnapshots { axis, data })
}

/// Inverse of [`dimension_reduce`].
pub fn restore_block(snapshots: &ReducedSnapshots, geom: &UpaGeometry) -> CMat {
    let (nh, nv) = (geom.count_h, geom.count_v);
    let d = &snapshots.data;
    match snapshots.axis {
        Axis::Horizontal => {
            let q = d.ncols() / nv;
            CMat::from_fn(nh * nv, q, |r, t| d[(r % nh, (r / nh) * q + t)])
        }
        Axis::Vertical => {
            let q = d.ncols() / nh;
            CMat::from_fn(nh * nv, q, |r, t| d[(r / nh, (r % nh) * q + t)])
        }
    }
}

/// `R = Y·Y^H / Q`.
pub fn sample_covariance(data: &CMat) -> CMat {
    let q = data.ncols().max(1) as f64;
    let r = data * data.adjoint() / C64::new(q, 0.0);
    (&r + r.adjoint()) * C64::new(0.5, 0.0)
}

/// Axis covariance derived from a full-array covariance: the mean of the
/// diagonal blocks that [`dimension_reduce`] would stack.
pub fn reduced_covariance(full: &CMat, geom: &UpaGeometry, axis: Axis) -> CMat {
    let (nh, nv) = (geom.count_h, geom.count_v);
    match axis {
        Axis::Horizontal => {
            let mut r = CMat::zeros(nh, nh);
            for v in 0..nv {
                r += full.view((v * nh, v * nh), (nh, nh));
            }
            r / C64::new(nv as f64, 0.0)
        }
        Axis::Vertical => CMat::from_fn(nv, nv, |a, b| {
            (0..nh).map(|h| full[(a * nh + h, b * nh + h)]).sum::<C64>() / nh as f64
        }),
    }
}

/// Minimum description length estimate of the number of sources, clamped to `[1, n−1]`.
///
/// Eigenvalues are floored at `1e-10·trace` so that noiseless covariances
/// yield a flat noise subspace instead of round-off noise.
pub fn estimate_source_count(eigenvalues: &[f64], snapshot_count: usize) -> usize {
    let n = eigenvalues.len();
    if n < 2 {
        return 1;
    }
    let trace: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let floor = (1e-10 * trace).max(f64::MIN_POSITIVE);
    let ev: Vec<f64> = eigenvalues.iter().map(|v| v.max(floor)).collect();
    let q = snapshot_count.max(1) as f64;
    let mut best = (f64::INFINITY, 1);
    for k in 0..n {
        let tail = &ev[k..];
        let m = tail.len() as f64;
        let arith = tail.iter().sum::<f64>() / m;
        let log_geo = tail.iter().map(|v| v.ln()).sum::<f64>() / m;
        let ratio_log = (log_geo - arith.ln()).min(0.0);
        let kf = k as f64;
        let mdl = -q * m * ratio_log + 0.5 * kf * (2.0 * n as f64 - kf) * q.ln();
        if mdl < best.0 {
            best = (mdl, k);
        }
    }
    best.1.clamp(1, n - 1)
}

fn check_gap(values: &[f64], l: usize) -> Result<()> {
    let trace: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let gap = values[l - 1] - values[l];
    if !(gap > 1e-12 * trace) {
        return Err(Error::DegenerateSubspace { index: l, gap });
    }
    Ok(())
}

fn check_order(r: &CMat, l: usize) -> Result<()> {
    if r.nrows() != r.ncols() || l == 0 || l >= r.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "need 1 <= L < n for a {}x{} covariance, got L = {l}",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

fn to_range(f: f64, max_freq: f64) -> f64 {
    let f = wrap_frequency(f);
    // the largest representable value below d/λ
    f.clamp(-max_freq, max_freq - 1e-15)
}

/// Root-MUSIC estimate of `l` spatial frequencies from an `n × n` covariance.
///
/// With `a(f)_k = e^{-i2πfk}` the null spectrum `a^H E_n E_n^H a` is a
/// Laurent polynomial in `z = e^{i2πf}`; the `l` roots inside the unit
/// circle nearest to it give the frequencies.
pub fn root_music(r: &CMat, l: usize, max_freq: f64) -> Result<Vec<f64>> {
    check_order(r, l)?;
    let n = r.nrows();
    let (values, vectors) = hermitian_eigen_desc(r);
    check_gap(&values, l)?;
    let en = vectors.columns(l, n - l);
    let c = en * en.adjoint();
    // coefficient of z^{n-1+k} is the sum of the k-th diagonal (i - j = k)
    let mut coeffs = vec![ZERO; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            coeffs[n - 1 + i - j] += c[(i, j)];
        }
    }
    coeffs.reverse();
    let mut roots: Vec<C64> = poly_roots(&coeffs)
        .into_iter()
        .filter(|z| z.norm() <= 1.0 + 1e-6)
        .collect();
    roots.sort_by(|a, b| (1.0 - a.norm()).abs().total_cmp(&(1.0 - b.norm()).abs()));
    let mut freqs: Vec<f64> = Vec::with_capacity(l);
    for z in roots {
        let f = z.arg() / (2.0 * PI);
        // both halves of a double root on the circle can land inside
        let dup = freqs.iter().any(|g| wrap_frequency(f - g).abs() < 1e-6);
        if !dup {
            freqs.push(f);
        }
        if freqs.len() == l {
            break;
        }
    }
    if freqs.len() < l {
        return Err(Error::DegenerateSubspace {
            index: freqs.len(),
            gap: 0.0,
        });
    }
    let mut out: Vec<f64> = freqs.into_iter().map(|f| to_range(f, max_freq)).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// TLS-ESPRIT estimate using the overlapping subarrays `0..n−1` and `1..n`.
pub fn tls_esprit(r: &CMat, l: usize, max_freq: f64) -> Result<Vec<f64>> {
    check_order(r, l)?;
    let n = r.nrows();
    let (values, vectors) = hermitian_eigen_desc(r);
    check_gap(&values, l)?;
    let es = vectors.columns(0, l);
    let mut c = CMat::zeros(n - 1, 2 * l);
    c.view_mut((0, 0), (n - 1, l)).copy_from(&es.rows(0, n - 1));
    c.view_mut((0, l), (n - 1, l)).copy_from(&es.rows(1, n - 1));
    let (_, v) = hermitian_eigen_desc(&(c.adjoint() * &c));
    let v12 = v.view((0, l), (l, l)).into_owned();
    let v22 = v.view((l, l), (l, l)).into_owned();
    let v22_inv = v22.try_inverse().ok_or(Error::DegenerateSubspace { index: l, gap: 0.0 })?;
    let psi = -(v12 * v22_inv);
    let mut out: Vec<f64> = eigenvalues(&psi)
        .into_iter()
        .map(|z| to_range(-z.arg() / (2.0 * PI), max_freq))
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn estimate_axis(r: &CMat, l: usize, max_freq: f64, method: DoaMethod) -> Result<Vec<f64>> {
    match method {
        DoaMethod::RootMusic => root_music(r, l, max_freq),
        DoaMethod::Esprit => tls_esprit(r, l, max_freq),
    }
}

/// Pairs vertical and horizontal frequencies into 2-D angles.
///
/// Every pairing (all permutations up to six paths, greedy beyond) is
/// scored by the energy of `data` captured by the span of the resulting
/// steering vectors; the best one wins.
pub fn pair_axes(geom: &UpaGeometry, z_freqs: &[f64], y_freqs: &[f64], data: &CMat) -> Vec<SpatialAngle> {
    let l = z_freqs.len().min(y_freqs.len());
    let score = |angles: &[SpatialAngle]| frob_sq(&project_onto(&steering_matrix(geom, angles), data));
    let build = |perm: &[usize]| -> Vec<SpatialAngle> {
        (0..l).map(|i| SpatialAngle::new(z_freqs[i], y_freqs[perm[i]])).collect()
    };
    if l <= 6 {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for perm in permutations(l) {
            let angles = build(&perm);
            let s = score(&angles);
            if s > best.0 {
                best = (s, angles);
            }
        }
        best.1
    } else {
        // greedy: fix pairs one at a time by single-vector captured energy
        let mut used = vec![false; l];
        let mut perm = vec![0; l];
        for (i, slot) in perm.iter_mut().enumerate() {
            let mut best = (f64::NEG_INFINITY, 0);
            for (j, taken) in used.iter().enumerate() {
                if !taken {
                    let s = score(&[SpatialAngle::new(z_freqs[i], y_freqs[j])]);
                    if s > best.0 {
                        best = (s, j);
                    }
                }
            }
            *slot = best.1;
            used[best.1] = true;
        }
        build(&perm)
    }
}

fn axis_covariance(blocks: &[&CMat], geom: &UpaGeometry, axis: Axis) -> Result<(CMat, usize)> {
    let mut parts = Vec::with_capacity(blocks.len());
    for b in blocks {
        parts.push(dimension_reduce(b, geom, axis)?.data);
    }
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut all = CMat::zeros(rows, cols);
    let mut c0 = 0;
    for p in &parts {
        all.view_mut((0, c0), (rows, p.ncols())).copy_from(p);
        c0 += p.ncols();
    }
    Ok((sample_covariance(&all), cols))
}

/// Common BS angle estimation from the pilot blocks of all users.
///
/// `path_count` overrides the MDL estimate when given.
pub fn common_aoa(
    blocks: &[ReceivedBlock],
    geom: &UpaGeometry,
    method: DoaMethod,
    path_count: Option<usize>,
) -> Result<SteeringEstimate> {
    if blocks.is_empty() {
        return Err(Error::ShapeMismatch("no received blocks".into()));
    }
    let mats: Vec<&CMat> = blocks.iter().map(|b| &b.samples).collect();
    let (r_h, q_h) = axis_covariance(&mats, geom, Axis::Horizontal)?;
    let (r_v, q_v) = axis_covariance(&mats, geom, Axis::Vertical)?;
    let l = match path_count {
        Some(l) => l,
        None => {
            let (eh, _) = hermitian_eigen_desc(&r_h);
            let (ev, _) = hermitian_eigen_desc(&r_v);
            let lh = if geom.count_h > 1 { estimate_source_count(&eh, q_h) } else { 0 };
            let lv = if geom.count_v > 1 { estimate_source_count(&ev, q_v) } else { 0 };
            lh.max(lv).max(1)
        }
    };
    let d = geom.max_frequency();
    let axis_freqs = |r: &CMat, n: usize| -> Result<Vec<f64>> {
        if n == 1 {
            // a single element carries no angular information
            return Ok(vec![0.0; l]);
        }
        if l >= n {
            return Err(Error::ShapeMismatch(format!("{l} paths exceed the {n}-element axis")));
        }
        estimate_axis(r, l, d, method)
    };
    let y = axis_freqs(&r_h, geom.count_h)?;
    let z = axis_freqs(&r_v, geom.count_v)?;
    let cols: usize = mats.iter().map(|m| m.ncols()).sum();
    let mut stacked = CMat::zeros(geom.len(), cols);
    let mut c0 = 0;
    for m in &mats {
        stacked.view_mut((0, c0), (m.nrows(), m.ncols())).copy_from(*m);
        c0 += m.ncols();
    }
    let mut angles = pair_axes(geom, &z, &y, &stacked);
    angles.sort_by(|a, b| a.z_freq.total_cmp(&b.z_freq).then(a.y_freq.total_cmp(&b.y_freq)));
    Ok(SteeringEstimate::from_angles(geom, angles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{complex_gaussian_matrix, steering_1d, steering_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn analytic(n: usize, freqs: &[f64], noise: f64) -> CMat {
        let mut r = CMat::identity(n, n) * C64::new(noise, 0.0);
        for &f in freqs {
            let a = steering_1d(n, f);
            r += &a * a.adjoint();
        }
        r
    }

    #[test]
    fn single_source_recovered() {
        let r = analytic(8, &[0.2], 0.01);
        let f = root_music(&r, 1, 0.5).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-6, "{f:?}");
        let f = tls_esprit(&r, 1, 0.5).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn two_sources_noiseless() {
        let r = analytic(8, &[-0.2, 0.3], 0.0);
        for f in [root_music(&r, 2, 0.5).unwrap(), tls_esprit(&r, 2, 0.5).unwrap()] {
            assert!((f[0] + 0.2).abs() < 1e-6 && (f[1] - 0.3).abs() < 1e-6, "{f:?}");
        }
    }

    #[test]
    fn zero_frequency_is_exact() {
        let r = analytic(6, &[0.0], 0.1);
        assert!(root_music(&r, 1, 0.5).unwrap()[0].abs() < 1e-10);
    }

    #[test]
    fn methods_agree_and_ignore_scaling() {
        let r = analytic(8, &[-0.31, 0.05, 0.22], 0.05);
        let a = root_music(&r, 3, 0.5).unwrap();
        let b = tls_esprit(&r, 3, 0.5).unwrap();
        let c = root_music(&(&r * C64::new(7.5, 0.0)), 3, 0.5).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-4);
            assert!((a[i] - c[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_subspace_flagged() {
        let r = CMat::identity(4, 4);
        assert!(matches!(root_music(&r, 1, 0.5), Err(Error::DegenerateSubspace { .. })));
        assert!(matches!(tls_esprit(&CMat::zeros(4, 4), 1, 0.5), Err(Error::DegenerateSubspace { .. })));
    }

    #[test]
    fn mdl_examples() {
        let mut ev = vec![100.0, 90.0, 80.0];
        ev.extend(std::iter::repeat(1e-6).take(5));
        assert_eq!(estimate_source_count(&ev, 1000), 3);
        assert_eq!(estimate_source_count(&[2.0; 6], 1000), 1);
    }

    #[test]
    fn reduction_is_a_permutation() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let g = UpaGeometry::new(3, 4, 0.5).unwrap();
        let y = complex_gaussian_matrix(&mut rng, 12, 5, 1.0);
        for axis in [Axis::Horizontal, Axis::Vertical] {
            let s = dimension_reduce(&y, &g, axis).unwrap();
            assert_eq!(restore_block(&s, &g), y);
            let mut a: Vec<(u64, u64)> = y.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
            let mut b: Vec<(u64, u64)> = s.data.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
        let flat = UpaGeometry::new(5, 1, 0.5).unwrap();
        let y = complex_gaussian_matrix(&mut rng, 5, 3, 1.0);
        assert_eq!(dimension_reduce(&y, &flat, Axis::Horizontal).unwrap().data, y);
        assert!(dimension_reduce(&y, &g, Axis::Vertical).is_err());
    }

    #[test]
    fn single_path_slices_follow_axis_steering() {
        let g = UpaGeometry::new(4, 3, 0.5).unwrap();
        let angle = SpatialAngle::new(0.17, -0.29);
        let a = steering_vector(&g, angle);
        let y = &a * CMat::from_row_slice(1, 2, &[C64::new(1.0, 2.0), C64::new(-0.5, 0.1)]);
        let s = dimension_reduce(&y, &g, Axis::Horizontal).unwrap();
        let ah = steering_1d(4, angle.y_freq);
        for col in s.data.column_iter() {
            let coef = col[0];
            assert!((col.into_owned() - &ah * coef).norm() < 1e-12);
        }
    }

    #[test]
    fn covariance_basics() {
        assert_eq!(sample_covariance(&CMat::zeros(3, 4)), CMat::zeros(3, 3));
        let y = CMat::from_column_slice(2, 1, &[C64::new(1.0, 1.0), C64::new(0.0, -2.0)]);
        assert!((sample_covariance(&y) - &y * y.adjoint()).norm() < 1e-15);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = complex_gaussian_matrix(&mut rng, 8, 100_000, 2.0);
        let r = sample_covariance(&n);
        for i in 0..8 {
            assert!((r[(i, i)].re / 2.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn common_aoa_single_path_noiseless() {
        let g = UpaGeometry::new(8, 8, 0.5).unwrap();
        let angle = SpatialAngle::new(-0.137, 0.271);
        let a = steering_vector(&g, angle);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = complex_gaussian_matrix(&mut rng, 1, 20, 1.0);
        let block = ReceivedBlock {
            samples: &a * s,
            user_index: 0,
        };
        let est = common_aoa(&[block.clone()], &g, DoaMethod::RootMusic, None).unwrap();
        assert_eq!(est.path_count, 1);
        let corr = (est.steering_matrix.column(0).dotc(&a)).norm() / 64.0;
        assert!(corr >= 1.0 - 1e-9, "{corr}");
        let dup = common_aoa(&[block.clone(), block], &g, DoaMethod::RootMusic, None).unwrap();
        let diff = (dup.angles[0].y_freq - est.angles[0].y_freq).abs();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn pairing_selects_true_combination() {
        let g = UpaGeometry::new(6, 6, 0.5).unwrap();
        let truth = [SpatialAngle::new(0.1, -0.3), SpatialAngle::new(-0.25, 0.2), SpatialAngle::new(0.4, 0.05)];
        let a = steering_matrix(&g, &truth);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let y = &a * complex_gaussian_matrix(&mut rng, 3, 30, 1.0);
        let z: Vec<f64> = truth.iter().map(|t| t.z_freq).collect();
        let mut yf: Vec<f64> = truth.iter().map(|t| t.y_freq).collect();
        yf.reverse();
        let paired = pair_axes(&g, &z, &yf, &y);
        for t in &truth {
            assert!(paired.iter().any(|p| p == t));
        }
    }
}
