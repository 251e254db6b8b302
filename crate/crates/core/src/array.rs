//! UPA steering vectors, geometric channels and pilot synthesis.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, CMat, CVec, C64, ZERO};

/// Uniform planar array on the y (horizontal) / z (vertical) plane.
///
/// Element `(v, h)` sits at index `v * count_h + h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    pub count_h: usize,
    pub count_v: usize,
    pub spacing_over_wavelength: f64,
}

impl UpaGeometry {
    pub fn new(count_h: usize, count_v: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if count_h == 0 || count_v == 0 {
            return Err(Error::InvalidGeometry(format!(
                "element counts must be positive, got {count_h}x{count_v}"
            )));
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength <= 0.5) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing_over_wavelength} outside (0, 0.5] wavelengths"
            )));
        }
        Ok(Self {
            count_h,
            count_v,
            spacing_over_wavelength,
        })
    }

    pub fn len(&self) -> usize {
        self.count_h * self.count_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper end `d/λ` of the spatial frequency range `[-d/λ, d/λ)`.
    pub fn max_frequency(&self) -> f64 {
        self.spacing_over_wavelength
    }

    pub fn contains(&self, angle: SpatialAngle) -> bool {
        let d = self.max_frequency();
        let inside = |f: f64| f >= -d - 1e-12 && f < d + 1e-12;
        inside(angle.z_freq) && inside(angle.y_freq)
    }
}

/// Vertical (`z`) and horizontal (`y`) spatial frequencies of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialAngle {
    pub z_freq: f64,
    pub y_freq: f64,
}

impl SpatialAngle {
    pub fn new(z_freq: f64, y_freq: f64) -> Self {
        Self { z_freq, y_freq }
    }
}

/// One-dimensional ULA response `[1, e^{-i2πf}, …, e^{-i2π(n-1)f}]`.
pub fn steering_1d(n: usize, freq: f64) -> CVec {
    CVec::from_iterator(
        n,
        (0..n).map(|k| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * freq * k as f64)),
    )
}

/// UPA response `a_v(z) ⊗ a_h(y)`.
pub fn steering_vector(geom: &UpaGeometry, angle: SpatialAngle) -> CVec {
    kron_vec(
        &steering_1d(geom.count_v, angle.z_freq),
        &steering_1d(geom.count_h, angle.y_freq),
    )
}

/// Steering vectors stacked as columns.
pub fn steering_matrix(geom: &UpaGeometry, angles: &[SpatialAngle]) -> CMat {
    let mut out = CMat::zeros(geom.len(), angles.len());
    for (j, &a) in angles.iter().enumerate() {
        out.set_column(j, &steering_vector(geom, a));
    }
    out
}

/// 1-D steering vectors stacked as columns.
pub fn steering_matrix_1d(n: usize, freqs: &[f64]) -> CMat {
    let mut out = CMat::zeros(n, freqs.len());
    for (j, &f) in freqs.iter().enumerate() {
        out.set_column(j, &steering_1d(n, f));
    }
    out
}

/// Ground-truth path angles and gains of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub bs_aoas: Vec<SpatialAngle>,
    pub ris_aods: Vec<SpatialAngle>,
    pub ris_bs_gains: Vec<C64>,
    pub user_aoas: Vec<Vec<SpatialAngle>>,
    pub user_gains: Vec<Vec<C64>>,
}

impl ChannelRealization {
    pub fn paths(&self) -> usize {
        self.ris_bs_gains.len()
    }

    pub fn users(&self) -> usize {
        self.user_gains.len()
    }
}

/// RIS-BS channel `H = A_N Λ A_M^H`.
pub fn build_ris_bs_channel(
    bs: &UpaGeometry,
    ris: &UpaGeometry,
    realization: &ChannelRealization,
) -> CMat {
    let a_n = steering_matrix(bs, &realization.bs_aoas);
    let mut a_m = steering_matrix(ris, &realization.ris_aods);
    for (mut col, &g) in a_m.column_iter_mut().zip(&realization.ris_bs_gains) {
        col *= g.conj();
    }
    a_n * a_m.adjoint()
}

/// User-RIS channel `h_k = A_{M,k} β_k`.
pub fn build_user_ris_channel(
    ris: &UpaGeometry,
    realization: &ChannelRealization,
    user: usize,
) -> CVec {
    let a = steering_matrix(ris, &realization.user_aoas[user]);
    let beta = CVec::from_column_slice(&realization.user_gains[user]);
    a * beta
}

/// `H · response · h`, the cascaded channel for one RIS configuration.
pub fn cascaded_channel(h: &CMat, ris_response: &CMat, user_channel: &CVec) -> CVec {
    h * (ris_response * user_channel)
}

/// Draw from `CN(0, variance)`: real and imaginary parts each carry half the variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    if variance <= 0.0 {
        return ZERO;
    }
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
    C64::new(normal.sample(rng), normal.sample(rng))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let mut out = CMat::zeros(rows, cols);
    for z in out.iter_mut() {
        *z = complex_gaussian(rng, variance);
    }
    out
}

/// Draws `count` frequencies for one axis.
///
/// Off grid they are uniform over `[-d, d)`. On grid they are distinct
/// points `-d + 2d·g/points` with `g` drawn without replacement.
fn draw_axis<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    d: f64,
    grid_points: Option<usize>,
) -> Vec<f64> {
    match grid_points {
        None => (0..count).map(|_| rng.random_range(-d..d)).collect(),
        Some(points) => {
            let picks = sample(rng, points, count.min(points));
            let mut out: Vec<f64> = picks
                .iter()
                .map(|g| -d + 2.0 * d * g as f64 / points as f64)
                .collect();
            // more paths than grid points: reuse points cyclically
            while out.len() < count {
                out.push(out[out.len() % points]);
            }
            out
        }
    }
}

fn draw_angles<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    d: f64,
    grid: Option<(usize, usize)>,
) -> Vec<SpatialAngle> {
    let z = draw_axis(rng, count, d, grid.map(|g| g.0));
    let y = draw_axis(rng, count, d, grid.map(|g| g.1));
    z.into_iter().zip(y).map(|(z, y)| SpatialAngle::new(z, y)).collect()
}

/// Draws one channel realization.
///
/// Gains follow `CN(0, 1e-3·d^{-2.2})` on the RIS-BS link and
/// `CN(0, 1e-3·d^{-2.8})` on the user-RIS links. With `on_grid` set, BS
/// angles land on the critical grid (`N_v × N_h` points, so distinct angles
/// give orthogonal steering vectors) and RIS/user angles on the dictionary
/// grids; per-axis frequencies are distinct inside each angle set.
pub fn sample_realization<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let l = config.paths_l;
    let d_bs = config.bs_spacing;
    let d_ris = config.ris_spacing;
    let on_grid = config.on_grid;
    let bs_grid = on_grid.then_some((config.bs_count_v, config.bs_count_h));
    let ris_grid = on_grid.then(|| config.ris_dictionary());
    let user_grid = on_grid.then(|| config.user_dictionary());

    let bs_aoas = draw_angles(rng, l, d_bs, bs_grid);
    let ris_aods = draw_angles(rng, l, d_ris, ris_grid);
    let var_alpha = 1e-3 * config.distance_br_m.powf(-2.2);
    let ris_bs_gains = (0..l).map(|_| complex_gaussian(rng, var_alpha)).collect();

    let var_beta = 1e-3 * config.distance_ru_m.powf(-2.8);
    let mut user_aoas = Vec::with_capacity(config.users);
    let mut user_gains = Vec::with_capacity(config.users);
    for k in 0..config.users {
        let j = config.paths_j_for(k);
        user_aoas.push(draw_angles(rng, j, d_ris, user_grid));
        user_gains.push((0..j).map(|_| complex_gaussian(rng, var_beta)).collect());
    }
    ChannelRealization {
        bs_aoas,
        ris_aods,
        ris_bs_gains,
        user_aoas,
        user_gains,
    }
}

/// Pilot block of one user: `N × τ` samples, one column per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: CMat,
    pub user_index: usize,
}

/// Inputs needed to synthesize received pilots for one user.
pub struct PilotSetup<'a> {
    pub ris_bs: &'a CMat,
    pub user_channel: &'a CVec,
    /// Coupled responses `B_t`, one per pilot slot.
    pub responses: &'a [CMat],
    pub power_w: f64,
    pub noise_bs_w: f64,
    pub noise_ris_w: f64,
}

/// Column `t` is `√p·H·B_t·h_k + H·B_t·n_2 + n_1` with unit pilot symbols.
///
/// The RIS noise `n_2 ~ CN(0, σ2²I_M)` is drawn once per slot and reflected
/// through the same coupled response as the signal.
pub fn synthesize_received<R: Rng + ?Sized>(
    setup: &PilotSetup<'_>,
    user_index: usize,
    rng: &mut R,
) -> ReceivedBlock {
    let n = setup.ris_bs.nrows();
    let tau = setup.responses.len();
    let sqrt_p = setup.power_w.sqrt();
    let mut samples = CMat::zeros(n, tau);
    for (t, b) in setup.responses.iter().enumerate() {
        let mut at_ris = setup.user_channel.scale(sqrt_p);
        if setup.noise_ris_w > 0.0 {
            for x in at_ris.iter_mut() {
                *x += complex_gaussian(rng, setup.noise_ris_w);
            }
        }
        let mut col = setup.ris_bs * (b * at_ris);
        if setup.noise_bs_w > 0.0 {
            for x in col.iter_mut() {
                *x += complex_gaussian(rng, setup.noise_bs_w);
            }
        }
        samples.set_column(t, &col);
    }
    ReceivedBlock {
        samples,
        user_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lstsq, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn geom(h: usize, v: usize) -> UpaGeometry {
        UpaGeometry::new(h, v, 0.5).unwrap()
    }

    #[test]
    fn trivial_steering_cases() {
        let one = steering_vector(&geom(1, 1), SpatialAngle::new(0.3, -0.1));
        assert_eq!(one.len(), 1);
        assert!((one[0] - ONE).norm() < 1e-15);

        let ones = steering_vector(&geom(2, 2), SpatialAngle::new(0.0, 0.0));
        assert!(ones.iter().all(|z| (*z - ONE).norm() < 1e-15));

        let a = steering_vector(&geom(4, 1), SpatialAngle::new(0.0, 0.25));
        let pi = std::f64::consts::PI;
        for (k, z) in a.iter().enumerate() {
            let expect = C64::from_polar(1.0, -pi / 2.0 * k as f64);
            assert!((z - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn steering_index_layout() {
        let g = geom(3, 2);
        let (z, y) = (0.13, -0.31);
        let a = steering_vector(&g, SpatialAngle::new(z, y));
        for v in 0..2 {
            for h in 0..3 {
                let phase = -2.0 * std::f64::consts::PI * (v as f64 * z + h as f64 * y);
                assert!((a[v * 3 + h] - C64::from_polar(1.0, phase)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(UpaGeometry::new(0, 4, 0.5).is_err());
        assert!(UpaGeometry::new(4, 4, 0.6).is_err());
        assert!(UpaGeometry::new(4, 4, 0.0).is_err());
    }

    fn single_path(alpha: C64) -> ChannelRealization {
        ChannelRealization {
            bs_aoas: vec![SpatialAngle::new(0.0, 0.0)],
            ris_aods: vec![SpatialAngle::new(0.0, 0.0)],
            ris_bs_gains: vec![alpha],
            user_aoas: vec![vec![SpatialAngle::new(0.0, 0.0)]],
            user_gains: vec![vec![ONE]],
        }
    }

    #[test]
    fn rank_one_channels() {
        let (bs, ris) = (geom(2, 2), geom(3, 1));
        let h = build_ris_bs_channel(&bs, &ris, &single_path(ONE));
        assert!(h.iter().all(|z| (*z - ONE).norm() < 1e-15));
        let c = C64::new(0.3, -1.2);
        let h = build_ris_bs_channel(&bs, &ris, &single_path(c));
        assert!((h.norm() - c.norm() * 12f64.sqrt()).abs() < 1e-12);
        let u = build_user_ris_channel(&ris, &single_path(ONE), 0);
        assert!(u.iter().all(|z| (*z - ONE).norm() < 1e-15));
    }

    #[test]
    fn opposite_gains_cancel() {
        let ris = geom(2, 2);
        let mut r = single_path(ONE);
        r.user_aoas[0] = vec![SpatialAngle::new(0.1, 0.2); 2];
        r.user_gains[0] = vec![ONE, -ONE];
        assert!(build_user_ris_channel(&ris, &r, 0).norm() < 1e-15);
    }

    #[test]
    fn ris_bs_column_space_is_bs_steering_span() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let cfg = SystemConfig::default();
        let r = sample_realization(&cfg, &mut rng);
        let (bs, ris) = (cfg.bs_geometry().unwrap(), cfg.ris_geometry().unwrap());
        let h = build_ris_bs_channel(&bs, &ris, &r);
        let a_n = steering_matrix(&bs, &r.bs_aoas);
        let fit = &a_n * lstsq(&a_n, &h);
        assert!((fit - &h).norm() <= 1e-12 * h.norm());
    }

    #[test]
    fn user_channel_matches_entrywise_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let cfg = SystemConfig::default();
        let r = sample_realization(&cfg, &mut rng);
        let ris = cfg.ris_geometry().unwrap();
        let h = build_user_ris_channel(&ris, &r, 1);
        for v in 0..ris.count_v {
            for hh in 0..ris.count_h {
                let mut acc = ZERO;
                for (a, b) in r.user_aoas[1].iter().zip(&r.user_gains[1]) {
                    let ph = -2.0 * std::f64::consts::PI * (v as f64 * a.z_freq + hh as f64 * a.y_freq);
                    acc += b * C64::from_polar(1.0, ph);
                }
                assert!((h[v * ris.count_h + hh] - acc).norm() <= 1e-14 * (1.0 + acc.norm()));
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let cfg = SystemConfig::default();
        let a = sample_realization(&cfg, &mut ChaCha20Rng::seed_from_u64(42));
        let b = sample_realization(&cfg, &mut ChaCha20Rng::seed_from_u64(42));
        assert_eq!(a, b);
        let ris = cfg.ris_geometry().unwrap();
        assert!(a.ris_aods.iter().all(|x| ris.contains(*x)));
        assert_eq!(a.users(), cfg.users);
        assert_eq!(a.paths(), cfg.paths_l);
    }

    #[test]
    fn gain_variances_follow_distance_model() {
        let cfg = SystemConfig {
            paths_l: 1,
            users: 1,
            paths_j: 1,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let draws = 20_000;
        let (mut va, mut vb) = (0.0, 0.0);
        for _ in 0..draws {
            let r = sample_realization(&cfg, &mut rng);
            va += r.ris_bs_gains[0].norm_sqr();
            vb += r.user_gains[0][0].norm_sqr();
        }
        va /= draws as f64;
        vb /= draws as f64;
        let ea = 1e-3 * 100f64.powf(-2.2);
        let eb = 1e-3 * 10f64.powf(-2.8);
        assert!((va / ea - 1.0).abs() < 0.05, "{va} vs {ea}");
        assert!((vb / eb - 1.0).abs() < 0.05, "{vb} vs {eb}");
    }

    #[test]
    fn on_grid_angles_are_distinct_per_axis() {
        let cfg = SystemConfig {
            on_grid: true,
            ..SystemConfig::default()
        };
        let r = sample_realization(&cfg, &mut ChaCha20Rng::seed_from_u64(1));
        let step = 2.0 * cfg.bs_spacing / cfg.bs_count_h as f64;
        for a in &r.bs_aoas {
            let g = (a.y_freq + cfg.bs_spacing) / step;
            assert!((g - g.round()).abs() < 1e-12);
        }
        for set in [&r.bs_aoas, &r.ris_aods] {
            for i in 0..set.len() {
                for j in i + 1..set.len() {
                    assert_ne!(set[i].z_freq, set[j].z_freq);
                    assert_ne!(set[i].y_freq, set[j].y_freq);
                }
            }
        }
    }

    #[test]
    fn pure_noise_block_has_expected_variance() {
        let h = CMat::identity(100, 4);
        let u = CVec::from_element(4, ONE);
        let responses = vec![CMat::identity(4, 4); 100];
        let setup = PilotSetup {
            ris_bs: &h,
            user_channel: &u,
            responses: &responses,
            power_w: 0.0,
            noise_bs_w: 2.5,
            noise_ris_w: 0.0,
        };
        let block = synthesize_received(&setup, 0, &mut ChaCha20Rng::seed_from_u64(7));
        let var = block.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
        assert!((var / 2.5 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn received_block_is_linear_in_user_channel() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let h = complex_gaussian_matrix(&mut rng, 6, 3, 1.0);
        let u = complex_gaussian_matrix(&mut rng, 3, 1, 1.0).column(0).into_owned();
        let responses: Vec<CMat> = (0..4).map(|_| complex_gaussian_matrix(&mut rng, 3, 3, 1.0)).collect();
        let c = C64::new(-0.7, 2.0);
        let scaled = u.scale(1.0) * c;
        let mk = |uc: &CVec| {
            let setup = PilotSetup {
                ris_bs: &h,
                user_channel: uc,
                responses: &responses,
                power_w: 2.0,
                noise_bs_w: 0.0,
                noise_ris_w: 0.0,
            };
            synthesize_received(&setup, 0, &mut ChaCha20Rng::seed_from_u64(0)).samples
        };
        let diff = mk(&scaled) - mk(&u) * c;
        assert!(diff.norm() < 1e-12 * mk(&scaled).norm());
    }

    #[test]
    fn cascade_matches_explicit_chain() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let h = complex_gaussian_matrix(&mut rng, 5, 4, 1.0);
        let b = complex_gaussian_matrix(&mut rng, 4, 4, 1.0);
        let u = complex_gaussian_matrix(&mut rng, 4, 1, 1.0).column(0).into_owned();
        let chain = &h * (&b * &u);
        assert!((cascaded_channel(&h, &b, &u) - chain).norm() < 1e-13);
        let e1 = CVec::from_fn(3, |i, _| if i == 0 { ONE } else { ZERO });
        let id = CMat::identity(3, 3);
        assert_eq!(cascaded_channel(&id, &id, &e1), e1);
    }
}
