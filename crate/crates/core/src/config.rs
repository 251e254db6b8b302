//! Experiment configuration.
//!
//! The on-disk format is TOML whose keys are the [`SystemConfig`] field
//! names. Missing keys take the default scenario values and unknown keys are
//! rejected. Powers are given in dBm; [`SystemConfig::link_budget`] converts
//! them to watts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::UpaGeometry;
use crate::coupling::WireGeometry;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ProposedRootmusic,
    ProposedEsprit,
    McUnaware,
    DirectOmp,
    Sbl,
    NonOptimizedPhases,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ProposedRootmusic,
        Method::ProposedEsprit,
        Method::McUnaware,
        Method::DirectOmp,
        Method::Sbl,
        Method::NonOptimizedPhases,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ProposedRootmusic => "proposed-rootmusic",
            Method::ProposedEsprit => "proposed-esprit",
            Method::McUnaware => "mc-unaware",
            Method::DirectOmp => "direct-omp",
            Method::Sbl => "sbl",
            Method::NonOptimizedPhases => "non-optimized-phases",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Every array, channel, power, pilot and dictionary parameter of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub bs_count_h: usize,
    pub bs_count_v: usize,
    /// BS element spacing in wavelengths.
    pub bs_spacing: f64,
    pub ris_count_h: usize,
    pub ris_count_v: usize,
    /// RIS element spacing in wavelengths.
    pub ris_spacing: f64,
    /// Number of users `K`.
    pub users: usize,
    /// Paths `L` on the RIS-BS link.
    pub paths_l: usize,
    /// Paths `J` on every user-RIS link, unless `paths_j_per_user` is set.
    pub paths_j: usize,
    pub paths_j_per_user: Vec<usize>,
    pub power_dbm: f64,
    pub noise_bs_dbm: f64,
    pub noise_ris_dbm: f64,
    pub carrier_hz: f64,
    /// Wire length in wavelengths.
    pub wire_length: f64,
    /// Wire radius in wavelengths.
    pub wire_radius: f64,
    pub z0_ohms: f64,
    pub distance_br_m: f64,
    pub distance_ru_m: f64,
    /// Pilot length of the typical user.
    pub pilot_first: usize,
    /// Pilot length of every other user.
    pub pilot_other: usize,
    /// RIS-side dictionary resolution `(D_v, D_h)`; twice the array size when unset.
    pub dict_ris: Option<[usize; 2]>,
    /// User-side dictionary resolution `(D_v, D_h)`; twice the array size when unset.
    pub dict_user: Option<[usize; 2]>,
    /// BS dictionary resolution for Direct-OMP; twice the array size when unset.
    pub dict_bs: Option<[usize; 2]>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    /// Snap path angles onto the dictionary grids.
    pub on_grid: bool,
    pub quadrature_nodes: usize,
    pub phase_max_iter: usize,
    /// Optional precomputed training matrix (CSV with columns m,t,re,im).
    pub phase_schedule: Option<PathBuf>,
    pub direct_omp_memory_mib: usize,
}

/// Transmit and noise powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub power_w: f64,
    pub noise_bs_w: f64,
    pub noise_ris_w: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bs_count_h: 8,
            bs_count_v: 8,
            bs_spacing: 0.5,
            ris_count_h: 4,
            ris_count_v: 4,
            ris_spacing: 0.5,
            users: 4,
            paths_l: 3,
            paths_j: 2,
            paths_j_per_user: Vec::new(),
            power_dbm: 25.0,
            noise_bs_dbm: -80.0,
            noise_ris_dbm: -80.0,
            carrier_hz: 28e9,
            wire_length: 1.0 / 32.0,
            wire_radius: 1.0 / 500.0,
            z0_ohms: 50.0,
            distance_br_m: 100.0,
            distance_ru_m: 10.0,
            pilot_first: 30,
            pilot_other: 22,
            dict_ris: None,
            dict_user: None,
            dict_bs: None,
            methods: vec![
                Method::ProposedRootmusic,
                Method::ProposedEsprit,
                Method::McUnaware,
            ],
            trials: 200,
            seed: 1,
            on_grid: false,
            quadrature_nodes: 64,
            phase_max_iter: 300,
            phase_schedule: None,
            direct_omp_memory_mib: 512,
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "configuration",
            message: e.to_string(),
        })?;
        cfg.validated()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative schedule paths resolve against the config file
        if let (Some(p), Some(dir)) = (cfg.phase_schedule.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks invariants.
    pub fn validated(self) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.bs_geometry()?;
        self.ris_geometry()?;
        if self.users == 0 || self.paths_l == 0 || self.paths_j == 0 {
            return bad("users, paths_l and paths_j must be positive".into());
        }
        if !self.paths_j_per_user.is_empty() {
            if self.paths_j_per_user.len() != self.users {
                return bad(format!(
                    "paths_j_per_user has {} entries for {} users",
                    self.paths_j_per_user.len(),
                    self.users
                ));
            }
            if self.paths_j_per_user.contains(&0) {
                return bad("paths_j_per_user entries must be positive".into());
            }
        }
        if self.pilot_other == 0 || self.pilot_first < self.pilot_other {
            return bad(format!(
                "pilot lengths need pilot_first >= pilot_other >= 1, got {} and {}",
                self.pilot_first, self.pilot_other
            ));
        }
        for (name, v) in [
            ("power_dbm", self.power_dbm),
            ("noise_bs_dbm", self.noise_bs_dbm),
            ("noise_ris_dbm", self.noise_ris_dbm),
        ] {
            // -inf dBm is a legitimate way to switch a noise source off
            if v.is_nan() || v == f64::INFINITY {
                return bad(format!("{name} must be a number, got {v}"));
            }
        }
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("wire_length", self.wire_length),
            ("wire_radius", self.wire_radius),
            ("z0_ohms", self.z0_ohms),
            ("distance_br_m", self.distance_br_m),
            ("distance_ru_m", self.distance_ru_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.wire_radius > self.wire_length / 10.0 {
            return bad("thin-wire model needs wire_radius <= wire_length / 10".into());
        }
        let (rv, rh) = self.ris_dictionary();
        let (uv, uh) = self.user_dictionary();
        let (bv, bh) = self.bs_dictionary();
        if rv < self.ris_count_v || rh < self.ris_count_h || uv < self.ris_count_v || uh < self.ris_count_h {
            return bad("RIS and user dictionaries must be at least as large as the RIS".into());
        }
        if bv < self.bs_count_v || bh < self.bs_count_h {
            return bad("BS dictionary must be at least as large as the BS array".into());
        }
        if self.quadrature_nodes < 2 {
            return bad("quadrature_nodes must be at least 2".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.on_grid {
            let cap = self.paths_l.max((0..self.users).map(|k| self.paths_j_for(k)).max().unwrap_or(1));
            if self.paths_l > self.bs_count_h.min(self.bs_count_v) || cap > rv.min(rh).min(uv).min(uh) {
                return bad("on-grid sampling needs distinct grid points for every path".into());
            }
        }
        Ok(self)
    }

    /// Powers converted from dBm to watts.
    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            power_w: dbm_to_watts(self.power_dbm),
            noise_bs_w: dbm_to_watts(self.noise_bs_dbm),
            noise_ris_w: dbm_to_watts(self.noise_ris_dbm),
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn bs_geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::new(self.bs_count_h, self.bs_count_v, self.bs_spacing)
    }

    pub fn ris_geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::new(self.ris_count_h, self.ris_count_v, self.ris_spacing)
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_count_h * self.ris_count_v
    }

    pub fn bs_elements(&self) -> usize {
        self.bs_count_h * self.bs_count_v
    }

    pub fn wire_geometry(&self) -> Result<WireGeometry> {
        let lambda = self.wavelength_m();
        WireGeometry::planar(
            self.ris_count_h,
            self.ris_count_v,
            self.ris_spacing * lambda,
            self.wire_length * lambda,
            self.wire_radius * lambda,
            lambda,
        )
    }

    pub fn paths_j_for(&self, user: usize) -> usize {
        self.paths_j_per_user.get(user).copied().unwrap_or(self.paths_j)
    }

    pub fn max_paths_j(&self) -> usize {
        (0..self.users).map(|k| self.paths_j_for(k)).max().unwrap_or(self.paths_j)
    }

    pub fn pilot_len(&self, user: usize) -> usize {
        if user == 0 {
            self.pilot_first
        } else {
            self.pilot_other
        }
    }

    /// RIS dictionary resolution `(D_v, D_h)`.
    pub fn ris_dictionary(&self) -> (usize, usize) {
        let [v, h] = self.dict_ris.unwrap_or([2 * self.ris_count_v, 2 * self.ris_count_h]);
        (v, h)
    }

    /// User-side dictionary resolution `(D_v, D_h)`.
    pub fn user_dictionary(&self) -> (usize, usize) {
        let [v, h] = self.dict_user.unwrap_or([2 * self.ris_count_v, 2 * self.ris_count_h]);
        (v, h)
    }

    pub fn bs_dictionary(&self) -> (usize, usize) {
        let [v, h] = self.dict_bs.unwrap_or([2 * self.bs_count_v, 2 * self.bs_count_h]);
        (v, h)
    }

    /// Sets the pilot lengths from an average overhead `T`.
    ///
    /// The typical user gets eight more slots than the others; with `K = 4`
    /// this gives `τ_1 = T + 6` and `τ_k = T − 2`.
    pub fn set_average_pilots(&mut self, average: f64) -> Result<()> {
        let (first, other) = pilot_split(average, self.users)?;
        self.pilot_first = first;
        self.pilot_other = other;
        Ok(())
    }
}

/// `(τ_1, τ_k)` with `τ_1 − τ_k = 8` and mean `T` over `K` users.
pub fn pilot_split(average: f64, users: usize) -> Result<(usize, usize)> {
    if users == 0 || !(average >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "average pilot overhead {average} with {users} users"
        )));
    }
    if users == 1 {
        let t = average.round() as usize;
        return Ok((t, t));
    }
    let other = (average - 8.0 / users as f64).round();
    if other < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "average pilot overhead {average} too small for {users} users"
        )));
    }
    let other = other as usize;
    Ok((other + 8, other))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_scenario() {
        let c = SystemConfig::default();
        assert_eq!((c.bs_elements(), c.ris_elements(), c.users, c.paths_l, c.paths_j), (64, 16, 4, 3, 2));
        let b = c.link_budget();
        assert!((b.power_w - 0.316_227_766).abs() < 1e-8);
        assert!((b.noise_bs_w - 1e-11).abs() < 1e-22);
        assert_eq!(SystemConfig { noise_ris_dbm: f64::NEG_INFINITY, ..c.clone() }.link_budget().noise_ris_w, 0.0);
        assert_eq!(c.ris_dictionary(), (8, 8));
        assert_eq!((c.pilot_first, c.pilot_other), (30, 22));
    }

    #[test]
    fn empty_toml_gives_defaults() {
        assert_eq!(SystemConfig::from_toml_str("").unwrap(), SystemConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = SystemConfig::default();
        c.users = 2;
        c.dict_ris = Some([6, 10]);
        c.methods = vec![Method::Sbl, Method::DirectOmp];
        let back = SystemConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        assert!(matches!(
            SystemConfig::from_toml_str("bogus = 1"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            SystemConfig::from_toml_str("ris_spacing = 0.7"),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(SystemConfig::from_toml_str("pilot_first = 10\npilot_other = 20").is_err());
        assert!(SystemConfig::from_toml_str("methods = [\"nope\"]").is_err());
        assert!(SystemConfig::from_toml_str("methods = [\"sbl\", \"mc-unaware\"]").is_ok());
    }

    #[test]
    fn pilot_split_reproduces_reference_allocations() {
        assert_eq!(pilot_split(24.0, 4).unwrap(), (30, 22));
        assert_eq!(pilot_split(16.0, 4).unwrap(), (22, 14));
        assert_eq!(pilot_split(12.0, 1).unwrap(), (12, 12));
        assert_eq!(pilot_split(20.0, 2).unwrap(), (24, 16));
        assert!(pilot_split(2.0, 4).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
