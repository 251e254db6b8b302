//! Seeded Monte Carlo trials, parameter sweeps and result files.
//!
//! Every trial draws from its own ChaCha20 stream `(seed, trial)`, so trials
//! can run in any order and the same trial index sees the same channel and
//! noise shapes at every sweep point. Scattering matrices and optimized
//! schedules are cached across trials.

pub mod plot;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::array::{
    build_ris_bs_channel, build_user_ris_channel, sample_realization, synthesize_received, PilotSetup, ReceivedBlock,
};
use crate::config::{Method, SystemConfig};
use crate::coupling::ScatteringModel;
use crate::csvio::{parse_phase_csv, write_matrix_csv, write_sweep_csv};
use crate::doa::{common_aoa, DoaMethod, SteeringEstimate};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::phase::{optimize, OptimizerOptions, OptimizerState, PhaseSchedule};
use crate::protocol::{
    direct_omp_estimate, mc_unaware_estimate, nmse, sbl_estimate, three_stage_estimate, Dictionaries,
    DirectOmpOptions, StageInput, StageOptions, StageTimings,
};
use crate::sparse::{grid_dictionary, SblOptions};

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Transmit power in dBm.
    Power,
    /// Average pilot overhead `T`.
    Pilot,
    /// RIS inter-element spacing in wavelengths.
    Spacing,
    /// Number of RIS elements (a square `√M × √M` array).
    RisSize,
    PathsL,
    PathsJ,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::Power,
        SweepAxis::Pilot,
        SweepAxis::Spacing,
        SweepAxis::RisSize,
        SweepAxis::PathsL,
        SweepAxis::PathsJ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Pilot => "pilot",
            SweepAxis::Spacing => "spacing",
            SweepAxis::RisSize => "ris_size",
            SweepAxis::PathsL => "paths_L",
            SweepAxis::PathsJ => "paths_J",
        }
    }

    /// Desk-scale default grid.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Power => vec![5.0, 15.0, 25.0, 35.0],
            SweepAxis::Pilot => vec![12.0, 16.0, 20.0, 24.0, 28.0],
            SweepAxis::Spacing => vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 12.0],
            SweepAxis::RisSize => vec![4.0, 9.0, 16.0, 25.0],
            SweepAxis::PathsL => vec![1.0, 2.0, 3.0, 4.0],
            SweepAxis::PathsJ => vec![1.0, 2.0, 3.0, 4.0],
        }
    }

    /// `config` with this axis set to `value`, validated.
    pub fn apply(self, config: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        let mut c = config.clone();
        match self {
            SweepAxis::Power => c.power_dbm = value,
            SweepAxis::Pilot => c.set_average_pilots(value)?,
            SweepAxis::Spacing => c.ris_spacing = value,
            SweepAxis::RisSize => {
                let m = count(value)?;
                let side = (m as f64).sqrt().round() as usize;
                if side * side != m {
                    return Err(Error::InvalidConfig(format!("ris_size {m} is not a square")));
                }
                c.ris_count_h = side;
                c.ris_count_v = side;
                c.dict_ris = None;
                c.dict_user = None;
            }
            SweepAxis::PathsL => c.paths_l = count(value)?,
            SweepAxis::PathsJ => {
                c.paths_j = count(value)?;
                c.paths_j_per_user.clear();
            }
        }
        c.validated()
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ScatteringKey {
    count_h: usize,
    count_v: usize,
    spacing: u64,
    wire_length: u64,
    wire_radius: u64,
    z0: u64,
    nodes: usize,
}

impl ScatteringKey {
    fn new(cfg: &SystemConfig) -> Self {
        Self {
            count_h: cfg.ris_count_h,
            count_v: cfg.ris_count_v,
            spacing: cfg.ris_spacing.to_bits(),
            wire_length: cfg.wire_length.to_bits(),
            wire_radius: cfg.wire_radius.to_bits(),
            z0: cfg.z0_ohms.to_bits(),
            nodes: cfg.quadrature_nodes,
        }
    }

    fn label(&self) -> String {
        format!(
            "{}x{}_d{}_l{}_a{}_z{}_n{}",
            self.count_v,
            self.count_h,
            f64::from_bits(self.spacing),
            f64::from_bits(self.wire_length),
            f64::from_bits(self.wire_radius),
            f64::from_bits(self.z0),
            self.nodes
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ScheduleKey {
    scattering: ScatteringKey,
    tau: usize,
    seed: u64,
    max_iter: usize,
    file: Option<PathBuf>,
}

/// Scattering matrices keyed by RIS geometry and wire parameters, and
/// training schedules keyed by scattering matrix and pilot length.
#[derive(Default)]
pub struct Caches {
    scattering: Mutex<HashMap<ScatteringKey, Arc<ScatteringModel>>>,
    schedules: Mutex<HashMap<ScheduleKey, Arc<PhaseSchedule>>>,
}

impl Caches {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scattering(&self, cfg: &SystemConfig) -> Result<Arc<ScatteringModel>> {
        let key = ScatteringKey::new(cfg);
        let mut map = self.scattering.lock().expect("scattering cache poisoned");
        if let Some(s) = map.get(&key) {
            return Ok(s.clone());
        }
        debug!("computing scattering matrix for {}", key.label());
        let model = Arc::new(ScatteringModel::from_geometry(&cfg.wire_geometry()?, cfg.z0_ohms, cfg.quadrature_nodes)?);
        map.insert(key, model.clone());
        Ok(model)
    }

    /// Installs `model` as the scattering model for `cfg`'s geometry, replacing
    /// any cached one (and the schedules derived from it).
    pub fn preload_scattering(&self, cfg: &SystemConfig, model: ScatteringModel) {
        let key = ScatteringKey::new(cfg);
        self.schedules
            .lock()
            .expect("schedule cache poisoned")
            .retain(|k, _| k.scattering != key);
        self.scattering.lock().expect("scattering cache poisoned").insert(key, Arc::new(model));
    }

    /// Every cached scattering matrix with a descriptive label, sorted by label.
    pub fn scattering_entries(&self) -> Vec<(String, CMat)> {
        let map = self.scattering.lock().expect("scattering cache poisoned");
        let mut out: Vec<(String, CMat)> = map.iter().map(|(k, v)| (k.label(), v.scattering.clone())).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// The training schedule of length `tau`.
    ///
    /// With `phase_schedule` set, the first `tau` columns of that file;
    /// otherwise the manifold-optimized schedule started from a Bernoulli
    /// draw on a stream reserved for `tau`.
    pub fn schedule(&self, cfg: &SystemConfig, tau: usize) -> Result<Arc<PhaseSchedule>> {
        let scattering = self.scattering(cfg)?;
        let key = ScheduleKey {
            scattering: ScatteringKey::new(cfg),
            tau,
            seed: cfg.seed,
            max_iter: cfg.phase_max_iter,
            file: cfg.phase_schedule.clone(),
        };
        let mut map = self.schedules.lock().expect("schedule cache poisoned");
        if let Some(s) = map.get(&key) {
            return Ok(s.clone());
        }
        let m = cfg.ris_elements();
        let schedule = match &cfg.phase_schedule {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let gamma = parse_phase_csv(&text)?;
                if gamma.nrows() != m || gamma.ncols() < tau {
                    return Err(Error::InvalidConfig(format!(
                        "{}: schedule is {}×{}, need {m} rows and at least {tau} columns",
                        path.display(),
                        gamma.nrows(),
                        gamma.ncols()
                    )));
                }
                PhaseSchedule::new(gamma.columns(0, tau).into_owned(), &scattering.scattering)?
            }
            None => {
                let (opt, state) = design_schedule(cfg, &scattering.scattering, tau)?;
                debug!(
                    "optimized {m}×{tau} schedule: objective {:.4e} -> {:.4e} in {} iterations",
                    state.objective_trace[0],
                    state.objective_trace.last().copied().unwrap_or(f64::NAN),
                    state.iterations
                );
                opt
            }
        };
        let schedule = Arc::new(schedule);
        map.insert(key, schedule.clone());
        Ok(schedule)
    }
}

/// Manifold-optimized schedule of length `tau`, started from a Bernoulli draw
/// on the stream `u64::MAX − tau` of `cfg.seed`.
pub fn design_schedule(cfg: &SystemConfig, scattering: &CMat, tau: usize) -> Result<(PhaseSchedule, OptimizerState)> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX - tau as u64);
    let init = PhaseSchedule::bernoulli(cfg.ris_elements(), tau, scattering, &mut rng)?;
    let options = OptimizerOptions {
        max_iter: cfg.phase_max_iter,
        ..OptimizerOptions::for_size(cfg.ris_elements(), tau)
    };
    optimize(&init, options)
}

/// RNG for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `1.0` when the estimator failed.
    pub nmse: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub outcomes: Vec<MethodOutcome>,
    /// Stage timings of the first proposed method that ran.
    pub timings: Option<StageTimings>,
}

impl TrialRecord {
    pub fn nmse(&self, method: Method) -> Option<f64> {
        self.outcomes.iter().find(|o| o.method == method).map(|o| o.nmse)
    }
}

/// Channel draw, schedules and pilot blocks for one training scheme.
struct Observation {
    schedules: Vec<Arc<PhaseSchedule>>,
    blocks: Vec<ReceivedBlock>,
    truths: Vec<CMat>,
}

impl Observation {
    fn inputs(&self) -> Vec<StageInput<'_>> {
        self.blocks
            .iter()
            .zip(&self.schedules)
            .map(|(b, s)| StageInput {
                user_index: b.user_index,
                block: &b.samples,
                responses: &s.responses,
            })
            .collect()
    }
}

fn observe(
    cfg: &SystemConfig,
    ris_bs: &CMat,
    users: &[CVec],
    schedules: Vec<Arc<PhaseSchedule>>,
    noise_rng: &mut ChaCha20Rng,
) -> Observation {
    let budget = cfg.link_budget();
    let mut blocks = Vec::with_capacity(users.len());
    let mut truths = Vec::with_capacity(users.len());
    for (k, (h, s)) in users.iter().zip(&schedules).enumerate() {
        let mut setup = PilotSetup {
            ris_bs,
            user_channel: h,
            responses: &s.responses,
            power_w: budget.power_w,
            noise_bs_w: budget.noise_bs_w,
            noise_ris_w: budget.noise_ris_w,
        };
        blocks.push(synthesize_received(&setup, k, noise_rng));
        setup.noise_bs_w = 0.0;
        setup.noise_ris_w = 0.0;
        truths.push(synthesize_received(&setup, k, noise_rng).samples);
    }
    Observation {
        schedules,
        blocks,
        truths,
    }
}

fn stage1(cfg: &SystemConfig, obs: &Observation, method: DoaMethod) -> Result<SteeringEstimate> {
    common_aoa(&obs.blocks, &cfg.bs_geometry()?, method, None)
}

fn run_three_stage(
    cfg: &SystemConfig,
    obs: &Observation,
    dicts: &Dictionaries,
    method: DoaMethod,
) -> Result<(f64, StageTimings)> {
    let options = stage_options(cfg);
    let s1 = stage1(cfg, obs, method)?;
    let out = three_stage_estimate(&s1, &obs.inputs(), &cfg.ris_geometry()?, dicts, options)?;
    let predictions: Vec<CMat> = out
        .estimates
        .iter()
        .zip(&obs.schedules)
        .map(|(e, s)| e.predict(&s.lifted, options.power_w))
        .collect();
    Ok((nmse(&predictions, &obs.truths), out.timings))
}

fn stage_options(cfg: &SystemConfig) -> StageOptions {
    let budget = cfg.link_budget();
    StageOptions {
        power_w: budget.power_w,
        noise_bs_w: budget.noise_bs_w,
        paths_j: cfg.max_paths_j(),
    }
}

/// One realization evaluated with every configured method.
///
/// Setup failures (coupling model, schedules) are returned as errors; an
/// estimator failure is recorded as NMSE 1 with `failed` set.
pub fn run_trial(cfg: &SystemConfig, trial: usize, caches: &Caches) -> Result<TrialRecord> {
    let bs = cfg.bs_geometry()?;
    let ris = cfg.ris_geometry()?;
    let mut rng = trial_rng(cfg.seed, trial);
    let seeds: [u64; 4] = rng.random();
    let realization = sample_realization(cfg, &mut ChaCha20Rng::seed_from_u64(seeds[0]));
    let ris_bs = build_ris_bs_channel(&bs, &ris, &realization);
    let users: Vec<CVec> = (0..cfg.users).map(|k| build_user_ris_channel(&ris, &realization, k)).collect();
    let scattering = caches.scattering(cfg)?;
    let schedules = (0..cfg.users)
        .map(|k| caches.schedule(cfg, cfg.pilot_len(k)))
        .collect::<Result<Vec<_>>>()?;
    let optimized = observe(cfg, &ris_bs, &users, schedules, &mut ChaCha20Rng::seed_from_u64(seeds[2]));
    let dicts = Dictionaries::new(&ris, cfg.ris_dictionary(), cfg.user_dictionary());
    let options = stage_options(cfg);

    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    let mut timings = None;
    for &method in &cfg.methods {
        let result: Result<f64> = match method {
            Method::ProposedRootmusic | Method::ProposedEsprit | Method::NonOptimizedPhases => {
                let (doa, obs) = match method {
                    Method::ProposedEsprit => (DoaMethod::Esprit, None),
                    Method::ProposedRootmusic => (DoaMethod::RootMusic, None),
                    _ => {
                        let mut brng = ChaCha20Rng::seed_from_u64(seeds[1]);
                        let base = PhaseSchedule::bernoulli(ris.len(), cfg.pilot_first, &scattering.scattering, &mut brng)?;
                        let scheds = (0..cfg.users).map(|k| Arc::new(base.truncated(cfg.pilot_len(k)))).collect();
                        let obs = observe(cfg, &ris_bs, &users, scheds, &mut ChaCha20Rng::seed_from_u64(seeds[3]));
                        (DoaMethod::RootMusic, Some(obs))
                    }
                };
                run_three_stage(cfg, obs.as_ref().unwrap_or(&optimized), &dicts, doa).map(|(v, t)| {
                    if timings.is_none() && method != Method::NonOptimizedPhases {
                        timings = Some(t);
                    }
                    v
                })
            }
            Method::McUnaware => stage1(cfg, &optimized, DoaMethod::RootMusic).and_then(|s1| {
                let mut preds = Vec::with_capacity(cfg.users);
                for (b, s) in optimized.blocks.iter().zip(&optimized.schedules) {
                    let est = mc_unaware_estimate(&s1, b.user_index, &b.samples, &s.gamma, &dicts.ris, options)?;
                    preds.push(est.predict(&s.gamma, options.power_w));
                }
                Ok(nmse(&preds, &optimized.truths))
            }),
            Method::Sbl => stage1(cfg, &optimized, DoaMethod::RootMusic).and_then(|s1| {
                let mut preds = Vec::with_capacity(cfg.users);
                for (input, s) in optimized.inputs().iter().zip(&optimized.schedules) {
                    let est = sbl_estimate(&s1, input, &ris, &dicts, options, SblOptions::default())?;
                    preds.push(est.predict(&s.lifted, options.power_w));
                }
                Ok(nmse(&preds, &optimized.truths))
            }),
            Method::DirectOmp => {
                let (bv, bh) = cfg.bs_dictionary();
                let bs_dict = grid_dictionary(&bs, bv, bh);
                let opts = DirectOmpOptions {
                    power_w: options.power_w,
                    noise_bs_w: options.noise_bs_w,
                    max_sparsity: cfg.paths_l * cfg.paths_l * cfg.max_paths_j(),
                    memory_cap_bytes: cfg.direct_omp_memory_mib << 20,
                };
                let mut preds = Vec::with_capacity(cfg.users);
                let mut err = None;
                for (input, s) in optimized.inputs().iter().zip(&optimized.schedules) {
                    match direct_omp_estimate(input, &bs_dict, &dicts, opts) {
                        Ok(est) => preds.push(est.predict(&s.lifted, options.power_w)),
                        Err(e) => {
                            err = Some(e);
                            break;
                        }
                    }
                }
                match err {
                    Some(e) => Err(e),
                    None => Ok(nmse(&preds, &optimized.truths)),
                }
            }
        };
        outcomes.push(match result {
            Ok(v) => MethodOutcome {
                method,
                nmse: v,
                failed: false,
            },
            Err(e) => {
                warn!("trial {trial}: {method} failed: {e}");
                MethodOutcome {
                    method,
                    nmse: 1.0,
                    failed: true,
                }
            }
        });
    }
    Ok(TrialRecord {
        trial,
        outcomes,
        timings,
    })
}

/// Aggregate of one method at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub method: Method,
    pub trials: usize,
    pub nmse_median: f64,
    pub nmse_mean: f64,
    /// Standard error of the mean.
    pub nmse_se: f64,
    pub nmse_db_median: f64,
    pub failures: usize,
    /// Per-trial NMSE in trial order.
    pub samples: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl SweepPoint {
    pub fn from_samples(axis_value: f64, method: Method, samples: Vec<f64>, failures: usize) -> Self {
        let med = median(&samples);
        let (mean, se) = mean_se(&samples);
        Self {
            axis_value,
            method,
            trials: samples.len(),
            nmse_median: med,
            nmse_mean: mean,
            nmse_se: se,
            nmse_db_median: 10.0 * med.log10(),
            failures,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Value-major, then in configured method order.
    pub points: Vec<SweepPoint>,
    /// Stage timings of every trial that ran a proposed method.
    pub timings: Vec<StageTimings>,
    /// Scattering matrices used, with their cache labels.
    pub scattering: Vec<(String, CMat)>,
}

impl SweepResult {
    pub fn point(&self, axis_value: f64, method: Method) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.axis_value == axis_value && p.method == method)
    }

    /// Points of one method in axis order.
    pub fn series(&self, method: Method) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.method == method).collect()
    }
}

/// All trials of one configuration, run in parallel.
pub fn run_trials(cfg: &SystemConfig, caches: &Caches) -> Result<Vec<TrialRecord>> {
    // warm the caches before fanning out
    caches.scattering(cfg)?;
    for k in 0..cfg.users.min(2) {
        caches.schedule(cfg, cfg.pilot_len(k))?;
    }
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t, caches))
        .collect()
}

/// Per-method aggregates of a set of trials.
pub fn aggregate(axis_value: f64, methods: &[Method], records: &[TrialRecord]) -> Vec<SweepPoint> {
    methods
        .iter()
        .map(|&m| {
            let outcomes: Vec<&MethodOutcome> = records.iter().filter_map(|r| r.outcomes.iter().find(|o| o.method == m)).collect();
            let failures = outcomes.iter().filter(|o| o.failed).count();
            SweepPoint::from_samples(axis_value, m, outcomes.iter().map(|o| o.nmse).collect(), failures)
        })
        .collect()
}

/// Runs every trial at every axis value.
pub fn run_sweep(cfg: &SystemConfig, axis: SweepAxis, values: &[f64], caches: &Caches) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(values.len() * cfg.methods.len());
    let mut timings = Vec::new();
    for &v in values {
        let c = axis.apply(cfg, v)?;
        let records = run_trials(&c, caches)?;
        points.extend(aggregate(v, &c.methods, &records));
        timings.extend(records.into_iter().filter_map(|r| r.timings));
    }
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        points,
        timings,
        scattering: caches.scattering_entries(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `<axis>.csv`, `<axis>.svg` and one `<axis>_S_<label>.csv` per
/// scattering matrix for every result; an empty list writes a header-only
/// `sweep.csv`. Returns the paths written.
pub fn emit(results: &[SweepResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    if results.is_empty() {
        let path = out_dir.join("sweep.csv");
        write_sweep_csv(create(&path)?, "", &[])?;
        written.push(path);
        return Ok(written);
    }
    for r in results {
        let csv_path = out_dir.join(format!("{}.csv", r.axis));
        write_sweep_csv(create(&csv_path)?, r.axis.name(), &r.points)?;
        written.push(csv_path);
        let svg_path = out_dir.join(format!("{}.svg", r.axis));
        plot::render_svg(r, &svg_path)?;
        written.push(svg_path);
        for (label, s) in &r.scattering {
            let p = out_dir.join(format!("{}_S_{label}.csv", r.axis));
            write_matrix_csv(create(&p)?, s)?;
            written.push(p);
        }
    }
    Ok(written)
}
