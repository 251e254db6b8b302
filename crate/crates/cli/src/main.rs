//! `simulate`: sweeps, single-trial diagnostics, coupling dumps and training
//! design for the RIS channel estimation simulator.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use ris_chanest::config::SystemConfig;
use ris_chanest::csvio::{write_matrix_csv, write_phase_csv};
use ris_chanest::harness::{design_schedule, emit, run_sweep, run_trial, Caches, SweepAxis};

#[derive(Parser)]
#[command(name = "simulate", version, about = "Mutual-coupling-aware RIS channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over one parameter; writes CSV and SVG per sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// power, pilot, spacing, ris_size, paths_L or paths_J
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated axis values; the axis defaults otherwise.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// One trial with per-method NMSE and stage timings.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Dumps the impedance and scattering matrices as `row,col,re,im` CSV.
    Impedance {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for impedance.csv and scattering.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Optimizes the RIS training matrix and writes it as `m,t,re,im` CSV.
    DesignPhases {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training length; the typical user's pilot length by default.
        #[arg(long)]
        pilots: Option<usize>,
    },
}

fn load(path: &Path) -> Result<SystemConfig> {
    SystemConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sweep(
    config: &Path,
    axis: SweepAxis,
    out: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    values: Option<Vec<f64>>,
) -> Result<()> {
    let mut cfg = load(config)?;
    if let Some(t) = trials {
        if t == 0 {
            bail!("--trials must be positive");
        }
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let values = values.unwrap_or_else(|| axis.default_values());
    info!("{axis} sweep over {values:?}, {} trials each", cfg.trials);
    let caches = Caches::new();
    let result = run_sweep(&cfg, axis, &values, &caches)?;
    for p in &result.points {
        println!(
            "{axis}={:<8} {:<20} median {:>8.2} dB  mean {:.3e} ± {:.1e}  failures {}",
            p.axis_value, p.method.name(), p.nmse_db_median, p.nmse_mean, p.nmse_se, p.failures
        );
    }
    for path in emit(std::slice::from_ref(&result), out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn estimate(config: &Path, trial: usize) -> Result<()> {
    let cfg = load(config)?;
    println!(
        "N = {}×{}, M = {}×{} at {}λ, K = {}, L = {}, J = {}, p = {} dBm, τ = ({}, {})",
        cfg.bs_count_v,
        cfg.bs_count_h,
        cfg.ris_count_v,
        cfg.ris_count_h,
        cfg.ris_spacing,
        cfg.users,
        cfg.paths_l,
        cfg.max_paths_j(),
        cfg.power_dbm,
        cfg.pilot_first,
        cfg.pilot_other
    );
    let caches = Caches::new();
    let record = run_trial(&cfg, trial, &caches)?;
    for o in &record.outcomes {
        let flag = if o.failed { "  (failed)" } else { "" };
        println!("{:<20} NMSE {:.4e} ({:.2} dB){flag}", o.method.name(), o.nmse, 10.0 * o.nmse.log10());
    }
    if let Some(t) = &record.timings {
        println!("stage II reference column: {:?}", t.stage2_reference);
        for (k, d) in t.stage3_per_user.iter().enumerate() {
            println!("stage III user {}: {:?}", k + 2, d);
        }
    }
    Ok(())
}

fn impedance(config: &Path, out: &Path) -> Result<()> {
    let cfg = load(config)?;
    let model = Caches::new().scattering(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let z_path = out.join("impedance.csv");
    let s_path = out.join("scattering.csv");
    write_matrix_csv(create(&z_path)?, &model.impedance)?;
    write_matrix_csv(create(&s_path)?, &model.scattering)?;
    println!("Z[0,0] = {:.6e} Ω, ‖S‖_F = {:.6e}", model.impedance[(0, 0)], model.scattering.norm());
    println!("wrote {}\nwrote {}", z_path.display(), s_path.display());
    Ok(())
}

fn design_phases(config: &Path, out: &Path, pilots: Option<usize>) -> Result<()> {
    let cfg = load(config)?;
    let tau = pilots.unwrap_or(cfg.pilot_first);
    if tau == 0 {
        bail!("--pilots must be positive");
    }
    let model = Caches::new().scattering(&cfg)?;
    let (schedule, state) = design_schedule(&cfg, &model.scattering, tau)?;
    println!(
        "{}×{tau} schedule: objective {:.6e} -> {:.6e} after {} iterations (converged: {}, gradient norm {:.3e})",
        cfg.ris_elements(),
        state.objective_trace[0],
        state.objective_trace.last().copied().unwrap_or(f64::NAN),
        state.iterations,
        state.converged,
        state.gradient_norm
    );
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_phase_csv(create(out)?, &schedule.gamma)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Sweep {
            config,
            axis,
            out,
            trials,
            seed,
            values,
        } => sweep(&config, axis, &out, trials, seed, values),
        Command::Estimate { config, trial } => estimate(&config, trial),
        Command::Impedance { config, out } => impedance(&config, &out),
        Command::DesignPhases { config, out, pilots } => design_phases(&config, &out, pilots),
    }
}
