//! Command-line driver for the 2D inverse medium scattering toolkit.
//!
//! Four subcommands cover the experiment pipeline: `synth` generates exact
//! and noisy far-field data for a named scenario, `reconstruct` runs one of
//! the reconstruction strategies against a data file, `localize` emits the
//! defect indicator map, and `sweep` runs a parameter grid and aggregates
//! one CSV row per cell.  All inputs come from a flat key-value config file
//! so every experiment is pinned by a single diff-able text file.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 empty selection / no detectable defect, 5 budget exhausted
//! without convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use scatter2d::config::Config;
use scatter2d::gauss_newton::gauss_newton;
use scatter2d::io::{
    read_farfield, write_farfield, write_mesh, zoning_to_string,
};
use scatter2d::localization::{default_truncation, localize};
use scatter2d::strategies::{
    adaptive_refinement, combined, selective_reconstruction, StrategyConfig,
};
use scatter2d::synth::{add_noise, make_truth, Scenario};
use scatter2d::zoning::{partition_zones, Zoning};
use scatter2d::{
    build_disc_mesh, DirectionGrid, Error, ForwardOperator, GNConfig, GNTrace, IndexField, Mesh,
    Result,
};

#[derive(Parser)]
#[command(
    name = "scatter2d",
    about = "Inverse medium scattering: synthetic data, reconstruction, localization, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate exact and noisy far-field data files for a scenario.
    Synth {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Reconstruct the refraction index from a far-field data file.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Strategy: full, selective, adaptive, or combined.
        #[arg(long, default_value = "full")]
        strategy: String,
    },
    /// Compute the defect localization indicator map.
    Localize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a parameter grid and aggregate one result row per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth { config } => run_synth(config),
        Command::Reconstruct { config, strategy } => run_reconstruct(config, strategy),
        Command::Localize { config } => run_localize(config),
        Command::Sweep { config } => run_sweep(config),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_)
        | Error::UnknownScenario(_)
        | Error::Parse(_)
        | Error::Mismatch(_)
        | Error::Io(_) => 2,
        Error::SingularSystem(_) | Error::NonFinite(_) => 3,
        Error::EmptySelection | Error::NoDetectableDefect => 4,
    }
}

/// Exit code for a run that completed but never reached the stopping
/// tolerance within its iteration or zone budget.
const EXIT_NO_CONVERGENCE: u8 = 5;

/// Settings shared by every subcommand, resolved from the config file with
/// the reference-experiment defaults (k = 5, unit disc, 30×30 data, 2% noise).
struct Experiment {
    cfg: Config,
    k: f64,
    scenario: Scenario<f64>,
    out_dir: PathBuf,
}

impl Experiment {
    fn load(path: &Path) -> Result<Self> {
        let cfg = Config::load(path)?;
        let k = cfg.get_f64("problem", "k", 5.0)?;
        if k <= 0.0 {
            return Err(Error::invalid("wave number k must be positive"));
        }
        let scenario = Scenario::by_name(cfg.get_str("problem", "scenario", "disc-in-disc"))?;
        let out_dir = PathBuf::from(cfg.get_str("output", "dir", "."));
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            cfg,
            k,
            scenario,
            out_dir,
        })
    }

    fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    /// Reconstruction mesh: resolution `epw`, seed `seed`.
    fn recon_mesh(&self) -> Result<Mesh> {
        let epw = self.cfg.get_usize("mesh", "epw", 20)?;
        self.mesh_with(epw, self.cfg.get_u64("mesh", "seed", 1)?)
    }

    /// Data mesh: by default twice the reconstruction resolution and a
    /// different seed, so synthetic data never share a discretization with
    /// the inversion.
    fn data_mesh(&self) -> Result<Mesh> {
        let epw = self.cfg.get_usize("mesh", "epw", 20)?;
        let data_epw = self.cfg.get_usize("mesh", "data_epw", 2 * epw)?;
        self.mesh_with(data_epw, self.cfg.get_u64("mesh", "data_seed", 2)?)
    }

    fn mesh_with(&self, epw: usize, seed: u64) -> Result<Mesh> {
        let lambda = self.wavelength();
        let radius = self.cfg.get_f64("mesh", "radius", 1.0)?;
        let pml = self.cfg.get_f64("mesh", "pml", lambda)?;
        let buffer = self.cfg.get_f64("mesh", "buffer", 0.5 * lambda)?;
        build_disc_mesh(radius, self.k, epw, pml, buffer, seed)
    }

    /// Incident and measurement direction grids; full circles unless
    /// aperture bounds are given in the config.
    fn grids(&self) -> Result<(DirectionGrid<f64>, DirectionGrid<f64>)> {
        let m_e = self.cfg.get_usize("data", "m_e", 30)?;
        let m_m = self.cfg.get_usize("data", "m_m", 30)?;
        if m_e == 0 || m_m == 0 {
            return Err(Error::invalid("direction grids must be nonempty"));
        }
        let grid = |prefix: &str, m: usize| -> Result<DirectionGrid<f64>> {
            let start = self.cfg.get("data", &format!("{prefix}_start"));
            let end = self.cfg.get("data", &format!("{prefix}_end"));
            match (start, end) {
                (None, None) => Ok(DirectionGrid::full(m)),
                (Some(s), Some(e)) => {
                    let s: f64 = s.parse().map_err(|_| {
                        Error::invalid(format!("bad aperture bound '{s}' for {prefix}_start"))
                    })?;
                    let e: f64 = e.parse().map_err(|_| {
                        Error::invalid(format!("bad aperture bound '{e}' for {prefix}_end"))
                    })?;
                    Ok(DirectionGrid::partial(s, e, m))
                }
                _ => Err(Error::invalid(format!(
                    "aperture for {prefix} needs both {prefix}_start and {prefix}_end"
                ))),
            }
        };
        Ok((grid("incident", m_e)?, grid("measurement", m_m)?))
    }

    fn noise_level(&self) -> Result<f64> {
        self.cfg.get_f64("data", "epsilon", 0.02)
    }

    fn data_path(&self) -> PathBuf {
        self.out_dir
            .join(self.cfg.get_str("data", "file", "data.ff"))
    }

    fn gn_config(&self) -> Result<GNConfig<f64>> {
        Ok(GNConfig {
            c1: None,
            c2: self.cfg.get_f64("reconstruction", "c2", 1e-2)?,
            stop_tol: self.cfg.get_f64("reconstruction", "stop_tol", 1e-4)?,
            max_iters: self.cfg.get_usize("reconstruction", "max_iters", 20)?,
            real_constraint: self.scenario.real_valued,
        })
    }

    fn strategy_config(&self) -> Result<StrategyConfig<f64>> {
        let defaults = StrategyConfig::<f64>::default();
        Ok(StrategyConfig {
            threshold: self.cfg.get_f64("strategy", "threshold", 0.1)?,
            n_max: self.cfg.get_usize("strategy", "n_max", 76)?,
            truncation: self.cfg.get_f64(
                "strategy",
                "truncation",
                default_truncation(self.noise_level()?),
            )?,
            gn: self.gn_config()?,
            ..defaults
        })
    }

    /// Zoning of the reconstruction mesh: `n_zones = 0` (the default) means
    /// one parameter per element, otherwise a seeded graph partition.
    fn zoning(&self, mesh: &Mesh) -> Result<Zoning> {
        let n = self.cfg.get_usize("reconstruction", "n_zones", 0)?;
        if n == 0 {
            Ok(Zoning::per_element(mesh.num_d_elements()))
        } else {
            partition_zones(mesh, n, self.cfg.get_u64("reconstruction", "zoning_seed", 5)?)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Final index field as CSV: one row per D-element with its zone and value.
fn index_to_csv(field: &IndexField<f64>) -> String {
    let mut out = String::from("element,zone,re,im\n");
    for (e, &z) in field.zoning.zone_of.iter().enumerate() {
        let v = field.values[z];
        out.push_str(&format!("{e},{z},{},{}\n", v.re, v.im));
    }
    out
}

fn run_synth(config: &Path) -> Result<ExitCode> {
    let exp = Experiment::load(config)?;
    let data_mesh = exp.data_mesh()?;
    let (ge, gm) = exp.grids()?;
    let truth = make_truth(&exp.scenario, &data_mesh, exp.k, ge, gm)?;
    let epsilon = exp.noise_level()?;
    let noisy = add_noise(&truth, epsilon, exp.cfg.get_u64("data", "noise_seed", 7)?)?;
    write_farfield(&exp.out_dir.join("truth.ff"), &truth)?;
    write_farfield(&exp.data_path(), &noisy)?;
    write_mesh(&exp.out_dir.join("data_mesh.m2d"), &data_mesh)?;
    println!(
        "synth: scenario {} | data mesh {} D-elements | {}x{} data | noise {}",
        exp.scenario.name,
        data_mesh.num_d_elements(),
        truth.measurement.len(),
        truth.incident.len(),
        epsilon
    );
    Ok(ExitCode::SUCCESS)
}

/// Outcome of one reconstruction run, shared by `reconstruct` and `sweep`.
struct RunResult {
    field: IndexField<f64>,
    trace: GNTrace<f64>,
    history: Vec<Zoning>,
    selected: Option<Vec<usize>>,
}

fn run_strategy(
    strategy: &str,
    exp: &Experiment,
    op: &ForwardOperator<'_, f64>,
    mesh: &Mesh,
    data: &scatter2d::FarFieldData<f64>,
    truth: &IndexField<f64>,
    scfg: &StrategyConfig<f64>,
) -> Result<RunResult> {
    match strategy {
        "full" => {
            let zoning = exp.zoning(mesh)?;
            let n0 = exp.scenario.sample_initial_guess(mesh, &zoning)?;
            let (field, trace) = gauss_newton(op, &n0, data, &scfg.gn, Some(truth))?;
            Ok(RunResult {
                field,
                trace,
                history: Vec::new(),
                selected: None,
            })
        }
        "selective" => {
            let zoning = exp.zoning(mesh)?;
            let n0 = exp.scenario.sample_initial_guess(mesh, &zoning)?;
            let (field, trace, selected) =
                selective_reconstruction(op, &n0, data, scfg, Some(truth))?;
            Ok(RunResult {
                field,
                trace,
                history: Vec::new(),
                selected: Some(selected),
            })
        }
        "adaptive" => {
            let per_element = Zoning::per_element(mesh.num_d_elements());
            let anchor = exp.scenario.sample_initial_guess(mesh, &per_element)?;
            let root = Zoning::single(mesh.num_d_elements());
            let (field, trace, history) =
                adaptive_refinement(op, &anchor, root, data, scfg, Some(truth))?;
            Ok(RunResult {
                field,
                trace,
                history,
                selected: None,
            })
        }
        "combined" => {
            let per_element = Zoning::per_element(mesh.num_d_elements());
            let anchor = exp.scenario.sample_initial_guess(mesh, &per_element)?;
            let (field, trace, history) = combined(op, &anchor, data, scfg, Some(truth))?;
            Ok(RunResult {
                field,
                trace,
                history,
                selected: None,
            })
        }
        other => Err(Error::invalid(format!(
            "unknown strategy '{other}' (expected full, selective, adaptive, or combined)"
        ))),
    }
}

fn run_reconstruct(config: &Path, strategy: &str) -> Result<ExitCode> {
    let exp = Experiment::load(config)?;
    let data = read_farfield::<f64>(&exp.data_path())?;
    let mesh = exp.recon_mesh()?;
    let op = ForwardOperator::new(
        &mesh,
        data.wave_number,
        data.incident.clone(),
        data.measurement.clone(),
    )?;
    let truth = exp.scenario.sample_truth(&mesh);
    let scfg = exp.strategy_config()?;

    let run = run_strategy(strategy, &exp, &op, &mesh, &data, &truth, &scfg)?;

    write_text(&exp.out_dir.join("trace.csv"), &run.trace.to_csv())?;
    write_text(
        &exp.out_dir.join("final.zones"),
        &zoning_to_string(&run.field.zoning),
    )?;
    write_text(
        &exp.out_dir.join("final_index.csv"),
        &index_to_csv(&run.field),
    )?;
    if let Some(selected) = &run.selected {
        let mut text = String::new();
        for z in selected {
            text.push_str(&format!("{z}\n"));
        }
        write_text(&exp.out_dir.join("selection.txt"), &text)?;
    }
    for (i, zoning) in run.history.iter().enumerate() {
        write_text(
            &exp.out_dir.join(format!("zoning_{i:03}.zones")),
            &zoning_to_string(zoning),
        )?;
    }

    let final_error = run.trace.records.last().and_then(|r| r.rel_error);
    println!(
        "reconstruct ({strategy}): N = {} | {} iterations | converged = {}{}",
        run.field.zoning.num_zones(),
        run.trace.records.len(),
        run.trace.converged,
        match final_error {
            Some(e) => format!(" | relative error = {e:.4}"),
            None => String::new(),
        }
    );
    if run.trace.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: budget exhausted before the stopping tolerance was reached");
        Ok(ExitCode::from(EXIT_NO_CONVERGENCE))
    }
}

fn run_localize(config: &Path) -> Result<ExitCode> {
    let exp = Experiment::load(config)?;
    let data = read_farfield::<f64>(&exp.data_path())?;
    let mesh = exp.recon_mesh()?;
    let op = ForwardOperator::new(
        &mesh,
        data.wave_number,
        data.incident.clone(),
        data.measurement.clone(),
    )?;
    let per_element = Zoning::per_element(mesh.num_d_elements());
    let n_ref = exp.scenario.sample_initial_guess(&mesh, &per_element)?;
    let delta = exp.cfg.get_f64(
        "strategy",
        "truncation",
        default_truncation(exp.noise_level()?),
    )?;
    let map = localize(&op, &n_ref, &data, delta)?;
    write_text(&exp.out_dir.join("localization.csv"), &map.to_csv())?;
    let peak = map.points[map.argmax()];
    println!(
        "localize: {} probes | {} spectral terms kept | peak at ({:.4}, {:.4})",
        map.points.len(),
        map.kept,
        peak.x,
        peak.y
    );
    Ok(ExitCode::SUCCESS)
}

/// One sweep cell: a strategy with its varied parameter and noise level.
struct Cell {
    strategy: String,
    param: f64,
    epsilon: f64,
}

fn run_sweep(config: &Path) -> Result<ExitCode> {
    let exp = Experiment::load(config)?;
    let strategies: Vec<String> = exp
        .cfg
        .get_str("sweep", "strategies", "full")
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let epsilons = exp
        .cfg
        .get_f64_list("sweep", "epsilon_list")?
        .unwrap_or_else(|| vec![0.02]);
    let n_list = exp
        .cfg
        .get_usize_list("sweep", "n_list")?
        .unwrap_or_else(|| vec![0]);
    let threshold_list = exp
        .cfg
        .get_f64_list("sweep", "threshold_list")?
        .unwrap_or_else(|| vec![0.1]);
    let n_max_list = exp
        .cfg
        .get_usize_list("sweep", "n_max_list")?
        .unwrap_or_else(|| vec![76]);

    let mut cells = Vec::new();
    for strategy in &strategies {
        let params: Vec<f64> = match strategy.as_str() {
            "full" => n_list.iter().map(|&n| n as f64).collect(),
            "selective" | "combined" => threshold_list.clone(),
            "adaptive" => n_max_list.iter().map(|&n| n as f64).collect(),
            other => {
                return Err(Error::invalid(format!(
                    "unknown strategy '{other}' in sweep grid"
                )))
            }
        };
        for &param in &params {
            for &epsilon in &epsilons {
                cells.push(Cell {
                    strategy: strategy.clone(),
                    param,
                    epsilon,
                });
            }
        }
    }

    // Shared inputs: one data mesh and exact far field, one noisy data set
    // per noise level, one reconstruction mesh and operator for all cells.
    let data_mesh = exp.data_mesh()?;
    let (ge, gm) = exp.grids()?;
    let truth_data = make_truth(&exp.scenario, &data_mesh, exp.k, ge, gm)?;
    let noise_seed = exp.cfg.get_u64("data", "noise_seed", 7)?;
    let mut noisy = Vec::new();
    for &epsilon in &epsilons {
        noisy.push((epsilon, add_noise(&truth_data, epsilon, noise_seed)?));
    }
    let mesh = exp.recon_mesh()?;
    let op = ForwardOperator::new(
        &mesh,
        truth_data.wave_number,
        truth_data.incident.clone(),
        truth_data.measurement.clone(),
    )?;
    let truth = exp.scenario.sample_truth(&mesh);
    let base_scfg = exp.strategy_config()?;
    let data_size = truth_data.incident.len() * truth_data.measurement.len();

    let run_cell = |cell: &Cell| -> String {
        let mut scfg = base_scfg.clone();
        scfg.truncation = default_truncation(cell.epsilon).max(scfg.truncation);
        match cell.strategy.as_str() {
            "selective" | "combined" => scfg.threshold = cell.param,
            "adaptive" => scfg.n_max = cell.param as usize,
            _ => {}
        }
        let data = &noisy.iter().find(|(e, _)| *e == cell.epsilon).unwrap().1;
        let start = Instant::now();
        // Cells vary N through the config override rather than Experiment
        // state, so build the zoning here for the full strategy.
        let outcome = (|| -> Result<RunResult> {
            if cell.strategy == "full" {
                let n = cell.param as usize;
                let zoning = if n == 0 {
                    Zoning::per_element(mesh.num_d_elements())
                } else {
                    partition_zones(
                        &mesh,
                        n,
                        exp.cfg.get_u64("reconstruction", "zoning_seed", 5)?,
                    )?
                };
                let n0 = exp.scenario.sample_initial_guess(&mesh, &zoning)?;
                let (field, trace) = gauss_newton(&op, &n0, data, &scfg.gn, Some(&truth))?;
                Ok(RunResult {
                    field,
                    trace,
                    history: Vec::new(),
                    selected: None,
                })
            } else {
                run_strategy(&cell.strategy, &exp, &op, &mesh, data, &truth, &scfg)
            }
        })();
        let wall_ms = start.elapsed().as_millis();
        match outcome {
            Ok(run) => {
                let e_end = run
                    .trace
                    .records
                    .last()
                    .and_then(|r| r.rel_error)
                    .map(|e| format!("{e}"))
                    .unwrap_or_default();
                let status = if run.trace.converged {
                    "ok"
                } else {
                    "no_convergence"
                };
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    cell.strategy,
                    cell.param,
                    cell.epsilon,
                    data_size,
                    run.field.zoning.num_zones(),
                    e_end,
                    run.trace.records.len(),
                    wall_ms,
                    status
                )
            }
            Err(e) => format!(
                "{},{},{},{},,,,{},error: {}",
                cell.strategy,
                cell.param,
                cell.epsilon,
                data_size,
                wall_ms,
                e.to_string().replace(',', ";")
            ),
        }
    };

    let workers = exp.cfg.get_usize("sweep", "workers", 0)?;
    let rows: Vec<String> = if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.par_iter().map(run_cell).collect()
    };

    let mut csv =
        String::from("strategy,param,epsilon,data_size,final_n,e_end,iterations,wall_ms,status\n");
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    write_text(&exp.out_dir.join("sweep.csv"), &csv)?;
    println!("sweep: {} cells -> {}", rows.len(), exp.out_dir.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}
