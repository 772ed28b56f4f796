//! Benchmark batteries: many seeded trials of the hybrid pipeline and the
//! classical baseline, with per-cell summaries and report emission.

mod config;
mod metrics;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{BatteryConfig, Mode};
pub use metrics::{box_metrics, median, volume_metrics, BoxSummary, VolumeMetrics};
pub use report::{boxplot_path, emit_report, write_boxplot, write_csv, Format};

use crate::objectives::{self, Objective};
use crate::precond::{self, PrecondError, SeedBox};
use crate::refine::{self, RefineError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no correct hybrid trial captured the global basin at D={dims}")]
    NoSuccessfulCapture { dims: usize },
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::NoSuccessfulCapture { .. } => "no_successful_capture",
            HarnessError::Precond(PrecondError::RequiresKnitting { .. }) => "requires_knitting",
            HarnessError::Precond(_) => "precondition",
            HarnessError::Refine(_) => "refine",
            HarnessError::Io { .. } => "io",
            HarnessError::Serialize(_) => "serialize",
        }
    }
}

/// One trial of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Index within the cell, counting across batches.
    pub trial_id: usize,
    pub batch: usize,
    pub mode: Mode,
    pub objective: String,
    pub dims: usize,
    pub qubits: usize,
    /// Quantum evaluation budget; 0 for classical trials.
    pub budget: usize,
    pub seed: u64,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub correct: bool,
    /// Index of the known minimum whose basin holds `x_final`, for
    /// landscapes with several global minima.
    pub basin: Option<usize>,
    /// Index of the known minimum reached by local descent from the seed
    /// point, for hybrid trials on landscapes with several global minima.
    pub seed_basin: Option<usize>,
    pub bfgs_iterations: usize,
    pub pso_iterations: usize,
    pub quantum_evals: usize,
    pub seedbox: Option<SeedBox>,
    pub wall_time: f64,
}

/// Aggregates of one (mode, dimension, budget) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Mode,
    pub objective: String,
    pub dims: usize,
    pub qubits: usize,
    pub budget: usize,
    pub trials: usize,
    pub n_correct: usize,
    /// Correct count of each batch.
    pub n_correct_batches: Vec<usize>,
    pub n_correct_summary: Option<BoxSummary>,
    pub bfgs_iterations: Option<BoxSummary>,
    /// BFGS iterations over correct trials only.
    pub bfgs_iterations_correct: Option<BoxSummary>,
    pub f_final: Option<BoxSummary>,
    pub basin_counts: Option<Vec<usize>>,
    pub seed_basin_counts: Option<Vec<usize>>,
    pub volume: Option<VolumeMetrics>,
}

impl CellSummary {
    pub fn median_bfgs_correct(&self) -> Option<f64> {
        self.bfgs_iterations_correct.as_ref().map(|s| s.median)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: BatteryConfig,
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
}

impl BatteryReport {
    /// Copy with all timing fields zeroed, for byte-level comparison of runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for rec in &mut r.records {
            rec.wall_time = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Serialize(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Serialize(e.to_string()))
    }

    pub fn cell(&self, mode: Mode, dims: usize, budget: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.mode == mode && c.dims == dims && c.budget == budget)
    }

    pub fn records_of<'a>(&'a self, cell: &'a CellSummary) -> impl Iterator<Item = &'a TrialRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.mode == cell.mode && r.dims == cell.dims && r.budget == cell.budget)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial. Independent of mode and budget, so hybrid and
/// classical trials with the same index start from the same stream.
pub fn trial_seed(base: u64, objective: &str, dims: usize, trial: usize) -> u64 {
    let name = objective.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
    let mut h = splitmix64(base ^ name);
    h = splitmix64(h ^ dims as u64);
    splitmix64(h ^ trial as u64)
}

/// Random stream of the refinement stage. Fragments use streams 1 and up.
pub fn refine_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Index of the known minimum within whose radius `x` lies.
pub fn basin_index(objective: &Objective, x: &[f64]) -> Option<usize> {
    objective
        .basins()?
        .iter()
        .position(|b| b.center.iter().zip(x).all(|(c, xi)| (xi - c).abs() <= b.radius))
}

/// Index of the known minimum nearest to the end point of a BFGS descent
/// from `x`. `None` for landscapes without listed minima or when the
/// descent cannot run.
pub fn descent_basin(objective: &Objective, x: &[f64]) -> Option<usize> {
    let basins = objective.basins()?;
    let end = refine::bfgs(objective, x, 1e-8, 500).ok()?.x;
    let dist = |c: &[f64]| c.iter().zip(&end).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..basins.len()).min_by(|&a, &b| dist(&basins[a].center).total_cmp(&dist(&basins[b].center)))
}

#[derive(Debug, Clone, Copy)]
struct CellKey {
    mode: Mode,
    dims: usize,
    budget: usize,
}

fn cells_of(cfg: &BatteryConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &dims in &cfg.dims {
        for &mode in &cfg.modes {
            match mode {
                Mode::Hybrid => keys.extend(cfg.budgets.iter().map(|&budget| CellKey { mode, dims, budget })),
                Mode::Classical => keys.push(CellKey { mode, dims, budget: 0 }),
            }
        }
    }
    keys
}

/// Runs one trial. Exposed for callers that schedule trials themselves.
pub fn run_trial(
    cfg: &BatteryConfig,
    objective: &Objective,
    mode: Mode,
    budget: usize,
    trial_id: usize,
) -> Result<TrialRecord, HarnessError> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, &cfg.objective, objective.dims(), trial_id);
    let swarm = cfg.swarm(mode);
    let mut rng = refine_rng(seed);
    let (result, seedbox, quantum_evals) = match mode {
        Mode::Hybrid => {
            let (sb, fragments) = precond::precondition(objective, &cfg.precond(budget), seed)?;
            let evals = fragments.iter().map(|f| f.evals_used).sum();
            (refine::refine(objective, &sb, &swarm, &mut rng)?, Some(sb), evals)
        }
        Mode::Classical => {
            let (lb, ub): (Vec<f64>, Vec<f64>) = objective.bounds().iter().copied().unzip();
            (refine::refine_box(objective, &lb, &ub, None, &swarm, &mut rng)?, None, 0)
        }
    };
    Ok(TrialRecord {
        trial_id,
        batch: trial_id / cfg.trials.max(1),
        mode,
        objective: cfg.objective.clone(),
        dims: objective.dims(),
        qubits: cfg.qubits,
        budget,
        seed,
        correct: objective.is_correct(&result.x_final),
        basin: basin_index(objective, &result.x_final),
        seed_basin: seedbox.as_ref().and_then(|sb| descent_basin(objective, &sb.x_seed)),
        f_final: result.f_final,
        x_final: result.x_final,
        bfgs_iterations: result.bfgs_iterations,
        pso_iterations: result.pso_iterations,
        quantum_evals,
        seedbox,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn summarize(cfg: &BatteryConfig, objective: &Objective, key: CellKey, records: &[TrialRecord]) -> CellSummary {
    let mine: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.mode == key.mode && r.dims == key.dims && r.budget == key.budget)
        .collect();
    let n_correct_batches: Vec<usize> = (0..cfg.batches)
        .map(|b| mine.iter().filter(|r| r.batch == b && r.correct).count())
        .collect();
    let as_f64 = |it: &mut dyn Iterator<Item = usize>| it.map(|v| v as f64).collect::<Vec<_>>();
    let count_basins = |pick: fn(&TrialRecord) -> Option<usize>| {
        objective.basins().map(|basins| {
            let mut counts = vec![0; basins.len()];
            for b in mine.iter().filter_map(|r| pick(r)) {
                counts[b] += 1;
            }
            counts
        })
    };
    let basin_counts = count_basins(|r| r.basin);
    let seed_basin_counts = match key.mode {
        Mode::Hybrid => count_basins(|r| r.seed_basin),
        Mode::Classical => None,
    };
    let volume = match key.mode {
        Mode::Hybrid => {
            let owned: Vec<TrialRecord> = mine.iter().map(|r| (*r).clone()).collect();
            volume_metrics(&owned, objective, key.dims).ok()
        }
        Mode::Classical => None,
    };
    CellSummary {
        mode: key.mode,
        objective: cfg.objective.clone(),
        dims: key.dims,
        qubits: cfg.qubits,
        budget: key.budget,
        trials: mine.len(),
        n_correct: mine.iter().filter(|r| r.correct).count(),
        n_correct_summary: BoxSummary::from_values(&as_f64(&mut n_correct_batches.iter().copied())),
        bfgs_iterations: BoxSummary::from_values(&as_f64(&mut mine.iter().map(|r| r.bfgs_iterations))),
        bfgs_iterations_correct: BoxSummary::from_values(&as_f64(
            &mut mine.iter().filter(|r| r.correct).map(|r| r.bfgs_iterations),
        )),
        f_final: BoxSummary::from_values(&mine.iter().map(|r| r.f_final).collect::<Vec<_>>()),
        basin_counts,
        seed_basin_counts,
        n_correct_batches,
        volume,
    }
}

/// Runs every trial of every cell in the configuration on a pool of
/// `cfg.jobs` threads. The report is identical for any thread count.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport, HarnessError> {
    cfg.validate()?;
    let keys = cells_of(cfg);
    let per_cell = cfg.trials * cfg.batches;
    let objectives: Vec<Objective> = cfg
        .dims
        .iter()
        .map(|&d| objectives::by_name(&cfg.objective, d).map_err(|e| HarnessError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let objective_for = |dims: usize| &objectives[cfg.dims.iter().position(|&d| d == dims).expect("dims listed")];

    let units: Vec<(CellKey, usize)> =
        keys.iter().flat_map(|&k| (0..per_cell).map(move |t| (k, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        units
            .par_iter()
            .map(|&(k, t)| run_trial(cfg, objective_for(k.dims), k.mode, k.budget, t))
            .collect::<Result<_, _>>()
    })?;
    let cells = keys.iter().map(|&k| summarize(cfg, objective_for(k.dims), k, &records)).collect();
    Ok(BatteryReport { config: cfg.clone(), cells, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_pair_modes_and_separate_trials() {
        let a = trial_seed(1, "rastrigin", 2, 0);
        assert_eq!(a, trial_seed(1, "rastrigin", 2, 0));
        assert_ne!(a, trial_seed(1, "rastrigin", 2, 1));
        assert_ne!(a, trial_seed(1, "rastrigin", 3, 0));
        assert_ne!(a, trial_seed(1, "ackley", 2, 0));
        assert_ne!(a, trial_seed(2, "rastrigin", 2, 0));
    }

    #[test]
    fn empty_battery() {
        let cfg = BatteryConfig { trials: 0, ..BatteryConfig::default() };
        let report = run_battery(&cfg).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.cells[0].n_correct, 0);
        let back = BatteryReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn himmelblau_basin_index() {
        let f = objectives::himmelblau();
        assert_eq!(basin_index(&f, &[3.0, 2.0]), Some(0));
        assert_eq!(basin_index(&f, &[0.0, 0.0]), None);
        assert_eq!(basin_index(&objectives::rastrigin(2), &[0.0, 0.0]), None);
        assert_eq!(descent_basin(&f, &[2.5, 2.5]), Some(0));
        assert_eq!(descent_basin(&f, &[-3.0, -3.0]), basin_index(&f, &[-3.779310, -3.283186]));
        assert_eq!(descent_basin(&objectives::rastrigin(2), &[0.1, 0.1]), None);
    }
}
