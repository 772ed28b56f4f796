//! The quantum preconditioning stage: one trained register fragment per
//! dimension (or one joint register for small non-separable problems), then
//! reconstruction of the seed point and the trust box for the classical
//! refiner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, DiscretizationGrid, EncodingError};
use crate::gradfree::GradFreeConfig;
use crate::objectives::Objective;
use crate::qsim::MAX_QUBITS;
use crate::vqe::{self, AnsatzConfig, CVaRConfig, FragmentResult, VqeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecondError {
    #[error("non-separable objective needs a {width}-qubit joint register; beyond {MAX_QUBITS} qubits it requires circuit knitting (out of scope)")]
    RequiresKnitting { width: usize },
    #[error("invalid seed-box parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Vqe(#[from] VqeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecondConfig {
    pub k_qubits: usize,
    pub layers: usize,
    pub cvar: CVaRConfig,
    pub gradfree: GradFreeConfig,
    pub beta: f64,
    pub delta_base: f64,
    pub gamma: f64,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        Self {
            k_qubits: 5,
            layers: 3,
            cvar: CVaRConfig::default(),
            gradfree: GradFreeConfig::default(),
            beta: 0.7,
            delta_base: 0.5,
            gamma: 2.0,
        }
    }
}

/// Seed point and per-dimension trust box handed to the refiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBox {
    pub x_seed: Vec<f64>,
    pub delta: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub beta: f64,
    pub delta_base: f64,
    pub gamma: f64,
}

impl SeedBox {
    /// Blends best and centroid per dimension as `beta * best + (1 - beta) *
    /// centroid`, sets `delta = delta_base + gamma * rms`, and clips
    /// `[seed - delta, seed + delta]` to `bounds`.
    pub fn from_statistics(
        x_best: &[f64],
        x_cvar: &[f64],
        rms: &[f64],
        bounds: &[(f64, f64)],
        beta: f64,
        delta_base: f64,
        gamma: f64,
    ) -> Result<Self, PrecondError> {
        let d = bounds.len();
        if x_best.len() != d || x_cvar.len() != d || rms.len() != d {
            return Err(PrecondError::BadParameters("statistics length differs from dimension".into()));
        }
        if !(0.0..=1.0).contains(&beta) || !(delta_base > 0.0) || !(gamma >= 0.0) {
            return Err(PrecondError::BadParameters(format!(
                "beta={beta} delta_base={delta_base} gamma={gamma}"
            )));
        }
        let mut sb = SeedBox {
            x_seed: Vec::with_capacity(d),
            delta: Vec::with_capacity(d),
            lb: Vec::with_capacity(d),
            ub: Vec::with_capacity(d),
            beta,
            delta_base,
            gamma,
        };
        for i in 0..d {
            let (lo, hi) = bounds[i];
            let seed = (beta * x_best[i] + (1.0 - beta) * x_cvar[i]).clamp(lo, hi);
            let delta = delta_base + gamma * rms[i];
            sb.x_seed.push(seed);
            sb.delta.push(delta);
            sb.lb.push((seed - delta).max(lo));
            sb.ub.push((seed + delta).min(hi));
        }
        Ok(sb)
    }

    pub fn dims(&self) -> usize {
        self.x_seed.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lb.iter().zip(&self.ub).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }
}

/// Stream for fragment `index` of the trial seeded with `trial_seed`.
pub fn fragment_rng(trial_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn ansatz(cfg: &PrecondConfig, width: usize) -> AnsatzConfig {
    AnsatzConfig { n_qubits: width, layers: cfg.layers }
}

/// Runs the preconditioner. Separable objectives get one `K`-qubit fragment
/// per dimension, executed concurrently; other objectives go through
/// [`joint_precondition`].
pub fn precondition(
    objective: &Objective,
    cfg: &PrecondConfig,
    trial_seed: u64,
) -> Result<(SeedBox, Vec<FragmentResult>), PrecondError> {
    if !objective.is_separable() {
        let (sb, fr) = joint_precondition(objective, cfg, trial_seed)?;
        return Ok((sb, vec![fr]));
    }
    let fragments: Vec<FragmentResult> = objective
        .bounds()
        .par_iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let grid = DiscretizationGrid::new(lo, hi, cfg.k_qubits)?;
            let h = encoding::build_slice(objective, i, grid)?;
            let mut rng = fragment_rng(trial_seed, i);
            Ok(vqe::run_fragment(&h, &ansatz(cfg, cfg.k_qubits), &cfg.cvar, &cfg.gradfree, &mut rng)?)
        })
        .collect::<Result<_, PrecondError>>()?;
    let pick = |f: fn(&FragmentResult) -> f64| fragments.iter().map(f).collect::<Vec<_>>();
    let sb = SeedBox::from_statistics(
        &pick(|f| f.x_best[0]),
        &pick(|f| f.x_cvar[0]),
        &pick(|f| f.rms[0]),
        objective.bounds(),
        cfg.beta,
        cfg.delta_base,
        cfg.gamma,
    )?;
    Ok((sb, fragments))
}

/// Single fragment over the concatenated register of all dimensions.
pub fn joint_precondition(
    objective: &Objective,
    cfg: &PrecondConfig,
    trial_seed: u64,
) -> Result<(SeedBox, FragmentResult), PrecondError> {
    let width = objective.dims() * cfg.k_qubits;
    if width > MAX_QUBITS {
        return Err(PrecondError::RequiresKnitting { width });
    }
    let grids = objective
        .bounds()
        .iter()
        .map(|&(lo, hi)| DiscretizationGrid::new(lo, hi, cfg.k_qubits))
        .collect::<Result<Vec<_>, _>>()?;
    let h = encoding::build_diagonal(objective, grids)?;
    let mut rng = fragment_rng(trial_seed, 0);
    let fr = vqe::run_fragment(&h, &ansatz(cfg, width), &cfg.cvar, &cfg.gradfree, &mut rng)?;
    let sb = SeedBox::from_statistics(
        &fr.x_best,
        &fr.x_cvar,
        &fr.rms,
        objective.bounds(),
        cfg.beta,
        cfg.delta_base,
        cfg.gamma,
    )?;
    Ok((sb, fr))
}
