use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gradfree::GradFreeConfig;
use crate::objectives;
use crate::precond::PrecondConfig;
use crate::qsim::MAX_QUBITS;
use crate::refine::PsoConfig;
use crate::vqe::CVaRConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hybrid,
    Classical,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::Classical => "classical",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hybrid" => Ok(Mode::Hybrid),
            "classical" => Ok(Mode::Classical),
            other => Err(HarnessError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Everything a battery needs. Loaded from TOML; every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub objective: String,
    pub dims: Vec<usize>,
    /// Qubits per dimension.
    pub qubits: usize,
    pub layers: usize,
    /// Quantum evaluation budgets; hybrid cells are run for each.
    pub budgets: Vec<usize>,
    pub trials: usize,
    /// Independent repetitions of the `trials` block, giving one N_correct
    /// value each for the distribution summaries.
    pub batches: usize,
    pub modes: Vec<Mode>,
    /// Swarm size of the classical baseline.
    pub particles: usize,
    /// Swarm size inside the hybrid seed box.
    pub hybrid_particles: usize,
    pub pso_iterations: usize,
    pub beta: f64,
    pub delta_base: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub shots: u64,
    pub rho_begin: f64,
    pub rho_end: f64,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        let pso = PsoConfig::default();
        let pre = PrecondConfig::default();
        Self {
            objective: "rastrigin".into(),
            dims: vec![2],
            qubits: pre.k_qubits,
            layers: pre.layers,
            budgets: vec![2000],
            trials: 100,
            batches: 1,
            modes: vec![Mode::Hybrid],
            particles: 10_000,
            hybrid_particles: pso.particles,
            pso_iterations: pso.iterations,
            beta: pre.beta,
            delta_base: pre.delta_base,
            gamma: pre.gamma,
            alpha: pre.cvar.alpha,
            shots: pre.cvar.shots,
            rho_begin: pre.gradfree.rho_begin,
            rho_end: pre.gradfree.rho_end,
            seed: 0,
            jobs: 1,
        }
    }
}

impl BatteryConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Rejects configurations that cannot run, before any work starts.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.dims.is_empty() {
            return bad("dims is empty".into());
        }
        if self.modes.is_empty() {
            return bad("modes is empty".into());
        }
        for &d in &self.dims {
            let obj = objectives::by_name(&self.objective, d).map_err(|e| HarnessError::Config(e.to_string()))?;
            if self.modes.contains(&Mode::Hybrid) {
                let width = if obj.is_separable() { self.qubits } else { d * self.qubits };
                if self.qubits == 0 || width > MAX_QUBITS {
                    return bad(format!(
                        "{}-qubit register for {} at D={d} is outside 1..={MAX_QUBITS}",
                        width, self.objective
                    ));
                }
                let params = width * self.layers;
                for &b in &self.budgets {
                    if b < params + 2 {
                        return bad(format!("budget {b} is below parameter count + 2 = {}", params + 2));
                    }
                }
            }
        }
        if self.modes.contains(&Mode::Hybrid) && self.budgets.is_empty() {
            return bad("hybrid mode needs at least one budget".into());
        }
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.batches == 0 {
            return bad("batches must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.delta_base > 0.0) || !(self.gamma >= 0.0) {
            return bad("delta_base must be positive and gamma non-negative".into());
        }
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin) {
            return bad("need 0 < rho_end < rho_begin".into());
        }
        if self.particles == 0 || self.hybrid_particles == 0 {
            return bad("swarms need at least one particle".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn precond(&self, budget: usize) -> PrecondConfig {
        PrecondConfig {
            k_qubits: self.qubits,
            layers: self.layers,
            cvar: CVaRConfig { shots: self.shots, alpha: self.alpha },
            gradfree: GradFreeConfig { max_evals: budget, rho_begin: self.rho_begin, rho_end: self.rho_end, bounds: None },
            beta: self.beta,
            delta_base: self.delta_base,
            gamma: self.gamma,
        }
    }

    pub(crate) fn swarm(&self, mode: Mode) -> PsoConfig {
        let particles = match mode {
            Mode::Hybrid => self.hybrid_particles,
            Mode::Classical => self.particles,
        };
        PsoConfig { particles, iterations: self.pso_iterations, ..PsoConfig::default() }
    }
}
