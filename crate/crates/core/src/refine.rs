//! Classical refinement: global-best particle swarm inside a box, then BFGS
//! polishing when the objective has a gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objectives::{Objective, ObjectiveError};
use crate::precond::SeedBox;

pub const BFGS_TOLERANCE: f64 = 1e-8;
pub const BFGS_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("search box is empty or malformed in dimension {0}")]
    EmptyBox(usize),
    #[error("invalid swarm configuration: {0}")]
    BadConfig(String),
    #[error("starting point has {got} coordinates, objective has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit per dimension, as a fraction of the box width.
    pub velocity_clamp: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { particles: 256, iterations: 200, inertia: 0.729, cognitive: 1.49445, social: 1.49445, velocity_clamp: 0.2 }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.particles == 0 {
            return Err(RefineError::BadConfig("need at least one particle".into()));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(RefineError::BadConfig(format!("inertia {} outside (0, 1)", self.inertia)));
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0 && self.velocity_clamp > 0.0) {
            return Err(RefineError::BadConfig("coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

fn check_box(lb: &[f64], ub: &[f64]) -> Result<(), RefineError> {
    if lb.len() != ub.len() || lb.is_empty() {
        return Err(RefineError::EmptyBox(0));
    }
    for (i, (l, u)) in lb.iter().zip(ub).enumerate() {
        if !(l.is_finite() && u.is_finite() && l <= u) {
            return Err(RefineError::EmptyBox(i));
        }
    }
    Ok(())
}

/// Global-best PSO confined to `[lb, ub]`. Positions are clamped to the box
/// and the offending velocity component is zeroed at a wall. When `start` is
/// given, the first particle begins there (clamped to the box) instead of at
/// a random position; the random stream is consumed identically either way.
///
/// `observe` sees every particle position after each move; tests use it to
/// check confinement.
pub fn pso_observed<R: Rng + ?Sized>(
    objective: &Objective,
    lb: &[f64],
    ub: &[f64],
    start: Option<&[f64]>,
    cfg: &PsoConfig,
    rng: &mut R,
    mut observe: impl FnMut(&[f64]),
) -> Result<PsoResult, RefineError> {
    check_box(lb, ub)?;
    cfg.validate()?;
    if lb.len() != objective.dims() {
        return Err(RefineError::Dimension { expected: objective.dims(), got: lb.len() });
    }
    if let Some(s) = start {
        if s.len() != lb.len() {
            return Err(RefineError::Dimension { expected: lb.len(), got: s.len() });
        }
    }
    let d = lb.len();
    let width: Vec<f64> = lb.iter().zip(ub).map(|(l, u)| u - l).collect();
    let vmax: Vec<f64> = width.iter().map(|w| w * cfg.velocity_clamp).collect();

    let mut pos = vec![0.0; cfg.particles * d];
    let mut vel = vec![0.0; cfg.particles * d];
    for p in 0..cfg.particles {
        for j in 0..d {
            pos[p * d + j] = lb[j] + rng.gen::<f64>() * width[j];
            vel[p * d + j] = (2.0 * rng.gen::<f64>() - 1.0) * vmax[j];
        }
        if let (0, Some(s)) = (p, start) {
            for j in 0..d {
                pos[j] = s[j].clamp(lb[j], ub[j]);
            }
        }
        observe(&pos[p * d..(p + 1) * d]);
    }
    let mut pbest = pos.clone();
    let mut pbest_f: Vec<f64> = pos.chunks_exact(d).map(|x| objective.eval(x)).collect();
    let mut g = 0;
    for p in 1..cfg.particles {
        if pbest_f[p] < pbest_f[g] {
            g = p;
        }
    }
    let mut gbest = pbest[g * d..(g + 1) * d].to_vec();
    let mut gbest_f = pbest_f[g];

    for _ in 0..cfg.iterations {
        for p in 0..cfg.particles {
            let x = &mut pos[p * d..(p + 1) * d];
            let v = &mut vel[p * d..(p + 1) * d];
            let pb = &pbest[p * d..(p + 1) * d];
            for j in 0..d {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let mut vj = cfg.inertia * v[j] + cfg.cognitive * r1 * (pb[j] - x[j]) + cfg.social * r2 * (gbest[j] - x[j]);
                vj = vj.clamp(-vmax[j], vmax[j]);
                let mut xj = x[j] + vj;
                if xj < lb[j] {
                    xj = lb[j];
                    vj = 0.0;
                } else if xj > ub[j] {
                    xj = ub[j];
                    vj = 0.0;
                }
                x[j] = xj;
                v[j] = vj;
            }
            observe(x);
            let fx = objective.eval(x);
            if fx < pbest_f[p] {
                pbest_f[p] = fx;
                pbest[p * d..(p + 1) * d].copy_from_slice(x);
            }
        }
        // synchronous global-best update once per sweep
        for p in 0..cfg.particles {
            if pbest_f[p] < gbest_f {
                gbest_f = pbest_f[p];
                gbest.copy_from_slice(&pbest[p * d..(p + 1) * d]);
            }
        }
    }
    Ok(PsoResult { x: gbest, f: gbest_f, iterations: cfg.iterations })
}

pub fn pso<R: Rng + ?Sized>(
    objective: &Objective,
    lb: &[f64],
    ub: &[f64],
    start: Option<&[f64]>,
    cfg: &PsoConfig,
    rng: &mut R,
) -> Result<PsoResult, RefineError> {
    pso_observed(objective, lb, ub, start, cfg, rng, |_| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// BFGS on the inverse Hessian with backtracking Armijo line search.
/// Iterations count accepted steps.
pub fn bfgs(objective: &Objective, x0: &[f64], tol: f64, max_iterations: usize) -> Result<BfgsResult, RefineError> {
    if !objective.is_differentiable() {
        return Err(ObjectiveError::NotDifferentiable(objective.name().into()).into());
    }
    let n = objective.dims();
    if x0.len() != n {
        return Err(RefineError::Dimension { expected: n, got: x0.len() });
    }
    const ARMIJO_C: f64 = 1e-4;
    const SHRINK: f64 = 0.5;
    const MAX_BACKTRACKS: usize = 60;
    // Longest trial step while the inverse Hessian is still the identity.
    const FIRST_STEP_CAP: f64 = 0.1;

    let mut x = x0.to_vec();
    let mut f = objective.eval(&x);
    let mut g = objective.grad(&x)?;
    let mut hinv: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut first_step = true;

    let converged = loop {
        if inf_norm(&g) < tol {
            break true;
        }
        if iterations >= max_iterations {
            break false;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            // lost descent: restart from steepest descent
            first_step = true;
            hinv.iter_mut().enumerate().for_each(|(k, h)| *h = if k / n == k % n { 1.0 } else { 0.0 });
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let mut step = if first_step { (FIRST_STEP_CAP / inf_norm(&p)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            let fnew = objective.eval(&xn);
            if fnew.is_finite() && fnew <= f + ARMIJO_C * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= SHRINK;
        }
        let Some((xn, fnew)) = accepted else { break false };
        let gn = objective.grad(&xn)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if first_step {
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|h| *h *= scale);
                first_step = false;
            }
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let r = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
                }
            }
        }
        x = xn;
        f = fnew;
        g = gn;
        iterations += 1;
        trace.push(f);
    };
    Ok(BfgsResult { x, f, iterations, converged, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub pso_f: f64,
    pub bfgs_iterations: usize,
    pub pso_iterations: usize,
    pub converged: bool,
}

/// PSO inside `[lb, ub]`, then BFGS from the swarm best when a gradient
/// exists. The polished point replaces the swarm best only if it is no worse.
pub fn refine_box<R: Rng + ?Sized>(
    objective: &Objective,
    lb: &[f64],
    ub: &[f64],
    start: Option<&[f64]>,
    cfg: &PsoConfig,
    rng: &mut R,
) -> Result<RefineResult, RefineError> {
    let swarm = pso(objective, lb, ub, start, cfg, rng)?;
    if !objective.is_differentiable() {
        return Ok(RefineResult {
            x_final: swarm.x,
            f_final: swarm.f,
            pso_f: swarm.f,
            bfgs_iterations: 0,
            pso_iterations: swarm.iterations,
            converged: true,
        });
    }
    let polished = bfgs(objective, &swarm.x, BFGS_TOLERANCE, BFGS_MAX_ITERATIONS)?;
    let (x_final, f_final) = if polished.f <= swarm.f { (polished.x, polished.f) } else { (swarm.x, swarm.f) };
    Ok(RefineResult {
        x_final,
        f_final,
        pso_f: swarm.f,
        bfgs_iterations: polished.iterations,
        pso_iterations: swarm.iterations,
        converged: polished.converged,
    })
}

/// Refines inside a preconditioner seed box, with one particle starting at
/// the seed point.
pub fn refine<R: Rng + ?Sized>(
    objective: &Objective,
    seedbox: &SeedBox,
    cfg: &PsoConfig,
    rng: &mut R,
) -> Result<RefineResult, RefineError> {
    refine_box(objective, &seedbox.lb, &seedbox.ub, Some(&seedbox.x_seed), cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{self, Monomial, Polynomial};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shifted_square() -> Objective {
        // (x - 3)^2 = x^2 - 6x + 9
        let p = Polynomial::new(
            1,
            vec![
                Monomial { coeff: 1.0, powers: vec![2] },
                Monomial { coeff: -6.0, powers: vec![1] },
                Monomial { coeff: 9.0, powers: vec![0] },
            ],
        );
        objectives::polynomial("shifted", p, vec![(-10.0, 10.0)])
    }

    #[test]
    fn bfgs_exact_quadratic() {
        let r = bfgs(&shifted_square(), &[0.0], BFGS_TOLERANCE, BFGS_MAX_ITERATIONS).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-8, "{:?}", r.x);
        assert!(r.iterations <= 3);
        assert!(r.converged);
    }

    #[test]
    fn bfgs_rastrigin_basins() {
        let f = objectives::rastrigin(2);
        let r = bfgs(&f, &[0.1, -0.1], BFGS_TOLERANCE, BFGS_MAX_ITERATIONS).unwrap();
        assert!(r.x.iter().all(|v| v.abs() < 1e-6), "{:?}", r.x);
        let r = bfgs(&f, &[1.1, 0.9], BFGS_TOLERANCE, BFGS_MAX_ITERATIONS).unwrap();
        assert!(r.x.iter().all(|v| (v - 1.0).abs() < 0.1), "{:?}", r.x);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bfgs_rejects_ackley() {
        let err = bfgs(&objectives::ackley_separable(2), &[0.1, 0.1], 1e-8, 10).unwrap_err();
        assert!(matches!(err, RefineError::Objective(ObjectiveError::NotDifferentiable(_))));
    }

    #[test]
    fn pso_degenerate_configs() {
        let f = objectives::rastrigin(2);
        let cfg = PsoConfig { particles: 1, iterations: 0, ..PsoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = pso(&f, &[-1.0, -1.0], &[1.0, 1.0], None, &cfg, &mut rng).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(5);
        let x0 = [-1.0 + replay.gen::<f64>() * 2.0, 0.0];
        assert_eq!(r.x[0], x0[0]);
        assert_eq!(r.iterations, 0);

        let point = [0.25, -0.75];
        let r = pso(&f, &point, &point, None, &PsoConfig::default(), &mut rng).unwrap();
        assert_eq!(r.x, point.to_vec());
    }

    #[test]
    fn pso_rejects_empty_box() {
        let f = objectives::rastrigin(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = pso(&f, &[0.0, 1.0], &[1.0, 0.5], None, &PsoConfig::default(), &mut rng).unwrap_err();
        assert_eq!(err, RefineError::EmptyBox(1));
    }

    #[test]
    fn ackley_skips_bfgs() {
        let f = objectives::ackley_separable(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = PsoConfig { particles: 32, iterations: 30, ..PsoConfig::default() };
        let r = refine_box(&f, &[-2.0; 3], &[2.0; 3], None, &cfg, &mut rng).unwrap();
        assert_eq!(r.bfgs_iterations, 0);
    }
}
