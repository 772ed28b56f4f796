//! COBYLA: derivative-free minimization by linear interpolation on a simplex
//! of `n + 1` points with a shrinking trust region (Powell, 1994).
//!
//! The simplex is stored relative to its best vertex: column `j` of `sim` is
//! `v_j - v_best` and `simi` is its inverse, so the linear model gradient is
//! `simi^T (f_j - f_best)`. Simple bounds are honored by the trust-region
//! step and by choosing the feasible sign for geometry steps. There are no
//! general constraints, so the merit function is the objective itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

// Simplex acceptability and step constants from Powell's reference code.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradFreeConfig {
    pub max_evals: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for GradFreeConfig {
    fn default() -> Self {
        Self { max_evals: 2000, rho_begin: 0.5, rho_end: 1e-4, bounds: None }
    }
}

impl GradFreeConfig {
    pub fn with_budget(max_evals: usize) -> Self {
        Self { max_evals, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Budget,
    Radius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradFreeResult {
    pub x_opt: Vec<f64>,
    pub f_opt: f64,
    pub evals_used: usize,
    pub terminated_by: Termination,
    /// Every objective value in evaluation order.
    pub history: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradFreeError {
    #[error("evaluation budget {budget} is below dim + 2 = {needed}")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("need 0 < rho_end < rho_begin, got rho_begin={rho_begin}, rho_end={rho_end}")]
    BadRadius { rho_begin: f64, rho_end: f64 },
    #[error("starting point is empty or not finite")]
    BadStart,
    #[error("bounds do not match the dimension or are inverted")]
    BadBounds,
    #[error("objective returned {value} at evaluation {eval}")]
    NonFinite { value: f64, eval: usize },
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    max_evals: usize,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    fn exhausted(&self) -> bool {
        self.history.len() >= self.max_evals
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64, GradFreeError> {
        let v = (self.f)(x);
        self.history.push(v);
        if !v.is_finite() {
            return Err(GradFreeError::NonFinite { value: v, eval: self.history.len() });
        }
        Ok(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Inverse of the square matrix whose columns are `cols`, by Gauss-Jordan
/// elimination with partial pivoting. Returned row-major: `inv[j]` is row `j`.
fn invert_columns(cols: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = cols.len();
    // a[i][j] = cols[j][i]
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c];
        for j in 0..n {
            a[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..n {
            if r != c && a[r][c] != 0.0 {
                let m = a[r][c];
                for j in 0..n {
                    a[r][j] -= m * a[c][j];
                    inv[r][j] -= m * inv[c][j];
                }
            }
        }
    }
    Some(inv)
}

/// Minimizes the linear model `g . d` over `|d| <= radius` intersected with
/// the box `[lo - base, hi - base]`: steepest descent with coordinates that
/// hit a bound frozen there.
fn trust_region_step(g: &[f64], radius: f64, base: &[f64], bounds: Option<&[(f64, f64)]>) -> Vec<f64> {
    let n = g.len();
    let mut d = vec![0.0; n];
    let mut free = vec![true; n];
    let mut remaining = radius * radius;
    loop {
        let gnorm: f64 = (0..n).filter(|&i| free[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        if gnorm == 0.0 || remaining <= 0.0 {
            return d;
        }
        let scale = remaining.sqrt() / gnorm;
        let mut clipped = false;
        if let Some(b) = bounds {
            for i in 0..n {
                if !free[i] {
                    continue;
                }
                let step = -g[i] * scale;
                let (lo, hi) = (b[i].0 - base[i], b[i].1 - base[i]);
                if step < lo || step > hi {
                    d[i] = step.clamp(lo, hi);
                    free[i] = false;
                    remaining -= d[i] * d[i];
                    clipped = true;
                }
            }
        }
        if !clipped {
            for i in 0..n {
                if free[i] {
                    d[i] = -g[i] * scale;
                }
            }
            return d;
        }
    }
}

struct Simplex {
    n: usize,
    best: Vec<f64>,
    f_best: f64,
    sim: Vec<Vec<f64>>,
    simi: Vec<Vec<f64>>,
    fval: Vec<f64>,
}

impl Simplex {
    /// Makes the lowest vertex the base point.
    fn promote_best(&mut self) {
        let mut nbest = None;
        let mut fmin = self.f_best;
        for j in 0..self.n {
            if self.fval[j] < fmin {
                fmin = self.fval[j];
                nbest = Some(j);
            }
        }
        let Some(nb) = nbest else { return };
        let shift = self.sim[nb].clone();
        for (b, s) in self.best.iter_mut().zip(&shift) {
            *b += s;
        }
        std::mem::swap(&mut self.fval[nb], &mut self.f_best);
        for j in 0..self.n {
            if j == nb {
                self.sim[j] = shift.iter().map(|s| -s).collect();
            } else {
                for (s, d) in self.sim[j].iter_mut().zip(&shift) {
                    *s -= d;
                }
            }
        }
        // new row nb of the inverse is minus the sum of all old rows
        let mut row = vec![0.0; self.n];
        for r in &self.simi {
            for (acc, v) in row.iter_mut().zip(r) {
                *acc -= v;
            }
        }
        self.simi[nb] = row;
    }

    fn model_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for j in 0..self.n {
            let w = self.fval[j] - self.f_best;
            for (gi, s) in g.iter_mut().zip(&self.simi[j]) {
                *gi += w * s;
            }
        }
        g
    }

    /// Replaces vertex `jdrop` by `best + dx`. Returns false when the update
    /// would make the simplex singular.
    fn replace(&mut self, jdrop: usize, dx: &[f64], f: f64) -> bool {
        let pivot = dot(&self.simi[jdrop], dx);
        if pivot.abs() < 1e-14 {
            return false;
        }
        self.sim[jdrop] = dx.to_vec();
        for v in self.simi[jdrop].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = self.simi[jdrop].clone();
        for j in 0..self.n {
            if j != jdrop {
                let t = dot(&self.simi[j], dx);
                for (s, p) in self.simi[j].iter_mut().zip(&pivot_row) {
                    *s -= t * p;
                }
            }
        }
        self.fval[jdrop] = f;
        true
    }

    fn refresh_inverse(&mut self) {
        if let Some(inv) = invert_columns(&self.sim) {
            self.simi = inv;
        }
    }
}

fn clamp_to(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (xi, &(lo, hi)) in x.iter_mut().zip(b) {
            *xi = xi.clamp(lo, hi);
        }
    }
}

/// Minimizes `f` from `x0` until the trust radius reaches `rho_end` or the
/// evaluation budget runs out. Deterministic for deterministic `f`.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &GradFreeConfig) -> Result<GradFreeResult, GradFreeError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 || x0.iter().any(|v| !v.is_finite()) {
        return Err(GradFreeError::BadStart);
    }
    if cfg.max_evals < n + 2 {
        return Err(GradFreeError::BudgetTooSmall { budget: cfg.max_evals, needed: n + 2 });
    }
    if !(cfg.rho_end > 0.0 && cfg.rho_end < cfg.rho_begin && cfg.rho_begin.is_finite()) {
        return Err(GradFreeError::BadRadius { rho_begin: cfg.rho_begin, rho_end: cfg.rho_end });
    }
    let bounds = cfg.bounds.as_deref();
    if let Some(b) = bounds {
        if b.len() != n || b.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(GradFreeError::BadBounds);
        }
    }

    let mut ev = Evaluator { f: &mut f, max_evals: cfg.max_evals, history: Vec::with_capacity(cfg.max_evals) };
    let mut rho = cfg.rho_begin;

    let mut start = x0.to_vec();
    clamp_to(&mut start, bounds);
    let f0 = ev.eval(&start)?;
    let mut sx = Simplex { n, best: start.clone(), f_best: f0, sim: Vec::with_capacity(n), simi: Vec::new(), fval: Vec::with_capacity(n) };
    for j in 0..n {
        let mut d = vec![0.0; n];
        d[j] = rho;
        // step inward when the upper bound is too close
        if let Some(b) = bounds {
            if start[j] + rho > b[j].1 {
                d[j] = -rho;
            }
        }
        let x: Vec<f64> = start.iter().zip(&d).map(|(a, b)| a + b).collect();
        sx.fval.push(ev.eval(&x)?);
        sx.sim.push(d);
    }
    sx.simi = invert_columns(&sx.sim).expect("coordinate simplex is invertible");

    let mut trust_branch = false;
    let terminated_by = 'outer: loop {
        sx.promote_best();

        let parsig = ALPHA * rho;
        let pareta = BETA * rho;
        let vsig: Vec<f64> = sx.simi.iter().map(|r| 1.0 / norm(r)).collect();
        let veta: Vec<f64> = sx.sim.iter().map(|c| norm(c)).collect();
        let acceptable = vsig.iter().all(|&s| s >= parsig) && veta.iter().all(|&e| e <= pareta);
        let g = sx.model_gradient();

        if !trust_branch && !acceptable {
            // geometry step: drop the worst-shaped vertex
            let mut jdrop = None;
            let mut worst = pareta;
            for (j, &e) in veta.iter().enumerate() {
                if e > worst {
                    jdrop = Some(j);
                    worst = e;
                }
            }
            if jdrop.is_none() {
                let mut worst = parsig;
                for (j, &s) in vsig.iter().enumerate() {
                    if s < worst {
                        jdrop = Some(j);
                        worst = s;
                    }
                }
            }
            let jdrop = jdrop.expect("unacceptable simplex has a vertex to drop");
            let scale = GAMMA * rho * vsig[jdrop];
            let mut dx: Vec<f64> = sx.simi[jdrop].iter().map(|v| scale * v).collect();
            if dot(&g, &dx) > 0.0 {
                dx.iter_mut().for_each(|v| *v = -*v);
            }
            if let Some(b) = bounds {
                let inside = |d: &[f64]| sx.best.iter().zip(d).zip(b).all(|((x, di), &(lo, hi))| x + di >= lo && x + di <= hi);
                if !inside(&dx) {
                    let flipped: Vec<f64> = dx.iter().map(|v| -v).collect();
                    if inside(&flipped) {
                        dx = flipped;
                    } else {
                        let mut x: Vec<f64> = sx.best.iter().zip(&dx).map(|(a, d)| a + d).collect();
                        clamp_to(&mut x, bounds);
                        dx = x.iter().zip(&sx.best).map(|(a, b)| a - b).collect();
                    }
                }
            }
            if ev.exhausted() {
                break 'outer Termination::Budget;
            }
            let x: Vec<f64> = sx.best.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let fx = ev.eval(&x)?;
            if !sx.replace(jdrop, &dx, fx) {
                sx.refresh_inverse();
            }
            continue;
        }

        // trust-region step on the linear model
        let dx = trust_region_step(&g, rho, &sx.best, bounds);
        let dnorm = norm(&dx);
        let mut improved = false;
        if dnorm >= 0.5 * rho {
            if ev.exhausted() {
                break 'outer Termination::Budget;
            }
            let x: Vec<f64> = sx.best.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let fx = ev.eval(&x)?;
            let predicted = -dot(&g, &dx);
            let actual = sx.f_best - fx;

            // choose the vertex to drop
            let mut ratio = if actual <= 0.0 { 1.0 } else { 0.0 };
            let mut jdrop = None;
            let mut sigbar = vec![0.0; n];
            for j in 0..n {
                let t = dot(&sx.simi[j], &dx).abs();
                if t > ratio {
                    jdrop = Some(j);
                    ratio = t;
                }
                sigbar[j] = t * vsig[j];
            }
            let mut edgmax = DELTA * rho;
            let mut ell = None;
            for j in 0..n {
                if sigbar[j] >= parsig || sigbar[j] >= vsig[j] {
                    let t = if actual > 0.0 {
                        dx.iter().zip(&sx.sim[j]).map(|(d, s)| (d - s) * (d - s)).sum::<f64>().sqrt()
                    } else {
                        veta[j]
                    };
                    if t > edgmax {
                        ell = Some(j);
                        edgmax = t;
                    }
                }
            }
            if ell.is_some() {
                jdrop = ell;
            }
            if let Some(j) = jdrop {
                if !sx.replace(j, &dx, fx) {
                    sx.refresh_inverse();
                }
            }
            improved = jdrop.is_some() && actual > 0.0 && actual >= 0.1 * predicted;
        }
        if improved {
            trust_branch = true;
            continue;
        }
        if !acceptable {
            trust_branch = false;
            continue;
        }
        if rho <= cfg.rho_end {
            break 'outer Termination::Radius;
        }
        rho *= 0.5;
        if rho <= 1.5 * cfg.rho_end {
            rho = cfg.rho_end;
        }
        sx.refresh_inverse();
        trust_branch = false;
    };

    sx.promote_best();
    let evals_used = ev.history.len();
    Ok(GradFreeResult { x_opt: sx.best, f_opt: sx.f_best, evals_used, terminated_by, history: ev.history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_one_dimensional() {
        let r = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], &GradFreeConfig::with_budget(200)).unwrap();
        assert!((r.x_opt[0] - 3.0).abs() < 1e-3, "{:?}", r.x_opt);
        assert!(r.evals_used <= 200);
    }

    #[test]
    fn sphere_two_dimensional() {
        let r = minimize(|x| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &GradFreeConfig::with_budget(100)).unwrap();
        assert!(r.f_opt < 1e-4, "f_opt={} after {} evals", r.f_opt, r.evals_used);
        assert_eq!(r.f_opt, r.x_opt[0] * r.x_opt[0] + r.x_opt[1] * r.x_opt[1]);
    }

    #[test]
    fn budget_below_dim_plus_two_rejected() {
        let err = minimize(|x| x.iter().sum(), &[0.0; 15], &GradFreeConfig::with_budget(10)).unwrap_err();
        assert_eq!(err, GradFreeError::BudgetTooSmall { budget: 10, needed: 17 });
    }

    #[test]
    fn non_finite_value_aborts() {
        let err = minimize(|x| if x[0] > 0.2 { f64::NAN } else { -x[0] }, &[0.0], &GradFreeConfig::with_budget(50)).unwrap_err();
        assert!(matches!(err, GradFreeError::NonFinite { .. }));
    }

    #[test]
    fn radius_termination_recorded() {
        let r = minimize(|x| (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2), &[0.0, 0.0], &GradFreeConfig::with_budget(5000)).unwrap();
        assert_eq!(r.terminated_by, Termination::Radius);
        assert!(r.evals_used < 5000);
        let r = minimize(|x| (x[0] - 1.0).powi(2), &[0.0], &GradFreeConfig::with_budget(5)).unwrap();
        assert_eq!(r.terminated_by, Termination::Budget);
        assert_eq!(r.evals_used, 5);
    }

    #[test]
    fn bounded_minimum_on_the_boundary() {
        let cfg = GradFreeConfig { bounds: Some(vec![(-1.0, 1.0), (-1.0, 1.0)]), ..GradFreeConfig::with_budget(500) };
        let r = minimize(|x| (x[0] - 3.0).powi(2) + (x[1] + 0.25).powi(2), &[0.0, 0.0], &cfg).unwrap();
        assert!((r.x_opt[0] - 1.0).abs() < 1e-3, "{:?}", r.x_opt);
        assert!((r.x_opt[1] + 0.25).abs() < 1e-3, "{:?}", r.x_opt);
        assert!(r.x_opt.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn rosenbrock_progress() {
        let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let cfg = GradFreeConfig { rho_begin: 0.5, rho_end: 1e-6, ..GradFreeConfig::with_budget(5000) };
        let r = minimize(rosen, &[-1.2, 1.0], &cfg).unwrap();
        // linear models crawl along the valley; from f(x0) = 24.2 this is ample progress
        assert!(r.f_opt < 0.05, "f_opt={} evals={}", r.f_opt, r.evals_used);
        assert!((r.x_opt[0] - 1.0).abs() < 0.25 && (r.x_opt[1] - 1.0).abs() < 0.5);
    }
}
