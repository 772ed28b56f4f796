//! Benchmark landscapes: Rastrigin, separable Ackley and Himmelblau.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("unknown objective {0:?} (expected rastrigin, ackley or himmelblau)")]
    UnknownName(String),
    #[error("objective {name} needs {expected} dimensions, got {got}")]
    Dimension { name: String, expected: usize, got: usize },
    #[error("objective {0} is not separable")]
    NotSeparable(String),
    #[error("objective {0} has no gradient")]
    NotDifferentiable(String),
    #[error("objective {0} is not a polynomial")]
    NotPolynomial(String),
}

/// Local minima sit on a regular lattice `anchor + k * spacing` in every
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaLattice {
    pub spacing: f64,
    pub anchor: f64,
}

impl MinimaLattice {
    /// Number of lattice points inside the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> u64 {
        if hi < lo {
            return 0;
        }
        let first = ((lo - self.anchor) / self.spacing).ceil();
        let last = ((hi - self.anchor) / self.spacing).floor();
        if last < first {
            0
        } else {
            (last - first) as u64 + 1
        }
    }
}

/// `coeff * prod_i x_i^powers[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub vars: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(vars: usize, terms: Vec<Monomial>) -> Self {
        Self { vars, terms }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        Self::new(vars, vec![Monomial { coeff: c, powers: vec![0; vars] }])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * m.powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.vars];
        for m in &self.terms {
            for (d, gd) in g.iter_mut().enumerate() {
                if m.powers[d] == 0 {
                    continue;
                }
                let mut t = m.coeff * m.powers[d] as f64;
                for (j, (&p, &xj)) in m.powers.iter().zip(x).enumerate() {
                    let p = if j == d { p - 1 } else { p };
                    t *= xj.powi(p as i32);
                }
                *gd += t;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Landscape {
    Rastrigin { a: f64 },
    AckleySeparable,
    Himmelblau,
    Polynomial(Polynomial),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    name: String,
    bounds: Vec<(f64, f64)>,
    landscape: Landscape,
}

/// A continuous global minimum with the radius used to classify hits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub center: [f64; 2],
    pub radius: f64,
}

pub const RASTRIGIN_BOUND: f64 = 5.12;
pub const ACKLEY_BOUND: f64 = 32.768;
pub const HIMMELBLAU_BOUND: f64 = 50.0;
pub const BASIN_RADIUS: f64 = 0.5;

pub fn rastrigin(dims: usize) -> Objective {
    Objective {
        name: "rastrigin".into(),
        bounds: vec![(-RASTRIGIN_BOUND, RASTRIGIN_BOUND); dims.max(1)],
        landscape: Landscape::Rastrigin { a: 10.0 },
    }
}

pub fn ackley_separable(dims: usize) -> Objective {
    Objective {
        name: "ackley".into(),
        bounds: vec![(-ACKLEY_BOUND, ACKLEY_BOUND); dims.max(1)],
        landscape: Landscape::AckleySeparable,
    }
}

pub fn himmelblau() -> Objective {
    Objective {
        name: "himmelblau".into(),
        bounds: vec![(-HIMMELBLAU_BOUND, HIMMELBLAU_BOUND); 2],
        landscape: Landscape::Himmelblau,
    }
}

/// A user-supplied polynomial over explicit bounds.
pub fn polynomial(name: &str, poly: Polynomial, bounds: Vec<(f64, f64)>) -> Objective {
    assert_eq!(poly.vars, bounds.len(), "polynomial arity must match bounds");
    Objective { name: name.into(), bounds, landscape: Landscape::Polynomial(poly) }
}

/// Looks up a landscape by its CLI name.
pub fn by_name(name: &str, dims: usize) -> Result<Objective, ObjectiveError> {
    match name {
        "rastrigin" => Ok(rastrigin(dims)),
        "ackley" => Ok(ackley_separable(dims)),
        "himmelblau" if dims == 2 => Ok(himmelblau()),
        "himmelblau" => Err(ObjectiveError::Dimension { name: name.into(), expected: 2, got: dims }),
        other => Err(ObjectiveError::UnknownName(other.into())),
    }
}

fn rastrigin_slice(a: f64, x: f64) -> f64 {
    x * x - a * (2.0 * PI * x).cos() + a
}

fn ackley_slice(x: f64) -> f64 {
    -20.0 * (-0.2 * x.abs()).exp() - (2.0 * PI * x).cos().exp() + 20.0 + E
}

fn himmelblau_value(x: f64, y: f64) -> f64 {
    let u = x * x + y - 11.0;
    let v = x + y * y - 7.0;
    u * u + v * v
}

fn himmelblau_grad(x: f64, y: f64) -> [f64; 2] {
    let u = x * x + y - 11.0;
    let v = x + y * y - 7.0;
    [4.0 * x * u + 2.0 * v, 2.0 * u + 4.0 * y * v]
}

fn himmelblau_hessian(x: f64, y: f64) -> [[f64; 2]; 2] {
    let u = x * x + y - 11.0;
    let v = x + y * y - 7.0;
    let xy = 4.0 * x + 4.0 * y;
    [[4.0 * u + 8.0 * x * x + 2.0, xy], [xy, 2.0 + 4.0 * v + 8.0 * y * y]]
}

/// Newton iteration to machine precision from a point inside a basin.
fn newton_polish(mut p: [f64; 2]) -> [f64; 2] {
    for _ in 0..100 {
        let g = himmelblau_grad(p[0], p[1]);
        let h = himmelblau_hessian(p[0], p[1]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let dx = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dy = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        p = [p[0] - dx, p[1] - dy];
        if dx.abs().max(dy.abs()) < 1e-15 {
            break;
        }
    }
    p
}

/// The four global minima of Himmelblau's function, polished by Newton's
/// method from coarse starting points once per process.
pub fn himmelblau_basins() -> &'static [Basin; 4] {
    static BASINS: OnceLock<[Basin; 4]> = OnceLock::new();
    BASINS.get_or_init(|| {
        let starts = [[3.0, 2.0], [-2.8, 3.1], [-3.8, -3.3], [3.6, -1.8]];
        starts.map(|s| Basin { center: newton_polish(s), radius: BASIN_RADIUS })
    })
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn is_separable(&self) -> bool {
        match &self.landscape {
            Landscape::Rastrigin { .. } | Landscape::AckleySeparable => true,
            Landscape::Himmelblau => false,
            Landscape::Polynomial(p) => {
                p.terms.iter().all(|m| m.powers.iter().filter(|&&e| e > 0).count() <= 1)
            }
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.landscape, Landscape::AckleySeparable)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dims());
        match &self.landscape {
            Landscape::Rastrigin { a } => x.iter().map(|&xi| rastrigin_slice(*a, xi)).sum(),
            Landscape::AckleySeparable => x.iter().map(|&xi| ackley_slice(xi)).sum(),
            Landscape::Himmelblau => himmelblau_value(x[0], x[1]),
            Landscape::Polynomial(p) => p.eval(x),
        }
    }

    /// One-dimensional contribution of coordinate `i`; the full value is the
    /// sum of slices.
    pub fn slice(&self, i: usize, xi: f64) -> Result<f64, ObjectiveError> {
        match &self.landscape {
            Landscape::Rastrigin { a } => Ok(rastrigin_slice(*a, xi)),
            Landscape::AckleySeparable => Ok(ackley_slice(xi)),
            Landscape::Polynomial(p) if self.is_separable() => {
                let mut total = 0.0;
                for m in &p.terms {
                    let active = m.powers.iter().position(|&e| e > 0);
                    total += match active {
                        None => m.coeff / p.vars as f64,
                        Some(j) if j == i => m.coeff * xi.powi(m.powers[j] as i32),
                        Some(_) => 0.0,
                    };
                }
                Ok(total)
            }
            _ => Err(ObjectiveError::NotSeparable(self.name.clone())),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        match &self.landscape {
            Landscape::Rastrigin { a } => {
                Ok(x.iter().map(|&xi| 2.0 * xi + 2.0 * PI * a * (2.0 * PI * xi).sin()).collect())
            }
            Landscape::Himmelblau => Ok(himmelblau_grad(x[0], x[1]).to_vec()),
            Landscape::Polynomial(p) => Ok(p.grad(x)),
            Landscape::AckleySeparable => Err(ObjectiveError::NotDifferentiable(self.name.clone())),
        }
    }

    /// Polynomial form, when one exists.
    pub fn as_polynomial(&self) -> Result<Polynomial, ObjectiveError> {
        match &self.landscape {
            Landscape::Polynomial(p) => Ok(p.clone()),
            Landscape::Himmelblau => {
                // (x^2 + y - 11)^2 + (x + y^2 - 7)^2 expanded
                let m = |coeff: f64, px: u32, py: u32| Monomial { coeff, powers: vec![px, py] };
                Ok(Polynomial::new(
                    2,
                    vec![
                        m(1.0, 4, 0),
                        m(2.0, 2, 1),
                        m(-22.0, 2, 0),
                        m(1.0, 0, 2),
                        m(-22.0, 0, 1),
                        m(121.0, 0, 0),
                        m(1.0, 2, 0),
                        m(2.0, 1, 2),
                        m(-14.0, 1, 0),
                        m(1.0, 0, 4),
                        m(-14.0, 0, 2),
                        m(49.0, 0, 0),
                    ],
                ))
            }
            _ => Err(ObjectiveError::NotPolynomial(self.name.clone())),
        }
    }

    pub fn minima_lattice(&self) -> Option<MinimaLattice> {
        match self.landscape {
            Landscape::Rastrigin { .. } | Landscape::AckleySeparable => {
                Some(MinimaLattice { spacing: 1.0, anchor: 0.0 })
            }
            _ => None,
        }
    }

    /// Known global minima, for landscapes with several.
    pub fn basins(&self) -> Option<&'static [Basin]> {
        match self.landscape {
            Landscape::Himmelblau => Some(&himmelblau_basins()[..]),
            _ => None,
        }
    }

    /// Whether `x` lies in the target basin: within the basin radius of the
    /// origin in every coordinate for the lattice landscapes, or within the
    /// radius of one of the known centers otherwise.
    pub fn is_correct(&self, x: &[f64]) -> bool {
        match self.basins() {
            Some(basins) => basins.iter().any(|b| {
                b.center.iter().zip(x).all(|(c, xi)| (xi - c).abs() <= b.radius)
            }),
            None => x.iter().all(|xi| xi.abs() <= BASIN_RADIUS),
        }
    }

    /// Product of the bound widths.
    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Local-minima count over the full bounds, when the landscape has a lattice.
    pub fn minima_count(&self) -> Option<f64> {
        let lattice = self.minima_lattice()?;
        Some(self.bounds.iter().map(|&(lo, hi)| lattice.count_in(lo, hi) as f64).product())
    }
}
