//! Binary discretization of continuous coordinates onto qubit registers and
//! the diagonal energy operators built from them.
//!
//! A register of width `K` encodes the integer `k = sum_j b_j 2^j` (qubit `j`
//! is bit `j`) and the coordinate `x_min + k * delta` with
//! `delta = (x_max - x_min) / (2^K - 1)`, so both endpoints lie on the grid.
//! Multi-variable registers concatenate the per-variable registers, variable 0
//! occupying the lowest qubits.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objectives::{Objective, ObjectiveError, Polynomial};

/// Widest register whose energies are tabulated eagerly.
pub const TABULATE_MAX_WIDTH: usize = 12;
/// Widest register accepted by the exhaustive operations.
pub const SCAN_MAX_WIDTH: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("invalid grid: need x_min < x_max (finite) and 1..=32 qubits, got [{x_min}, {x_max}] with {k_qubits} qubits")]
    InvalidGrid { x_min: f64, x_max: f64, k_qubits: usize },
    #[error("grid index {index} out of range for {k_qubits} qubits")]
    IndexOutOfRange { index: u64, k_qubits: usize },
    #[error("objective has {expected} variables but {got} grids were given")]
    GridCount { expected: usize, got: usize },
    #[error("register width {width} exceeds the limit of {limit}")]
    TooWide { width: usize, limit: usize },
    #[error("objective is not expandable into Pauli-Z terms: {0}")]
    NotExpandable(ObjectiveError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    x_min: f64,
    x_max: f64,
    k_qubits: usize,
    delta: f64,
}

impl DiscretizationGrid {
    pub fn new(x_min: f64, x_max: f64, k_qubits: usize) -> Result<Self, EncodingError> {
        let ok = x_min.is_finite() && x_max.is_finite() && x_min < x_max && (1..=32).contains(&k_qubits);
        if !ok {
            return Err(EncodingError::InvalidGrid { x_min, x_max, k_qubits });
        }
        let delta = (x_max - x_min) / ((1u64 << k_qubits) - 1) as f64;
        Ok(Self { x_min, x_max, k_qubits, delta })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn k_qubits(&self) -> usize {
        self.k_qubits
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.k_qubits
    }

    /// Coordinate of grid index `k`. The top index maps to `x_max` exactly.
    pub fn decode(&self, k: u64) -> Result<f64, EncodingError> {
        if k >= self.levels() {
            return Err(EncodingError::IndexOutOfRange { index: k, k_qubits: self.k_qubits });
        }
        Ok(self.decode_unchecked(k))
    }

    pub(crate) fn decode_unchecked(&self, k: u64) -> f64 {
        if k == self.levels() - 1 {
            self.x_max
        } else {
            self.x_min + k as f64 * self.delta
        }
    }

    /// Grid index closest to `x`, clamped to the register range.
    pub fn nearest_index(&self, x: f64) -> u64 {
        let k = ((x - self.x_min) / self.delta).round();
        k.clamp(0.0, (self.levels() - 1) as f64) as u64
    }
}

/// Eigenvalue of the number operator `(I - Z) / 2` given the Z eigenvalue
/// `z` of a basis state: `+1 -> 0`, `-1 -> 1`.
pub fn number_operator_eigenvalue(z: i8) -> u8 {
    ((1 - z as i32) / 2) as u8
}

/// Z eigenvalue of a classical bit: `0 -> +1`, `1 -> -1`.
pub fn z_eigenvalue(bit: u8) -> i8 {
    1 - 2 * (bit as i8 & 1)
}

/// Reads the integer encoded in a register of `width` qubits by applying the
/// number operator qubit by qubit.
pub fn register_value(index: u64, width: usize) -> u64 {
    (0..width)
        .map(|q| {
            let bit = ((index >> q) & 1) as u8;
            (number_operator_eigenvalue(z_eigenvalue(bit)) as u64) << q
        })
        .sum()
}

/// `coefficient * prod_{q in z_mask} Z_q`. The empty mask is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliZTerm {
    pub coefficient: f64,
    pub z_mask: u64,
}

impl PauliZTerm {
    /// Diagonal entry of this term at basis state `b`.
    pub fn value_at(&self, b: u64) -> f64 {
        if (self.z_mask & b).count_ones().is_multiple_of(2) {
            self.coefficient
        } else {
            -self.coefficient
        }
    }
}

type EnergyFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A Hamiltonian diagonal in the computational basis. The energy of a basis
/// state is the encoded function evaluated at its decoded coordinates.
#[derive(Clone)]
pub struct DiagonalHamiltonian {
    grids: Vec<DiscretizationGrid>,
    offsets: Vec<usize>,
    width: usize,
    energy_fn: Arc<EnergyFn>,
    table: Option<Arc<Vec<f64>>>,
    pauli_terms: Option<Vec<PauliZTerm>>,
}

impl fmt::Debug for DiagonalHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiagonalHamiltonian")
            .field("grids", &self.grids)
            .field("width", &self.width)
            .field("tabulated", &self.table.is_some())
            .field("pauli_terms", &self.pauli_terms.as_ref().map(Vec::len))
            .finish()
    }
}

impl DiagonalHamiltonian {
    /// Wraps an energy function over decoded coordinates.
    pub fn from_fn<F>(grids: Vec<DiscretizationGrid>, f: F) -> Result<Self, EncodingError>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let mut offsets = Vec::with_capacity(grids.len());
        let mut width = 0;
        for g in &grids {
            offsets.push(width);
            width += g.k_qubits();
        }
        if width > SCAN_MAX_WIDTH {
            return Err(EncodingError::TooWide { width, limit: SCAN_MAX_WIDTH });
        }
        let mut h = Self { grids, offsets, width, energy_fn: Arc::new(f), table: None, pauli_terms: None };
        if width <= TABULATE_MAX_WIDTH {
            let table: Vec<f64> = (0..1u64 << width).map(|b| h.evaluate(b)).collect();
            h.table = Some(Arc::new(table));
        }
        Ok(h)
    }

    pub fn grids(&self) -> &[DiscretizationGrid] {
        &self.grids
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pauli_terms(&self) -> Option<&[PauliZTerm]> {
        self.pauli_terms.as_deref()
    }

    /// Eager energy table, present for widths up to [`TABULATE_MAX_WIDTH`].
    pub fn table(&self) -> Option<&[f64]> {
        self.table.as_deref().map(|t| t.as_slice())
    }

    /// Per-variable grid indices of basis state `b`.
    pub fn split_indices(&self, b: u64) -> Vec<u64> {
        self.grids
            .iter()
            .zip(&self.offsets)
            .map(|(g, &off)| (b >> off) & (g.levels() - 1))
            .collect()
    }

    /// Decoded coordinates of basis state `b`.
    pub fn coordinates(&self, b: u64) -> Vec<f64> {
        self.grids
            .iter()
            .zip(&self.offsets)
            .map(|(g, &off)| g.decode_unchecked((b >> off) & (g.levels() - 1)))
            .collect()
    }

    /// Coordinate of variable `var` in basis state `b`.
    pub fn coordinate(&self, b: u64, var: usize) -> f64 {
        let g = &self.grids[var];
        g.decode_unchecked((b >> self.offsets[var]) & (g.levels() - 1))
    }

    fn evaluate(&self, b: u64) -> f64 {
        (self.energy_fn)(&self.coordinates(b))
    }

    /// Energy of basis state `b`; `b` must fit in the register.
    pub fn energy(&self, b: u64) -> f64 {
        debug_assert!(b >> self.width == 0);
        match &self.table {
            Some(t) => t[b as usize],
            None => self.evaluate(b),
        }
    }

    /// Diagonal reconstructed from the Pauli-Z terms, if attached.
    pub fn pauli_energy(&self, b: u64) -> Option<f64> {
        self.pauli_terms.as_ref().map(|terms| terms.iter().map(|t| t.value_at(b)).sum())
    }
}

/// Encodes `objective` over one grid per variable.
pub fn build_diagonal(objective: &Objective, grids: Vec<DiscretizationGrid>) -> Result<DiagonalHamiltonian, EncodingError> {
    if grids.len() != objective.dims() {
        return Err(EncodingError::GridCount { expected: objective.dims(), got: grids.len() });
    }
    let f = objective.clone();
    DiagonalHamiltonian::from_fn(grids, move |x| f.eval(x))
}

/// Encodes the one-dimensional slice `i` of a separable objective.
pub fn build_slice(objective: &Objective, i: usize, grid: DiscretizationGrid) -> Result<DiagonalHamiltonian, EncodingError> {
    objective.slice(i, grid.x_min())?;
    let f = objective.clone();
    DiagonalHamiltonian::from_fn(vec![grid], move |x| f.slice(i, x[0]).expect("separability checked"))
}

/// Pauli-Z operator algebra on masks: Z_q Z_q = I, so products XOR masks.
#[derive(Debug, Clone, Default, PartialEq)]
struct ZOperator(BTreeMap<u64, f64>);

impl ZOperator {
    fn scalar(c: f64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(0, c);
        }
        Self(m)
    }

    fn add_term(&mut self, mask: u64, c: f64) {
        *self.0.entry(mask).or_insert(0.0) += c;
    }

    fn add(&mut self, other: &ZOperator, scale: f64) {
        for (&mask, &c) in &other.0 {
            self.add_term(mask, scale * c);
        }
    }

    fn mul(&self, other: &ZOperator) -> ZOperator {
        let mut out = ZOperator::default();
        for (&ma, &ca) in &self.0 {
            for (&mb, &cb) in &other.0 {
                out.add_term(ma ^ mb, ca * cb);
            }
        }
        out
    }

    fn into_terms(self) -> Vec<PauliZTerm> {
        self.0
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|(z_mask, coefficient)| PauliZTerm { coefficient, z_mask })
            .collect()
    }
}

/// Variable operator `x_min I + delta sum_j 2^j n_j` with `n_j = (I - Z_j)/2`,
/// placed at qubit `offset`.
fn variable_operator(grid: &DiscretizationGrid, offset: usize) -> ZOperator {
    let mut op = ZOperator::scalar(grid.x_min());
    for j in 0..grid.k_qubits() {
        let weight = grid.delta() * (1u64 << j) as f64;
        op.add_term(0, 0.5 * weight);
        op.add_term(1u64 << (offset + j), -0.5 * weight);
    }
    op
}

fn expand_polynomial(poly: &Polynomial, grids: &[DiscretizationGrid]) -> Vec<PauliZTerm> {
    let mut offset = 0;
    let vars: Vec<ZOperator> = grids
        .iter()
        .map(|g| {
            let op = variable_operator(g, offset);
            offset += g.k_qubits();
            op
        })
        .collect();
    let mut total = ZOperator::default();
    for mono in &poly.terms {
        let mut prod = ZOperator::scalar(1.0);
        for (var, &power) in vars.iter().zip(&mono.powers) {
            for _ in 0..power {
                prod = prod.mul(var);
            }
        }
        total.add(&prod, mono.coeff);
    }
    total.into_terms()
}

/// Symbolic Pauli-Z expansion of a polynomial objective over `grids`, with
/// like masks merged.
pub fn pauli_expand(objective: &Objective, grids: &[DiscretizationGrid]) -> Result<Vec<PauliZTerm>, EncodingError> {
    let poly = objective.as_polynomial().map_err(EncodingError::NotExpandable)?;
    if grids.len() != poly.vars {
        return Err(EncodingError::GridCount { expected: poly.vars, got: grids.len() });
    }
    let width: usize = grids.iter().map(|g| g.k_qubits()).sum();
    if width > TABULATE_MAX_WIDTH {
        return Err(EncodingError::TooWide { width, limit: TABULATE_MAX_WIDTH });
    }
    Ok(expand_polynomial(&poly, grids))
}

/// [`build_diagonal`] with the Pauli-Z expansion attached for cross-checking.
pub fn build_diagonal_with_terms(objective: &Objective, grids: Vec<DiscretizationGrid>) -> Result<DiagonalHamiltonian, EncodingError> {
    let terms = pauli_expand(objective, &grids)?;
    let mut h = build_diagonal(objective, grids)?;
    h.pauli_terms = Some(terms);
    Ok(h)
}

/// Exhaustive scan for the lowest-energy basis state; ties go to the lowest
/// index.
pub fn argmin_grid(h: &DiagonalHamiltonian) -> Result<(u64, f64), EncodingError> {
    if h.width() > SCAN_MAX_WIDTH {
        return Err(EncodingError::TooWide { width: h.width(), limit: SCAN_MAX_WIDTH });
    }
    let mut best = (0u64, h.energy(0));
    for b in 1..1u64 << h.width() {
        let e = h.energy(b);
        if e < best.1 {
            best = (b, e);
        }
    }
    Ok(best)
}
