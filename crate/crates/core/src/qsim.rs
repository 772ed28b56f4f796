//! Dense state-vector simulator for the ansatz gate set (H, Ry, CNOT) plus
//! computational-basis shot sampling.
//!
//! Qubit `q` is bit `q` of the basis index: qubit 0 is the least-significant bit.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 20;

/// Largest accepted deviation of the squared norm from 1 before sampling.
pub const SAMPLE_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("control and target are both qubit {0}")]
    SameQubit(usize),
    #[error("rotation angle is not finite: {0}")]
    NonFiniteAngle(f64),
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("shot count must be at least 1")]
    NoShots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n_qubits` wires.
    pub fn zero(n_qubits: usize) -> Result<Self, QsimError> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QsimError::QubitCount(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, index: usize) -> Result<(), QsimError> {
        if index >= self.n_qubits {
            Err(QsimError::QubitIndex { index, n_qubits: self.n_qubits })
        } else {
            Ok(())
        }
    }

    /// Applies a real 2x2 matrix `[[a, b], [c, d]]` to `target`.
    fn apply_real_1q(&mut self, target: usize, a: f64, b: f64, c: f64, d: f64) {
        let stride = 1usize << target;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                let v0 = *x0;
                let v1 = *x1;
                *x0 = v0 * a + v1 * b;
                *x1 = v0 * c + v1 * d;
            }
        }
    }

    pub fn h(&mut self, target: usize) -> Result<(), QsimError> {
        self.check_qubit(target)?;
        let s = FRAC_1_SQRT_2;
        self.apply_real_1q(target, s, s, s, -s);
        Ok(())
    }

    /// Ry(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]].
    pub fn ry(&mut self, target: usize, theta: f64) -> Result<(), QsimError> {
        self.check_qubit(target)?;
        if !theta.is_finite() {
            return Err(QsimError::NonFiniteAngle(theta));
        }
        let (s, c) = (theta * 0.5).sin_cos();
        self.apply_real_1q(target, c, -s, s, c);
        Ok(())
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<(), QsimError> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QsimError::SameQubit(control));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            // visit each swapped pair once, from the member with the target bit clear
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Draws `shots` computational-basis outcomes by inverse CDF over the
    /// squared amplitudes.
    pub fn sample<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Result<ShotHistogram, QsimError> {
        sample_distribution(self.n_qubits, &self.probabilities(), shots, rng)
    }
}

/// Draws `shots` outcomes from a probability vector over `2^n_qubits` basis
/// states by inverse CDF. Consumes one uniform draw per shot.
pub fn sample_distribution<R: Rng + ?Sized>(
    n_qubits: usize,
    probs: &[f64],
    shots: u64,
    rng: &mut R,
) -> Result<ShotHistogram, QsimError> {
    if shots == 0 {
        return Err(QsimError::NoShots);
    }
    if !(1..=MAX_QUBITS).contains(&n_qubits) || probs.len() != 1 << n_qubits {
        return Err(QsimError::QubitCount(n_qubits));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SAMPLE_NORM_TOLERANCE {
        return Err(QsimError::NotNormalized(total));
    }
    // Each shot takes the first index whose cumulative mass exceeds its
    // uniform draw; sorting the draws turns that into one sweep.
    let mut draws: Vec<f64> = (0..shots).map(|_| rng.gen::<f64>() * total).collect();
    draws.sort_by(f64::total_cmp);
    let last = probs.len() - 1;
    let mut counts: Vec<(usize, u64)> = Vec::new();
    let mut idx = 0;
    let mut cum = probs[0];
    for u in draws {
        while cum <= u && idx < last {
            idx += 1;
            cum += probs[idx];
        }
        match counts.last_mut() {
            Some((k, c)) if *k == idx => *c += 1,
            _ => counts.push((idx, 1)),
        }
    }
    Ok(ShotHistogram { n_qubits, counts, total_shots: shots })
}

/// Measurement counts, stored sparsely as `(basis index, count)` pairs in
/// ascending index order. Only observed outcomes are present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    n_qubits: usize,
    counts: Vec<(usize, u64)>,
    total_shots: u64,
}

impl ShotHistogram {
    /// Builds a histogram from explicit counts. Zero counts are dropped and
    /// repeated indices merged.
    pub fn from_counts(n_qubits: usize, counts: impl IntoIterator<Item = (usize, u64)>) -> Result<Self, QsimError> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QsimError::QubitCount(n_qubits));
        }
        let mut pairs: Vec<(usize, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        for &(idx, _) in &pairs {
            if idx >> n_qubits != 0 {
                return Err(QsimError::QubitIndex { index: idx, n_qubits });
            }
        }
        pairs.sort_unstable_by_key(|&(idx, _)| idx);
        let mut merged: Vec<(usize, u64)> = Vec::with_capacity(pairs.len());
        for (idx, c) in pairs {
            match merged.last_mut() {
                Some((k, acc)) if *k == idx => *acc += c,
                _ => merged.push((idx, c)),
            }
        }
        let total_shots = merged.iter().map(|&(_, c)| c).sum();
        Ok(Self { n_qubits, counts: merged, total_shots })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn counts(&self) -> &[(usize, u64)] {
        &self.counts
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts
            .binary_search_by_key(&index, |&(k, _)| k)
            .map(|pos| self.counts[pos].1)
            .unwrap_or(0)
    }
}
