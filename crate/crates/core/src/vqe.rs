//! Hardware-efficient ansatz, CVaR energy estimate and the variational loop
//! for a single register fragment.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::DiagonalHamiltonian;
use crate::gradfree::{self, GradFreeConfig, GradFreeError};
use crate::qsim::{self, QsimError, ShotHistogram, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VqeError {
    #[error("ansatz expects {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("ansatz needs at least one layer and one qubit")]
    EmptyAnsatz,
    #[error("alpha must lie in (0, 1], got {0}")]
    Alpha(f64),
    #[error("histogram holds {got} shots, expected {expected}")]
    ShotMismatch { expected: u64, got: u64 },
    #[error("register width {hamiltonian} does not match ansatz width {ansatz}")]
    WidthMismatch { hamiltonian: usize, ansatz: usize },
    #[error(transparent)]
    Sim(#[from] QsimError),
    #[error(transparent)]
    Optimizer(#[from] GradFreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n_qubits: usize,
    pub layers: usize,
}

impl AnsatzConfig {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, layers: 3 }
    }

    pub fn parameter_count(&self) -> usize {
        self.n_qubits * self.layers
    }
}

/// Prepares the ansatz state: a Hadamard on every wire, then `layers` blocks
/// of one Ry per wire followed by the CNOT ring `q -> q+1`, closed by
/// `n-1 -> 0`. Parameter `j * n + q` drives wire `q` in block `j`.
pub fn build_ansatz(cfg: &AnsatzConfig, theta: &[f64]) -> Result<StateVector, VqeError> {
    if cfg.n_qubits == 0 || cfg.layers == 0 {
        return Err(VqeError::EmptyAnsatz);
    }
    if theta.len() != cfg.parameter_count() {
        return Err(VqeError::ParameterCount { expected: cfg.parameter_count(), got: theta.len() });
    }
    let n = cfg.n_qubits;
    let mut state = StateVector::zero(n)?;
    for q in 0..n {
        state.h(q)?;
    }
    for layer in theta.chunks_exact(n) {
        for (q, &angle) in layer.iter().enumerate() {
            state.ry(q, angle)?;
        }
        if n > 1 {
            for q in 0..n - 1 {
                state.cnot(q, q + 1)?;
            }
            state.cnot(n - 1, 0)?;
        }
    }
    Ok(state)
}

// Qubits below this index are rotated chunk by chunk while the chunk is
// cache resident.
const LOW_BLOCK_BITS: usize = 11;

/// Image of basis index `i` under the CNOT ring on `n` wires: bit `k >= 1`
/// becomes the parity of bits `0..=k`, then bit 0 absorbs the new top bit.
#[cfg(test)]
fn ring_image(i: usize, n: usize) -> usize {
    let mut p = i;
    p ^= p << 1;
    p ^= p << 2;
    p ^= p << 4;
    p ^= p << 8;
    p ^= p << 16;
    p &= (1usize << n) - 1;
    p ^ ((p >> (n - 1)) & 1)
}

/// Preimage of basis index `j` under the CNOT ring.
fn ring_preimage(j: usize, n: usize) -> usize {
    let p = j ^ ((j >> (n - 1)) & 1);
    p ^ ((p << 1) & ((1usize << n) - 1))
}

fn ry_pass(amps: &mut [f64], q: usize, (c, s): (f64, f64)) {
    let stride = 1usize << q;
    for block in amps.chunks_exact_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (v0, v1) = (*x0, *x1);
            *x0 = c * v0 - s * v1;
            *x1 = s * v0 + c * v1;
        }
    }
}

/// Rotations on wires `q` and `q + 1` in one sweep.
fn ry_pair_pass(amps: &mut [f64], q: usize, (c0, s0): (f64, f64), (c1, s1): (f64, f64)) {
    let stride = 1usize << q;
    for block in amps.chunks_exact_mut(stride << 2) {
        let (a, rest) = block.split_at_mut(stride);
        let (b, rest) = rest.split_at_mut(stride);
        let (c, d) = rest.split_at_mut(stride);
        for i in 0..stride {
            let (v0, v1, v2, v3) = (a[i], b[i], c[i], d[i]);
            let (w0, w1) = (c0 * v0 - s0 * v1, s0 * v0 + c0 * v1);
            let (w2, w3) = (c0 * v2 - s0 * v3, s0 * v2 + c0 * v3);
            a[i] = c1 * w0 - s1 * w2;
            c[i] = s1 * w0 + c1 * w2;
            b[i] = c1 * w1 - s1 * w3;
            d[i] = s1 * w1 + c1 * w3;
        }
    }
}

fn ry_layer(amps: &mut [f64], n: usize, angles: &[f64]) {
    let cs: Vec<(f64, f64)> = angles
        .iter()
        .map(|t| {
            let (s, c) = (t * 0.5).sin_cos();
            (c, s)
        })
        .collect();
    let low = n.min(LOW_BLOCK_BITS);
    for chunk in amps.chunks_exact_mut(1 << low) {
        for (q, &r) in cs.iter().enumerate().take(low) {
            ry_pass(chunk, q, r);
        }
    }
    let mut q = low;
    while q + 1 < n {
        ry_pair_pass(amps, q, cs[q], cs[q + 1]);
        q += 2;
    }
    if q < n {
        ry_pass(amps, q, cs[q]);
    }
}

/// `out[j] = amps[preimage(j)]`, squared when `square` is set.
fn ring(amps: &[f64], out: &mut [f64], n: usize, square: bool) {
    for (j, o) in out.iter_mut().enumerate() {
        let a = amps[ring_preimage(j, n)];
        *o = if square { a * a } else { a };
    }
}

/// Reusable buffers for repeated ansatz evaluation on one register width.
#[derive(Debug, Default)]
pub struct AnsatzWorkspace {
    amps: Vec<f64>,
    scratch: Vec<f64>,
}

impl AnsatzWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Measurement distribution of [`build_ansatz`], computed on real
    /// amplitudes. Every gate in the circuit is real, so this matches the
    /// complex simulation up to rounding.
    pub fn probabilities(&mut self, cfg: &AnsatzConfig, theta: &[f64]) -> Result<&[f64], VqeError> {
        if cfg.n_qubits == 0 || cfg.layers == 0 {
            return Err(VqeError::EmptyAnsatz);
        }
        if theta.len() != cfg.parameter_count() {
            return Err(VqeError::ParameterCount { expected: cfg.parameter_count(), got: theta.len() });
        }
        if let Some(&bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(QsimError::NonFiniteAngle(bad).into());
        }
        let n = cfg.n_qubits;
        if n > qsim::MAX_QUBITS {
            return Err(QsimError::QubitCount(n).into());
        }
        let dim = 1usize << n;
        self.amps.resize(dim, 0.0);
        self.scratch.resize(dim, 0.0);
        let amps = &mut self.amps;

        // first block acts on a product state: Ry(t) H |0> per wire
        let h = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = 1.0;
        for (q, &t) in theta[..n].iter().enumerate() {
            let (s, c) = (t * 0.5).sin_cos();
            let (v0, v1) = (c * h - s * h, s * h + c * h);
            let (lo, hi) = amps[..2 << q].split_at_mut(1 << q);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                *b = *a * v1;
                *a *= v0;
            }
        }
        if n == 1 {
            for layer in theta.chunks_exact(1).skip(1) {
                ry_pass(amps, 0, {
                    let (s, c) = (layer[0] * 0.5).sin_cos();
                    (c, s)
                });
            }
            amps.iter_mut().for_each(|a| *a *= *a);
            return Ok(&self.amps);
        }
        let last = cfg.layers - 1;
        ring(&self.amps, &mut self.scratch, n, last == 0);
        std::mem::swap(&mut self.amps, &mut self.scratch);
        for (j, layer) in theta.chunks_exact(n).enumerate().skip(1) {
            ry_layer(&mut self.amps, n, layer);
            ring(&self.amps, &mut self.scratch, n, j == last);
            std::mem::swap(&mut self.amps, &mut self.scratch);
        }
        Ok(&self.amps)
    }
}

/// One-shot convenience wrapper over [`AnsatzWorkspace::probabilities`].
pub fn ansatz_probabilities(cfg: &AnsatzConfig, theta: &[f64]) -> Result<Vec<f64>, VqeError> {
    AnsatzWorkspace::new().probabilities(cfg, theta).map(<[f64]>::to_vec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CVaRConfig {
    pub shots: u64,
    pub alpha: f64,
}

impl Default for CVaRConfig {
    fn default() -> Self {
        Self { shots: 1000, alpha: 0.1 }
    }
}

impl CVaRConfig {
    pub fn validate(&self) -> Result<(), VqeError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(VqeError::Alpha(self.alpha));
        }
        if self.shots == 0 {
            return Err(VqeError::Sim(QsimError::NoShots));
        }
        Ok(())
    }

    /// `ceil(alpha * shots)`, at least 1.
    pub fn tail_size(&self) -> u64 {
        // guard against alpha * shots landing a hair above an integer
        let raw = self.alpha * self.shots as f64;
        let t = (raw - 1e-9 * raw.max(1.0)).ceil() as u64;
        t.clamp(1, self.shots)
    }
}

/// Tail entries `(index, energy, shots taken)` in ascending (energy, index)
/// order, holding exactly `tail` shots.
fn tail_entries(h: &DiagonalHamiltonian, hist: &ShotHistogram, tail: u64) -> Vec<(u64, f64, u64)> {
    let mut entries: Vec<(u64, f64, u64)> =
        hist.counts().iter().map(|&(b, c)| (b as u64, h.energy(b as u64), c)).collect();
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut left = tail;
    let mut out = Vec::new();
    for (b, e, c) in entries {
        if left == 0 {
            break;
        }
        let take = c.min(left);
        out.push((b, e, take));
        left -= take;
    }
    out
}

/// Mean of the lowest `ceil(alpha M)` shot energies.
pub fn cvar_energy(h: &DiagonalHamiltonian, hist: &ShotHistogram, cfg: &CVaRConfig) -> Result<f64, VqeError> {
    cfg.validate()?;
    if hist.total_shots() != cfg.shots {
        return Err(VqeError::ShotMismatch { expected: cfg.shots, got: hist.total_shots() });
    }
    let tail = cfg.tail_size();
    let sum: f64 = tail_entries(h, hist, tail).iter().map(|&(_, e, c)| e * c as f64).sum();
    Ok(sum / tail as f64)
}

/// Plain mean energy over all shots.
pub fn mean_energy(h: &DiagonalHamiltonian, hist: &ShotHistogram) -> f64 {
    let sum: f64 = hist.counts().iter().map(|&(b, c)| h.energy(b as u64) * c as f64).sum();
    sum / hist.total_shots() as f64
}

/// Frequency-weighted centroid and RMS spread of the CVaR tail, per encoded
/// variable.
pub fn tail_statistics(h: &DiagonalHamiltonian, hist: &ShotHistogram, cfg: &CVaRConfig) -> (Vec<f64>, Vec<f64>) {
    let entries = tail_entries(h, hist, cfg.tail_size().min(hist.total_shots()));
    let total: f64 = entries.iter().map(|e| e.2 as f64).sum();
    let vars = h.grids().len();
    let mut centroid = vec![0.0; vars];
    for &(b, _, c) in &entries {
        for (v, acc) in centroid.iter_mut().enumerate() {
            *acc += h.coordinate(b, v) * c as f64;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= total);
    let mut rms = vec![0.0; vars];
    for &(b, _, c) in &entries {
        for (v, acc) in rms.iter_mut().enumerate() {
            let d = h.coordinate(b, v) - centroid[v];
            *acc += d * d * c as f64;
        }
    }
    rms.iter_mut().for_each(|r| *r = (*r / total).sqrt());
    (centroid, rms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentResult {
    /// Coordinates of the lowest-energy basis state observed in any shot.
    pub x_best: Vec<f64>,
    pub best_index: u64,
    pub best_energy: f64,
    /// Tail centroid of the final histogram.
    pub x_cvar: Vec<f64>,
    /// RMS deviation of tail coordinates about `x_cvar`.
    pub rms: Vec<f64>,
    pub final_histogram: ShotHistogram,
    pub cvar_trace: Vec<f64>,
    pub evals_used: usize,
    pub theta_opt: Vec<f64>,
}

/// Trains one fragment: COBYLA over the ansatz angles from all zeros,
/// minimizing the CVaR of a fresh shot histogram per evaluation.
pub fn run_fragment<R: Rng + ?Sized>(
    h: &DiagonalHamiltonian,
    a_cfg: &AnsatzConfig,
    c_cfg: &CVaRConfig,
    g_cfg: &GradFreeConfig,
    rng: &mut R,
) -> Result<FragmentResult, VqeError> {
    if h.width() != a_cfg.n_qubits {
        return Err(VqeError::WidthMismatch { hamiltonian: h.width(), ansatz: a_cfg.n_qubits });
    }
    c_cfg.validate()?;
    let mut best: Option<(u64, f64)> = None;
    let track = |hist: &ShotHistogram, best: &mut Option<(u64, f64)>| {
        for &(b, _) in hist.counts() {
            let e = h.energy(b as u64);
            let better = match *best {
                None => true,
                Some((bb, be)) => e < be || (e == be && (b as u64) < bb),
            };
            if better {
                *best = Some((b as u64, e));
            }
        }
    };

    let mut failure: Option<VqeError> = None;
    let mut workspace = AnsatzWorkspace::new();
    let objective = |theta: &[f64]| -> f64 {
        let step = workspace
            .probabilities(a_cfg, theta)
            .and_then(|p| Ok(qsim::sample_distribution(a_cfg.n_qubits, p, c_cfg.shots, &mut *rng)?))
            .and_then(|hist| {
                track(&hist, &mut best);
                cvar_energy(h, &hist, c_cfg)
            });
        match step {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let theta0 = vec![0.0; a_cfg.parameter_count()];
    let result = gradfree::minimize(objective, &theta0, g_cfg);
    if let Some(e) = failure {
        return Err(e);
    }
    let result = result?;

    let final_probs = workspace.probabilities(a_cfg, &result.x_opt)?;
    let final_histogram = qsim::sample_distribution(a_cfg.n_qubits, final_probs, c_cfg.shots, rng)?;
    track(&final_histogram, &mut best);
    let (best_index, best_energy) = best.expect("at least one histogram was sampled");
    let (x_cvar, rms) = tail_statistics(h, &final_histogram, c_cfg);
    Ok(FragmentResult {
        x_best: h.coordinates(best_index),
        best_index,
        best_energy,
        x_cvar,
        rms,
        final_histogram,
        cvar_trace: result.history,
        evals_used: result.evals_used,
        theta_opt: result.x_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::DiscretizationGrid;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_hamiltonian(k: usize) -> DiagonalHamiltonian {
        let g = DiscretizationGrid::new(0.0, ((1u64 << k) - 1) as f64, k).unwrap();
        DiagonalHamiltonian::from_fn(vec![g], |x| x[0]).unwrap()
    }

    #[test]
    fn zero_angles_give_uniform_superposition() {
        let cfg = AnsatzConfig::new(5);
        let s = build_ansatz(&cfg, &[0.0; 15]).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(a.re, 1.0 / 32f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn real_path_matches_state_vector() {
        for n in 1..=7 {
            let cfg = AnsatzConfig::new(n);
            let theta: Vec<f64> = (0..cfg.parameter_count()).map(|k| 0.37 * k as f64 - 1.1).collect();
            let fast = ansatz_probabilities(&cfg, &theta).unwrap();
            let slow = build_ansatz(&cfg, &theta).unwrap().probabilities();
            for (a, b) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ring_image_matches_gate_sequence() {
        for n in 2..=6 {
            for i in 0..1usize << n {
                let mut sv = StateVector::zero(n).unwrap();
                for q in 0..n {
                    if i >> q & 1 == 1 {
                        sv.ry(q, std::f64::consts::PI).unwrap();
                    }
                }
                for q in 0..n - 1 {
                    sv.cnot(q, q + 1).unwrap();
                }
                sv.cnot(n - 1, 0).unwrap();
                let hit = sv.probabilities().iter().position(|p| *p > 0.5).unwrap();
                assert_eq!(hit, ring_image(i, n), "n={n} i={i}");
                assert_eq!(ring_preimage(hit, n), i, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn parameter_count_enforced() {
        let cfg = AnsatzConfig::new(5);
        assert_eq!(cfg.parameter_count(), 15);
        assert_eq!(build_ansatz(&cfg, &[0.0; 10]), Err(VqeError::ParameterCount { expected: 15, got: 10 }));
        let s = build_ansatz(&cfg, &(0..15).map(|i| 0.37 * i as f64).collect::<Vec<_>>()).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cvar_of_degenerate_histogram() {
        let h = line_hamiltonian(4);
        let hist = ShotHistogram::from_counts(4, [(7, 1000)]).unwrap();
        assert_eq!(cvar_energy(&h, &hist, &CVaRConfig::default()).unwrap(), 7.0);
    }

    #[test]
    fn cvar_tail_of_ten_shots() {
        // energies 1..=10, one shot each, alpha 0.3 keeps 1, 2, 3
        let h = line_hamiltonian(4);
        let hist = ShotHistogram::from_counts(4, (1..=10).map(|b| (b, 1))).unwrap();
        let cfg = CVaRConfig { shots: 10, alpha: 0.3 };
        assert_eq!(cfg.tail_size(), 3);
        assert_abs_diff_eq!(cvar_energy(&h, &hist, &cfg).unwrap(), 2.0, epsilon = 1e-15);
        let full = CVaRConfig { shots: 10, alpha: 1.0 };
        assert_abs_diff_eq!(cvar_energy(&h, &hist, &full).unwrap(), mean_energy(&h, &hist), epsilon = 1e-15);
    }

    #[test]
    fn cvar_rejects_mismatch() {
        let h = line_hamiltonian(3);
        let hist = ShotHistogram::from_counts(3, [(1, 5)]).unwrap();
        assert_eq!(
            cvar_energy(&h, &hist, &CVaRConfig::default()),
            Err(VqeError::ShotMismatch { expected: 1000, got: 5 })
        );
        assert!(matches!(
            cvar_energy(&h, &hist, &CVaRConfig { shots: 5, alpha: 0.0 }),
            Err(VqeError::Alpha(_))
        ));
    }

    #[test]
    fn flat_landscape_fragment() {
        let g = DiscretizationGrid::new(-1.0, 1.0, 3).unwrap();
        let h = DiagonalHamiltonian::from_fn(vec![g], |_| 2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = run_fragment(&h, &AnsatzConfig::new(3), &CVaRConfig::default(), &GradFreeConfig::with_budget(60), &mut rng).unwrap();
        assert!(r.cvar_trace.iter().all(|&v| v == 2.5));
        // ties resolve to the lowest indices, so the tail centroid is a
        // weighted average of the lowest observed grid points
        let (c, _) = tail_statistics(&h, &r.final_histogram, &CVaRConfig::default());
        assert_eq!(c, r.x_cvar);
        assert!(r.x_cvar[0] >= -1.0 && r.x_cvar[0] <= 1.0);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn fragment_is_deterministic() {
        let h = line_hamiltonian(4);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            run_fragment(&h, &AnsatzConfig::new(4), &CVaRConfig::default(), &GradFreeConfig::with_budget(80), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn width_mismatch_rejected() {
        let h = line_hamiltonian(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_fragment(&h, &AnsatzConfig::new(5), &CVaRConfig::default(), &GradFreeConfig::default(), &mut rng);
        assert_eq!(err.unwrap_err(), VqeError::WidthMismatch { hamiltonian: 4, ansatz: 5 });
    }
}
