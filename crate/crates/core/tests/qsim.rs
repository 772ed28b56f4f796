use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use qprecond::qsim::{QsimError, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn assert_amps(state: &StateVector, expected: &[Complex64], tol: f64) {
    assert_eq!(state.len(), expected.len());
    for (i, (a, e)) in state.amplitudes().iter().zip(expected).enumerate() {
        assert!((a - e).norm() <= tol, "amplitude {i}: {a} vs {e}");
    }
}

fn re(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

#[test]
fn zero_state_layout() {
    assert_amps(&StateVector::zero(1).unwrap(), &re(&[1.0, 0.0]), 0.0);
    let s = StateVector::zero(5).unwrap();
    assert_eq!(s.len(), 32);
    assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
    assert!(s.amplitudes()[1..].iter().all(|a| *a == Complex64::new(0.0, 0.0)));
    assert_eq!(StateVector::zero(21), Err(QsimError::QubitCount(21)));
    assert_eq!(StateVector::zero(0), Err(QsimError::QubitCount(0)));
}

#[test]
fn hadamard_examples() {
    let mut s = StateVector::zero(1).unwrap();
    s.h(0).unwrap();
    assert_amps(&s, &re(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]), 1e-15);

    let mut s = StateVector::zero(5).unwrap();
    for q in 0..5 {
        s.h(q).unwrap();
    }
    assert_amps(&s, &re(&[1.0 / 32f64.sqrt(); 32]), 1e-15);

    let mut s = StateVector::zero(3).unwrap();
    s.ry(1, 0.3).unwrap();
    let before = s.clone();
    s.h(2).unwrap();
    s.h(2).unwrap();
    assert_amps(&s, before.amplitudes(), 1e-12);
    assert_eq!(s.h(3), Err(QsimError::QubitIndex { index: 3, n_qubits: 3 }));
}

#[test]
fn ry_examples() {
    let mut s = StateVector::zero(2).unwrap();
    s.h(0).unwrap();
    s.ry(1, 0.7).unwrap();
    let before = s.clone();
    s.ry(0, 0.0).unwrap();
    assert_eq!(s, before);

    let mut s = StateVector::zero(1).unwrap();
    s.ry(0, PI).unwrap();
    assert!(s.amplitudes()[0].norm() < 1e-15);
    assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-15);

    let mut s = StateVector::zero(1).unwrap();
    s.ry(0, PI / 2.0).unwrap();
    assert_amps(&s, &re(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]), 1e-15);

    assert!(matches!(s.ry(0, f64::NAN), Err(QsimError::NonFiniteAngle(_))));
    assert!(matches!(s.ry(0, f64::INFINITY), Err(QsimError::NonFiniteAngle(_))));
}

#[test]
fn cnot_truth_table() {
    // control (qubit 0) set and target clear is index 1; the flip gives index 3
    let mut s = StateVector::zero(2).unwrap();
    s.ry(0, PI).unwrap();
    s.cnot(0, 1).unwrap();
    assert!((s.amplitudes()[3].norm() - 1.0).abs() < 1e-15);

    let mut s = StateVector::zero(2).unwrap();
    s.cnot(0, 1).unwrap();
    assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));

    let mut s = StateVector::zero(3).unwrap();
    for q in 0..3 {
        s.h(q).unwrap();
        s.ry(q, 0.4 * (q + 1) as f64).unwrap();
    }
    let before = s.clone();
    s.cnot(2, 0).unwrap();
    s.cnot(2, 0).unwrap();
    assert_eq!(s, before);
    assert_eq!(s.cnot(1, 1), Err(QsimError::SameQubit(1)));
}

#[derive(Debug, Clone)]
enum Gate {
    H(usize),
    Ry(usize, f64),
    Cnot(usize, usize),
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    prop_oneof![
        (0..n).prop_map(Gate::H),
        (0..n, -10.0..10.0f64).prop_map(|(q, t)| Gate::Ry(q, t)),
        (0..n, 1..n.max(2)).prop_map(move |(c, off)| Gate::Cnot(c, (c + off) % n)),
    ]
}

fn circuit() -> impl Strategy<Value = (usize, Vec<Gate>)> {
    (2usize..=7).prop_flat_map(|n| (Just(n), prop::collection::vec(gate(n), 0..60)))
}

fn apply(s: &mut StateVector, g: &Gate) {
    match *g {
        Gate::H(q) => s.h(q).unwrap(),
        Gate::Ry(q, t) => s.ry(q, t).unwrap(),
        Gate::Cnot(c, t) => s.cnot(c, t).unwrap(),
    }
}

fn inverse(g: &Gate) -> Gate {
    match *g {
        Gate::Ry(q, t) => Gate::Ry(q, -t),
        ref other => other.clone(),
    }
}

proptest! {
    #[test]
    fn norm_is_preserved((n, gates) in circuit()) {
        let mut s = StateVector::zero(n).unwrap();
        for g in &gates {
            apply(&mut s, g);
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn each_gate_undone_by_its_inverse((n, gates) in circuit(), probe in 0usize..60) {
        let mut s = StateVector::zero(n).unwrap();
        for g in &gates {
            apply(&mut s, g);
        }
        let before = s.clone();
        let g = gate_at(&gates, probe, n);
        apply(&mut s, &g);
        apply(&mut s, &inverse(&g));
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn sampling_is_reproducible((n, gates) in circuit(), seed in any::<u64>()) {
        let mut s = StateVector::zero(n).unwrap();
        for g in &gates {
            apply(&mut s, g);
        }
        let a = s.sample(500, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = s.sample(500, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.counts().iter().map(|c| c.1).sum::<u64>(), 500);
        prop_assert!(a.counts().iter().all(|&(k, _)| k < 1 << n));
        prop_assert!(a.counts().windows(2).all(|w| w[0].0 < w[1].0));
    }
}

fn gate_at(gates: &[Gate], probe: usize, n: usize) -> Gate {
    gates.get(probe).cloned().unwrap_or(Gate::Ry(probe % n, 0.1 * probe as f64))
}

#[test]
fn deterministic_state_samples_one_outcome() {
    let s = StateVector::zero(5).unwrap();
    let hist = s.sample(1000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(hist.counts(), &[(0, 1000)]);
    assert_eq!(hist.total_shots(), 1000);
}

#[test]
fn sampling_rejects_bad_requests() {
    let s = StateVector::zero(2).unwrap();
    assert_eq!(s.sample(0, &mut ChaCha8Rng::seed_from_u64(0)), Err(QsimError::NoShots));
}

/// Upper 0.1% point of the chi-square distribution with 31 degrees of
/// freedom.
const CHI2_31_999: f64 = 61.098;

fn uniform_chi_square(seed: u64, shots: u64) -> f64 {
    let mut s = StateVector::zero(5).unwrap();
    for q in 0..5 {
        s.h(q).unwrap();
    }
    let hist = s.sample(shots, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let expected = shots as f64 / 32.0;
    (0..32).map(|k| (hist.count(k) as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn uniform_sampling_passes_chi_square() {
    let reps = 200;
    let passed = (0..reps).filter(|&seed| uniform_chi_square(seed, 100_000) < CHI2_31_999).count();
    assert!(passed * 100 >= reps as usize * 99, "{passed}/{reps} repetitions below the critical value");
}

#[test]
fn uniform_frequencies_within_five_sigma() {
    let shots = 100_000u64;
    let mut s = StateVector::zero(5).unwrap();
    for q in 0..5 {
        s.h(q).unwrap();
    }
    let hist = s.sample(shots, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    let p = 1.0 / 32.0;
    let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
    for k in 0..32 {
        let dev = (hist.count(k) as f64 - shots as f64 * p).abs();
        assert!(dev < 5.0 * sigma, "index {k}: deviation {dev} vs sigma {sigma}");
    }
}

#[test]
fn skewed_distribution_matches_probabilities() {
    let mut s = StateVector::zero(3).unwrap();
    s.ry(0, 1.1).unwrap();
    s.h(1).unwrap();
    s.cnot(1, 2).unwrap();
    s.ry(2, -0.6).unwrap();
    let probs = s.probabilities();
    let shots = 200_000u64;
    let hist = s.sample(shots, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for (k, p) in probs.iter().enumerate() {
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!((hist.count(k) as f64 - shots as f64 * p).abs() < 5.0 * sigma, "index {k}");
    }
}
