//! Shared helpers for the integration suites.

#![allow(dead_code)]

use ndarray::Array1;
use qst_core::dense;
use qst_core::mps::MpsState;
use qst_core::pauli::{BasisAxis, BasisString, PauliOp, PauliString};
use qst_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn random_basis(n: usize, rng: &mut impl Rng) -> BasisString {
    BasisString::new(
        (0..n)
            .map(|_| if rng.gen::<bool>() { BasisAxis::X } else { BasisAxis::Z })
            .collect(),
    )
}

pub fn random_pauli(n: usize, locality: usize, allow_y: bool, rng: &mut impl Rng) -> PauliString {
    let mut sites: Vec<usize> = (0..n).collect();
    for i in (1..sites.len()).rev() {
        sites.swap(i, rng.gen_range(0..=i));
    }
    let ops = sites[..locality].iter().map(|&s| {
        let choices = if allow_y { 3 } else { 2 };
        let op = match rng.gen_range(0..choices) {
            0 => PauliOp::X,
            1 => PauliOp::Z,
            _ => PauliOp::Y,
        };
        (s, op)
    });
    PauliString::new(ops).expect("distinct sites")
}

pub fn bits_of(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|site| ((index >> (n - 1 - site)) & 1) as u8).collect()
}

/// Dense expectation `⟨ψ|P|ψ⟩` computed without the MPS contraction code.
pub fn dense_pauli_expectation(state: &Array1<C64>, p: &PauliString, n: usize) -> f64 {
    let m = dense::pauli_matrix(p, n).expect("dense Pauli");
    let mv = m.dot(state);
    let val: C64 = state.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum();
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    val.re / norm
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities; outcomes with tiny expectation are pooled.
pub fn chi_square_p_value(counts: &[u64], probabilities: &[f64], total: u64) -> f64 {
    assert_eq!(counts.len(), probabilities.len());
    let mut statistic = 0.0;
    let mut pooled_count = 0.0;
    let mut pooled_expect = 0.0;
    let mut bins = 0usize;
    for (&c, &p) in counts.iter().zip(probabilities) {
        let expect = p * total as f64;
        if expect < 5.0 {
            pooled_count += c as f64;
            pooled_expect += expect;
            continue;
        }
        bins += 1;
        statistic += (c as f64 - expect).powi(2) / expect;
    }
    if pooled_expect > 0.0 {
        bins += 1;
        statistic += (pooled_count - pooled_expect).powi(2) / pooled_expect.max(1e-9);
    }
    assert!(bins >= 2, "not enough bins for a chi-square test");
    let dist = ChiSquared::new((bins - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(statistic)
}

/// Seeded random real target drawn as an MPS.
pub fn random_real_target(n: usize, chi: usize, seed: u64) -> MpsState {
    MpsState::new_random_real(n, chi, seed).expect("valid arguments")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
