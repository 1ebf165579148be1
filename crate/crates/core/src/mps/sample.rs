//! Perfect sampling of measurement outcomes from an MPS.
//!
//! Sweeping left to right, each qubit's marginal is conditioned on the bits
//! already drawn, so a single pass produces an exact sample from
//! `|⟨b|U|ψ⟩|²`. The right environments are basis-independent
//! (`Σ_b U†|b⟩⟨b|U = 1`), so they are computed once per state and reused for
//! every sample.

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::pauli::BasisString;
use crate::C64;

use super::{transfer_right, MpsState};

impl MpsState {
    /// Draw one bit-string from the distribution `|⟨b|U|ψ⟩|²` defined by the
    /// measurement basis.
    pub fn sample_bitstring<R: Rng + ?Sized>(
        &self,
        basis: &BasisString,
        rng: &mut R,
    ) -> Result<Vec<u8>> {
        let sampler = MpsSampler::new(self)?;
        sampler.sample(basis, rng)
    }
}

/// Reusable sampler holding the precomputed right environments of a state.
pub struct MpsSampler<'a> {
    state: &'a MpsState,
    right_envs: Vec<Array2<C64>>,
}

impl<'a> MpsSampler<'a> {
    pub fn new(state: &'a MpsState) -> Result<Self> {
        let mut right_envs = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0)); state.n() + 1];
        for i in (0..state.n()).rev() {
            right_envs[i] = transfer_right(&right_envs[i + 1], &state.tensors[i], &state.tensors[i]);
        }
        if right_envs[0][[0, 0]].re <= 0.0 {
            return Err(crate::error::Error::InvalidState(
                "cannot sample from a zero-norm state".into(),
            ));
        }
        Ok(MpsSampler { state, right_envs })
    }

    pub fn sample<R: Rng + ?Sized>(&self, basis: &BasisString, rng: &mut R) -> Result<Vec<u8>> {
        let n = self.state.n();
        if basis.len() != n {
            return Err(crate::error::Error::invalid_argument(format!(
                "basis length must equal the system size {n}"
            )));
        }
        let mut bits = Vec::with_capacity(n);
        // Ket-side partial contraction of the rotated chain over drawn bits.
        let mut left = vec![C64::new(1.0, 0.0)];
        for (i, t) in self.state.tensors.iter().enumerate() {
            let (l, _, r) = t.dim();
            let env = &self.right_envs[i + 1];
            let mut weights = [0.0f64; 2];
            let mut candidates: [Vec<C64>; 2] = [vec![], vec![]];
            for bit in 0..2u8 {
                let row = basis.axis(i).rotation_row(bit);
                let mut w = vec![C64::new(0.0, 0.0); r];
                for a in 0..l {
                    let va = left[a];
                    if va == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (s, &u) in row.iter().enumerate() {
                        if u == 0.0 {
                            continue;
                        }
                        let coeff = va * u;
                        for b in 0..r {
                            w[b] += coeff * t[[a, s, b]];
                        }
                    }
                }
                // p(bit) ∝ w† · env · w with env indexed (bra, ket).
                let mut p = 0.0;
                for a in 0..r {
                    for b in 0..r {
                        p += (w[a].conj() * env[[a, b]] * w[b]).re;
                    }
                }
                weights[bit as usize] = p.max(0.0);
                candidates[bit as usize] = w;
            }
            let total = weights[0] + weights[1];
            let chosen = if total <= 0.0 {
                // Numerically dead branch; fall back to a fair coin.
                u8::from(rng.gen::<f64>() < 0.5)
            } else {
                u8::from(rng.gen::<f64>() >= weights[0] / total)
            };
            bits.push(chosen);
            left = std::mem::take(&mut candidates[chosen as usize]);
            // Rescale to keep the running contraction O(1).
            let scale: f64 = left.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if scale > 0.0 {
                for z in &mut left {
                    *z /= scale;
                }
            }
        }
        Ok(bits)
    }
}
