//! Negative log-likelihood and its analytic conjugate gradient.
//!
//! The per-record loss is `−log(|⟨b|U|ψ(A)⟩|² / ⟨ψ|ψ⟩)`: the norm is divided
//! out analytically, so the loss and gradient are invariant under rescaling
//! of the tensors and no renormalization is needed during optimization.
//!
//! Gradients are reported as `∂L/∂Ā` (the conjugate Wirtinger derivative),
//! which is the descent direction used by the optimizer: `A ← A − δ ∂L/∂Ā`.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measurement::Dataset;
use crate::mps::MpsState;
use crate::pauli::{BasisAxis, BasisString};
use crate::C64;

/// Model probabilities are clamped below at this value inside the log, so a
/// record the model assigns zero probability contributes a large-but-finite
/// loss and a zero gradient instead of an infinity.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Records compiled to per-site codes: 0 = (Z, 0), 1 = (Z, 1),
/// 2 = (X, 0), 3 = (X, 1).
#[derive(Debug, Clone)]
pub(crate) struct CompiledRecords {
    pub n: usize,
    codes: Vec<u8>,
    weights: Option<Vec<f64>>,
}

impl CompiledRecords {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let n = ds.n();
        let mut codes = Vec::with_capacity(ds.len() * n);
        for record in ds.records() {
            for site in 0..n {
                codes.push(encode(record.basis.axis(site), record.bits[site]));
            }
        }
        CompiledRecords {
            n,
            codes,
            weights: None,
        }
    }

    pub fn from_weighted(n: usize, outcomes: &[(BasisString, Vec<u8>, f64)]) -> Result<Self> {
        let mut codes = Vec::with_capacity(outcomes.len() * n);
        let mut weights = Vec::with_capacity(outcomes.len());
        for (basis, bits, weight) in outcomes {
            if basis.len() != n || bits.len() != n {
                return Err(Error::invalid_argument(
                    "weighted outcome length does not match system size",
                ));
            }
            for site in 0..n {
                codes.push(encode(basis.axis(site), bits[site]));
            }
            weights.push(*weight);
        }
        Ok(CompiledRecords {
            n,
            codes,
            weights: Some(weights),
        })
    }

    pub fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.codes.len() / self.n
        }
    }

    fn record(&self, index: usize) -> &[u8] {
        &self.codes[index * self.n..(index + 1) * self.n]
    }

    fn weight(&self, index: usize, uniform: f64) -> f64 {
        match &self.weights {
            Some(w) => w[index],
            None => uniform,
        }
    }
}

fn encode(axis: BasisAxis, bit: u8) -> u8 {
    match (axis, bit & 1) {
        (BasisAxis::Z, 0) => 0,
        (BasisAxis::Z, _) => 1,
        (BasisAxis::X, 0) => 2,
        (BasisAxis::X, _) => 3,
    }
}

pub(crate) struct LossGrad {
    pub loss: f64,
    pub grad: Option<Vec<Array3<C64>>>,
}

/// Loss (and optionally gradient) of a batch. `indices = None` means the
/// whole record set; weights default to `1/B`. Record contributions are
/// reduced in fixed chunk order, so results do not depend on thread count.
pub(crate) fn batch_loss(
    tensors: &[Array3<C64>],
    records: &CompiledRecords,
    indices: Option<&[usize]>,
    want_grad: bool,
) -> LossGrad {
    let n = tensors.len();
    debug_assert_eq!(n, records.n);
    let count = indices.map_or(records.len(), |ix| ix.len());
    assert!(count > 0, "empty batch");
    let uniform = 1.0 / count as f64;

    let norm_sqr = norm_envs(tensors).0;
    if !norm_sqr.is_finite() || norm_sqr <= 0.0 {
        // Diverged parameters: surface a NaN loss so the caller can abandon
        // this restart instead of silently optimizing a clamped constant.
        return LossGrad {
            loss: f64::NAN,
            grad: want_grad.then(|| zeros_like(tensors)),
        };
    }

    const CHUNK: usize = 256;
    let chunk_count = count.div_ceil(CHUNK);
    let partials: Vec<ChunkResult> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(count);
            let mut ws = Workspace::new(tensors);
            let mut out = ChunkResult::new(tensors, want_grad);
            for slot in lo..hi {
                let index = indices.map_or(slot, |ix| ix[slot]);
                let weight = records.weight(index, uniform);
                accumulate_record(
                    tensors,
                    records.record(index),
                    weight,
                    norm_sqr,
                    want_grad,
                    &mut ws,
                    &mut out,
                );
            }
            out
        })
        .collect();

    let mut loss = 0.0;
    let mut live_weight = 0.0;
    let mut grad_amp: Option<Vec<Array3<C64>>> = want_grad.then(|| zeros_like(tensors));
    for part in partials {
        loss += part.loss;
        live_weight += part.live_weight;
        if let (Some(total), Some(partial)) = (grad_amp.as_mut(), part.grad) {
            for (t, p) in total.iter_mut().zip(partial) {
                *t += &p;
            }
        }
    }

    let grad = grad_amp.map(|amp_part| {
        // dL/dĀ = −conj(T) + (Σ_unclamped w) · (NL·A·NR) / ⟨ψ|ψ⟩
        let norm_part = norm_gradient(tensors);
        amp_part
            .into_iter()
            .zip(norm_part)
            .map(|(t, nenv)| {
                let mut g = t.mapv(|z| -z.conj());
                g.zip_mut_with(&nenv, |gz, nz| {
                    *gz += nz * (live_weight / norm_sqr);
                });
                g
            })
            .collect()
    });

    LossGrad { loss, grad }
}

struct ChunkResult {
    loss: f64,
    live_weight: f64,
    grad: Option<Vec<Array3<C64>>>,
}

impl ChunkResult {
    fn new(tensors: &[Array3<C64>], want_grad: bool) -> Self {
        ChunkResult {
            loss: 0.0,
            live_weight: 0.0,
            grad: want_grad.then(|| zeros_like(tensors)),
        }
    }
}

struct Workspace {
    /// `left[i]` = row vector after contracting sites `< i`.
    left: Vec<Vec<C64>>,
    /// `right[i]` = column vector after contracting sites `≥ i`.
    right: Vec<Vec<C64>>,
}

impl Workspace {
    fn new(tensors: &[Array3<C64>]) -> Self {
        let n = tensors.len();
        let mut dims = Vec::with_capacity(n + 1);
        dims.push(1);
        for t in tensors {
            dims.push(t.dim().2);
        }
        Workspace {
            left: dims.iter().map(|&d| vec![C64::new(0.0, 0.0); d]).collect(),
            right: (0..=n)
                .map(|i| vec![C64::new(0.0, 0.0); dims[i]])
                .collect(),
        }
    }
}

/// Per-site rotated matrix-vector products. `code` selects which linear
/// combination of the two physical slices applies.
#[inline]
fn forward_site(t: &Array3<C64>, code: u8, input: &[C64], output: &mut [C64]) {
    let (l, _, r) = t.dim();
    let data = t.as_slice().expect("standard layout");
    for z in output.iter_mut() {
        *z = C64::new(0.0, 0.0);
    }
    match code {
        0 | 1 => {
            let s = code as usize;
            for (a, &va) in input.iter().enumerate().take(l) {
                if va == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &data[a * 2 * r + s * r..a * 2 * r + s * r + r];
                for (o, &m) in output.iter_mut().zip(row) {
                    *o += va * m;
                }
            }
        }
        _ => {
            let sign = if code == 2 { 1.0 } else { -1.0 };
            for (a, &va) in input.iter().enumerate().take(l) {
                if va == C64::new(0.0, 0.0) {
                    continue;
                }
                let va = va * FRAC_1_SQRT_2;
                let row0 = &data[a * 2 * r..a * 2 * r + r];
                let row1 = &data[a * 2 * r + r..a * 2 * r + 2 * r];
                for b in 0..r {
                    output[b] += va * (row0[b] + sign * row1[b]);
                }
            }
        }
    }
}

#[inline]
fn backward_site(t: &Array3<C64>, code: u8, input: &[C64], output: &mut [C64]) {
    let (l, _, r) = t.dim();
    let data = t.as_slice().expect("standard layout");
    match code {
        0 | 1 => {
            let s = code as usize;
            for (a, o) in output.iter_mut().enumerate().take(l) {
                let row = &data[a * 2 * r + s * r..a * 2 * r + s * r + r];
                let mut z = C64::new(0.0, 0.0);
                for (m, &v) in row.iter().zip(input) {
                    z += *m * v;
                }
                *o = z;
            }
        }
        _ => {
            let sign = if code == 2 { 1.0 } else { -1.0 };
            for (a, o) in output.iter_mut().enumerate().take(l) {
                let row0 = &data[a * 2 * r..a * 2 * r + r];
                let row1 = &data[a * 2 * r + r..a * 2 * r + 2 * r];
                let mut z = C64::new(0.0, 0.0);
                for b in 0..r {
                    z += (row0[b] + sign * row1[b]) * input[b];
                }
                *o = z * FRAC_1_SQRT_2;
            }
        }
    }
}

fn accumulate_record(
    tensors: &[Array3<C64>],
    codes: &[u8],
    weight: f64,
    norm_sqr: f64,
    want_grad: bool,
    ws: &mut Workspace,
    out: &mut ChunkResult,
) {
    let n = tensors.len();
    ws.left[0][0] = C64::new(1.0, 0.0);
    for i in 0..n {
        let (input, rest) = ws.left.split_at_mut(i + 1);
        forward_site(&tensors[i], codes[i], &input[i], &mut rest[0]);
    }
    let amp = ws.left[n][0];
    let prob = amp.norm_sqr() / norm_sqr;

    if !(prob > PROBABILITY_FLOOR) {
        out.loss += weight * (-PROBABILITY_FLOOR.ln());
        return;
    }
    out.loss += weight * (-prob.ln());
    out.live_weight += weight;

    if !want_grad {
        return;
    }
    ws.right[n][0] = C64::new(1.0, 0.0);
    for i in (0..n).rev() {
        let (head, tail) = ws.right.split_at_mut(i + 1);
        backward_site(&tensors[i], codes[i], &tail[0], &mut head[i]);
    }

    // T_i[α, s, β] += (w/amp) · u_s · L_i[α] · R_{i+1}[β]
    let scale = weight / amp;
    let grad = out.grad.as_mut().expect("gradient requested");
    for i in 0..n {
        let (l_dim, _, r_dim) = tensors[i].dim();
        let g = grad[i].as_slice_mut().expect("standard layout");
        let left = &ws.left[i];
        let right = &ws.right[i + 1];
        let terms: &[(usize, f64)] = match codes[i] {
            0 => &[(0, 1.0)],
            1 => &[(1, 1.0)],
            2 => &[(0, FRAC_1_SQRT_2), (1, FRAC_1_SQRT_2)],
            _ => &[(0, FRAC_1_SQRT_2), (1, -FRAC_1_SQRT_2)],
        };
        for &(s, u) in terms {
            for a in 0..l_dim {
                let c = scale * u * left[a];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &mut g[a * 2 * r_dim + s * r_dim..a * 2 * r_dim + s * r_dim + r_dim];
                for (gz, &rv) in row.iter_mut().zip(right) {
                    *gz += c * rv;
                }
            }
        }
    }
}

pub(crate) fn zeros_like(tensors: &[Array3<C64>]) -> Vec<Array3<C64>> {
    tensors.iter().map(|t| Array3::zeros(t.dim())).collect()
}

/// Norm environments: returns `⟨ψ|ψ⟩` plus the per-site left/right
/// environment matrices.
pub(crate) fn norm_envs(tensors: &[Array3<C64>]) -> (f64, Vec<Array2<C64>>, Vec<Array2<C64>>) {
    let n = tensors.len();
    let mut left = Vec::with_capacity(n + 1);
    left.push(Array2::from_elem((1, 1), C64::new(1.0, 0.0)));
    for t in tensors {
        let last = left.last().expect("non-empty");
        left.push(crate::mps::transfer_left(last, t, t));
    }
    let mut right = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0)); n + 1];
    for i in (0..n).rev() {
        right[i] = crate::mps::transfer_right(&right[i + 1], &tensors[i], &tensors[i]);
    }
    let norm_sqr = left[n][[0, 0]].re;
    (norm_sqr, left, right)
}

/// `∂⟨ψ|ψ⟩/∂Ā_i = NL_{i-1} · A_i · NR_{i+1}`.
pub(crate) fn norm_gradient(tensors: &[Array3<C64>]) -> Vec<Array3<C64>> {
    let (_, left, right) = norm_envs(tensors);
    tensors
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (l, _, r) = t.dim();
            let mut env = Array3::zeros((l, 2, r));
            for s in 0..2 {
                let slice = t.index_axis(ndarray::Axis(1), s);
                // left[i] has bra index first: env[α, s, β] = Σ_{a,b} NL[α, a] A[a,s,b] NR[β, b]
                let tmp = left[i].dot(&slice);
                let res = tmp.dot(&right[i + 1].t());
                env.index_axis_mut(ndarray::Axis(1), s).assign(&res);
            }
            env
        })
        .collect()
}

fn validate(mps: &MpsState, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::invalid_argument("dataset is empty"));
    }
    if ds.n() != mps.n() {
        return Err(Error::invalid_argument("dataset and model sizes differ"));
    }
    Ok(())
}

/// `−(1/N) Σ_i log p(b_i | U_i)` with the model normalization folded in.
pub fn nll_loss(mps: &MpsState, ds: &Dataset) -> Result<f64> {
    validate(mps, ds)?;
    let compiled = CompiledRecords::from_dataset(ds);
    Ok(batch_loss(mps.tensors(), &compiled, None, false).loss)
}

/// Analytic conjugate gradient `∂L/∂Ā` of [`nll_loss`] over the dataset.
pub fn nll_gradient(mps: &MpsState, ds: &Dataset) -> Result<Vec<Array3<C64>>> {
    validate(mps, ds)?;
    let compiled = CompiledRecords::from_dataset(ds);
    Ok(batch_loss(mps.tensors(), &compiled, None, true)
        .grad
        .expect("gradient requested"))
}

/// Weighted NLL over an explicit outcome list; with weights given by the
/// exact outcome distribution this is the infinite-sample loss, whose
/// minimum is the Shannon entropy of that distribution.
pub fn nll_loss_weighted(mps: &MpsState, outcomes: &[(BasisString, Vec<u8>, f64)]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::invalid_argument("no outcomes supplied"));
    }
    let compiled = CompiledRecords::from_weighted(mps.n(), outcomes)?;
    Ok(batch_loss(mps.tensors(), &compiled, None, false).loss)
}

/// Conjugate gradient of [`nll_loss_weighted`].
pub fn nll_gradient_weighted(
    mps: &MpsState,
    outcomes: &[(BasisString, Vec<u8>, f64)],
) -> Result<Vec<Array3<C64>>> {
    if outcomes.is_empty() {
        return Err(Error::invalid_argument("no outcomes supplied"));
    }
    let compiled = CompiledRecords::from_weighted(mps.n(), outcomes)?;
    Ok(batch_loss(mps.tensors(), &compiled, None, true)
        .grad
        .expect("gradient requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{generate_dataset, EnsembleSpec};
    use crate::pauli::BasisAxis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_state_on_z_data_has_zero_loss() {
        let zeros = MpsState::product_state(&[0, 0, 0]).unwrap();
        let ds = generate_dataset(&zeros, &EnsembleSpec::random_xz(3), 500, 1).unwrap();
        // Keep only Z-basis records: the model reproduces them exactly.
        let z_indices: Vec<usize> = ds
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.basis.axes().iter().all(|&a| a == BasisAxis::Z))
            .map(|(i, _)| i)
            .collect();
        let z_only = ds.subset(&z_indices).unwrap();
        let loss = nll_loss(&zeros, &z_only).unwrap();
        assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn x_basis_record_costs_log2() {
        let zero = MpsState::product_state(&[0]).unwrap();
        let outcomes = vec![("X".parse().unwrap(), vec![0u8], 1.0)];
        let loss = nll_loss_weighted(&zero, &outcomes).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn loss_is_scale_invariant() {
        let psi = MpsState::new_random(4, 3, 2).unwrap();
        let ds = generate_dataset(&psi, &EnsembleSpec::random_xz(4), 100, 3).unwrap();
        let loss = nll_loss(&psi, &ds).unwrap();
        let scaled = MpsState::from_tensors(
            psi.tensors().iter().map(|t| t.mapv(|z| z * 1.7)).collect(),
        )
        .unwrap();
        let loss2 = nll_loss(&scaled, &ds).unwrap();
        assert_abs_diff_eq!(loss, loss2, epsilon = 1e-10);
    }

    #[test]
    fn loss_is_gauge_invariant() {
        let psi = MpsState::new_random(5, 4, 7).unwrap();
        let ds = generate_dataset(&psi, &EnsembleSpec::random_xz(5), 200, 5).unwrap();
        let loss = nll_loss(&psi, &ds).unwrap();
        let canonical = psi.canonicalize(2).unwrap();
        let loss2 = nll_loss(&canonical, &ds).unwrap();
        assert!((loss - loss2).abs() < 1e-10);
    }

    #[test]
    fn impossible_record_hits_floor_not_infinity() {
        let zeros = MpsState::product_state(&[0, 0]).unwrap();
        let outcomes = vec![("ZZ".parse().unwrap(), vec![1u8, 1], 1.0)];
        let loss = nll_loss_weighted(&zeros, &outcomes).unwrap();
        assert!(loss.is_finite());
        assert_abs_diff_eq!(loss, -PROBABILITY_FLOOR.ln(), epsilon = 1e-9);
        let grad = nll_gradient_weighted(&zeros, &outcomes).unwrap();
        for g in grad {
            assert!(g.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn stationary_at_exact_model() {
        // Enumerate the exact random-XZ outcome distribution of a small state
        // and check the gradient vanishes at model = target.
        let target = MpsState::new_random(3, 2, 9).unwrap();
        let mut outcomes = Vec::new();
        let n = 3;
        for basis_mask in 0..1u32 << n {
            let basis = BasisString::new(
                (0..n)
                    .map(|i| {
                        if basis_mask >> i & 1 == 1 {
                            BasisAxis::X
                        } else {
                            BasisAxis::Z
                        }
                    })
                    .collect(),
            );
            let basis_weight = 1.0 / (1 << n) as f64;
            for bits_mask in 0..1u32 << n {
                let bits: Vec<u8> = (0..n).map(|i| (bits_mask >> i & 1) as u8).collect();
                let p = target.amplitude(&basis, &bits).unwrap().norm_sqr();
                if p > 1e-14 {
                    outcomes.push((basis.clone(), bits, basis_weight * p));
                }
            }
        }
        let grad = nll_gradient_weighted(&target, &outcomes).unwrap();
        let norm: f64 = grad
            .iter()
            .map(|g| g.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-8, "gradient norm at optimum: {norm}");
    }
}
