//! Complex open-boundary matrix product states.
//!
//! An [`MpsState`] is a chain of rank-3 tensors `A[i]` of shape
//! `(χ_i, 2, χ_{i+1})` with `χ_0 = χ_n = 1`, representing
//! `Σ_b A[0]^{b_0} ⋯ A[n-1]^{b_{n-1}} |b⟩`. States are immutable after
//! construction: every operation returns a new value, so sharing read-only
//! references across threads is safe.
//!
//! Index conventions used throughout the contraction code:
//! tensor axes are `[left bond, physical, right bond]`; environment matrices
//! carry the bra index first and the ket index second; site 0 is the most
//! significant bit of a computational-basis label.

use ndarray::{Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{BasisString, PauliString};
use crate::C64;

mod io;
pub mod sample;

pub use io::{load_mps, save_mps};
pub use sample::MpsSampler;

/// Singular values smaller than this (relative to the largest) are treated as
/// exact zeros when reporting Schmidt spectra or compressing.
const SCHMIDT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    tensors: Vec<Array3<C64>>,
    canonical_center: Option<usize>,
}

/// Bond profile `χ_i = min(2^i, 2^{n-i}, χ_max)`; bonds beyond the Schmidt
/// rank cap are provably rank-deficient and never stored.
pub fn capped_bond_dims(n: usize, chi_max: usize) -> Vec<usize> {
    (0..=n)
        .map(|i| {
            let exponent = i.min(n - i);
            if exponent >= usize::BITS as usize - 1 || (1usize << exponent) >= chi_max {
                chi_max
            } else {
                1 << exponent
            }
        })
        .collect()
}

impl MpsState {
    /// Build from raw tensors, validating the chain invariants.
    pub fn from_tensors(tensors: Vec<Array3<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::invalid_argument("an MPS needs at least one site"));
        }
        let n = tensors.len();
        for (i, t) in tensors.iter().enumerate() {
            let (l, d, r) = t.dim();
            if d != 2 {
                return Err(Error::invalid_argument(format!(
                    "tensor {i} has physical dimension {d}, expected 2"
                )));
            }
            if i == 0 && l != 1 {
                return Err(Error::invalid_argument("left boundary bond must be 1"));
            }
            if i == n - 1 && r != 1 {
                return Err(Error::invalid_argument("right boundary bond must be 1"));
            }
            if i + 1 < n && r != tensors[i + 1].dim().0 {
                return Err(Error::invalid_argument(format!(
                    "bond mismatch between tensors {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(MpsState {
            tensors,
            canonical_center: None,
        })
    }

    pub(crate) fn from_tensors_unchecked(
        tensors: Vec<Array3<C64>>,
        canonical_center: Option<usize>,
    ) -> Self {
        MpsState {
            tensors,
            canonical_center,
        }
    }

    /// Random MPS with i.i.d. complex-Gaussian entries, normalized to unit
    /// norm. Deterministic for a given seed.
    pub fn new_random(n: usize, chi: usize, seed: u64) -> Result<Self> {
        Self::random_impl(n, chi, seed, true)
    }

    /// Random MPS with real Gaussian entries, normalized. Real tensors keep
    /// the represented state inside the real subspace that XZ measurements
    /// characterize completely, which is what target-state generation needs.
    pub fn new_random_real(n: usize, chi: usize, seed: u64) -> Result<Self> {
        Self::random_impl(n, chi, seed, false)
    }

    fn random_impl(n: usize, chi: usize, seed: u64, complex: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid_argument("qubit count must be positive"));
        }
        if chi == 0 {
            return Err(Error::invalid_argument("bond dimension must be positive"));
        }
        let dims = capped_bond_dims(n, chi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let tensors = (0..n)
            .map(|i| {
                Array3::from_shape_fn((dims[i], 2, dims[i + 1]), |_| {
                    let re: f64 = normal.sample(&mut rng);
                    let im: f64 = if complex { normal.sample(&mut rng) } else { 0.0 };
                    C64::new(re, im)
                })
            })
            .collect();
        let state = MpsState {
            tensors,
            canonical_center: None,
        };
        state.normalized()
    }

    /// Computational-basis product state `|b⟩`.
    pub fn product_state(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid_argument("qubit count must be positive"));
        }
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut t = Array3::zeros((1, 2, 1));
                t[[0, (b & 1) as usize, 0]] = C64::new(1.0, 0.0);
                t
            })
            .collect();
        Ok(MpsState {
            tensors,
            canonical_center: Some(0),
        })
    }

    /// Exact MPS factorization of a dense state vector (length `2^n`),
    /// truncated to `chi_max` (0 means unlimited).
    pub fn from_statevector(amplitudes: &[C64], chi_max: usize) -> Result<Self> {
        let len = amplitudes.len();
        let n = len.trailing_zeros() as usize;
        if len == 0 || len != (1 << n) || n == 0 {
            return Err(Error::invalid_argument(
                "state vector length must be 2^n with n >= 1",
            ));
        }
        let mut tensors = Vec::with_capacity(n);
        let mut rest = Array2::from_shape_vec((1, len), amplitudes.to_vec())
            .expect("shape matches input length");
        let mut chi_left = 1usize;
        for _ in 0..n - 1 {
            let cols = rest.len() / (chi_left * 2);
            let m = rest.into_shape_with_order((chi_left * 2, cols)).expect("reshape");
            let (u, s, vt) = linalg::svd(&m);
            let mut keep = s.iter().filter(|&&x| x > s[0] * SCHMIDT_FLOOR).count().max(1);
            if chi_max > 0 {
                keep = keep.min(chi_max);
            }
            let mut a = Array3::zeros((chi_left, 2, keep));
            for l in 0..chi_left {
                for p in 0..2 {
                    for r in 0..keep {
                        a[[l, p, r]] = u[[l * 2 + p, r]];
                    }
                }
            }
            tensors.push(a);
            let mut sv = Array2::zeros((keep, cols));
            for r in 0..keep {
                for c in 0..cols {
                    sv[[r, c]] = vt[[r, c]] * s[r];
                }
            }
            rest = sv;
            chi_left = keep;
        }
        let a = rest.into_shape_with_order((chi_left, 2, 1)).expect("final reshape");
        tensors.push(a.to_owned());
        Ok(MpsState {
            tensors,
            canonical_center: Some(n - 1),
        })
    }

    pub fn n(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    pub fn into_tensors(self) -> Vec<Array3<C64>> {
        self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Array3<C64> {
        &self.tensors[site]
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.canonical_center
    }

    /// Bond dimensions `χ_0 … χ_n` (boundaries included).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.dim().0).collect();
        dims.push(1);
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨ψ|ψ⟩` via left-to-right transfer contraction.
    pub fn norm_sqr(&self) -> f64 {
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in &self.tensors {
            env = transfer_left(&env, t, t);
        }
        env[[0, 0]].re
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().max(0.0).sqrt()
    }

    /// Rescale to unit norm, distributing the factor evenly over the sites.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero-norm MPS".into()));
        }
        let scale = norm.powf(-1.0 / self.n() as f64);
        let tensors = self
            .tensors
            .iter()
            .map(|t| t.mapv(|z| z * scale))
            .collect();
        Ok(MpsState {
            tensors,
            canonical_center: self.canonical_center,
        })
    }

    /// Gauge-fix into mixed-canonical form around `center`: all tensors to the
    /// left become left-isometries and all tensors to the right become
    /// right-isometries. The represented state (including norm and phase) is
    /// unchanged; only QR factorizations are used.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let n = self.n();
        if center >= n {
            return Err(Error::invalid_argument(format!(
                "canonical center {center} out of range for {n} sites"
            )));
        }
        let mut tensors = self.tensors.clone();
        // Left-to-right QR sweep up to the center.
        for i in 0..center {
            let (l, _, r) = tensors[i].dim();
            let m = tensors[i]
                .to_owned()
                .into_shape_with_order((l * 2, r))
                .expect("reshape");
            let (q, rest) = linalg::qr_thin(&m);
            let k = q.ncols();
            tensors[i] = q.into_shape_with_order((l, 2, k)).expect("reshape");
            let next = &tensors[i + 1];
            let (nl, _, nr) = next.dim();
            let mut merged = Array3::zeros((k, 2, nr));
            for s in 0..2 {
                let view = next.index_axis(Axis(1), s);
                let prod = rest.dot(&view);
                debug_assert_eq!(prod.dim(), (k, nr));
                let _ = nl;
                merged.index_axis_mut(Axis(1), s).assign(&prod);
            }
            tensors[i + 1] = merged;
        }
        // Right-to-left sweep down to the center.
        for i in (center + 1..n).rev() {
            let (l, _, r) = tensors[i].dim();
            // Matricize as (l, 2r) and QR its adjoint: M = R† Q†.
            let m = tensors[i]
                .to_owned()
                .into_shape_with_order((l, 2 * r))
                .expect("reshape");
            let m_adj = Array2::from_shape_fn((2 * r, l), |(a, b)| m[[b, a]].conj());
            let (q, rest) = linalg::qr_thin(&m_adj);
            let k = q.ncols();
            let b = Array2::from_shape_fn((k, 2 * r), |(a, c)| q[[c, a]].conj());
            tensors[i] = b.into_shape_with_order((k, 2, r)).expect("reshape");
            let rest_adj = Array2::from_shape_fn((l, k), |(a, c)| rest[[c, a]].conj());
            let prev = &tensors[i - 1];
            let (pl, _, _) = prev.dim();
            let mut merged = Array3::zeros((pl, 2, k));
            for s in 0..2 {
                let view = prev.index_axis(Axis(1), s);
                merged
                    .index_axis_mut(Axis(1), s)
                    .assign(&view.dot(&rest_adj));
            }
            tensors[i - 1] = merged;
        }
        Ok(MpsState {
            tensors,
            canonical_center: Some(center),
        })
    }

    /// `⟨b|U|ψ⟩` where `U` rotates each qubit from the computational basis to
    /// the requested measurement axis.
    pub fn amplitude(&self, basis: &BasisString, bits: &[u8]) -> Result<C64> {
        let n = self.n();
        if basis.len() != n || bits.len() != n {
            return Err(Error::invalid_argument(format!(
                "basis/bits length must equal the system size {n}"
            )));
        }
        let mut vec = vec![C64::new(1.0, 0.0)];
        for (i, t) in self.tensors.iter().enumerate() {
            let row = basis.axis(i).rotation_row(bits[i]);
            let (l, _, r) = t.dim();
            let mut next = vec![C64::new(0.0, 0.0); r];
            for a in 0..l {
                let va = vec[a];
                if va == C64::new(0.0, 0.0) {
                    continue;
                }
                for (s, &u) in row.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    let coeff = va * u;
                    for b in 0..r {
                        next[b] += coeff * t[[a, s, b]];
                    }
                }
            }
            vec = next;
        }
        Ok(vec[0])
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &MpsState) -> Result<C64> {
        if self.n() != other.n() {
            return Err(Error::invalid_argument("size mismatch in inner product"));
        }
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            env = transfer_left(&env, a, b);
        }
        Ok(env[[0, 0]])
    }

    /// `F = |⟨a|b⟩|` with both states normalized internally.
    pub fn fidelity(&self, other: &MpsState) -> Result<f64> {
        let na = self.norm();
        let nb = other.norm();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::InvalidState("fidelity of a zero-norm state".into()));
        }
        Ok((self.inner_product(other)?.norm() / (na * nb)).min(1.0))
    }

    /// Per-site local fidelity `F^{1/n}`.
    pub fn local_fidelity(&self, other: &MpsState) -> Result<f64> {
        Ok(self.fidelity(other)?.powf(1.0 / self.n() as f64))
    }

    /// Real expectation value `⟨ψ|P|ψ⟩ / ⟨ψ|ψ⟩` of a Hermitian Pauli string.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        let n = self.n();
        p.check_sites(n)?;
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        let mut norm_env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for (i, t) in self.tensors.iter().enumerate() {
            env = match p.op_at(i) {
                Some(op) => transfer_left_op(&env, t, &op.matrix()),
                None => transfer_left(&env, t, t),
            };
            norm_env = transfer_left(&norm_env, t, t);
        }
        let mut value = env[[0, 0]] / norm_env[[0, 0]].re;
        value *= p.coefficient();
        if let crate::pauli::Normalization::HilbertSchmidt = p.normalization() {
            value *= 2f64.powf(-(n as f64) / 2.0);
        }
        if value.im.abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "expectation of {} has imaginary residual {:.3e}; operator is not Hermitian",
                p.label(),
                value.im
            )));
        }
        Ok(value.re)
    }

    /// Schmidt values across the bond between sites `cut-1` and `cut`,
    /// descending, normalized so that `Σ λ_i² = 1`.
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if cut == 0 || cut >= n {
            return Err(Error::invalid_argument(format!(
                "cut must lie in 1..={} (got {cut})",
                n - 1
            )));
        }
        let canonical = self.canonicalize(cut - 1)?;
        let center = &canonical.tensors[cut - 1];
        let (l, _, r) = center.dim();
        let m = center
            .to_owned()
            .into_shape_with_order((l * 2, r))
            .expect("reshape");
        let (_, s, _) = linalg::svd(&m);
        let total: f64 = s.iter().map(|x| x * x).sum();
        if total <= 0.0 {
            return Err(Error::InvalidState("zero-norm state has no Schmidt spectrum".into()));
        }
        let scale = total.sqrt();
        Ok(s
            .iter()
            .map(|x| x / scale)
            .filter(|&x| x > SCHMIDT_FLOOR)
            .collect())
    }

    /// Von Neumann entanglement entropy `S = -Σ λ² ln λ²` at a cut
    /// (natural logarithm).
    pub fn entanglement_entropy(&self, cut: usize) -> Result<f64> {
        let values = self.schmidt_values(cut)?;
        Ok(values
            .iter()
            .map(|&x| {
                let p = x * x;
                if p > 0.0 {
                    -p * p.ln()
                } else {
                    0.0
                }
            })
            .sum())
    }

    /// Reduced density matrix on an arbitrary site subset (dense
    /// `2^k × 2^k`, so `k` is capped at 10). Rows and columns are labelled
    /// with the subset sites in ascending order, first site most significant.
    pub fn reduced_density_matrix(&self, sites: &[usize]) -> Result<Array2<C64>> {
        let n = self.n();
        let mut sorted: Vec<usize> = sites.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sites.len() {
            return Err(Error::invalid_argument("duplicate sites in subsystem"));
        }
        if sorted.is_empty() {
            return Err(Error::invalid_argument("subsystem must be non-empty"));
        }
        if *sorted.last().unwrap() >= n {
            return Err(Error::invalid_argument("subsystem site out of range"));
        }
        if sorted.len() > 10 {
            return Err(Error::ResourceLimit(format!(
                "dense reduced density matrix limited to 10 sites (requested {})",
                sorted.len()
            )));
        }

        let first = sorted[0];
        let last = *sorted.last().unwrap();

        // Left norm environment up to the first kept site.
        let mut left = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in &self.tensors[..first] {
            left = transfer_left(&left, t, t);
        }
        // Right norm environment from just past the last kept site.
        let mut right = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in self.tensors[last + 1..].iter().rev() {
            right = transfer_right(&right, t, t);
        }

        // Sweep the window, keeping open physical legs on the subsystem.
        // `block[d_ket * dim + d_bra]` is a (χ_ket, χ_bra) matrix.
        let mut dim = 1usize;
        let mut block: Vec<Array2<C64>> = vec![Array2::from_shape_fn(
            (left.ncols(), left.nrows()),
            |(k, b)| left[[b, k]],
        )];
        for (i, t) in self.tensors.iter().enumerate().take(last + 1).skip(first) {
            let keep = sorted.binary_search(&i).is_ok();
            let (_, _, r) = t.dim();
            if keep {
                // New physical bits append as least-significant: the next
                // block is indexed [(old_k·2 + s_k) · 2·dim + (old_b·2 + s_b)].
                let mut next: Vec<Array2<C64>> = Vec::with_capacity(dim * dim * 4);
                for old_k in 0..dim {
                    for sk in 0..2 {
                        let tk = t.index_axis(Axis(1), sk);
                        for old_b in 0..dim {
                            for sb in 0..2 {
                                let tb = t.index_axis(Axis(1), sb);
                                let tb_conj = tb.mapv(|z| z.conj());
                                let e = &block[old_k * dim + old_b];
                                // e[k, b] -> e'[k', b'] = Σ t[k, sk, k'] conj(t[b, sb, b']) e[k, b]
                                let tmp = tk.t().dot(e); // (r, χ_b)
                                next.push(tmp.dot(&tb_conj));
                            }
                        }
                    }
                }
                let _ = r;
                block = next;
                dim *= 2;
            } else {
                let mut next: Vec<Array2<C64>> = Vec::with_capacity(dim * dim);
                for e in &block {
                    let mut acc = Array2::<C64>::zeros((t.dim().2, t.dim().2));
                    for s in 0..2 {
                        let ts = t.index_axis(Axis(1), s);
                        let ts_conj = ts.mapv(|z| z.conj());
                        acc = acc + ts.t().dot(e).dot(&ts_conj);
                    }
                    next.push(acc);
                }
                block = next;
            }
        }

        let norm_sqr = self.norm_sqr();
        let mut rho = Array2::zeros((dim, dim));
        for row in 0..dim {
            for col in 0..dim {
                // Close with the right environment: right[bra, ket].
                let e = &block[row * dim + col];
                let mut z = C64::new(0.0, 0.0);
                for k in 0..e.nrows() {
                    for b in 0..e.ncols() {
                        z += e[[k, b]] * right[[b, k]];
                    }
                }
                rho[[row, col]] = z / norm_sqr;
            }
        }
        Ok(rho)
    }

    /// Direct sum `|self⟩ + |other⟩` (unnormalized).
    pub fn add(&self, other: &MpsState) -> Result<MpsState> {
        let n = self.n();
        if other.n() != n {
            return Err(Error::invalid_argument("size mismatch in MPS sum"));
        }
        if n == 1 {
            let t = &self.tensors[0] + &other.tensors[0];
            return MpsState::from_tensors(vec![t]);
        }
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let a = &self.tensors[i];
            let b = &other.tensors[i];
            let (al, _, ar) = a.dim();
            let (bl, _, br) = b.dim();
            let (l, r) = if i == 0 {
                (1, ar + br)
            } else if i == n - 1 {
                (al + bl, 1)
            } else {
                (al + bl, ar + br)
            };
            let mut t = Array3::zeros((l, 2, r));
            let (off_l, off_r) = if i == 0 {
                (0, ar)
            } else if i == n - 1 {
                (al, 0)
            } else {
                (al, ar)
            };
            for s in 0..2 {
                for x in 0..al {
                    for y in 0..ar {
                        t[[x, s, y]] = a[[x, s, y]];
                    }
                }
                for x in 0..bl {
                    for y in 0..br {
                        t[[x + off_l, s, y + off_r]] = b[[x, s, y]];
                    }
                }
            }
            tensors.push(t);
        }
        MpsState::from_tensors(tensors)
    }

    /// SVD compression to bond dimension `chi_max` (0 = unlimited). Returns
    /// the compressed state and the largest discarded weight
    /// `Σ_{i>k} λ_i² / Σ_i λ_i²` over all bonds.
    pub fn compress(&self, chi_max: usize) -> Result<(MpsState, f64)> {
        let n = self.n();
        let canonical = self.canonicalize(0)?;
        let mut tensors = canonical.tensors;
        let mut worst = 0.0f64;
        for i in 0..n - 1 {
            let (l, _, r) = tensors[i].dim();
            let m = tensors[i]
                .to_owned()
                .into_shape_with_order((l * 2, r))
                .expect("reshape");
            let (u, s, vt) = linalg::svd(&m);
            let total: f64 = s.iter().map(|x| x * x).sum();
            let mut keep = s
                .iter()
                .filter(|&&x| x > s[0] * SCHMIDT_FLOOR)
                .count()
                .max(1);
            if chi_max > 0 {
                keep = keep.min(chi_max);
            }
            let discarded: f64 = s[keep..].iter().map(|x| x * x).sum::<f64>() / total.max(f64::MIN_POSITIVE);
            worst = worst.max(discarded);
            let mut a = Array3::zeros((l, 2, keep));
            for x in 0..l {
                for p in 0..2 {
                    for y in 0..keep {
                        a[[x, p, y]] = u[[x * 2 + p, y]];
                    }
                }
            }
            tensors[i] = a;
            let next = &tensors[i + 1];
            let (_, _, nr) = next.dim();
            let mut merged = Array3::zeros((keep, 2, nr));
            for p in 0..2 {
                let view = next.index_axis(Axis(1), p);
                for x in 0..keep {
                    for y in 0..nr {
                        let mut z = C64::new(0.0, 0.0);
                        for c in 0..view.nrows() {
                            z += s[x] * vt[[x, c]] * view[[c, y]];
                        }
                        merged[[x, p, y]] = z;
                    }
                }
            }
            tensors[i + 1] = merged;
        }
        Ok((
            MpsState {
                tensors,
                canonical_center: Some(n - 1),
            },
            worst,
        ))
    }
}

/// One step of the left transfer contraction:
/// `E'[a', b'] = Σ_{s,a,b} conj(bra[a,s,a']) E[a,b] ket[b,s,b']`.
pub(crate) fn transfer_left(
    env: &Array2<C64>,
    bra: &Array3<C64>,
    ket: &Array3<C64>,
) -> Array2<C64> {
    let (_, _, ar) = bra.dim();
    let (_, _, br) = ket.dim();
    let mut out = Array2::zeros((ar, br));
    for s in 0..2 {
        let bra_s = bra.index_axis(Axis(1), s);
        let ket_s = ket.index_axis(Axis(1), s);
        let tmp = env.dot(&ket_s); // (a, b')
        let bra_conj_t = bra_s.mapv(|z| z.conj()).reversed_axes(); // (a', a)
        out = out + bra_conj_t.dot(&tmp);
    }
    out
}

/// Left transfer with a single-site operator `O[s', s]` inserted:
/// `E'[a', b'] = Σ conj(bra[a,s',a']) O[s',s] E[a,b] ket[b,s,b']`.
pub(crate) fn transfer_left_op(
    env: &Array2<C64>,
    tensor: &Array3<C64>,
    op: &[[C64; 2]; 2],
) -> Array2<C64> {
    let (_, _, r) = tensor.dim();
    let mut out = Array2::zeros((r, r));
    for sp in 0..2 {
        for s in 0..2 {
            let o = op[sp][s];
            if o == C64::new(0.0, 0.0) {
                continue;
            }
            let bra_s = tensor.index_axis(Axis(1), sp);
            let ket_s = tensor.index_axis(Axis(1), s);
            let tmp = env.dot(&ket_s);
            let bra_conj_t = bra_s.mapv(|z| z.conj()).reversed_axes();
            out = out + bra_conj_t.dot(&tmp).mapv(|z| z * o);
        }
    }
    out
}

/// One step of the right transfer contraction:
/// `E'[a, b] = Σ_{s,a',b'} conj(bra[a,s,a']) E[a',b'] ket[b,s,b']`.
pub(crate) fn transfer_right(
    env: &Array2<C64>,
    bra: &Array3<C64>,
    ket: &Array3<C64>,
) -> Array2<C64> {
    let (al, _, _) = bra.dim();
    let (bl, _, _) = ket.dim();
    let mut out = Array2::zeros((al, bl));
    for s in 0..2 {
        let bra_s = bra.index_axis(Axis(1), s);
        let ket_s = ket.index_axis(Axis(1), s);
        let tmp = bra_s.mapv(|z| z.conj()).dot(env); // (a, b')
        out = out + tmp.dot(&ket_s.reversed_axes());
    }
    out
}
