//! Matrix product operators.
//!
//! An [`Mpo`] is a chain of rank-4 tensors `W[i]` of shape
//! `(w_i, 2, 2, w_{i+1})` with axes `[left bond, bra, ket, right bond]` and
//! boundary bonds of 1. Hamiltonians are assembled from lists of Pauli-string
//! terms through a finite-state automaton: one channel carries the identity
//! before any term has started, one carries it after a term has completed,
//! and every term whose support straddles a bond holds a private channel
//! across that bond.

use ndarray::{Array2, Array4};

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::mps::MpsState;
use crate::pauli::PauliString;
use crate::C64;

#[derive(Debug, Clone)]
pub struct Mpo {
    tensors: Vec<Array4<C64>>,
}

impl Mpo {
    pub fn from_tensors(tensors: Vec<Array4<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::invalid_argument("an MPO needs at least one site"));
        }
        let n = tensors.len();
        for (i, t) in tensors.iter().enumerate() {
            let (l, db, dk, r) = t.dim();
            if db != 2 || dk != 2 {
                return Err(Error::invalid_argument("MPO physical dimensions must be 2"));
            }
            if (i == 0 && l != 1) || (i == n - 1 && r != 1) {
                return Err(Error::invalid_argument("MPO boundary bonds must be 1"));
            }
            if i + 1 < n && r != tensors[i + 1].dim().0 {
                return Err(Error::invalid_argument(format!(
                    "MPO bond mismatch between sites {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(Mpo { tensors })
    }

    /// Identity operator on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let mut t = Array4::zeros((1, 2, 2, 1));
            t[[0, 0, 0, 0]] = C64::new(1.0, 0.0);
            t[[0, 1, 1, 0]] = C64::new(1.0, 0.0);
            tensors.push(t);
        }
        Mpo { tensors }
    }

    /// Assemble `Σ_t c_t P_t` from Pauli-string terms (identity terms carry
    /// the constant shift). Coefficients are taken verbatim; callers wanting
    /// a Hermitian operator should supply real coefficients.
    pub fn from_pauli_terms(n: usize, terms: &[PauliString]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid_argument("qubit count must be positive"));
        }
        for term in terms {
            term.check_sites(n)?;
        }
        let identity = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];

        struct Span {
            first: usize,
            last: usize,
        }
        let spans: Vec<Span> = terms
            .iter()
            .map(|t| {
                let first = t.support().next().map(|(s, _)| s).unwrap_or(0);
                let last = t.max_site().unwrap_or(0);
                Span { first, last }
            })
            .collect();

        // Channels crossing bond b (between sites b and b+1), in term order.
        let active_at = |bond: usize| -> Vec<usize> {
            spans
                .iter()
                .enumerate()
                .filter(|(_, s)| s.first <= bond && bond < s.last)
                .map(|(i, _)| i)
                .collect()
        };

        let site_op = |term: &PauliString, site: usize| -> [[C64; 2]; 2] {
            match term.op_at(site) {
                Some(op) => op.matrix(),
                None => identity,
            }
        };

        let mut tensors = Vec::with_capacity(n);
        for site in 0..n {
            let left_active = if site == 0 { vec![] } else { active_at(site - 1) };
            let right_active = if site == n - 1 { vec![] } else { active_at(site) };
            // Channel layout: 0 = START, 1 = DONE, then active terms.
            // Boundaries collapse to the single relevant control channel.
            let (wl, start_row, done_row) = if site == 0 {
                (1usize, Some(0usize), None)
            } else {
                (2 + left_active.len(), Some(0), Some(1))
            };
            let (wr, start_col, done_col) = if site == n - 1 {
                (1usize, None, Some(0usize))
            } else {
                (2 + right_active.len(), Some(0), Some(1))
            };
            let mut w = Array4::zeros((wl, 2, 2, wr));
            let mut put = |row: usize, col: usize, m: [[C64; 2]; 2], scale: C64| {
                for b in 0..2 {
                    for k in 0..2 {
                        w[[row, b, k, col]] += scale * m[b][k];
                    }
                }
            };
            let one = C64::new(1.0, 0.0);
            if let (Some(r), Some(c)) = (start_row, start_col) {
                put(r, c, identity, one);
            }
            if let (Some(r), Some(c)) = (done_row, done_col) {
                put(r, c, identity, one);
            }
            for (idx, term) in terms.iter().enumerate() {
                let span = &spans[idx];
                let starts = span.first == site;
                let ends = span.last == site;
                let left_ch = left_active.iter().position(|&t| t == idx).map(|p| 2 + p);
                let right_ch = right_active.iter().position(|&t| t == idx).map(|p| 2 + p);
                match (starts, ends) {
                    (true, true) => {
                        // Fully contained single-site (or identity) term.
                        if let (Some(r), Some(c)) = (start_row, done_col) {
                            put(r, c, site_op(term, site), term.coefficient());
                        }
                    }
                    (true, false) => {
                        if let (Some(r), Some(c)) = (start_row, right_ch) {
                            put(r, c, site_op(term, site), term.coefficient());
                        }
                    }
                    (false, true) => {
                        if let (Some(r), Some(c)) = (left_ch, done_col) {
                            put(r, c, site_op(term, site), one);
                        }
                    }
                    (false, false) => {
                        if span.first < site && site < span.last {
                            if let (Some(r), Some(c)) = (left_ch, right_ch) {
                                put(r, c, site_op(term, site), one);
                            }
                        }
                    }
                }
            }
            tensors.push(w);
        }
        Ok(Mpo { tensors })
    }

    pub fn n(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Array4<C64>] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Array4<C64> {
        &self.tensors[site]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.dim().0).collect();
        dims.push(1);
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn expectation(&self, mps: &MpsState) -> Result<f64> {
        if mps.n() != self.n() {
            return Err(Error::invalid_argument("MPO/MPS size mismatch"));
        }
        // env[b][a_bra, a_ket], one matrix per MPO channel.
        let mut env: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0))];
        for (site, w) in self.tensors.iter().enumerate() {
            let a = mps.tensor(site);
            let (al, _, ar) = a.dim();
            let (wl, _, _, wr) = w.dim();
            let mut next: Vec<Array2<C64>> = vec![Array2::zeros((ar, ar)); wr];
            for b_out in 0..wr {
                for b_in in 0..wl {
                    for sp in 0..2 {
                        for s in 0..2 {
                            let coeff = w[[b_in, sp, s, b_out]];
                            if coeff == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let bra = a.index_axis(ndarray::Axis(1), sp);
                            let ket = a.index_axis(ndarray::Axis(1), s);
                            let tmp = env[b_in].dot(&ket);
                            let bra_conj_t = bra.mapv(|z| z.conj()).reversed_axes();
                            let contrib = bra_conj_t.dot(&tmp).mapv(|z| z * coeff);
                            next[b_out] = &next[b_out] + &contrib;
                        }
                    }
                }
            }
            let _ = al;
            env = next;
        }
        let raw = env[0][[0, 0]];
        let value = raw / mps.norm_sqr();
        if value.im.abs() > 1e-8 * (1.0 + value.re.abs()) {
            return Err(Error::InvalidState(format!(
                "MPO expectation has imaginary residual {:.3e}; operator is not Hermitian",
                value.im
            )));
        }
        Ok(value.re)
    }

    /// Contract into a dense `2^n × 2^n` matrix (limited to 12 qubits).
    ///
    /// The chain is folded from both ends toward the middle bond so peak
    /// memory stays at one dense matrix plus `w` half-size blocks.
    pub fn to_dense(&self) -> Result<DenseOperator> {
        let n = self.n();
        if n > crate::dense::MAX_DENSE_OPERATOR_QUBITS {
            return Err(Error::ResourceLimit(format!(
                "dense MPO contraction limited to {} qubits (requested {n})",
                crate::dense::MAX_DENSE_OPERATOR_QUBITS
            )));
        }
        let mid = n / 2;
        // Left blocks indexed by the channel at the mid bond.
        let mut left: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0))];
        for w in &self.tensors[..mid] {
            let (wl, _, _, wr) = w.dim();
            let dim = left[0].nrows();
            let mut next = vec![Array2::<C64>::zeros((dim * 2, dim * 2)); wr];
            for (b_in, block) in left.iter().enumerate() {
                for b_out in 0..wr {
                    for sp in 0..2 {
                        for s in 0..2 {
                            let coeff = w[[b_in, sp, s, b_out]];
                            if coeff == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for r in 0..dim {
                                for c in 0..dim {
                                    next[b_out][[r * 2 + sp, c * 2 + s]] += coeff * block[[r, c]];
                                }
                            }
                        }
                    }
                }
            }
            let _ = wl;
            left = next;
        }
        // Right blocks indexed by the channel at the mid bond.
        let mut right: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0))];
        for w in self.tensors[mid..].iter().rev() {
            let (wl, _, _, wr) = w.dim();
            let dim = right[0].nrows();
            let mut next = vec![Array2::<C64>::zeros((dim * 2, dim * 2)); wl];
            for (b_out, block) in right.iter().enumerate() {
                for b_in in 0..wl {
                    for sp in 0..2 {
                        for s in 0..2 {
                            let coeff = w[[b_in, sp, s, b_out]];
                            if coeff == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for r in 0..dim {
                                for c in 0..dim {
                                    next[b_in][[sp * dim + r, s * dim + c]] += coeff * block[[r, c]];
                                }
                            }
                        }
                    }
                }
            }
            let _ = wr;
            right = next;
        }
        debug_assert_eq!(left.len(), right.len());
        let dim_l = left[0].nrows();
        let dim_r = right[0].nrows();
        let mut h = Array2::zeros((dim_l * dim_r, dim_l * dim_r));
        for (lb, rb) in left.iter().zip(&right) {
            for r1 in 0..dim_l {
                for c1 in 0..dim_l {
                    let z = lb[[r1, c1]];
                    if z == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for r2 in 0..dim_r {
                        for c2 in 0..dim_r {
                            h[[r1 * dim_r + r2, c1 * dim_r + c2]] += z * rb[[r2, c2]];
                        }
                    }
                }
            }
        }
        Ok(h)
    }
}
