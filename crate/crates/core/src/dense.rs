//! Dense state-vector and operator utilities.
//!
//! Everything here works on explicit `2^n`-dimensional arrays and is
//! independent of the MPS contraction code, which makes these routines
//! suitable as brute-force references at small `n` (they are also what the
//! dense oracle operations in the public API are built on). Site 0 is the
//! most significant bit of a basis label.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mps::MpsState;
use crate::pauli::{BasisAxis, BasisString, PauliOp, PauliString};
use crate::C64;

pub type DenseOperator = Array2<C64>;

/// Largest system size for which dense `2^n × 2^n` operators are permitted.
pub const MAX_DENSE_OPERATOR_QUBITS: usize = 12;

fn check_dense_qubits(n: usize, limit: usize, what: &str) -> Result<()> {
    if n > limit {
        return Err(Error::ResourceLimit(format!(
            "{what} limited to {limit} qubits (requested {n})"
        )));
    }
    Ok(())
}

/// Contract an MPS into a dense state vector (limited to 20 qubits).
pub fn statevector(mps: &MpsState) -> Result<Array1<C64>> {
    let n = mps.n();
    check_dense_qubits(n, 20, "dense state vector")?;
    // Fold left to right, keeping a (2^k, χ) matrix.
    let mut acc0 = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for t in mps.tensors() {
        let (l, _, r) = t.dim();
        let rows = acc0.nrows();
        let mut next = Array2::zeros((rows * 2, r));
        for row in 0..rows {
            for s in 0..2 {
                for b in 0..r {
                    let mut z = C64::new(0.0, 0.0);
                    for a in 0..l {
                        z += acc0[[row, a]] * t[[a, s, b]];
                    }
                    next[[row * 2 + s, b]] = z;
                }
            }
        }
        acc0 = next;
    }
    Ok(acc0.column(0).to_owned())
}

/// Apply the basis rotation `U = ⊗_i U^{α_i}` to a dense state
/// (X axis applies a Hadamard, Z leaves the site alone).
pub fn rotate_statevector(state: &Array1<C64>, basis: &BasisString) -> Array1<C64> {
    let n = basis.len();
    assert_eq!(state.len(), 1 << n, "state length must match basis length");
    let mut v = state.to_owned();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (site, &axis) in basis.axes().iter().enumerate() {
        if axis == BasisAxis::Z {
            continue;
        }
        let stride = 1usize << (n - 1 - site);
        let mut idx = 0;
        while idx < v.len() {
            for off in 0..stride {
                let i0 = idx + off;
                let i1 = i0 + stride;
                let a = v[i0];
                let b = v[i1];
                v[i0] = (a + b) * h;
                v[i1] = (a - b) * h;
            }
            idx += 2 * stride;
        }
    }
    v
}

/// Exact outcome probability `|⟨b|U|ψ⟩|²` for a dense state.
pub fn outcome_probability(state: &Array1<C64>, basis: &BasisString, bits: &[u8]) -> f64 {
    let rotated = rotate_statevector(state, basis);
    let mut index = 0usize;
    for &b in bits {
        index = (index << 1) | (b & 1) as usize;
    }
    rotated[index].norm_sqr()
}

/// Dense matrix of a Pauli string on `n` qubits (coefficient and
/// normalization flags applied).
pub fn pauli_matrix(p: &PauliString, n: usize) -> Result<DenseOperator> {
    p.check_sites(n)?;
    check_dense_qubits(n, MAX_DENSE_OPERATOR_QUBITS, "dense Pauli matrix")?;
    let dim = 1usize << n;
    let mut m = Array2::zeros((dim, dim));
    let mut scale = p.coefficient();
    if let crate::pauli::Normalization::HilbertSchmidt = p.normalization() {
        scale *= 2f64.powf(-(n as f64) / 2.0);
    }
    for col in 0..dim {
        let (row, phase) = pauli_column_action(p, n, col);
        m[[row, col]] += scale * phase;
    }
    Ok(m)
}

/// Action of a Pauli string on the basis state `|col⟩`: returns the image
/// basis index and phase, ignoring coefficient/normalization.
pub fn pauli_column_action(p: &PauliString, n: usize, col: usize) -> (usize, C64) {
    let mut row = col;
    let mut phase = C64::new(1.0, 0.0);
    for (site, op) in p.support() {
        let bit_pos = n - 1 - site;
        let bit = (col >> bit_pos) & 1;
        match op {
            PauliOp::X => row ^= 1 << bit_pos,
            PauliOp::Y => {
                row ^= 1 << bit_pos;
                // Y|0> = i|1>, Y|1> = -i|0>
                phase *= if bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
            }
            PauliOp::Z => {
                if bit == 1 {
                    phase = -phase;
                }
            }
        }
    }
    (row, phase)
}

/// `tr(O · P)` evaluated without materializing `P` (`P` acts as a signed
/// permutation: `tr(O P) = Σ_col phase(col) · O[col, P(col)]`). Coefficient
/// and normalization of `p` are applied.
pub fn trace_with_pauli(op: &DenseOperator, p: &PauliString, n: usize) -> C64 {
    let dim = 1usize << n;
    debug_assert_eq!(op.nrows(), dim);
    let mut scale = p.coefficient();
    if let crate::pauli::Normalization::HilbertSchmidt = p.normalization() {
        scale *= 2f64.powf(-(n as f64) / 2.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for col in 0..dim {
        let (row, phase) = pauli_column_action(p, n, col);
        total += phase * op[[col, row]];
    }
    total * scale
}

/// Hermitian sum `Σ_t c_t P_t` of Pauli strings as a dense matrix.
pub fn hamiltonian_from_terms(n: usize, terms: &[PauliString]) -> Result<DenseOperator> {
    check_dense_qubits(n, MAX_DENSE_OPERATOR_QUBITS, "dense Hamiltonian")?;
    let dim = 1usize << n;
    let mut h = Array2::zeros((dim, dim));
    for term in terms {
        term.check_sites(n)?;
        let mut scale = term.coefficient();
        if let crate::pauli::Normalization::HilbertSchmidt = term.normalization() {
            scale *= 2f64.powf(-(n as f64) / 2.0);
        }
        for col in 0..dim {
            let (row, phase) = pauli_column_action(term, n, col);
            h[[row, col]] += scale * phase;
        }
    }
    Ok(h)
}

/// Smallest eigenvalue and its eigenvector of a Hermitian dense operator.
pub fn ground_state(h: &DenseOperator) -> (f64, Array1<C64>) {
    let (vals, vecs) = linalg::eigh(h);
    (vals[0], vecs.column(0).to_owned())
}

/// Apply `Σ_t c_t P_t` to a state vector using the signed-permutation action
/// of each term (no dense matrix is built).
pub fn apply_terms(n: usize, terms: &[PauliString], state: &Array1<C64>) -> Array1<C64> {
    let dim = 1usize << n;
    debug_assert_eq!(state.len(), dim);
    let mut out = Array1::zeros(dim);
    for term in terms {
        let mut scale = term.coefficient();
        if let crate::pauli::Normalization::HilbertSchmidt = term.normalization() {
            scale *= 2f64.powf(-(n as f64) / 2.0);
        }
        for col in 0..dim {
            let z = state[col];
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            let (row, phase) = pauli_column_action(term, n, col);
            out[row] += scale * phase * z;
        }
    }
    out
}

/// Lanczos estimate of the smallest eigenvalue of a Hermitian term sum;
/// the memory-friendly oracle for sizes where a dense eigendecomposition is
/// too slow (full reorthogonalization, fixed iteration budget).
pub fn ground_energy_from_terms(n: usize, terms: &[PauliString], max_iters: usize) -> Result<f64> {
    check_dense_qubits(n, 24, "Lanczos ground energy")?;
    let dim = 1usize << n;
    let mut v = Array1::<C64>::zeros(dim);
    // Deterministic pseudo-random start with support everywhere.
    let mut seed = 0x9E3779B97F4A7C15u64;
    for z in v.iter_mut() {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *z = C64::new(((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5, 0.0);
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);

    let mut basis: Vec<Array1<C64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    for it in 0..max_iters.min(dim) {
        let mut w = apply_terms(n, terms, &basis[it]);
        let alpha: f64 = basis[it]
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        alphas.push(alpha);
        for prev in &basis {
            let overlap: C64 = prev.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
            ndarray::Zip::from(&mut w).and(prev).for_each(|wz, pz| *wz -= overlap * pz);
        }
        let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let (vals, _) = linalg::eigh_tridiagonal(&alphas, &betas);
        let value = vals[0];
        if (best - value).abs() < 1e-12 || beta < 1e-12 {
            return Ok(value);
        }
        best = value;
        betas.push(beta);
        w.mapv_inplace(|z| z / beta);
        basis.push(w);
    }
    Ok(best)
}

/// All eigenvalues of a Hermitian dense operator, ascending.
pub fn spectrum(h: &DenseOperator) -> Vec<f64> {
    linalg::eigh(h).0
}

/// Partial trace of a pure state onto `sites` (ascending order, site 0 most
/// significant within the subsystem).
pub fn partial_trace_pure(state: &Array1<C64>, n: usize, sites: &[usize]) -> Result<DenseOperator> {
    let mut sorted: Vec<usize> = sites.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != sites.len() || sorted.iter().any(|&s| s >= n) {
        return Err(Error::invalid_argument("bad subsystem for partial trace"));
    }
    let k = sorted.len();
    check_dense_qubits(k, MAX_DENSE_OPERATOR_QUBITS, "partial trace")?;
    let dim = 1usize << k;
    let mut rho = Array2::zeros((dim, dim));
    let full = 1usize << n;
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    for a in 0..full {
        let ka = extract_bits(a, n, &sorted);
        for b in 0..full {
            if erase_bits(a, n, &sorted) != erase_bits(b, n, &sorted) {
                continue;
            }
            let kb = extract_bits(b, n, &sorted);
            rho[[ka, kb]] += state[a] * state[b].conj() / norm;
        }
    }
    Ok(rho)
}

fn extract_bits(index: usize, n: usize, sites: &[usize]) -> usize {
    let mut out = 0usize;
    for &s in sites {
        out = (out << 1) | ((index >> (n - 1 - s)) & 1);
    }
    out
}

fn erase_bits(index: usize, n: usize, sites: &[usize]) -> usize {
    let mut out = index;
    for &s in sites {
        out &= !(1usize << (n - 1 - s));
    }
    out
}

/// Schmidt values of a dense pure state across the cut after `cut` sites,
/// descending and normalized.
pub fn schmidt_values_dense(state: &Array1<C64>, n: usize, cut: usize) -> Result<Vec<f64>> {
    if cut == 0 || cut >= n {
        return Err(Error::invalid_argument("cut out of range"));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    let m = Array2::from_shape_fn((rows, cols), |(r, c)| state[(r << (n - cut)) | c]);
    let (_, s, _) = linalg::svd(&m);
    let total: f64 = s.iter().map(|x| x * x).sum();
    Ok(s.iter().map(|x| x / total.sqrt()).filter(|&x| x > 1e-12).collect())
}

/// Project a dense operator onto the span of Y-free Pauli strings
/// (the visible space of the XZ ensemble).
pub fn project_visible(op: &DenseOperator, n: usize) -> Result<DenseOperator> {
    check_dense_qubits(n, 8, "visible-space projection")?;
    let dim = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    for mask in visible_strings(n) {
        let p = mask
            .to_pauli_string()
            .with_normalization(crate::pauli::Normalization::HilbertSchmidt);
        let coeff = trace_with_pauli(op, &p, n);
        for col in 0..dim {
            let (row, phase) = pauli_column_action(&p, n, col);
            out[[row, col]] += coeff * phase * 2f64.powf(-(n as f64) / 2.0);
        }
    }
    Ok(out)
}

/// Iterator over all `3^n` Y-free Pauli strings on `n` sites (including the
/// identity), encoded per site as 0 = I, 1 = X, 2 = Z.
pub fn visible_strings(n: usize) -> impl Iterator<Item = VisibleString> {
    let total = 3usize.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut ops = Vec::new();
        for site in 0..n {
            let digit = code % 3;
            code /= 3;
            match digit {
                1 => ops.push((site, PauliOp::X)),
                2 => ops.push((site, PauliOp::Z)),
                _ => {}
            }
        }
        VisibleString { ops }
    })
}

/// A Y-free Pauli string in site/op form.
pub struct VisibleString {
    ops: Vec<(usize, PauliOp)>,
}

impl VisibleString {
    pub fn to_pauli_string(&self) -> PauliString {
        PauliString::new(self.ops.iter().copied()).expect("distinct sites")
    }

    pub fn locality(&self) -> usize {
        self.ops.len()
    }
}
