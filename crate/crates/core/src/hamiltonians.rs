//! Hamiltonian builders and analytic reference states.

use ndarray::Array3;

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::mpo::Mpo;
use crate::mps::MpsState;
use crate::pauli::{PauliOp, PauliString};
use crate::C64;

/// Default boundary compensation field for the ruby cylinder (units of Ω).
pub const RUBY_DEFAULT_BOUNDARY_FIELD: f64 = -0.6;
/// Step-potential strength inside the blockade range (units of Ω).
pub const RUBY_INTERACTION: f64 = 47.0;

/// Pauli-term list for the perturbed surface code
/// `H = −Σ_l S_{Z,l} − Σ_l S_{X,l} − h_z Σ_i Z_i` under the snake ordering.
pub fn surface_code_terms(lx: usize, ly: usize, h_z: f64) -> Result<Vec<PauliString>> {
    let spec = LatticeSpec::surface_code(lx, ly)?;
    let mut terms = Vec::new();
    for stab in &spec.stabilizers {
        let op = if stab.kind == "Z" { PauliOp::Z } else { PauliOp::X };
        let term = PauliString::new(stab.sites.iter().map(|&s| (s, op)))?
            .with_real_coefficient(-1.0)?;
        terms.push(term);
    }
    if h_z != 0.0 {
        for site in 0..spec.n {
            terms.push(PauliString::single(site, PauliOp::Z).with_real_coefficient(-h_z)?);
        }
    }
    Ok(terms)
}

/// MPO of the perturbed surface code Hamiltonian.
pub fn surface_code_mpo(lx: usize, ly: usize, h_z: f64) -> Result<Mpo> {
    let terms = surface_code_terms(lx, ly, h_z)?;
    Mpo::from_pauli_terms(lx * ly, &terms)
}

/// The `n−1` stabilizers of the surface code as unit-coefficient Pauli
/// strings under the snake ordering.
pub fn surface_code_stabilizers(lx: usize, ly: usize) -> Result<Vec<PauliString>> {
    let spec = LatticeSpec::surface_code(lx, ly)?;
    spec.stabilizers
        .iter()
        .map(|stab| {
            let op = if stab.kind == "Z" { PauliOp::Z } else { PauliOp::X };
            PauliString::new(stab.sites.iter().map(|&s| (s, op)))
        })
        .collect()
}

/// Pauli-term list for the Rydberg Hamiltonian on the ruby cylinder with the
/// boundary compensation field:
/// `H = (Ω/2) Σ X_ℓ − Δ Σ n_ℓ + Σ_{pairs} V n_ℓ n_ℓ' − h_bd Σ_{ℓ∈∂} n_ℓ`
/// with `n = (1+Z)/2`, `Ω = 1`, and `V = 47` inside `r ≤ 2a`.
pub fn ruby_rydberg_terms(spec: &LatticeSpec, delta: f64, h_bd: f64) -> Result<Vec<PauliString>> {
    let n = spec.n;
    let mut terms = Vec::new();
    // Identity shift accumulated from all (1+Z)/2 expansions.
    let mut constant = 0.0;
    let mut z_field = vec![0.0f64; n];

    for site in 0..n {
        terms.push(PauliString::single(site, PauliOp::X).with_real_coefficient(0.5)?);
        constant += -delta * 0.5;
        z_field[site] += -delta * 0.5;
    }
    for &(i, j) in &spec.neighbor_pairs {
        // V n_i n_j = V/4 (1 + Z_i + Z_j + Z_i Z_j)
        let v4 = RUBY_INTERACTION / 4.0;
        constant += v4;
        z_field[i] += v4;
        z_field[j] += v4;
        terms.push(
            PauliString::new([(i, PauliOp::Z), (j, PauliOp::Z)])?.with_real_coefficient(v4)?,
        );
    }
    for &site in &spec.boundary_sites {
        constant += -h_bd * 0.5;
        z_field[site] += -h_bd * 0.5;
    }

    for (site, &coeff) in z_field.iter().enumerate() {
        if coeff != 0.0 {
            terms.push(PauliString::single(site, PauliOp::Z).with_real_coefficient(coeff)?);
        }
    }
    if constant != 0.0 {
        terms.push(PauliString::identity().with_real_coefficient(constant)?);
    }
    Ok(terms)
}

/// MPO of the ruby-lattice Rydberg Hamiltonian (`Δ` and `h_bd` in units of
/// the Rabi frequency, which is fixed to 1).
pub fn ruby_rydberg_mpo(lx: usize, ly: usize, delta: f64, h_bd: f64) -> Result<Mpo> {
    let spec = LatticeSpec::ruby_cylinder(lx, ly)?;
    let terms = ruby_rydberg_terms(&spec, delta, h_bd)?;
    Mpo::from_pauli_terms(spec.n, &terms)
}

/// Dense matrix of an MPO (limited to 12 qubits); the test oracle for the
/// Hamiltonian builders.
pub fn dense_hamiltonian(mpo: &Mpo) -> Result<DenseOperator> {
    mpo.to_dense()
}

/// GHZ state `(|0…0⟩ + |1…1⟩)/√2` as a χ=2 MPS.
pub fn ghz_state(n: usize) -> Result<MpsState> {
    if n == 0 {
        return Err(Error::invalid_argument("qubit count must be positive"));
    }
    let one = C64::new(1.0, 0.0);
    if n == 1 {
        let mut t = Array3::zeros((1, 2, 1));
        t[[0, 0, 0]] = one;
        t[[0, 1, 0]] = one;
        return MpsState::from_tensors(vec![t])?.normalized();
    }
    let mut tensors = Vec::with_capacity(n);
    let mut first = Array3::zeros((1, 2, 2));
    first[[0, 0, 0]] = one;
    first[[0, 1, 1]] = one;
    tensors.push(first);
    for _ in 1..n - 1 {
        let mut mid = Array3::zeros((2, 2, 2));
        mid[[0, 0, 0]] = one;
        mid[[1, 1, 1]] = one;
        tensors.push(mid);
    }
    let mut last = Array3::zeros((2, 2, 1));
    last[[0, 0, 0]] = one;
    last[[1, 1, 0]] = one;
    tensors.push(last);
    MpsState::from_tensors(tensors)?.normalized()
}

/// Three-qubit interpolation `√(1−x)|GHZ⟩ + √x|ψ_{χ=2}(seed)⟩`, renormalized
/// and compressed back to χ ≤ 4. The random component is drawn real so the
/// family stays inside the class XZ measurements characterize completely.
pub fn interpolated_state(x: f64, seed: u64) -> Result<MpsState> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid_argument(format!(
            "mixing weight must lie in [0, 1] (got {x})"
        )));
    }
    let n = 3;
    let ghz = ghz_state(n)?;
    let random = MpsState::new_random_real(n, 2, seed)?;
    if x == 0.0 {
        return Ok(ghz);
    }
    if x == 1.0 {
        return Ok(random);
    }
    let scaled_ghz = scale(&ghz, (1.0 - x).sqrt());
    let scaled_random = scale(&random, x.sqrt());
    let (sum, _) = scaled_ghz.add(&scaled_random)?.compress(4)?;
    sum.normalized()
}

fn scale(state: &MpsState, factor: f64) -> MpsState {
    let n = state.n();
    let per_site = factor.powf(1.0 / n as f64);
    let tensors = state
        .tensors()
        .iter()
        .map(|t| t.mapv(|z| z * per_site))
        .collect();
    MpsState::from_tensors(tensors).expect("scaling preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_abs_diff_eq;

    #[test]
    fn surface_code_counts() {
        let stabs = surface_code_stabilizers(3, 3).unwrap();
        assert_eq!(stabs.len(), 8);
        let z_type = stabs
            .iter()
            .filter(|s| s.support().all(|(_, op)| op == PauliOp::Z))
            .count();
        let x_type = stabs
            .iter()
            .filter(|s| s.support().all(|(_, op)| op == PauliOp::X))
            .count();
        assert_eq!(z_type, 4);
        assert_eq!(x_type, 4);
    }

    #[test]
    fn surface_code_dense_matches_terms_and_is_hermitian() {
        let mpo = surface_code_mpo(2, 3, 0.1).unwrap();
        let h = dense_hamiltonian(&mpo).unwrap();
        let terms = surface_code_terms(2, 3, 0.1).unwrap();
        let direct = dense::hamiltonian_from_terms(6, &terms).unwrap();
        let err: f64 = (&h - &direct).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10);
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                assert!((h[[r, c]] - h[[c, r]].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ghz_state_has_log2_entropy() {
        let ghz = ghz_state(4).unwrap();
        for cut in 1..4 {
            assert_abs_diff_eq!(
                ghz.entanglement_entropy(cut).unwrap(),
                std::f64::consts::LN_2,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(ghz.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let ghz = ghz_state(3).unwrap();
        let s0 = interpolated_state(0.0, 11).unwrap();
        assert_abs_diff_eq!(s0.fidelity(&ghz).unwrap(), 1.0, epsilon = 1e-12);

        let random = MpsState::new_random_real(3, 2, 11).unwrap();
        let s1 = interpolated_state(1.0, 11).unwrap();
        assert_abs_diff_eq!(s1.fidelity(&random).unwrap(), 1.0, epsilon = 1e-12);

        assert!(interpolated_state(1.5, 0).is_err());
        assert!(interpolated_state(-0.1, 0).is_err());
    }

    #[test]
    fn interpolation_fidelity_decreases_with_x() {
        let ghz = ghz_state(3).unwrap();
        let seed = 11;
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let x = step as f64 / 10.0;
            let f = interpolated_state(x, seed).unwrap().fidelity(&ghz).unwrap();
            assert!(f <= last + 1e-9, "fidelity not decreasing at x={x}: {f} > {last}");
            last = f;
        }
    }

    #[test]
    fn ruby_delta_linearity() {
        let h_hi = dense_hamiltonian(&ruby_rydberg_mpo(1, 2, 1.7, -0.6).unwrap()).unwrap();
        let h_lo = dense_hamiltonian(&ruby_rydberg_mpo(1, 2, 0.5, -0.6).unwrap()).unwrap();
        let diff = &h_hi - &h_lo;
        // H(1.7) − H(0.5) = −1.2 Σ (1+Z)/2
        let spec = LatticeSpec::ruby_cylinder(1, 2).unwrap();
        let mut expect_terms = vec![PauliString::identity()
            .with_real_coefficient(-1.2 * 0.5 * spec.n as f64)
            .unwrap()];
        for site in 0..spec.n {
            expect_terms
                .push(PauliString::single(site, PauliOp::Z).with_real_coefficient(-0.6).unwrap());
        }
        let expect = dense::hamiltonian_from_terms(spec.n, &expect_terms).unwrap();
        let err: f64 = (&diff - &expect).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9, "delta dependence mismatch: {err}");
    }
}
