//! Random-XZ classical shadows.
//!
//! A single measurement `(U, b)` yields the per-site factorized estimator
//! `ρ̂₁ = ⊗_i (2 U_i†|b_i⟩⟨b_i|U_i − 1/2)`; averaging over shots inverts the
//! measurement channel on its visible space — the span of Y-free Pauli
//! strings. Estimation never materializes the `2^n` shadow: Pauli estimates
//! use the per-site trace factors, subsystem density matrices the per-site
//! 2×2 blocks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseOperator};
use crate::error::{Error, Result};
use crate::measurement::{Dataset, EnsembleKind, MeasurementRecord};
use crate::pauli::{BasisAxis, BasisString, PauliOp, PauliString};
use crate::C64;

/// `‖P‖²_shadow = 2^{k(P)}` for Y-free Pauli strings; Y-containing strings
/// are invisible and report infinity.
pub fn shadow_norm(p: &PauliString) -> f64 {
    if p.has_y() {
        f64::INFINITY
    } else {
        2f64.powi(p.locality() as i32)
    }
}

/// Apply the XZ measurement channel to a dense operator:
/// `M(O) = Σ_P 2^{-k(P)} tr(O P̂) P̂` over Hilbert-Schmidt-normalized Y-free
/// strings. Y-containing components are annihilated. Dense test utility,
/// capped at 8 qubits.
pub fn measurement_channel_apply(op: &DenseOperator) -> Result<DenseOperator> {
    let dim = op.nrows();
    if op.ncols() != dim || !dim.is_power_of_two() {
        return Err(Error::invalid_argument("operator must be square with 2^n rows"));
    }
    let n = dim.trailing_zeros() as usize;
    if n > 8 {
        return Err(Error::ResourceLimit(
            "measurement channel limited to 8 qubits".into(),
        ));
    }
    let mut out = Array2::zeros((dim, dim));
    let hs_scale = 2f64.powf(-(n as f64) / 2.0);
    for vis in dense::visible_strings(n) {
        let p = vis.to_pauli_string();
        let k = p.locality();
        // tr(O P̂) with P̂ = P / 2^{n/2}.
        let coeff = dense::trace_with_pauli(op, &p, n) * hs_scale;
        let weight = coeff * 2f64.powi(-(k as i32)) * hs_scale;
        for col in 0..dim {
            let (row, phase) = dense::pauli_column_action(&p, n, col);
            out[[row, col]] += weight * phase;
        }
    }
    Ok(out)
}

/// One shot's per-site factors `2 U†|b⟩⟨b|U − 1/2` (Hermitian, trace 1,
/// eigenvalues {3/2, −1/2}).
#[derive(Debug, Clone)]
pub struct SingleShotShadow {
    factors: Vec<Array2<C64>>,
}

impl SingleShotShadow {
    pub fn from_record(record: &MeasurementRecord) -> Self {
        let factors = record
            .basis
            .axes()
            .iter()
            .zip(&record.bits)
            .map(|(&axis, &bit)| site_factor(axis, bit))
            .collect();
        SingleShotShadow { factors }
    }

    pub fn factor(&self, site: usize) -> &Array2<C64> {
        &self.factors[site]
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }
}

/// 2×2 factor of the single-shot shadow at one site.
pub fn site_factor(axis: BasisAxis, bit: u8) -> Array2<C64> {
    let mut m = Array2::zeros((2, 2));
    let half = C64::new(0.5, 0.0);
    match axis {
        BasisAxis::Z => {
            // 2|b⟩⟨b| − 1/2
            let b = (bit & 1) as usize;
            m[[b, b]] = C64::new(2.0, 0.0);
            m[[0, 0]] -= half;
            m[[1, 1]] -= half;
        }
        BasisAxis::X => {
            // 2|±⟩⟨±| − 1/2
            let sign = if bit & 1 == 0 { 1.0 } else { -1.0 };
            m[[0, 0]] = C64::new(0.5, 0.0);
            m[[1, 1]] = C64::new(0.5, 0.0);
            m[[0, 1]] = C64::new(sign, 0.0);
            m[[1, 0]] = C64::new(sign, 0.0);
        }
    }
    m
}

/// `tr(P_site · factor)` without building the factor: ±2 when the measured
/// axis matches the Pauli, 0 otherwise.
#[inline]
fn trace_factor(op: PauliOp, axis: BasisAxis, bit: u8) -> f64 {
    let sign = if bit & 1 == 0 { 2.0 } else { -2.0 };
    match (op, axis) {
        (PauliOp::Z, BasisAxis::Z) => sign,
        (PauliOp::X, BasisAxis::X) => sign,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PauliEstimate {
    pub observable: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Shots whose bases matched the observable's support (all shots
    /// contribute to the mean for random-XZ data; only matching ones carry
    /// information).
    pub shots_used: usize,
    pub shadow_norm: f64,
}

/// Estimate `tr(P ρ)` from a dataset.
///
/// Random-XZ datasets use the factorized shadow estimator (unbiased on the
/// visible space). Global-XZ datasets support only pure-X or pure-Z strings,
/// estimated as direct empirical means over the shots measured in the
/// matching global basis.
pub fn estimate_pauli(ds: &Dataset, p: &PauliString) -> Result<PauliEstimate> {
    if ds.is_empty() {
        return Err(Error::invalid_argument("empty dataset"));
    }
    p.check_sites(ds.n())?;
    if p.has_y() {
        return Err(Error::InvisibleObservable(format!(
            "{} contains a Y factor and cannot be estimated from XZ data",
            p.label()
        )));
    }
    let mut scale = p.coefficient();
    if let crate::pauli::Normalization::HilbertSchmidt = p.normalization() {
        scale *= 2f64.powf(-(ds.n() as f64) / 2.0);
    }
    if scale.im.abs() > 1e-12 {
        return Err(Error::invalid_argument(
            "expectation estimates need a real coefficient",
        ));
    }
    let scale = scale.re;

    match ds.ensemble() {
        EnsembleKind::RandomXz => {
            let mut sum = 0.0;
            let mut sum_sqr = 0.0;
            let mut matched = 0usize;
            for record in ds.records() {
                let mut value = 1.0f64;
                for (site, op) in p.support() {
                    value *= trace_factor(op, record.basis.axis(site), record.bits[site]);
                    if value == 0.0 {
                        break;
                    }
                }
                if value != 0.0 {
                    matched += 1;
                }
                sum += value;
                sum_sqr += value * value;
            }
            let count = ds.len() as f64;
            let mean = sum / count;
            let variance = (sum_sqr / count - mean * mean).max(0.0);
            Ok(PauliEstimate {
                observable: p.label(),
                estimate: scale * mean,
                std_error: scale.abs() * (variance / count).sqrt(),
                shots_used: matched,
                shadow_norm: shadow_norm(p),
            })
        }
        EnsembleKind::GlobalXz => {
            let ops: Vec<PauliOp> = p.support().map(|(_, op)| op).collect();
            let uniform_axis = if ops.iter().all(|&o| o == PauliOp::Z) {
                BasisAxis::Z
            } else if ops.iter().all(|&o| o == PauliOp::X) {
                BasisAxis::X
            } else {
                return Err(Error::InvisibleObservable(format!(
                    "{} mixes X and Z factors; global-XZ data only determines pure-type strings",
                    p.label()
                )));
            };
            let mut sum = 0.0;
            let mut sum_sqr = 0.0;
            let mut matched = 0usize;
            for record in ds.records() {
                if record.basis.axis(0) != uniform_axis {
                    continue;
                }
                matched += 1;
                let mut value = 1.0f64;
                for (site, _) in p.support() {
                    value *= if record.bits[site] & 1 == 0 { 1.0 } else { -1.0 };
                }
                sum += value;
                sum_sqr += value * value;
            }
            if matched == 0 {
                return Err(Error::invalid_argument(
                    "no shots in the required global basis",
                ));
            }
            let count = matched as f64;
            let mean = sum / count;
            let variance = (sum_sqr / count - mean * mean).max(0.0);
            Ok(PauliEstimate {
                observable: p.label(),
                estimate: scale * mean,
                std_error: scale.abs() * (variance / count).sqrt(),
                shots_used: matched,
                shadow_norm: shadow_norm(p),
            })
        }
    }
}

/// Shadow estimate of the visible-space projection of the reduced density
/// matrix on `sites`: the average of per-shot factor products. Hermitian
/// with trace exactly 1.
pub fn estimate_subsystem_rdm_projected(ds: &Dataset, sites: &[usize]) -> Result<DenseOperator> {
    let mut acc = ShadowAccumulator::new(ds.n(), ds.ensemble(), vec![], vec![sites.to_vec()])?;
    for record in ds.records() {
        acc.accumulate(record)?;
    }
    Ok(acc.rdm_estimates()?.pop().expect("one subsystem"))
}

/// Streaming, mergeable accumulator of shadow estimates for a fixed set of
/// Pauli observables and subsystem RDMs.
#[derive(Debug, Clone)]
pub struct ShadowAccumulator {
    n: usize,
    ensemble: EnsembleKind,
    paulis: Vec<PauliString>,
    pauli_sums: Vec<f64>,
    pauli_sum_sqrs: Vec<f64>,
    subsystems: Vec<Vec<usize>>,
    rdm_sums: Vec<DenseOperator>,
    shots: u64,
}

impl ShadowAccumulator {
    pub fn new(
        n: usize,
        ensemble: EnsembleKind,
        paulis: Vec<PauliString>,
        subsystems: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if ensemble != EnsembleKind::RandomXz && !subsystems.is_empty() {
            return Err(Error::invalid_argument(
                "subsystem shadows require a random-XZ dataset",
            ));
        }
        for p in &paulis {
            p.check_sites(n)?;
            if p.has_y() {
                return Err(Error::InvisibleObservable(format!(
                    "{} contains a Y factor",
                    p.label()
                )));
            }
        }
        let mut rdm_sums = Vec::with_capacity(subsystems.len());
        for sites in &subsystems {
            if sites.is_empty() || sites.len() > 8 {
                return Err(Error::ResourceLimit(
                    "subsystem shadows limited to 1..=8 sites".into(),
                ));
            }
            if sites.iter().any(|&s| s >= n) {
                return Err(Error::invalid_argument("subsystem site out of range"));
            }
            rdm_sums.push(Array2::zeros((1 << sites.len(), 1 << sites.len())));
        }
        let pauli_sums = vec![0.0; paulis.len()];
        let pauli_sum_sqrs = vec![0.0; paulis.len()];
        Ok(ShadowAccumulator {
            n,
            ensemble,
            paulis,
            pauli_sums,
            pauli_sum_sqrs,
            subsystems,
            rdm_sums,
            shots: 0,
        })
    }

    pub fn accumulate(&mut self, record: &MeasurementRecord) -> Result<()> {
        if record.basis.len() != self.n {
            return Err(Error::invalid_argument("record size mismatch"));
        }
        self.shots += 1;
        for (index, p) in self.paulis.iter().enumerate() {
            let mut value = 1.0f64;
            for (site, op) in p.support() {
                value *= trace_factor(op, record.basis.axis(site), record.bits[site]);
                if value == 0.0 {
                    break;
                }
            }
            self.pauli_sums[index] += value;
            self.pauli_sum_sqrs[index] += value * value;
        }
        for (index, sites) in self.subsystems.iter().enumerate() {
            let mut block = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
            for &site in sites {
                let factor = site_factor(record.basis.axis(site), record.bits[site]);
                block = kron(&block, &factor);
            }
            self.rdm_sums[index] += &block;
        }
        Ok(())
    }

    /// Merge two accumulators over the same configuration (associative and
    /// commutative).
    pub fn merge(mut self, other: &ShadowAccumulator) -> Result<ShadowAccumulator> {
        if self.n != other.n
            || self.ensemble != other.ensemble
            || self.paulis != other.paulis
            || self.subsystems != other.subsystems
        {
            return Err(Error::invalid_argument("cannot merge mismatched accumulators"));
        }
        self.shots += other.shots;
        for (a, b) in self.pauli_sums.iter_mut().zip(&other.pauli_sums) {
            *a += b;
        }
        for (a, b) in self.pauli_sum_sqrs.iter_mut().zip(&other.pauli_sum_sqrs) {
            *a += b;
        }
        for (a, b) in self.rdm_sums.iter_mut().zip(&other.rdm_sums) {
            *a += b;
        }
        Ok(self)
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn pauli_estimates(&self) -> Result<Vec<PauliEstimate>> {
        if self.shots == 0 {
            return Err(Error::invalid_argument("no shots accumulated"));
        }
        let count = self.shots as f64;
        Ok(self
            .paulis
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mean = self.pauli_sums[i] / count;
                let variance = (self.pauli_sum_sqrs[i] / count - mean * mean).max(0.0);
                PauliEstimate {
                    observable: p.label(),
                    estimate: mean,
                    std_error: (variance / count).sqrt(),
                    shots_used: self.shots as usize,
                    shadow_norm: shadow_norm(p),
                }
            })
            .collect())
    }

    pub fn rdm_estimates(&self) -> Result<Vec<DenseOperator>> {
        if self.shots == 0 {
            return Err(Error::invalid_argument("no shots accumulated"));
        }
        let scale = C64::new(1.0 / self.shots as f64, 0.0);
        Ok(self.rdm_sums.iter().map(|m| m.mapv(|z| z * scale)).collect())
    }
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let scale = a[[i, j]];
            if scale == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = scale * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Reconstruct a real pure state from exact XZ outcome probabilities.
///
/// `prob_oracle(basis, bits)` must return the exact probability
/// `|⟨b|U|ψ⟩|²` for any XZ basis. Amplitudes come from the all-Z basis;
/// relative signs are fixed recursively: within the `b_k = 0` and `b_k = 1`
/// subspaces by induction, and across them through the expectation of an
/// observable built from `|+⟩⟨+|` on the split qubit, projectors on
/// matching bits, and X on mismatching bits of a minimal-Hamming-distance
/// pair of nonzero-amplitude basis states. The result equals the target up
/// to a global sign.
pub fn reconstruct_real_pure_state<F>(prob_oracle: F, n: usize) -> Result<Vec<f64>>
where
    F: Fn(&BasisString, &[u8]) -> f64,
{
    if n == 0 {
        return Err(Error::invalid_argument("qubit count must be positive"));
    }
    if n > 8 {
        return Err(Error::ResourceLimit(
            "dense reconstruction limited to 8 qubits".into(),
        ));
    }
    let dim = 1usize << n;
    let all_z = BasisString::uniform(BasisAxis::Z, n);
    let mut magnitudes = Vec::with_capacity(dim);
    let mut total = 0.0;
    for index in 0..dim {
        let bits = index_bits(index, n);
        let p = prob_oracle(&all_z, &bits);
        if p < -1e-9 {
            return Err(Error::InvalidOracle(format!(
                "negative probability {p} for bits {index:0n$b}"
            )));
        }
        total += p;
        magnitudes.push(p.max(0.0).sqrt());
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidOracle(format!(
            "all-Z probabilities sum to {total}, not 1"
        )));
    }

    let threshold = magnitudes.iter().cloned().fold(0.0f64, f64::max) * 1e-9;
    let mut signs = vec![1.0f64; dim];
    assign_signs(&prob_oracle, n, 0, 0, &magnitudes, threshold, &mut signs)?;

    let mut state: Vec<f64> = magnitudes
        .iter()
        .zip(&signs)
        .map(|(m, s)| m * s)
        .collect();
    let norm: f64 = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidOracle("oracle describes the zero vector".into()));
    }
    for x in &mut state {
        *x /= norm;
    }
    Ok(state)
}

/// Recursively assign relative signs within the subspace of basis states
/// whose first `depth` bits equal those of `prefix` (a left-aligned index).
fn assign_signs<F>(
    oracle: &F,
    n: usize,
    depth: usize,
    prefix: usize,
    magnitudes: &[f64],
    threshold: f64,
    signs: &mut [f64],
) -> Result<()>
where
    F: Fn(&BasisString, &[u8]) -> f64,
{
    if depth == n {
        return Ok(());
    }
    let zero_branch = prefix << 1;
    let one_branch = (prefix << 1) | 1;
    assign_signs(oracle, n, depth + 1, zero_branch, magnitudes, threshold, signs)?;
    assign_signs(oracle, n, depth + 1, one_branch, magnitudes, threshold, signs)?;

    let tail = n - depth - 1;
    let members = |branch: usize| -> Vec<usize> {
        (0..1usize << tail)
            .map(|suffix| (branch << tail) | suffix)
            .filter(|&idx| magnitudes[idx] > threshold)
            .collect()
    };
    let zeros = members(zero_branch);
    let ones = members(one_branch);
    if zeros.is_empty() || ones.is_empty() {
        return Ok(());
    }

    // Minimal-Hamming pair, best-conditioned on ties.
    let mut best: Option<(u32, f64, usize, usize)> = None;
    for &a in &zeros {
        for &b in &ones {
            let distance = ((a ^ b) as u32).count_ones();
            let strength = magnitudes[a] * magnitudes[b];
            let better = match &best {
                None => true,
                Some((d, s, _, _)) => distance < *d || (distance == *d && strength > *s),
            };
            if better {
                best = Some((distance, strength, a, b));
            }
        }
    }
    let (distance, _, b0, b1) = best.expect("both branches non-empty");

    // Observable: |+⟩⟨+| on the split qubit, projectors on matching bits,
    // X on mismatching bits. All factors are diagonal in a single XZ basis.
    let split_site = depth;
    let mut axes = vec![BasisAxis::Z; n];
    axes[split_site] = BasisAxis::X;
    let mut x_sites = Vec::new();
    let b0_bits = index_bits(b0, n);
    let b1_bits = index_bits(b1, n);
    for site in 0..n {
        if site == split_site {
            continue;
        }
        if b0_bits[site] != b1_bits[site] {
            axes[site] = BasisAxis::X;
            x_sites.push(site);
        }
    }
    let basis = BasisString::new(axes);

    // ⟨O⟩ = Σ over the free (X-measured) outcomes with parity weights; the
    // |+⟩⟨+| projector pins the split qubit's X outcome to 0 and projectors
    // pin the Z-measured bits.
    let mut expectation = 0.0;
    let mut outcome = b0_bits.clone();
    outcome[split_site] = 0;
    for mask in 0..1usize << x_sites.len() {
        let mut weight = 1.0f64;
        for (pos, &site) in x_sites.iter().enumerate() {
            let bit = ((mask >> pos) & 1) as u8;
            outcome[site] = bit;
            if bit == 1 {
                weight = -weight;
            }
        }
        expectation += weight * oracle(&basis, &outcome);
    }

    let (m0, m1) = (magnitudes[b0], magnitudes[b1]);
    let relative = if distance == 1 {
        // ⟨O⟩ = (c0 + c1)² / 2: compare against both sign hypotheses.
        let plus = (m0 + m1).powi(2) / 2.0;
        let minus = (m0 - m1).powi(2) / 2.0;
        if (expectation - plus).abs() <= (expectation - minus).abs() {
            1.0
        } else {
            -1.0
        }
    } else {
        // ⟨O⟩ = c0 · c1.
        if expectation >= 0.0 {
            1.0
        } else {
            -1.0
        }
    };

    // Sign of the pair as currently assigned within their subspaces.
    let current = signs[b0] * signs[b1];
    if current != relative {
        let tail_count = 1usize << tail;
        for suffix in 0..tail_count {
            signs[(one_branch << tail) | suffix] *= -1.0;
        }
    }
    Ok(())
}

fn index_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|site| ((index >> (n - 1 - site)) & 1) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::ghz_state;
    use crate::measurement::{generate_dataset, EnsembleSpec};
    use crate::mps::MpsState;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shadow_norms() {
        let x = PauliString::single(0, PauliOp::X);
        assert_abs_diff_eq!(shadow_norm(&x), 2.0);
        let xz = PauliString::new([(0, PauliOp::X), (1, PauliOp::Z)]).unwrap();
        assert_abs_diff_eq!(shadow_norm(&xz), 4.0);
        let yy = PauliString::new([(0, PauliOp::Y), (1, PauliOp::Y)]).unwrap();
        assert!(shadow_norm(&yy).is_infinite());
    }

    #[test]
    fn site_factor_spectrum() {
        for axis in [BasisAxis::X, BasisAxis::Z] {
            for bit in [0u8, 1] {
                let f = site_factor(axis, bit);
                // Hermitian, trace 1, eigenvalues {3/2, −1/2}.
                assert!((f[[0, 1]] - f[[1, 0]].conj()).norm() < 1e-15);
                let trace = (f[[0, 0]] + f[[1, 1]]).re;
                assert_abs_diff_eq!(trace, 1.0, epsilon = 1e-15);
                let det = (f[[0, 0]] * f[[1, 1]] - f[[0, 1]] * f[[1, 0]]).re;
                assert_abs_diff_eq!(det, -0.75, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn channel_eigenvalues() {
        // Identity (k = 0) is fixed.
        let n = 2;
        let dim = 4;
        let ident = Array2::eye(dim).mapv(|x: f64| C64::new(x / 2.0, 0.0));
        let out = measurement_channel_apply(&ident).unwrap();
        let err: f64 = (&out - &ident).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12);

        // X⊗Z maps to itself scaled by 1/4.
        let xz = dense::pauli_matrix(
            &PauliString::new([(0, PauliOp::X), (1, PauliOp::Z)])
                .unwrap()
                .with_normalization(crate::pauli::Normalization::HilbertSchmidt),
            n,
        )
        .unwrap();
        let out = measurement_channel_apply(&xz).unwrap();
        let expect = xz.mapv(|z| z * 0.25);
        let err: f64 = (&out - &expect).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12);

        // Y⊗1 is annihilated.
        let y = dense::pauli_matrix(&PauliString::single(0, PauliOp::Y), n).unwrap();
        let out = measurement_channel_apply(&y).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn pauli_estimate_on_zero_state() {
        let zero = MpsState::product_state(&[0]).unwrap();
        let ds = generate_dataset(&zero, &EnsembleSpec::random_xz(1), 10_000, 3).unwrap();
        let z = PauliString::single(0, PauliOp::Z);
        let est = estimate_pauli(&ds, &z).unwrap();
        assert!((est.estimate - 1.0).abs() < 0.05, "estimate {}", est.estimate);

        let plus_data = {
            let mut v = vec![C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
            v[1] = v[0];
            let plus = MpsState::from_statevector(&v, 0).unwrap();
            generate_dataset(&plus, &EnsembleSpec::random_xz(1), 10_000, 5).unwrap()
        };
        let est = estimate_pauli(&plus_data, &z).unwrap();
        assert!(est.estimate.abs() < 0.05, "estimate {}", est.estimate);
    }

    #[test]
    fn ghz_zz_estimate_within_shadow_norm_bound() {
        let ghz = ghz_state(3).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::random_xz(3), 100_000, 17).unwrap();
        let zz = PauliString::new([(0, PauliOp::Z), (1, PauliOp::Z)]).unwrap();
        let est = estimate_pauli(&ds, &zz).unwrap();
        let sigma = (shadow_norm(&zz) / ds.len() as f64).sqrt();
        assert!(
            (est.estimate - 1.0).abs() <= 3.0 * sigma,
            "estimate {} sigma {}",
            est.estimate,
            sigma
        );
    }

    #[test]
    fn y_strings_are_rejected() {
        let ghz = ghz_state(2).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::random_xz(2), 100, 1).unwrap();
        let yy = PauliString::new([(0, PauliOp::Y), (1, PauliOp::Y)]).unwrap();
        assert!(matches!(
            estimate_pauli(&ds, &yy),
            Err(Error::InvisibleObservable(_))
        ));
    }

    #[test]
    fn global_dataset_rejects_mixed_strings() {
        let ghz = ghz_state(2).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::global_xz(2), 500, 2).unwrap();
        let zz = PauliString::new([(0, PauliOp::Z), (1, PauliOp::Z)]).unwrap();
        let est = estimate_pauli(&ds, &zz).unwrap();
        assert!((est.estimate - 1.0).abs() < 0.05);

        let mixed = PauliString::new([(0, PauliOp::X), (1, PauliOp::Z)]).unwrap();
        assert!(matches!(
            estimate_pauli(&ds, &mixed),
            Err(Error::InvisibleObservable(_))
        ));
    }

    #[test]
    fn rdm_estimate_trace_is_exactly_one() {
        let psi = MpsState::new_random_real(3, 2, 7).unwrap();
        let ds = generate_dataset(&psi, &EnsembleSpec::random_xz(3), 500, 9).unwrap();
        let rdm = estimate_subsystem_rdm_projected(&ds, &[0, 1]).unwrap();
        let trace: C64 = rdm.diag().iter().copied().sum();
        assert_abs_diff_eq!(trace.re, 1.0, epsilon = 1e-12);
        assert!(trace.im.abs() < 1e-12);
        // Hermitian.
        for r in 0..4 {
            for c in 0..4 {
                assert!((rdm[[r, c]] - rdm[[c, r]].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ghz_rdm_estimate_projects_out_yy() {
        let ghz = ghz_state(2).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::random_xz(2), 60_000, 23).unwrap();
        let est = estimate_subsystem_rdm_projected(&ds, &[0, 1]).unwrap();
        let yy = dense::pauli_matrix(
            &PauliString::new([(0, PauliOp::Y), (1, PauliOp::Y)])
                .unwrap()
                .with_normalization(crate::pauli::Normalization::HilbertSchmidt),
            2,
        )
        .unwrap();
        // tr(ρ̂ · ŶŶ) ≈ 0 although the true state has weight −1/2 there.
        let tr: C64 = est.dot(&yy).diag().iter().copied().sum();
        assert!(tr.norm() < 0.02, "YY component {tr}");
        // The visible ZZ component survives.
        let zz = dense::pauli_matrix(
            &PauliString::new([(0, PauliOp::Z), (1, PauliOp::Z)]).unwrap(),
            2,
        )
        .unwrap();
        let tr_zz: C64 = est.dot(&zz).diag().iter().copied().sum();
        assert!((tr_zz.re - 1.0).abs() < 0.1, "ZZ component {tr_zz}");
    }

    #[test]
    fn accumulator_merge_is_associative() {
        let psi = MpsState::new_random_real(3, 2, 2).unwrap();
        let ds = generate_dataset(&psi, &EnsembleSpec::random_xz(3), 90, 4).unwrap();
        let template = || {
            ShadowAccumulator::new(
                3,
                EnsembleKind::RandomXz,
                vec![PauliString::single(0, PauliOp::Z)],
                vec![vec![0, 1]],
            )
            .unwrap()
        };
        let mut parts: Vec<ShadowAccumulator> = Vec::new();
        for chunk in ds.records().chunks(30) {
            let mut acc = template();
            for r in chunk {
                acc.accumulate(r).unwrap();
            }
            parts.push(acc);
        }
        let left = parts[0]
            .clone()
            .merge(&parts[1])
            .unwrap()
            .merge(&parts[2])
            .unwrap();
        let right = parts[0]
            .clone()
            .merge(&parts[1].clone().merge(&parts[2]).unwrap())
            .unwrap();
        assert_eq!(left.shots(), right.shots());
        let (a, b) = (left.pauli_estimates().unwrap(), right.pauli_estimates().unwrap());
        assert_abs_diff_eq!(a[0].estimate, b[0].estimate, epsilon = 1e-12);
        let (ra, rb) = (left.rdm_estimates().unwrap(), right.rdm_estimates().unwrap());
        let err: f64 = (&ra[0] - &rb[0]).iter().map(|z| z.norm()).sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn reconstructs_simple_states() {
        // |00…0⟩: sign-free case.
        let zeros = MpsState::product_state(&[0, 0, 0]).unwrap();
        let dense_state = dense::statevector(&zeros).unwrap();
        let oracle = |basis: &BasisString, bits: &[u8]| {
            dense::outcome_probability(&dense_state, basis, bits)
        };
        let rec = reconstruct_real_pure_state(oracle, 3).unwrap();
        assert_abs_diff_eq!(rec[0].abs(), 1.0, epsilon = 1e-12);

        // GHZ with both sign conventions, distinguished correctly.
        for sign in [1.0, -1.0] {
            let mut v = vec![C64::new(0.0, 0.0); 8];
            v[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v[7] = C64::new(sign * std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let target: Vec<f64> = v.iter().map(|z| z.re).collect();
            let arr = ndarray::Array1::from_vec(v.clone());
            let oracle =
                |basis: &BasisString, bits: &[u8]| dense::outcome_probability(&arr, basis, bits);
            let rec = reconstruct_real_pure_state(oracle, 3).unwrap();
            let overlap: f64 = rec.iter().zip(&target).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(overlap.abs(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn reconstructs_random_real_state() {
        let psi = MpsState::new_random_real(6, 3, 31).unwrap();
        let dense_state = dense::statevector(&psi).unwrap();
        let target: Vec<f64> = dense_state.iter().map(|z| z.re).collect();
        let oracle =
            |basis: &BasisString, bits: &[u8]| dense::outcome_probability(&dense_state, basis, bits);
        let rec = reconstruct_real_pure_state(oracle, 6).unwrap();
        let overlap: f64 = rec.iter().zip(&target).map(|(a, b)| a * b).sum();
        assert!(overlap.powi(2) > 1.0 - 1e-10, "overlap² = {}", overlap.powi(2));
    }

    #[test]
    fn oracle_validation() {
        let bad = |_: &BasisString, _: &[u8]| 0.3; // does not normalize
        assert!(matches!(
            reconstruct_real_pure_state(bad, 2),
            Err(Error::InvalidOracle(_))
        ));
    }
}
