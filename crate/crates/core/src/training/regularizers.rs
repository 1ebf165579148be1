//! Regularization terms: squared stabilizer deviations and visible-space
//! projected density-matrix distances, both with analytic conjugate
//! gradients.

use ndarray::{Array2, Array3, Array4};

use crate::dense::{self, DenseOperator};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mpo::Mpo;
use crate::mps::MpsState;
use crate::pauli::PauliString;
use crate::C64;

use super::loss::{norm_gradient, norm_envs, zeros_like};

/// `⟨ψ|O|ψ⟩` (unnormalized) together with `∂⟨ψ|O|ψ⟩/∂Ā_i` for every site.
pub(crate) fn mpo_expectation_gradient(
    tensors: &[Array3<C64>],
    mpo: &Mpo,
) -> (C64, Vec<Array3<C64>>) {
    let n = tensors.len();
    debug_assert_eq!(n, mpo.n());
    // Operator environments; index order (bra bond, MPO bond, ket bond).
    let mut left: Vec<Array3<C64>> = Vec::with_capacity(n + 1);
    left.push(Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0)));
    for i in 0..n {
        left.push(extend_env_left(&left[i], mpo.tensor(i), &tensors[i]));
    }
    let mut right: Vec<Array3<C64>> = vec![Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0)); n + 1];
    for i in (0..n).rev() {
        right[i] = extend_env_right(&right[i + 1], mpo.tensor(i), &tensors[i]);
    }
    let raw = left[n][[0, 0, 0]];

    let grads = (0..n)
        .map(|i| {
            let a = &tensors[i];
            let w = mpo.tensor(i);
            let (al, _, ar) = a.dim();
            let (wl, _, _, wr) = w.dim();
            let l_env = &left[i];
            let r_env = &right[i + 1];
            // step1[α, w1, s, b] = Σ_a L[α, w1, a] A[a, s, b]
            let mut step1 = Array4::<C64>::zeros((al, wl, 2, ar));
            for alpha in 0..al {
                for w1 in 0..wl {
                    for s in 0..2 {
                        for b in 0..ar {
                            let mut z = C64::new(0.0, 0.0);
                            for ak in 0..al {
                                z += l_env[[alpha, w1, ak]] * a[[ak, s, b]];
                            }
                            step1[[alpha, w1, s, b]] = z;
                        }
                    }
                }
            }
            // step2[α, w2, s', b] = Σ_{w1, s} W[w1, s', s, w2] step1[α, w1, s, b]
            let mut step2 = Array4::<C64>::zeros((al, wr, 2, ar));
            for w1 in 0..wl {
                for sp in 0..2 {
                    for s in 0..2 {
                        for w2 in 0..wr {
                            let coeff = w[[w1, sp, s, w2]];
                            if coeff == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for alpha in 0..al {
                                for b in 0..ar {
                                    step2[[alpha, w2, sp, b]] += coeff * step1[[alpha, w1, s, b]];
                                }
                            }
                        }
                    }
                }
            }
            // G[α, s', β] = Σ_{w2, b} step2[α, w2, s', b] R[β, w2, b]
            let mut g = Array3::<C64>::zeros((al, 2, ar));
            for alpha in 0..al {
                for sp in 0..2 {
                    for beta in 0..ar {
                        let mut z = C64::new(0.0, 0.0);
                        for w2 in 0..wr {
                            for b in 0..ar {
                                z += step2[[alpha, w2, sp, b]] * r_env[[beta, w2, b]];
                            }
                        }
                        g[[alpha, sp, beta]] = z;
                    }
                }
            }
            g
        })
        .collect();
    (raw, grads)
}

fn extend_env_left(env: &Array3<C64>, w: &Array4<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::zeros((ar, wr, ar));
    for w1 in 0..wl {
        for sp in 0..2 {
            for s in 0..2 {
                for w2 in 0..wr {
                    let coeff = w[[w1, sp, s, w2]];
                    if coeff == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for abra in 0..al {
                        for aket in 0..al {
                            let e = env[[abra, w1, aket]];
                            if e == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let e = e * coeff;
                            for bb in 0..ar {
                                let bra = a[[abra, sp, bb]].conj() * e;
                                for bk in 0..ar {
                                    out[[bb, w2, bk]] += bra * a[[aket, s, bk]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn extend_env_right(env: &Array3<C64>, w: &Array4<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::zeros((al, wl, al));
    for w1 in 0..wl {
        for sp in 0..2 {
            for s in 0..2 {
                for w2 in 0..wr {
                    let coeff = w[[w1, sp, s, w2]];
                    if coeff == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for bb in 0..ar {
                        for bk in 0..ar {
                            let e = env[[bb, w2, bk]];
                            if e == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let e = e * coeff;
                            for abra in 0..al {
                                let bra = a[[abra, sp, bb]].conj() * e;
                                for aket in 0..al {
                                    out[[abra, w1, aket]] += bra * a[[aket, s, bk]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Normalized expectation of a Hermitian MPO plus its conjugate gradient.
pub(crate) fn normalized_expectation_gradient(
    tensors: &[Array3<C64>],
    mpo: &Mpo,
) -> (f64, Vec<Array3<C64>>) {
    let norm_sqr = norm_envs(tensors).0;
    let ngrad = norm_gradient(tensors);
    let (raw, graw) = mpo_expectation_gradient(tensors, mpo);
    let value = raw.re / norm_sqr;
    let grad = graw
        .into_iter()
        .zip(ngrad)
        .map(|(g, ng)| {
            let mut out = g;
            out.zip_mut_with(&ng, |oz, nz| {
                *oz = (*oz - nz * value) / norm_sqr;
            });
            out
        })
        .collect();
    (value, grad)
}

/// `R(A) = Σ_S (⟨S⟩_ψ − e_S)²` over stabilizer/estimate pairs, with the
/// conjugate gradient `∂R/∂Ā`.
pub fn stabilizer_regularizer(
    mps: &MpsState,
    pairs: &[(PauliString, f64)],
) -> Result<(f64, Vec<Array3<C64>>)> {
    let prepared = PreparedStabilizers::new(mps.n(), pairs)?;
    Ok(prepared.evaluate(mps.tensors()))
}

/// Stabilizer regularizer with the per-term MPOs built once; the trainer
/// evaluates this every optimization step.
pub(crate) struct PreparedStabilizers {
    terms: Vec<(Mpo, f64)>,
}

impl PreparedStabilizers {
    pub fn new(n: usize, pairs: &[(PauliString, f64)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|(p, estimate)| {
                p.check_sites(n)?;
                let mpo = Mpo::from_pauli_terms(n, std::slice::from_ref(p))?;
                Ok((mpo, *estimate))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedStabilizers { terms })
    }

    pub fn evaluate(&self, tensors: &[Array3<C64>]) -> (f64, Vec<Array3<C64>>) {
        let mut value = 0.0;
        let mut grad = zeros_like(tensors);
        for (mpo, estimate) in &self.terms {
            let (v, dv) = normalized_expectation_gradient(tensors, mpo);
            let diff = v - estimate;
            value += diff * diff;
            for (g, d) in grad.iter_mut().zip(dv) {
                g.zip_mut_with(&d, |gz, dz| *gz += dz * (2.0 * diff));
            }
        }
        (value, grad)
    }
}

/// `R(A) = Σ_B ‖ρ̂_B − ρ̃_XZ^B(A)‖₂` over (subsystem, shadow-RDM) pairs:
/// the Frobenius distance between the supplied estimate and the model's
/// visible-space-projected reduced density matrix, with conjugate gradient.
///
/// Subsystems must be contiguous runs of at most 8 sites (the snake ordering
/// keeps each lattice unit cell contiguous).
pub fn rdm_regularizer(
    mps: &MpsState,
    subsystems: &[(Vec<usize>, DenseOperator)],
) -> Result<(f64, Vec<Array3<C64>>)> {
    let prepared = PreparedRdms::new(mps.n(), subsystems)?;
    Ok(prepared.evaluate_state(mps))
}

pub(crate) struct PreparedRdms {
    subsystems: Vec<(Vec<usize>, DenseOperator)>,
}

impl PreparedRdms {
    pub fn new(n: usize, subsystems: &[(Vec<usize>, DenseOperator)]) -> Result<Self> {
        for (sites, rdm) in subsystems {
            if sites.is_empty() || sites.len() > 8 {
                return Err(Error::invalid_argument(
                    "RDM regularizer subsystems must have 1..=8 sites",
                ));
            }
            for window in sites.windows(2) {
                if window[1] != window[0] + 1 {
                    return Err(Error::invalid_argument(
                        "RDM regularizer subsystems must be contiguous in snake order",
                    ));
                }
            }
            if *sites.last().expect("non-empty") >= n {
                return Err(Error::invalid_argument("subsystem site out of range"));
            }
            let dim = 1 << sites.len();
            if rdm.dim() != (dim, dim) {
                return Err(Error::invalid_argument(
                    "shadow RDM dimension does not match subsystem",
                ));
            }
        }
        Ok(PreparedRdms {
            subsystems: subsystems.to_vec(),
        })
    }

    pub fn evaluate_state(&self, mps: &MpsState) -> (f64, Vec<Array3<C64>>) {
        self.evaluate(mps.tensors())
    }

    pub fn evaluate(&self, tensors: &[Array3<C64>]) -> (f64, Vec<Array3<C64>>) {
        let n = tensors.len();
        let state = MpsState::from_tensors_unchecked(tensors.to_vec(), None);
        let mut value = 0.0;
        let mut grad = zeros_like(tensors);
        for (sites, shadow) in &self.subsystems {
            let k = sites.len();
            let rho = state
                .reduced_density_matrix(sites)
                .expect("validated subsystem");
            let rho_vis = dense::project_visible(&rho, k).expect("k <= 8");
            let diff = shadow - &rho_vis;
            let dist_sqr: f64 = diff.iter().map(|z| z.norm_sqr()).sum();
            let dist = dist_sqr.sqrt();
            value += dist;
            if dist < 1e-14 {
                continue;
            }
            // d‖D‖/dĀ = −(1/‖D‖) · d tr(D ρ̃_vis)/dĀ with D frozen, and
            // tr(D ρ̃_vis) = tr(P_vis(D) ρ̃) is an ordinary expectation.
            let op = dense::project_visible(&diff, k).expect("k <= 8");
            let window = mpo_from_dense_window(&op, n, sites[0], k);
            let (_, dv) = normalized_expectation_gradient(tensors, &window);
            for (g, d) in grad.iter_mut().zip(dv) {
                g.zip_mut_with(&d, |gz, dz| *gz -= dz / dist);
            }
        }
        (value, grad)
    }
}

/// Exact MPO representation of a dense operator acting on the contiguous
/// window `[start, start + k)`, identity elsewhere.
pub(crate) fn mpo_from_dense_window(op: &DenseOperator, n: usize, start: usize, k: usize) -> Mpo {
    let dim = 1usize << k;
    debug_assert_eq!(op.dim(), (dim, dim));
    // Reindex O[row, col] by grouped per-site indices q_j = s'_j · 2 + s_j.
    let mut grouped = vec![C64::new(0.0, 0.0); 4usize.pow(k as u32)];
    for row in 0..dim {
        for col in 0..dim {
            let mut q = 0usize;
            for j in 0..k {
                let sp = (row >> (k - 1 - j)) & 1;
                let s = (col >> (k - 1 - j)) & 1;
                q = q * 4 + (sp * 2 + s);
            }
            grouped[q] = op[[row, col]];
        }
    }
    // Split into window tensors by successive SVDs.
    let mut window: Vec<Array4<C64>> = Vec::with_capacity(k);
    let mut rest = Array2::from_shape_vec((1, grouped.len()), grouped).expect("shape");
    let mut bond = 1usize;
    for _ in 0..k - 1 {
        let cols = rest.len() / (bond * 4);
        let m = rest.into_shape_with_order((bond * 4, cols)).expect("reshape");
        let (u, s, vt) = linalg::svd(&m);
        let keep = s.iter().filter(|&&x| x > s[0].max(1e-300) * 1e-13).count().max(1);
        let mut w = Array4::zeros((bond, 2, 2, keep));
        for b in 0..bond {
            for q in 0..4 {
                for r in 0..keep {
                    w[[b, q / 2, q % 2, r]] = u[[b * 4 + q, r]];
                }
            }
        }
        window.push(w);
        let mut sv = Array2::zeros((keep, cols));
        for r in 0..keep {
            for c in 0..cols {
                sv[[r, c]] = vt[[r, c]] * s[r];
            }
        }
        rest = sv;
        bond = keep;
    }
    let mut w = Array4::zeros((bond, 2, 2, 1));
    for b in 0..bond {
        for q in 0..4 {
            w[[b, q / 2, q % 2, 0]] = rest[[b, q]];
        }
    }
    window.push(w);

    let mut tensors = Vec::with_capacity(n);
    for site in 0..n {
        if site < start || site >= start + k {
            let mut ident = Array4::zeros((1, 2, 2, 1));
            ident[[0, 0, 0, 0]] = C64::new(1.0, 0.0);
            ident[[0, 1, 1, 0]] = C64::new(1.0, 0.0);
            tensors.push(ident);
        } else {
            tensors.push(window[site - start].clone());
        }
    }
    Mpo::from_tensors(tensors).expect("window MPO is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{ghz_state, surface_code_stabilizers};
    use crate::pauli::PauliOp;
    use approx::assert_abs_diff_eq;

    #[test]
    fn window_mpo_matches_dense_operator() {
        // X⊗Z on window sites {0, 1} placed at chain sites {1, 2}.
        let sub = dense::pauli_matrix(
            &PauliString::new([(0, PauliOp::X), (1, PauliOp::Z)]).unwrap(),
            4,
        )
        .unwrap();
        let mpo = mpo_from_dense_window(&sub, 6, 1, 4);
        let psi = MpsState::new_random(6, 3, 1).unwrap();
        let expect = psi
            .pauli_expectation(&PauliString::new([(1, PauliOp::X), (2, PauliOp::Z)]).unwrap())
            .unwrap();
        assert_abs_diff_eq!(mpo.expectation(&psi).unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn stabilizer_value_on_exact_state() {
        // GHZ stabilizers: Z0Z1, Z1Z2, X0X1X2 all have expectation +1.
        let ghz = ghz_state(3).unwrap();
        let pairs = vec![
            (PauliString::new([(0, PauliOp::Z), (1, PauliOp::Z)]).unwrap(), 1.0),
            (PauliString::new([(1, PauliOp::Z), (2, PauliOp::Z)]).unwrap(), 1.0),
            (PauliString::uniform(PauliOp::X, 3), 1.0),
        ];
        let (value, grad) = stabilizer_regularizer(&ghz, &pairs).unwrap();
        assert_abs_diff_eq!(value, 0.0, epsilon = 1e-12);
        // Gradient in the normalized tangent space should vanish at an exact
        // joint eigenstate; the raw conjugate gradient is already tiny here.
        let gnorm: f64 = grad
            .iter()
            .map(|g| g.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        assert!(gnorm < 1e-10, "gradient norm {gnorm}");
    }

    #[test]
    fn single_qubit_unit_penalty() {
        let zero = MpsState::product_state(&[0]).unwrap();
        let pairs = vec![(PauliString::single(0, PauliOp::Z), 0.0)];
        let (value, _) = stabilizer_regularizer(&zero, &pairs).unwrap();
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn surface_code_ground_state_scores_zero() {
        let mpo = crate::hamiltonians::surface_code_mpo(2, 2, 0.0).unwrap();
        let outcome = crate::dmrg::dmrg_solve(
            &mpo,
            &crate::dmrg::DmrgConfig {
                chi_max: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let pairs: Vec<(PauliString, f64)> = surface_code_stabilizers(2, 2)
            .unwrap()
            .into_iter()
            .map(|s| (s, 1.0))
            .collect();
        let (value, _) = stabilizer_regularizer(&outcome.state, &pairs).unwrap();
        assert!(value < 1e-10, "regularizer value {value}");
    }

    #[test]
    fn rdm_regularizer_vanishes_on_exact_projection() {
        let psi = MpsState::new_random(5, 3, 4).unwrap();
        let rho = psi.reduced_density_matrix(&[1, 2]).unwrap();
        let rho_vis = dense::project_visible(&rho, 2).unwrap();
        let (value, grad) = rdm_regularizer(&psi, &[(vec![1, 2], rho_vis)]).unwrap();
        assert!(value < 1e-10);
        for g in grad {
            assert!(g.iter().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn rdm_regularizer_ignores_invisible_components() {
        // |00⟩ + e^{±iφ}|11⟩ differ only in the Y-containing (invisible)
        // sector of the 2-site cell, so the regularizer cannot tell them
        // apart.
        let bell_phase = |phi: f64| {
            let amp = std::f64::consts::FRAC_1_SQRT_2;
            let v = vec![
                C64::new(amp, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::from_polar(amp, phi),
            ];
            MpsState::from_statevector(&v, 0).unwrap()
        };
        let a = bell_phase(std::f64::consts::FRAC_PI_3);
        let b = bell_phase(-std::f64::consts::FRAC_PI_3);
        let xy = PauliString::new([(0, PauliOp::X), (1, PauliOp::Y)]).unwrap();
        assert!(
            (a.pauli_expectation(&xy).unwrap() - b.pauli_expectation(&xy).unwrap()).abs() > 1.0,
            "states should differ in the invisible sector"
        );
        let target = Array2::eye(4).mapv(|x: f64| C64::new(x * 0.25, 0.0));
        let (v1, _) = rdm_regularizer(&a, &[(vec![0, 1], target.clone())]).unwrap();
        let (v2, _) = rdm_regularizer(&b, &[(vec![0, 1], target)]).unwrap();
        assert_abs_diff_eq!(v1, v2, epsilon = 1e-12);
    }

    #[test]
    fn rdm_regularizer_matches_dense_frobenius() {
        let model = MpsState::new_random(6, 3, 8).unwrap();
        let target = MpsState::new_random_real(6, 3, 9).unwrap();
        let sites = vec![2usize, 3, 4];
        let exact = target.reduced_density_matrix(&sites).unwrap();
        let exact_vis = dense::project_visible(&exact, 3).unwrap();
        let (value, _) = rdm_regularizer(&model, &[(sites.clone(), exact_vis.clone())]).unwrap();

        let model_rho = model.reduced_density_matrix(&sites).unwrap();
        let model_vis = dense::project_visible(&model_rho, 3).unwrap();
        let brute: f64 = (&exact_vis - &model_vis)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert_abs_diff_eq!(value, brute, epsilon = 1e-10);
    }

    #[test]
    fn rejects_non_contiguous_subsystem() {
        let psi = MpsState::new_random(5, 2, 0).unwrap();
        let rdm = Array2::eye(4).mapv(|x: f64| C64::new(x * 0.25, 0.0));
        assert!(rdm_regularizer(&psi, &[(vec![0, 2], rdm)]).is_err());
    }
}
