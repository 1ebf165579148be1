//! Two-site DMRG ground-state search.
//!
//! The solver sweeps a two-site window across the chain, minimizing the
//! energy of the local tensor with a Lanczos eigensolver and truncating the
//! split back to the configured bond dimension. Targets produced here feed
//! the measurement and training pipeline.

use ndarray::{Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mpo::Mpo;
use crate::mps::MpsState;
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmrgConfig {
    pub chi_max: usize,
    pub n_sweeps: usize,
    /// Stop when the energy change between sweeps drops below this.
    pub energy_tol: f64,
    /// Iteration cap for each local Lanczos solve.
    pub lanczos_iters: usize,
    /// Seed for the random initial state. The initial tensors are drawn
    /// real so that a real Hamiltonian converges to a real ground state.
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        DmrgConfig {
            chi_max: 10,
            n_sweeps: 30,
            energy_tol: 1e-10,
            lanczos_iters: 60,
            seed: 1,
        }
    }
}

impl DmrgConfig {
    fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(Error::invalid_argument("chi_max must be at least 1"));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::invalid_argument("energy tolerance must be positive"));
        }
        if self.n_sweeps == 0 || self.lanczos_iters == 0 {
            return Err(Error::invalid_argument("sweep and Lanczos caps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DmrgOutcome {
    pub state: MpsState,
    /// Energy after each sweep.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    /// Largest truncated weight seen across all splits.
    pub discarded_weight: f64,
    pub sweeps_run: usize,
}

impl DmrgOutcome {
    pub fn energy(&self) -> f64 {
        *self.energy_trace.last().expect("at least one sweep")
    }
}

/// Ground-state search. Non-convergence within the sweep cap is not an
/// error: the best state found is returned with `converged = false`.
pub fn dmrg_solve(mpo: &Mpo, config: &DmrgConfig) -> Result<DmrgOutcome> {
    config.validate()?;
    let n = mpo.n();
    if n < 2 {
        return Err(Error::invalid_argument("DMRG needs at least two sites"));
    }
    let init = MpsState::new_random_real(n, config.chi_max, config.seed)?;
    let mut state = init.canonicalize(0)?.normalized()?;
    let mut tensors: Vec<Array3<C64>> = state.tensors().to_vec();

    // Environments: left[i] covers sites < i, right[i] covers sites > i.
    let mut left: Vec<Array3<C64>> = vec![boundary_env(); n];
    let mut right: Vec<Array3<C64>> = vec![boundary_env(); n];
    for i in (1..n).rev() {
        right[i - 1] = extend_right(&right[i], mpo.tensor(i), &tensors[i]);
    }

    let mut energy_trace: Vec<f64> = Vec::new();
    let mut discarded_weight = 0.0f64;
    let mut converged = false;
    let mut sweeps_run = 0usize;

    for sweep in 0..config.n_sweeps {
        let mut last_energy = f64::INFINITY;
        // Left-to-right half sweep, then right-to-left.
        for bond in 0..n - 1 {
            let (energy, weight) = optimize_bond(
                mpo,
                &mut tensors,
                &mut left,
                &mut right,
                bond,
                true,
                config,
            );
            last_energy = energy;
            discarded_weight = discarded_weight.max(weight);
        }
        for bond in (0..n - 1).rev() {
            let (energy, weight) = optimize_bond(
                mpo,
                &mut tensors,
                &mut left,
                &mut right,
                bond,
                false,
                config,
            );
            last_energy = energy;
            discarded_weight = discarded_weight.max(weight);
        }
        sweeps_run = sweep + 1;
        let previous = energy_trace.last().copied();
        energy_trace.push(last_energy);
        if let Some(prev) = previous {
            if (prev - last_energy).abs() < config.energy_tol {
                converged = true;
                break;
            }
        }
    }

    state = MpsState::from_tensors(tensors)?.canonicalize(0)?.normalized()?;
    Ok(DmrgOutcome {
        state,
        energy_trace,
        converged,
        discarded_weight,
        sweeps_run,
    })
}

fn boundary_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0))
}

/// Extend a left environment over one site:
/// `L'[a', w', b'] = Σ conj(A[a,s',a']) W[w,s',s,w'] L[a,w,b] A[b,s,b']`.
fn extend_left(env: &Array3<C64>, w: &Array4<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::zeros((ar, wr, ar));
    // tmp[a, w, s, b'] = Σ_b L[a, w, b] A[b, s, b']
    let mut tmp = ndarray::Array4::<C64>::zeros((al, wl, 2, ar));
    for s in 0..2 {
        let ket = a.index_axis(Axis(1), s);
        for x in 0..al {
            for ww in 0..wl {
                for bp in 0..ar {
                    let mut z = C64::new(0.0, 0.0);
                    for b in 0..al {
                        z += env[[x, ww, b]] * ket[[b, bp]];
                    }
                    tmp[[x, ww, s, bp]] = z;
                }
            }
        }
    }
    // mid[a, w', s', b'] = Σ_{w, s} W[w, s', s, w'] tmp[a, w, s, b']
    let mut mid = ndarray::Array4::<C64>::zeros((al, wr, 2, ar));
    for x in 0..al {
        for wp in 0..wr {
            for sp in 0..2 {
                for bp in 0..ar {
                    let mut z = C64::new(0.0, 0.0);
                    for ww in 0..wl {
                        for s in 0..2 {
                            let coeff = w[[ww, sp, s, wp]];
                            if coeff != C64::new(0.0, 0.0) {
                                z += coeff * tmp[[x, ww, s, bp]];
                            }
                        }
                    }
                    mid[[x, wp, sp, bp]] = z;
                }
            }
        }
    }
    // out[a', w', b'] = Σ_{a, s'} conj(A[a, s', a']) mid[a, w', s', b']
    for ap in 0..ar {
        for wp in 0..wr {
            for bp in 0..ar {
                let mut z = C64::new(0.0, 0.0);
                for x in 0..al {
                    for sp in 0..2 {
                        z += a[[x, sp, ap]].conj() * mid[[x, wp, sp, bp]];
                    }
                }
                out[[ap, wp, bp]] = z;
            }
        }
    }
    out
}

/// Mirror image of [`extend_left`] for right environments.
fn extend_right(env: &Array3<C64>, w: &Array4<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (al, _, ar) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::zeros((al, wl, al));
    // tmp[a, w', s, b] = Σ_{b'} A[b, s, b'] R[a, w', b']
    let mut tmp = ndarray::Array4::<C64>::zeros((ar, wr, 2, al));
    for s in 0..2 {
        let ket = a.index_axis(Axis(1), s);
        for x in 0..ar {
            for ww in 0..wr {
                for b in 0..al {
                    let mut z = C64::new(0.0, 0.0);
                    for bp in 0..ar {
                        z += ket[[b, bp]] * env[[x, ww, bp]];
                    }
                    tmp[[x, ww, s, b]] = z;
                }
            }
        }
    }
    let mut mid = ndarray::Array4::<C64>::zeros((ar, wl, 2, al));
    for x in 0..ar {
        for ww in 0..wl {
            for sp in 0..2 {
                for b in 0..al {
                    let mut z = C64::new(0.0, 0.0);
                    for wp in 0..wr {
                        for s in 0..2 {
                            let coeff = w[[ww, sp, s, wp]];
                            if coeff != C64::new(0.0, 0.0) {
                                z += coeff * tmp[[x, wp, s, b]];
                            }
                        }
                    }
                    mid[[x, ww, sp, b]] = z;
                }
            }
        }
    }
    for ap in 0..al {
        for ww in 0..wl {
            for b in 0..al {
                let mut z = C64::new(0.0, 0.0);
                for x in 0..ar {
                    for sp in 0..2 {
                        z += a[[ap, sp, x]].conj() * mid[[x, ww, sp, b]];
                    }
                }
                out[[ap, ww, b]] = z;
            }
        }
    }
    out
}

/// Apply the effective two-site Hamiltonian to `theta` (shape
/// `(χl, 2, 2, χr)` flattened).
struct EffectiveHam<'a> {
    left: &'a Array3<C64>,
    right: &'a Array3<C64>,
    w1: &'a Array4<C64>,
    w2: &'a Array4<C64>,
    chi_l: usize,
    chi_r: usize,
}

impl EffectiveHam<'_> {
    fn dim(&self) -> usize {
        self.chi_l * 4 * self.chi_r
    }

    fn apply(&self, theta: &[C64]) -> Vec<C64> {
        let (cl, cr) = (self.chi_l, self.chi_r);
        let wl = self.w1.dim().0;
        let wm = self.w1.dim().3;
        let wr = self.w2.dim().3;
        let idx = |a: usize, s1: usize, s2: usize, b: usize| ((a * 2 + s1) * 2 + s2) * cr + b;

        // t1[a, w, s1, s2, b] = Σ_{a0} L[a, w, a0] θ[a0, s1, s2, b]
        let mut t1 = vec![C64::new(0.0, 0.0); cl * wl * 4 * cr];
        for a in 0..cl {
            for w in 0..wl {
                for a0 in 0..cl {
                    let l = self.left[[a, w, a0]];
                    if l == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for s1 in 0..2 {
                        for s2 in 0..2 {
                            for b in 0..cr {
                                t1[(((a * wl + w) * 2 + s1) * 2 + s2) * cr + b] +=
                                    l * theta[idx(a0, s1, s2, b)];
                            }
                        }
                    }
                }
            }
        }
        // t2[a, wm, s1', s2, b] = Σ_{w, s1} W1[w, s1', s1, wm] t1[a, w, s1, s2, b]
        let mut t2 = vec![C64::new(0.0, 0.0); cl * wm * 4 * cr];
        for w in 0..wl {
            for s1p in 0..2 {
                for s1 in 0..2 {
                    for m in 0..wm {
                        let coeff = self.w1[[w, s1p, s1, m]];
                        if coeff == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..cl {
                            for s2 in 0..2 {
                                for b in 0..cr {
                                    t2[(((a * wm + m) * 2 + s1p) * 2 + s2) * cr + b] += coeff
                                        * t1[(((a * wl + w) * 2 + s1) * 2 + s2) * cr + b];
                                }
                            }
                        }
                    }
                }
            }
        }
        // t3[a, wr, s1', s2', b] = Σ_{m, s2} W2[m, s2', s2, wr] t2[a, m, s1', s2, b]
        let mut t3 = vec![C64::new(0.0, 0.0); cl * wr * 4 * cr];
        for m in 0..wm {
            for s2p in 0..2 {
                for s2 in 0..2 {
                    for r in 0..wr {
                        let coeff = self.w2[[m, s2p, s2, r]];
                        if coeff == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..cl {
                            for s1p in 0..2 {
                                for b in 0..cr {
                                    t3[(((a * wr + r) * 2 + s1p) * 2 + s2p) * cr + b] +=
                                        coeff * t2[(((a * wm + m) * 2 + s1p) * 2 + s2) * cr + b];
                                }
                            }
                        }
                    }
                }
            }
        }
        // out[a, s1', s2', b'] = Σ_{r, b} R[b', r, b] t3[a, r, s1', s2', b]
        let mut out = vec![C64::new(0.0, 0.0); cl * 4 * cr];
        for bp in 0..cr {
            for r in 0..wr {
                for b in 0..cr {
                    let rv = self.right[[bp, r, b]];
                    if rv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for a in 0..cl {
                        for s1 in 0..2 {
                            for s2 in 0..2 {
                                out[idx(a, s1, s2, bp)] +=
                                    rv * t3[(((a * wr + r) * 2 + s1) * 2 + s2) * cr + b];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Lanczos iteration for the smallest eigenpair of a Hermitian operator,
/// with full reorthogonalization (the local spaces are small).
fn lanczos_ground(
    op: &EffectiveHam<'_>,
    initial: &[C64],
    max_iters: usize,
    tol: f64,
) -> (f64, Vec<C64>) {
    let dim = op.dim();
    let max_iters = max_iters.min(dim);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_iters);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut v = initial.to_vec();
    let norm = vec_norm(&v);
    if norm < 1e-300 {
        v = vec![C64::new(0.0, 0.0); dim];
        v[0] = C64::new(1.0, 0.0);
    } else {
        for z in &mut v {
            *z /= norm;
        }
    }
    basis.push(v);
    let mut last_value = f64::INFINITY;

    for it in 0..max_iters {
        let mut w = op.apply(&basis[it]);
        let alpha = basis[it]
            .iter()
            .zip(&w)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        alphas.push(alpha);
        // Orthogonalize against all previous vectors (twice for stability).
        for _ in 0..2 {
            for prev in &basis {
                let overlap: C64 = prev.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wz, pz) in w.iter_mut().zip(prev) {
                    *wz -= overlap * pz;
                }
            }
        }
        let beta = vec_norm(&w);

        // Convergence of the smallest Ritz value.
        let (vals, vecs) = linalg::eigh_tridiagonal(&alphas, &betas);
        let value = vals[0];
        if (last_value - value).abs() < tol || beta < 1e-13 || it == max_iters - 1 {
            let mut ground = vec![C64::new(0.0, 0.0); dim];
            for (k, b) in basis.iter().enumerate() {
                let coeff = vecs[[k, 0]];
                for (g, z) in ground.iter_mut().zip(b) {
                    *g += z * coeff;
                }
            }
            let norm = vec_norm(&ground);
            for z in &mut ground {
                *z /= norm;
            }
            return (value, ground);
        }
        last_value = value;
        betas.push(beta);
        for z in &mut w {
            *z /= beta;
        }
        basis.push(w);
    }
    unreachable!("loop returns on final iteration");
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Optimize the two-site tensor on `bond`, split it, and refresh the
/// environments. Returns the local energy and the truncated weight.
fn optimize_bond(
    mpo: &Mpo,
    tensors: &mut [Array3<C64>],
    left: &mut [Array3<C64>],
    right: &mut [Array3<C64>],
    bond: usize,
    moving_right: bool,
    config: &DmrgConfig,
) -> (f64, f64) {
    let (i, j) = (bond, bond + 1);
    let (cl, _, _) = tensors[i].dim();
    let (_, _, cr) = tensors[j].dim();

    // Current two-site tensor as the Lanczos starting vector.
    let mut theta = vec![C64::new(0.0, 0.0); cl * 4 * cr];
    {
        let a = &tensors[i];
        let b = &tensors[j];
        let mid = a.dim().2;
        for x in 0..cl {
            for s1 in 0..2 {
                for s2 in 0..2 {
                    for y in 0..cr {
                        let mut z = C64::new(0.0, 0.0);
                        for m in 0..mid {
                            z += a[[x, s1, m]] * b[[m, s2, y]];
                        }
                        theta[((x * 2 + s1) * 2 + s2) * cr + y] = z;
                    }
                }
            }
        }
    }

    let ham = EffectiveHam {
        left: &left[i],
        right: &right[j],
        w1: mpo.tensor(i),
        w2: mpo.tensor(j),
        chi_l: cl,
        chi_r: cr,
    };
    let (energy, ground) = lanczos_ground(&ham, &theta, config.lanczos_iters, 1e-12);

    // Split with SVD truncation.
    let m = Array2::from_shape_fn((cl * 2, 2 * cr), |(r, c)| ground[r * 2 * cr + c]);
    let (u, s, vt) = linalg::svd(&m);
    let total: f64 = s.iter().map(|x| x * x).sum();
    let keep = s
        .iter()
        .filter(|&&x| x > s[0] * 1e-14)
        .count()
        .max(1)
        .min(config.chi_max);
    let weight = s[keep..].iter().map(|x| x * x).sum::<f64>() / total.max(f64::MIN_POSITIVE);
    let snorm: f64 = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut a = Array3::zeros((cl, 2, keep));
    let mut b = Array3::zeros((keep, 2, cr));
    for x in 0..cl {
        for s1 in 0..2 {
            for k in 0..keep {
                a[[x, s1, k]] = u[[x * 2 + s1, k]];
            }
        }
    }
    for k in 0..keep {
        for s2 in 0..2 {
            for y in 0..cr {
                b[[k, s2, y]] = vt[[k, s2 * cr + y]];
            }
        }
    }
    // Absorb the (normalized) singular values into the tensor we move onto.
    if moving_right {
        for k in 0..keep {
            let scale = s[k] / snorm;
            for s2 in 0..2 {
                for y in 0..cr {
                    b[[k, s2, y]] *= scale;
                }
            }
        }
    } else {
        for x in 0..cl {
            for s1 in 0..2 {
                for k in 0..keep {
                    a[[x, s1, k]] *= s[k] / snorm;
                }
            }
        }
    }
    tensors[i] = a;
    tensors[j] = b;

    // Refresh the environment on the side the sweep is moving toward; the
    // trailing one is rebuilt when the sweep passes back over it.
    if moving_right {
        left[j] = extend_left(&left[i], mpo.tensor(i), &tensors[i]);
    } else {
        right[i] = extend_right(&right[j], mpo.tensor(j), &tensors[j]);
    }
    (energy, weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians;
    use crate::pauli::{PauliOp, PauliString};
    use approx::assert_abs_diff_eq;

    #[test]
    fn field_hamiltonian_ground_state() {
        let terms: Vec<PauliString> = (0..6)
            .map(|i| PauliString::single(i, PauliOp::Z).with_real_coefficient(-1.0).unwrap())
            .collect();
        let mpo = Mpo::from_pauli_terms(6, &terms).unwrap();
        let outcome = dmrg_solve(
            &mpo,
            &DmrgConfig {
                chi_max: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(outcome.converged);
        assert_abs_diff_eq!(outcome.energy(), -6.0, epsilon = 1e-9);
        let zeros = MpsState::product_state(&[0; 6]).unwrap();
        assert_abs_diff_eq!(outcome.state.fidelity(&zeros).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn energy_trace_is_monotone() {
        let mpo = hamiltonians::surface_code_mpo(2, 3, 0.05).unwrap();
        let outcome = dmrg_solve(
            &mpo,
            &DmrgConfig {
                chi_max: 8,
                n_sweeps: 12,
                ..Default::default()
            },
        )
        .unwrap();
        for pair in outcome.energy_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "energy increased: {pair:?}");
        }
    }

    #[test]
    fn determinism_for_fixed_seed() {
        let mpo = hamiltonians::surface_code_mpo(2, 2, 0.1).unwrap();
        let config = DmrgConfig {
            chi_max: 4,
            n_sweeps: 6,
            ..Default::default()
        };
        let a = dmrg_solve(&mpo, &config).unwrap();
        let b = dmrg_solve(&mpo, &config).unwrap();
        assert_eq!(a.energy_trace.len(), b.energy_trace.len());
        for (x, y) in a.energy_trace.iter().zip(&b.energy_trace) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mpo = Mpo::identity(3);
        let bad = DmrgConfig {
            chi_max: 0,
            ..Default::default()
        };
        assert!(dmrg_solve(&mpo, &bad).is_err());
    }
}
