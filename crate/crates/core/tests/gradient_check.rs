//! Finite-difference validation of the analytic conjugate gradients.

mod common;

use common::*;
use ndarray::Array3;
use qst_core::measurement::{generate_dataset, EnsembleSpec};
use qst_core::mps::MpsState;
use qst_core::training::{nll_gradient, nll_loss, rdm_regularizer, stabilizer_regularizer};
use qst_core::C64;

/// Central finite differences of a scalar function of the tensors, taken
/// separately along the real and imaginary axes of every component, checked
/// against `2·Re(g)` / `2·Im(g)` where `g = ∂f/∂Ā`.
fn check_gradient<F>(
    tensors: &[Array3<C64>],
    analytic: &[Array3<C64>],
    mut f: F,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> (f64, f64)
where
    F: FnMut(&[Array3<C64>]) -> f64,
{
    let mut worst_rel = 0.0f64;
    let mut worst_abs = 0.0f64;
    for site in 0..tensors.len() {
        let len = tensors[site].len();
        for flat in 0..len {
            for axis in 0..2 {
                let mut plus = tensors.to_vec();
                let mut minus = tensors.to_vec();
                {
                    let p = plus[site].as_slice_mut().unwrap();
                    let m = minus[site].as_slice_mut().unwrap();
                    if axis == 0 {
                        p[flat].re += step;
                        m[flat].re -= step;
                    } else {
                        p[flat].im += step;
                        m[flat].im -= step;
                    }
                }
                let fd = (f(&plus) - f(&minus)) / (2.0 * step);
                let g = analytic[site].as_slice().unwrap()[flat];
                let expect = if axis == 0 { 2.0 * g.re } else { 2.0 * g.im };
                let scale = fd.abs().max(expect.abs());
                if scale < abs_floor {
                    worst_abs = worst_abs.max((fd - expect).abs());
                } else {
                    let rel = (fd - expect).abs() / scale;
                    worst_rel = worst_rel.max(rel);
                    assert!(
                        rel < rel_tol,
                        "site {site} flat {flat} axis {axis}: fd {fd} vs analytic {expect} (rel {rel})"
                    );
                }
            }
        }
    }
    (worst_rel, worst_abs)
}

#[test]
fn nll_gradient_matches_finite_differences() {
    for instance in 0..4 {
        let target = random_real_target(5, 3, 900 + instance);
        let ds = generate_dataset(&target, &EnsembleSpec::random_xz(5), 200, 70 + instance).unwrap();
        let model = MpsState::new_random(5, 3, 300 + instance).unwrap();
        let analytic = nll_gradient(&model, &ds).unwrap();
        let tensors = model.tensors().to_vec();
        let (worst_rel, worst_abs) = check_gradient(
            &tensors,
            &analytic,
            |ts| {
                let state = MpsState::from_tensors(ts.to_vec()).unwrap();
                nll_loss(&state, &ds).unwrap()
            },
            1e-5,
            1e-5,
            1e-8,
        );
        assert!(worst_abs < 1e-8, "absolute disagreement {worst_abs}");
        // Track the numbers to make regressions visible in test output.
        eprintln!("instance {instance}: worst relative error {worst_rel:.3e}");
    }
}

#[test]
fn nll_gradient_scale_covariance() {
    // The normalized loss is invariant under A → cA; the conjugate gradient
    // picks up a 1/c factor.
    let target = random_real_target(4, 2, 42);
    let ds = generate_dataset(&target, &EnsembleSpec::random_xz(4), 150, 9).unwrap();
    let model = MpsState::new_random(4, 3, 5).unwrap();
    let loss = nll_loss(&model, &ds).unwrap();
    let grad = nll_gradient(&model, &ds).unwrap();

    let c = 1.35f64;
    let scaled =
        MpsState::from_tensors(model.tensors().iter().map(|t| t.mapv(|z| z * c)).collect())
            .unwrap();
    let loss_scaled = nll_loss(&scaled, &ds).unwrap();
    assert!((loss - loss_scaled).abs() < 1e-10);
    let grad_scaled = nll_gradient(&scaled, &ds).unwrap();
    for (g, gs) in grad.iter().zip(&grad_scaled) {
        for (a, b) in g.iter().zip(gs.iter()) {
            assert!((*a / c - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn stabilizer_regularizer_gradient_matches_finite_differences() {
    let model = MpsState::new_random(4, 3, 77).unwrap();
    let pairs = vec![
        (
            qst_core::pauli::PauliString::new([
                (0, qst_core::pauli::PauliOp::Z),
                (1, qst_core::pauli::PauliOp::Z),
            ])
            .unwrap(),
            0.8,
        ),
        (
            qst_core::pauli::PauliString::new([
                (1, qst_core::pauli::PauliOp::X),
                (2, qst_core::pauli::PauliOp::X),
                (3, qst_core::pauli::PauliOp::X),
            ])
            .unwrap(),
            -0.3,
        ),
    ];
    let (_, analytic) = stabilizer_regularizer(&model, &pairs).unwrap();
    let tensors = model.tensors().to_vec();
    check_gradient(
        &tensors,
        &analytic,
        |ts| {
            let state = MpsState::from_tensors(ts.to_vec()).unwrap();
            stabilizer_regularizer(&state, &pairs).unwrap().0
        },
        1e-5,
        1e-4,
        1e-8,
    );
}

#[test]
fn rdm_regularizer_gradient_matches_finite_differences() {
    let model = MpsState::new_random(5, 3, 88).unwrap();
    let target = random_real_target(5, 3, 89);
    let sites = vec![1usize, 2, 3];
    let exact = target.reduced_density_matrix(&sites).unwrap();
    let exact_vis = qst_core::dense::project_visible(&exact, 3).unwrap();
    let subsystems = vec![(sites, exact_vis)];
    let (_, analytic) = rdm_regularizer(&model, &subsystems).unwrap();
    let tensors = model.tensors().to_vec();
    check_gradient(
        &tensors,
        &analytic,
        |ts| {
            let state = MpsState::from_tensors(ts.to_vec()).unwrap();
            rdm_regularizer(&state, &subsystems).unwrap().0
        },
        1e-5,
        1e-4,
        1e-8,
    );
}
