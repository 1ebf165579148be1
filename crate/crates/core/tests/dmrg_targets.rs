//! Ground-state generation checks against exact diagonalization.

mod common;

use common::*;
use qst_core::dense;
use qst_core::dmrg::{dmrg_solve, DmrgConfig};
use qst_core::hamiltonians;

#[test]
fn surface_code_3x3_unperturbed() {
    let mpo = hamiltonians::surface_code_mpo(3, 3, 0.0).unwrap();
    let outcome = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 10,
            n_sweeps: 30,
            energy_tol: 1e-11,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        (outcome.energy() + 8.0).abs() < 1e-8,
        "energy {}",
        outcome.energy()
    );
    for stab in hamiltonians::surface_code_stabilizers(3, 3).unwrap() {
        let value = outcome.state.pauli_expectation(&stab).unwrap();
        assert!((value - 1.0).abs() < 1e-6, "<{}> = {value}", stab.label());
    }
}

#[test]
fn surface_code_3x3_perturbed_matches_dense() {
    let h_z = 0.1;
    let mpo = hamiltonians::surface_code_mpo(3, 3, h_z).unwrap();
    let outcome = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 12,
            n_sweeps: 40,
            energy_tol: 1e-11,
            ..Default::default()
        },
    )
    .unwrap();
    let terms = hamiltonians::surface_code_terms(3, 3, h_z).unwrap();
    let h = dense::hamiltonian_from_terms(9, &terms).unwrap();
    let exact = dense::spectrum(&h)[0];
    assert!(exact < -8.0, "perturbed energy should drop below -8, got {exact}");
    assert!(
        (outcome.energy() - exact).abs() < 1e-7,
        "dmrg {} vs exact {exact}",
        outcome.energy()
    );
}

#[test]
fn sweep_energies_respect_variational_bound() {
    let mpo = hamiltonians::surface_code_mpo(2, 3, 0.07).unwrap();
    let terms = hamiltonians::surface_code_terms(2, 3, 0.07).unwrap();
    let exact = dense::spectrum(&dense::hamiltonian_from_terms(6, &terms).unwrap())[0];
    let outcome = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 6,
            n_sweeps: 10,
            ..Default::default()
        },
    )
    .unwrap();
    for (sweep, &energy) in outcome.energy_trace.iter().enumerate() {
        assert!(
            energy >= exact - 1e-9,
            "sweep {sweep} energy {energy} beats exact {exact}"
        );
    }
    assert!((outcome.energy() - exact).abs() < 1e-8);
}

#[test]
fn ruby_small_cylinder_ground_state() {
    // n = 12 disordered-phase ground state against exact diagonalization.
    let mpo = hamiltonians::ruby_rydberg_mpo(1, 2, 0.5, -0.6).unwrap();
    let outcome = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 16,
            n_sweeps: 25,
            energy_tol: 1e-10,
            ..Default::default()
        },
    )
    .unwrap();
    let spec = qst_core::lattice::LatticeSpec::ruby_cylinder(1, 2).unwrap();
    let terms = hamiltonians::ruby_rydberg_terms(&spec, 0.5, -0.6).unwrap();
    let exact = dense::ground_energy_from_terms(12, &terms, 200).unwrap();
    assert!(
        (outcome.energy() - exact).abs() < 1e-6,
        "dmrg {} vs exact {exact}",
        outcome.energy()
    );
}

#[test]
fn dmrg_state_is_real_up_to_phase() {
    // Real targets are what the XZ ensemble can characterize; the solver
    // keeps real initial tensors real.
    let mpo = hamiltonians::surface_code_mpo(2, 2, 0.05).unwrap();
    let outcome = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let dense_state = dense::statevector(&outcome.state).unwrap();
    let imag_weight: f64 = dense_state.iter().map(|z| z.im * z.im).sum();
    assert!(imag_weight < 1e-20, "imaginary weight {imag_weight}");
    let _ = rng(0);
}
