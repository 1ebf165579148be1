//! Scratch calibration harness for the scaling experiments.
//! cargo run --release -p qst-core --example calibrate -- <n_list> <seeds> <epochs> <lbfgs> <restarts> <chi> <ensemble>

use qst_core::dmrg::{dmrg_solve, DmrgConfig};
use qst_core::hamiltonians;
use qst_core::measurement::{generate_dataset, EnsembleSpec};
use qst_core::training::{train, Regularizer, SgdConfig, TrainConfig};
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_list: Vec<usize> = args[1].split(',').map(|s| s.parse().unwrap()).collect();
    let seeds: u64 = args[2].parse().unwrap();
    let epochs: usize = args[3].parse().unwrap();
    let lbfgs_iters: usize = args[4].parse().unwrap();
    let restarts: usize = args[5].parse().unwrap();
    let chi: usize = args[6].parse().unwrap();
    let ensemble = args.get(7).map(|s| s.as_str()).unwrap_or("random-xz");

    let t0 = Instant::now();
    let mpo = hamiltonians::surface_code_mpo(3, 3, 0.0).unwrap();
    let dmrg = dmrg_solve(
        &mpo,
        &DmrgConfig {
            chi_max: 10,
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    eprintln!(
        "target energy {} in {:?} (converged {})",
        dmrg.energy(),
        t0.elapsed(),
        dmrg.converged
    );
    let target = dmrg.state;

    let mut cells: Vec<(usize, u64)> = Vec::new();
    for &n_samples in &n_list {
        for seed in 0..seeds {
            cells.push((n_samples, seed));
        }
    }
    let results: Vec<(usize, u64, f64, f64)> = cells
        .par_iter()
        .map(|&(n_samples, seed)| {
            let spec = if ensemble == "global-xz" {
                EnsembleSpec::global_xz(9)
            } else {
                EnsembleSpec::random_xz(9)
            };
            let ds = generate_dataset(&target, &spec, n_samples, 1000 + seed).unwrap();
            let config = TrainConfig {
                chi,
                sgd: SgdConfig {
                    epochs,
                    record_every: 50,
                    ..Default::default()
                },
                lbfgs: qst_core::training::LbfgsConfig {
                    max_iters: lbfgs_iters,
                    ..Default::default()
                },
                seed: 5000 + seed,
                n_restarts: restarts,
                ..TrainConfig::new(chi)
            };
            let t = Instant::now();
            let result = train(&config, &Regularizer::None, &ds, None).unwrap();
            let fidelity = result.model.fidelity(&target).unwrap();
            let secs = t.elapsed().as_secs_f64();
            println!(
                "N {n_samples} seed {seed}: infidelity {:.5e} in {:.1}s (converged {})",
                1.0 - fidelity,
                secs,
                result.history.converged
            );
            (n_samples, seed, 1.0 - fidelity, secs)
        })
        .collect();

    for &n_samples in &n_list {
        let mut infs: Vec<f64> = results
            .iter()
            .filter(|r| r.0 == n_samples)
            .map(|r| r.2)
            .collect();
        infs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = infs[infs.len() / 2];
        println!("N {n_samples}: median infidelity {median:.5e}");
    }
    println!("total {:?}", t0.elapsed());
}
