//! Maximum-likelihood training of MPS models.
//!
//! Optimization runs in two stages: minibatch stochastic gradient descent on
//! the total loss `L = NLL + β·R`, followed by full-batch L-BFGS on the
//! flattened real parameter vector (interleaved re/im tensor components).
//! Several random restarts are run and the one with the lowest final
//! training loss is returned; non-converged restarts are reported rather
//! than dropped.

use std::io::Write;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::measurement::Dataset;
use crate::mps::MpsState;
use crate::pauli::PauliString;
use crate::C64;

mod lbfgs;
pub mod loss;
mod regularizers;

pub use loss::{
    nll_gradient, nll_gradient_weighted, nll_loss, nll_loss_weighted, PROBABILITY_FLOOR,
};
pub use regularizers::{rdm_regularizer, stabilizer_regularizer};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Multiplicative learning-rate decay applied per epoch (1 = constant).
    pub lr_decay: f64,
    /// Record a history entry every this many epochs.
    pub record_every: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 200,
            lr_decay: 1.0,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 200,
            grad_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerKind {
    None,
    Stabilizers,
    ProjectedRdm,
}

/// Regularization data passed alongside the config.
#[derive(Debug, Clone)]
pub enum Regularizer {
    None,
    /// Pauli observables with externally estimated expectation values.
    Stabilizers(Vec<(PauliString, f64)>),
    /// Contiguous subsystems with shadow-estimated projected RDMs.
    ProjectedRdm(Vec<(Vec<usize>, DenseOperator)>),
}

impl Regularizer {
    pub fn kind(&self) -> RegularizerKind {
        match self {
            Regularizer::None => RegularizerKind::None,
            Regularizer::Stabilizers(_) => RegularizerKind::Stabilizers,
            Regularizer::ProjectedRdm(_) => RegularizerKind::ProjectedRdm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub chi: usize,
    pub beta: f64,
    pub regularizer: RegularizerKind,
    pub sgd: SgdConfig,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
    pub n_restarts: usize,
}

impl TrainConfig {
    pub fn new(chi: usize) -> Self {
        TrainConfig {
            chi,
            beta: 0.0,
            regularizer: RegularizerKind::None,
            sgd: SgdConfig::default(),
            lbfgs: LbfgsConfig::default(),
            seed: 0,
            n_restarts: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.chi == 0 {
            return Err(Error::invalid_argument("chi must be at least 1"));
        }
        if self.beta < 0.0 {
            return Err(Error::invalid_argument("beta must be non-negative"));
        }
        if !(self.sgd.learning_rate > 0.0) {
            return Err(Error::invalid_argument("learning rate must be positive"));
        }
        if self.sgd.batch_size == 0 || self.sgd.record_every == 0 {
            return Err(Error::invalid_argument("batch size and record cadence must be positive"));
        }
        if self.n_restarts == 0 {
            return Err(Error::invalid_argument("at least one restart is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// 1 = SGD, 2 = L-BFGS.
    pub stage: u8,
    pub nll: f64,
    pub reg: f64,
    pub total: f64,
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub entries: Vec<HistoryEntry>,
    pub converged: bool,
    pub stage_reached: u8,
    pub diverged: bool,
    pub final_loss: f64,
    pub final_nll: f64,
}

impl TrainHistory {
    /// CSV rows `iteration,stage,nll,reg,total,fidelity` (fidelity blank when
    /// no target was supplied).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,stage,nll,reg,total,fidelity")?;
        for e in &self.entries {
            let fid = e.fidelity.map(|f| format!("{f:.12}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{:.12},{:.12},{:.12},{}",
                e.iteration, e.stage, e.nll, e.reg, e.total, fid
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: MpsState,
    pub history: TrainHistory,
    /// Histories of every restart, index-aligned with the restart seeds.
    pub restarts: Vec<TrainHistory>,
    pub best_restart: usize,
}

enum PreparedReg {
    None,
    Stabilizers(regularizers::PreparedStabilizers),
    Rdm(regularizers::PreparedRdms),
}

impl PreparedReg {
    fn evaluate(&self, tensors: &[Array3<C64>], want_grad: bool) -> (f64, Option<Vec<Array3<C64>>>) {
        match self {
            PreparedReg::None => (0.0, want_grad.then(|| loss::zeros_like(tensors))),
            PreparedReg::Stabilizers(prep) => {
                let (v, g) = prep.evaluate(tensors);
                (v, want_grad.then_some(g))
            }
            PreparedReg::Rdm(prep) => {
                let (v, g) = prep.evaluate(tensors);
                (v, want_grad.then_some(g))
            }
        }
    }
}

/// Two-stage maximum-likelihood training with restarts.
///
/// `target` is optional and only used to record a fidelity trace in the
/// history (the optimizer never sees it).
pub fn train(
    config: &TrainConfig,
    regularizer: &Regularizer,
    train_ds: &Dataset,
    target: Option<&MpsState>,
) -> Result<TrainResult> {
    config.validate()?;
    if train_ds.is_empty() {
        return Err(Error::invalid_argument("training dataset is empty"));
    }
    if regularizer.kind() != config.regularizer {
        return Err(Error::invalid_argument(
            "regularizer data does not match the configured kind",
        ));
    }
    let n = train_ds.n();
    let compiled = loss::CompiledRecords::from_dataset(train_ds);
    let prepared = match regularizer {
        Regularizer::None => PreparedReg::None,
        Regularizer::Stabilizers(pairs) => {
            PreparedReg::Stabilizers(regularizers::PreparedStabilizers::new(n, pairs)?)
        }
        Regularizer::ProjectedRdm(subs) => {
            PreparedReg::Rdm(regularizers::PreparedRdms::new(n, subs)?)
        }
    };

    let mut restarts = Vec::with_capacity(config.n_restarts);
    let mut models: Vec<Option<MpsState>> = Vec::with_capacity(config.n_restarts);
    for restart in 0..config.n_restarts {
        let seed = config
            .seed
            .wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (model, history) = run_single(config, &prepared, &compiled, n, seed, target)?;
        models.push(model);
        restarts.push(history);
    }

    let best = restarts
        .iter()
        .enumerate()
        .filter(|(i, h)| !h.diverged && models[*i].is_some())
        .min_by(|(_, a), (_, b)| a.final_loss.partial_cmp(&b.final_loss).expect("finite losses"))
        .map(|(i, _)| i);
    let Some(best) = best else {
        return Err(Error::TrainingFailed(format!(
            "all {} restarts diverged (final losses: {:?})",
            config.n_restarts,
            restarts.iter().map(|h| h.final_loss).collect::<Vec<_>>()
        )));
    };
    Ok(TrainResult {
        model: models[best].take().expect("non-diverged restart has a model"),
        history: restarts[best].clone(),
        restarts,
        best_restart: best,
    })
}

fn run_single(
    config: &TrainConfig,
    regularizer: &PreparedReg,
    records: &loss::CompiledRecords,
    n: usize,
    seed: u64,
    target: Option<&MpsState>,
) -> Result<(Option<MpsState>, TrainHistory)> {
    let mut history = TrainHistory::default();
    let model = MpsState::new_random(n, config.chi, seed)?;
    let mut tensors: Vec<Array3<C64>> = model.tensors().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1B5_4A32_D192_ED03);
    let total_records = records.len();

    // Stage 1: minibatch SGD on L = NLL + β R.
    history.stage_reached = 1;
    let mut indices: Vec<usize> = (0..total_records).collect();
    let mut rate = config.sgd.learning_rate;
    let mut diverged = false;
    for epoch in 0..config.sgd.epochs {
        for i in (1..indices.len()).rev() {
            indices.swap(i, rng.gen_range(0..=i));
        }
        for batch in indices.chunks(config.sgd.batch_size) {
            let out = loss::batch_loss(&tensors, records, Some(batch), true);
            if !out.loss.is_finite() {
                diverged = true;
                break;
            }
            let grad = out.grad.expect("gradient requested");
            let (_, reg_grad) = if config.beta > 0.0 {
                regularizer.evaluate(&tensors, true)
            } else {
                (0.0, None)
            };
            for (site, t) in tensors.iter_mut().enumerate() {
                t.zip_mut_with(&grad[site], |a, g| *a -= g * rate);
                if let Some(rg) = &reg_grad {
                    t.zip_mut_with(&rg[site], |a, g| *a -= g * (rate * config.beta));
                }
            }
        }
        if diverged {
            break;
        }
        rate *= config.sgd.lr_decay;
        if (epoch + 1) % config.sgd.record_every == 0 || epoch + 1 == config.sgd.epochs {
            let entry = evaluate_entry(&tensors, records, regularizer, config.beta, epoch, 1, target);
            diverged = !entry.total.is_finite();
            history.entries.push(entry);
            if diverged {
                break;
            }
        }
    }

    if diverged {
        history.diverged = true;
        history.final_loss = f64::NAN;
        history.final_nll = f64::NAN;
        return Ok((None, history));
    }

    // Rebalance tensor scales before the second-order stage; the loss is
    // scale invariant so this only improves conditioning.
    if let Ok(normalized) = MpsState::from_tensors_unchecked(tensors.clone(), None).normalized() {
        tensors = normalized.into_tensors();
    }

    // Stage 2: full-batch L-BFGS on the flat real parameter vector. The
    // conjugate gradient maps to the real gradient with a factor of two
    // absorbed into the step (the line search makes the scale irrelevant).
    history.stage_reached = 2;
    let shapes: Vec<(usize, usize, usize)> = tensors.iter().map(|t| t.dim()).collect();
    let mut x = flatten(&tensors);
    let beta = config.beta;
    let epochs = config.sgd.epochs;
    // The eval closure stashes the loss components of its last call so the
    // accept callback can log them without re-evaluating.
    let last_components = std::cell::Cell::new((f64::NAN, f64::NAN));
    let params = lbfgs::LbfgsParams {
        memory: config.lbfgs.memory,
        max_iters: config.lbfgs.max_iters,
        grad_tol: config.lbfgs.grad_tol,
    };
    let mut entries: Vec<HistoryEntry> = Vec::new();
    let outcome = {
        let records_ref = &*records;
        let components = &last_components;
        let eval = move |p: &[f64]| -> (f64, Vec<f64>) {
            let ts = unflatten(p, &shapes);
            let out = loss::batch_loss(&ts, records_ref, None, true);
            if !out.loss.is_finite() {
                return (f64::INFINITY, vec![0.0; p.len()]);
            }
            let (reg_v, reg_g) = regularizer.evaluate(&ts, beta > 0.0);
            let mut grad = out.grad.expect("gradient requested");
            if beta > 0.0 {
                let rg = reg_g.expect("regularizer gradient requested");
                for (g, r) in grad.iter_mut().zip(rg) {
                    g.zip_mut_with(&r, |gz, rz| *gz += rz * beta);
                }
            }
            components.set((out.loss, reg_v));
            (out.loss + beta * reg_v, flatten_grad(&grad))
        };
        lbfgs::minimize(&mut x, &params, eval, |iter, total| {
            let (nll, reg) = last_components.get();
            entries.push(HistoryEntry {
                iteration: epochs + iter + 1,
                stage: 2,
                nll,
                reg,
                total,
                fidelity: None,
            });
        })
    };
    let shapes: Vec<(usize, usize, usize)> = tensors.iter().map(|t| t.dim()).collect();
    let tensors = unflatten(&x, &shapes);

    // Fidelity traces for stage 2 are recorded against the final iterate
    // only (computing it per iteration would need the trial vector, which
    // the optimizer owns); the SGD stage carries the per-epoch trace.
    if let (Some(t), Some(last)) = (target, entries.last_mut()) {
        let state = MpsState::from_tensors_unchecked(tensors.clone(), None);
        last.fidelity = state.fidelity(t).ok();
    }
    history.entries.append(&mut entries);

    let final_out = loss::batch_loss(&tensors, records, None, false);
    let (reg_v, _) = regularizer.evaluate(&tensors, false);
    history.final_nll = final_out.loss;
    history.final_loss = final_out.loss + config.beta * reg_v;
    history.converged = outcome.converged;
    if !history.final_loss.is_finite() {
        history.diverged = true;
        return Ok((None, history));
    }
    let model = MpsState::from_tensors_unchecked(tensors, None)
        .normalized()
        .map_err(|_| Error::TrainingFailed("final state has zero norm".into()))?;
    Ok((Some(model), history))
}

fn evaluate_entry(
    tensors: &[Array3<C64>],
    records: &loss::CompiledRecords,
    regularizer: &PreparedReg,
    beta: f64,
    iteration: usize,
    stage: u8,
    target: Option<&MpsState>,
) -> HistoryEntry {
    let nll = loss::batch_loss(tensors, records, None, false).loss;
    let (reg, _) = regularizer.evaluate(tensors, false);
    let fidelity = target.and_then(|t| {
        MpsState::from_tensors_unchecked(tensors.to_vec(), None)
            .fidelity(t)
            .ok()
    });
    HistoryEntry {
        iteration,
        stage,
        nll,
        reg,
        total: nll + beta * reg,
        fidelity,
    }
}

fn flatten(tensors: &[Array3<C64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(tensors.iter().map(|t| t.len() * 2).sum());
    for t in tensors {
        for z in t.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn flatten_grad(grads: &[Array3<C64>]) -> Vec<f64> {
    // ∂L/∂(re, im) = 2(Re ∂L/∂Ā, Im ∂L/∂Ā); the factor 2 is absorbed.
    let mut out = Vec::with_capacity(grads.iter().map(|t| t.len() * 2).sum());
    for g in grads {
        for z in g.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn unflatten(x: &[f64], shapes: &[(usize, usize, usize)]) -> Vec<Array3<C64>> {
    let mut tensors = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for &(l, d, r) in shapes {
        let len = l * d * r;
        let data: Vec<C64> = (0..len)
            .map(|i| C64::new(x[offset + 2 * i], x[offset + 2 * i + 1]))
            .collect();
        offset += 2 * len;
        tensors.push(Array3::from_shape_vec((l, d, r), data).expect("shape"));
    }
    tensors
}

/// Rank candidate models by test-set NLL (ascending, stable under ties).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRow {
    pub candidate: usize,
    pub train_nll: f64,
    pub test_nll: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Rows sorted by test NLL; `rows[0]` is the selected model.
    pub rows: Vec<SelectionRow>,
}

pub fn select_model(
    candidates: &[(MpsState, TrainHistory)],
    test_ds: &Dataset,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::invalid_argument("no candidates to select from"));
    }
    if test_ds.is_empty() {
        return Err(Error::invalid_argument("test dataset is empty"));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for (index, (model, history)) in candidates.iter().enumerate() {
        let test_nll = nll_loss(model, test_ds)?;
        rows.push(SelectionRow {
            candidate: index,
            train_nll: history.final_nll,
            test_nll,
        });
    }
    rows.sort_by(|a, b| {
        a.test_nll
            .partial_cmp(&b.test_nll)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.candidate.cmp(&b.candidate))
    });
    Ok(SelectionReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{generate_dataset, EnsembleSpec};

    fn quick_config(chi: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            chi,
            beta: 0.0,
            regularizer: RegularizerKind::None,
            sgd: SgdConfig {
                learning_rate: 0.05,
                batch_size: 32,
                epochs: 40,
                lr_decay: 1.0,
                record_every: 5,
            },
            lbfgs: LbfgsConfig {
                memory: 10,
                max_iters: 120,
                grad_tol: 1e-7,
            },
            seed,
            n_restarts: 2,
        }
    }

    #[test]
    fn learns_product_state() {
        let target = MpsState::product_state(&[0, 0, 0, 0]).unwrap();
        let ds = generate_dataset(&target, &EnsembleSpec::random_xz(4), 2_000, 7).unwrap();
        let result = train(&quick_config(2, 3), &Regularizer::None, &ds, Some(&target)).unwrap();
        let fidelity = result.model.fidelity(&target).unwrap();
        assert!(fidelity > 0.99, "fidelity {fidelity}");
        assert!(result.history.entries.iter().all(|e| e.total.is_finite()));
        // Iteration indices strictly increase.
        for pair in result.history.entries.windows(2) {
            assert!(pair[1].iteration > pair[0].iteration);
        }
    }

    #[test]
    fn select_model_prefers_generalizing_candidate() {
        let target = MpsState::new_random_real(4, 2, 5).unwrap();
        let ds = generate_dataset(&target, &EnsembleSpec::random_xz(4), 400, 11).unwrap();
        let (train_ds, test_ds) = crate::measurement::split_dataset(&ds, 0.8, 1).unwrap();
        let good = target.clone();
        let bad = MpsState::new_random(4, 2, 99).unwrap();
        let history = TrainHistory::default();
        let report = select_model(
            &[(bad, history.clone()), (good, history)],
            &test_ds,
        )
        .unwrap();
        assert_eq!(report.rows[0].candidate, 1);
        let _ = train_ds;
    }

    #[test]
    fn duplicate_candidates_tie_stably() {
        let state = MpsState::new_random(3, 2, 1).unwrap();
        let ds = generate_dataset(&state, &EnsembleSpec::random_xz(3), 100, 2).unwrap();
        let history = TrainHistory::default();
        let report = select_model(
            &[(state.clone(), history.clone()), (state.clone(), history)],
            &ds,
        )
        .unwrap();
        assert_eq!(report.rows[0].candidate, 0);
        assert_eq!(report.rows[1].candidate, 1);
        assert!((report.rows[0].test_nll - report.rows[1].test_nll).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ds = generate_dataset(
            &MpsState::product_state(&[0]).unwrap(),
            &EnsembleSpec::random_xz(1),
            10,
            0,
        )
        .unwrap();
        let mut config = quick_config(2, 0);
        config.n_restarts = 0;
        assert!(train(&config, &Regularizer::None, &ds, None).is_err());
        let mut config = quick_config(2, 0);
        config.beta = -1.0;
        assert!(train(&config, &Regularizer::None, &ds, None).is_err());
        let config = quick_config(2, 0);
        assert!(train(
            &config,
            &Regularizer::Stabilizers(vec![]),
            &ds,
            None
        )
        .is_err());
    }
}
