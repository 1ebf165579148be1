//! Experiment analytics: infidelity scaling fits, sample-complexity
//! thresholds, string-operator diagnostics, and consolidated model reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::EnsembleKind;
use crate::mps::MpsState;
use crate::pauli::PauliString;

/// One aggregated point of an infidelity-vs-samples experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_samples: u64,
    pub median_infidelity: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub system: String,
    pub n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleKind>,
    pub beta: f64,
    pub points: Vec<ScalingPoint>,
}

impl ScalingCurve {
    pub fn new(
        system: impl Into<String>,
        n_qubits: usize,
        ensemble: Option<EnsembleKind>,
        beta: f64,
        points: Vec<ScalingPoint>,
    ) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].n_samples <= pair[0].n_samples {
                return Err(Error::invalid_argument(
                    "scaling points must have strictly increasing N",
                ));
            }
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.median_infidelity) {
                return Err(Error::invalid_argument(format!(
                    "infidelity {} outside [0, 1]",
                    p.median_infidelity
                )));
            }
        }
        Ok(ScalingCurve {
            system: system.into(),
            n_qubits,
            ensemble,
            beta,
            points,
        })
    }

    /// `n,N,median_infidelity,q25,q75` rows (no header) appended to `w`.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.points {
            writeln!(
                w,
                "{},{},{:.12},{:.12},{:.12}",
                self.n_qubits, p.n_samples, p.median_infidelity, p.q25, p.q75
            )?;
        }
        Ok(())
    }
}

/// Write a full `scaling.csv` for a set of curves.
pub fn write_scaling_csv<W: Write>(mut w: W, curves: &[ScalingCurve]) -> Result<()> {
    writeln!(w, "n,N,median_infidelity,q25,q75")?;
    for curve in curves {
        curve.write_csv_rows(&mut w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// `1 − F ≈ c / N^α`.
    pub c: f64,
    pub alpha: f64,
    pub r_squared: f64,
    /// Points dropped because their infidelity was exactly zero.
    pub excluded_points: usize,
}

/// Least-squares fit of `log(1−F) = log c − α log N` over a curve's medians.
pub fn fit_power_law(curve: &ScalingCurve) -> Result<PowerLawFit> {
    let usable: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.median_infidelity > 0.0)
        .map(|p| ((p.n_samples as f64).ln(), p.median_infidelity.ln()))
        .collect();
    let excluded = curve.points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::invalid_argument(format!(
            "power-law fit needs at least 3 usable points (got {})",
            usable.len()
        )));
    }
    let m = usable.len() as f64;
    let mean_x: f64 = usable.iter().map(|(x, _)| x).sum::<f64>() / m;
    let mean_y: f64 = usable.iter().map(|(_, y)| y).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = usable
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let syy: f64 = usable.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid_argument("all points share the same N"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerLawFit {
        c: intercept.exp(),
        alpha: -slope,
        r_squared,
        excluded_points: excluded,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub n_qubits: usize,
    /// Smallest sample count whose fitted infidelity reaches the threshold.
    pub n_star: Option<u64>,
    /// Set when the fitted `N*` exceeds the measured range.
    pub extrapolated: bool,
    /// Set when the threshold cannot be met at any sample count.
    pub unreachable: bool,
}

/// Sample complexity to reach local fidelity `threshold_local` per curve:
/// solves the fitted power law for `1 − F ≤ 1 − threshold_local^n`.
pub fn samples_to_threshold(
    curves: &[ScalingCurve],
    threshold_local: f64,
) -> Result<Vec<ThresholdResult>> {
    if !(0.0..=1.0).contains(&threshold_local) {
        return Err(Error::invalid_argument("local fidelity threshold must lie in [0, 1]"));
    }
    curves
        .iter()
        .map(|curve| {
            let target = 1.0 - threshold_local.powi(curve.n_qubits as i32);
            if target <= 0.0 {
                return Ok(ThresholdResult {
                    n_qubits: curve.n_qubits,
                    n_star: None,
                    extrapolated: false,
                    unreachable: true,
                });
            }
            let fit = fit_power_law(curve)?;
            if fit.alpha <= 0.0 {
                return Ok(ThresholdResult {
                    n_qubits: curve.n_qubits,
                    n_star: None,
                    extrapolated: false,
                    unreachable: true,
                });
            }
            let n_star = (fit.c / target).powf(1.0 / fit.alpha).ceil().max(1.0);
            let max_measured = curve.points.last().map(|p| p.n_samples).unwrap_or(0);
            Ok(ThresholdResult {
                n_qubits: curve.n_qubits,
                n_star: Some(n_star as u64),
                extrapolated: n_star as u64 > max_measured,
                unreachable: false,
            })
        })
        .collect()
}

/// Open-string expectation renormalized by the square root of a closed-loop
/// expectation: `⟨open⟩ / √⟨closed⟩`.
pub fn string_ratio(
    mps: &MpsState,
    open_string: &PauliString,
    closed_loop: &PauliString,
) -> Result<f64> {
    let open = mps.pauli_expectation(open_string)?;
    let closed = mps.pauli_expectation(closed_loop)?;
    if closed <= 1e-8 {
        return Err(Error::DegenerateDiagnostic(format!(
            "closed-loop expectation {closed:.3e} is not positive"
        )));
    }
    Ok(open / closed.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableRow {
    pub label: String,
    pub model: f64,
    pub target: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutRow {
    pub cut: usize,
    pub entropy_model: f64,
    pub entropy_target: f64,
    pub schmidt_model: Vec<f64>,
    pub schmidt_target: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fidelity: f64,
    pub local_fidelity: f64,
    pub observables: Vec<ObservableRow>,
    pub cuts: Vec<CutRow>,
}

/// Model-vs-target comparison across fidelity, requested observables, and
/// entanglement cuts.
pub fn evaluate_report(
    model: &MpsState,
    target: &MpsState,
    observables: &[PauliString],
    cuts: &[usize],
) -> Result<EvaluationReport> {
    let fidelity = model.fidelity(target)?;
    let local_fidelity = model.local_fidelity(target)?;
    let mut rows = Vec::with_capacity(observables.len());
    for p in observables {
        let m = model.pauli_expectation(p)?;
        let t = target.pauli_expectation(p)?;
        rows.push(ObservableRow {
            label: p.label(),
            model: m,
            target: t,
            abs_error: (m - t).abs(),
        });
    }
    let mut cut_rows = Vec::with_capacity(cuts.len());
    for &cut in cuts {
        cut_rows.push(CutRow {
            cut,
            entropy_model: model.entanglement_entropy(cut)?,
            entropy_target: target.entanglement_entropy(cut)?,
            schmidt_model: model.schmidt_values(cut)?,
            schmidt_target: target.schmidt_values(cut)?,
        });
    }
    Ok(EvaluationReport {
        fidelity,
        local_fidelity,
        observables: rows,
        cuts: cut_rows,
    })
}

/// Empirical check of the `ε(N) = O(√(nχ²/(Nδ)))` infidelity bound: fit the
/// constant as the largest normalized coefficient over all but the final
/// sample-count bucket, then report the exceedance fraction in that final
/// bucket (which should stay at or below δ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub fitted_constant: f64,
    pub tail_n_samples: u64,
    pub tail_runs: usize,
    pub exceedance_fraction: f64,
    pub delta: f64,
}

pub fn infidelity_bound_check(
    runs: &[(u64, f64)],
    n_qubits: usize,
    chi_max: usize,
    delta: f64,
) -> Result<BoundCheck> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid_argument("delta must lie in (0, 1)"));
    }
    let tail_n = runs
        .iter()
        .map(|&(n, _)| n)
        .max()
        .ok_or_else(|| Error::invalid_argument("no runs supplied"))?;
    let scale = |n_samples: u64| {
        ((n_qubits as f64) * (chi_max as f64).powi(2) / (n_samples as f64 * delta)).sqrt()
    };
    let mut constant: f64 = 0.0;
    let mut calibration = 0usize;
    for &(n, infidelity) in runs {
        if n == tail_n {
            continue;
        }
        calibration += 1;
        constant = constant.max(infidelity / scale(n));
    }
    if calibration == 0 {
        return Err(Error::invalid_argument(
            "need at least two sample-count buckets to fit the constant",
        ));
    }
    let tail: Vec<f64> = runs
        .iter()
        .filter(|&&(n, _)| n == tail_n)
        .map(|&(_, infidelity)| infidelity)
        .collect();
    let bound = constant * scale(tail_n);
    let exceed = tail.iter().filter(|&&x| x > bound).count();
    Ok(BoundCheck {
        fitted_constant: constant,
        tail_n_samples: tail_n,
        tail_runs: tail.len(),
        exceedance_fraction: exceed as f64 / tail.len() as f64,
        delta,
    })
}

/// Linear-interpolation quantile of unsorted data (q in [0, 1]).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty data");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let t = pos - lo as f64;
        sorted[lo] * (1.0 - t) + sorted[hi] * t
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
