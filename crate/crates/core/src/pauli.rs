//! Measurement axes, basis strings, and Pauli strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Single-qubit measurement axis. The protocol draws every per-site rotation
/// from {X, Z}; Y is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisAxis {
    X,
    Z,
}

impl BasisAxis {
    /// Row `b` of the single-qubit rotation taking the computational basis to
    /// this measurement basis (X-axis rotation is the Hadamard, Z is the
    /// identity). Both rotations are real.
    pub fn rotation_row(self, bit: u8) -> [f64; 2] {
        const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
        match (self, bit) {
            (BasisAxis::Z, 0) => [1.0, 0.0],
            (BasisAxis::Z, _) => [0.0, 1.0],
            (BasisAxis::X, 0) => [H, H],
            (BasisAxis::X, _) => [H, -H],
        }
    }
}

/// One measurement basis per qubit, e.g. `XZZX`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisString(Vec<BasisAxis>);

impl BasisString {
    pub fn new(axes: Vec<BasisAxis>) -> Self {
        BasisString(axes)
    }

    /// All qubits measured along the same axis.
    pub fn uniform(axis: BasisAxis, n: usize) -> Self {
        BasisString(vec![axis; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn axes(&self) -> &[BasisAxis] {
        &self.0
    }

    pub fn axis(&self, site: usize) -> BasisAxis {
        self.0[site]
    }
}

impl fmt::Display for BasisString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axis in &self.0 {
            f.write_str(match axis {
                BasisAxis::X => "X",
                BasisAxis::Z => "Z",
            })?;
        }
        Ok(())
    }
}

impl FromStr for BasisString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'X' | 'x' => Ok(BasisAxis::X),
                'Z' | 'z' => Ok(BasisAxis::Z),
                other => Err(Error::Format(format!("invalid basis axis '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BasisString)
    }
}

/// Non-identity single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliOp {
    X,
    Y,
    Z,
}

impl PauliOp {
    /// 2x2 matrix in row-major order.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliOp::X => [[zero, one], [one, zero]],
            PauliOp::Y => [[zero, -i], [i, zero]],
            PauliOp::Z => [[one, zero], [zero, -one]],
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliOp::X => "X",
            PauliOp::Y => "Y",
            PauliOp::Z => "Z",
        })
    }
}

/// Normalization convention for a Pauli string.
///
/// `Operator` is the plain tensor product of Pauli matrices;
/// `HilbertSchmidt` divides by `2^{n/2}` so that `tr(P P†) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Operator,
    HilbertSchmidt,
}

/// A sparse Pauli string: a map from site to single-qubit Pauli, together
/// with a scalar coefficient. Sites not in the support carry the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    support: BTreeMap<usize, PauliOp>,
    coefficient: C64,
    normalization: Normalization,
}

impl PauliString {
    /// Build an operator-normalized string with unit coefficient.
    ///
    /// Duplicate sites are rejected.
    pub fn new<I>(ops: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, PauliOp)>,
    {
        let mut support = BTreeMap::new();
        for (site, op) in ops {
            if support.insert(site, op).is_some() {
                return Err(Error::invalid_argument(format!(
                    "duplicate site {site} in Pauli string"
                )));
            }
        }
        Ok(PauliString {
            support,
            coefficient: C64::new(1.0, 0.0),
            normalization: Normalization::Operator,
        })
    }

    /// The identity string.
    pub fn identity() -> Self {
        PauliString::new([]).expect("empty support")
    }

    /// Single-site Pauli.
    pub fn single(site: usize, op: PauliOp) -> Self {
        PauliString::new([(site, op)]).expect("single site")
    }

    /// Uniform string `op^{⊗ n}` on sites `0..n`.
    pub fn uniform(op: PauliOp, n: usize) -> Self {
        PauliString::new((0..n).map(|i| (i, op))).expect("distinct sites")
    }

    pub fn with_coefficient(mut self, coefficient: C64) -> Result<Self> {
        if coefficient.norm() == 0.0 {
            return Err(Error::invalid_argument("Pauli coefficient must be nonzero"));
        }
        self.coefficient = coefficient;
        Ok(self)
    }

    pub fn with_real_coefficient(self, coefficient: f64) -> Result<Self> {
        self.with_coefficient(C64::new(coefficient, 0.0))
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn coefficient(&self) -> C64 {
        self.coefficient
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Support as (site, op) pairs in increasing site order.
    pub fn support(&self) -> impl Iterator<Item = (usize, PauliOp)> + '_ {
        self.support.iter().map(|(&s, &op)| (s, op))
    }

    pub fn op_at(&self, site: usize) -> Option<PauliOp> {
        self.support.get(&site).copied()
    }

    /// Locality `k(P)`: the number of non-identity sites.
    pub fn locality(&self) -> usize {
        self.support.len()
    }

    /// Largest site in the support, if any.
    pub fn max_site(&self) -> Option<usize> {
        self.support.keys().next_back().copied()
    }

    /// Whether the string contains a Y factor (and is therefore invisible to
    /// XZ measurements).
    pub fn has_y(&self) -> bool {
        self.support.values().any(|&op| op == PauliOp::Y)
    }

    /// Check that every supported site lies in `0..n`.
    pub fn check_sites(&self, n: usize) -> Result<()> {
        match self.max_site() {
            Some(site) if site >= n => Err(Error::invalid_argument(format!(
                "Pauli string touches site {site} but the system has {n} sites"
            ))),
            _ => Ok(()),
        }
    }

    /// Human-readable label like `Z0*Z1` (identity prints as `I`).
    pub fn label(&self) -> String {
        if self.support.is_empty() {
            return "I".to_string();
        }
        self.support()
            .map(|(site, op)| format!("{op}{site}"))
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
