//! Measurement ensembles, dataset generation, splitting, and persistence.
//!
//! A dataset is an ordered list of (basis, bit-string) records drawn from a
//! target state: a basis is sampled from the ensemble, the rotated state is
//! measured in the computational basis, and the pair is stored. Records are
//! generated on independent, counter-derived RNG substreams, so a dataset is
//! reproducible from `(target, ensemble, N, seed)` regardless of how the
//! work is scheduled across threads.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mps::{sample::MpsSampler, MpsState};
use crate::pauli::{BasisAxis, BasisString};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// Every qubit measured along the same axis, drawn uniformly from
    /// `{X^⊗n, Z^⊗n}`.
    GlobalXz,
    /// Each qubit's axis drawn i.i.d. uniformly from `{X, Z}`.
    RandomXz,
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnsembleKind::GlobalXz => "global-xz",
            EnsembleKind::RandomXz => "random-xz",
        })
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-xz" => Ok(EnsembleKind::GlobalXz),
            "random-xz" => Ok(EnsembleKind::RandomXz),
            other => Err(Error::Format(format!("unknown ensemble '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn global_xz(n: usize) -> Self {
        EnsembleSpec {
            kind: EnsembleKind::GlobalXz,
            n,
        }
    }

    pub fn random_xz(n: usize) -> Self {
        EnsembleSpec {
            kind: EnsembleKind::RandomXz,
            n,
        }
    }
}

/// Draw one basis string from the ensemble.
pub fn draw_basis<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> BasisString {
    match spec.kind {
        EnsembleKind::GlobalXz => {
            let axis = if rng.gen::<bool>() {
                BasisAxis::X
            } else {
                BasisAxis::Z
            };
            BasisString::uniform(axis, spec.n)
        }
        EnsembleKind::RandomXz => BasisString::new(
            (0..spec.n)
                .map(|_| {
                    if rng.gen::<bool>() {
                        BasisAxis::X
                    } else {
                        BasisAxis::Z
                    }
                })
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub basis: BasisString,
    pub bits: Vec<u8>,
}

/// Where a dataset came from; stored in the file header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: u32,
    pub n: usize,
    pub ensemble: EnsembleKind,
    pub seed: u64,
    pub n_samples: usize,
    /// SHA-256 of the target state's serialized bytes.
    pub target_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<MeasurementRecord>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<MeasurementRecord>, provenance: Provenance) -> Result<Self> {
        for (i, record) in records.iter().enumerate() {
            if record.basis.len() != provenance.n || record.bits.len() != provenance.n {
                return Err(Error::Format(format!(
                    "record {i} length does not match n = {}",
                    provenance.n
                )));
            }
            if provenance.ensemble == EnsembleKind::GlobalXz {
                let first = record.basis.axis(0);
                if record.basis.axes().iter().any(|&a| a != first) {
                    return Err(Error::Format(format!(
                        "record {i} is not axis-uniform in a global-XZ dataset"
                    )));
                }
            }
        }
        Ok(Dataset {
            records,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n(&self) -> usize {
        self.provenance.n
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn ensemble(&self) -> EnsembleKind {
        self.provenance.ensemble
    }

    /// Dataset containing the records at `indices` (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid_argument(format!("record index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut provenance = self.provenance.clone();
        provenance.n_samples = records.len();
        Ok(Dataset {
            records,
            provenance,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_string(&self.provenance).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{header}")?;
        for record in &self.records {
            let line = RecordLine {
                basis: record.basis.to_string(),
                bits: record.bits.iter().map(|b| char::from(b'0' + (b & 1))).collect(),
            };
            let json = serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w, "{json}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dataset> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let provenance: Provenance =
            serde_json::from_str(&header).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if provenance.version != DATASET_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {}",
                provenance.version
            )));
        }
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("bad record on line {}: {e}", lineno + 2)))?;
            let basis: BasisString = parsed.basis.parse()?;
            let bits: Vec<u8> = parsed
                .bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Format(format!("invalid bit '{other}'"))),
                })
                .collect::<Result<_>>()?;
            records.push(MeasurementRecord { basis, bits });
        }
        Dataset::new(records, provenance)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Dataset> {
        Dataset::read_jsonl(BufReader::new(File::open(path)?))
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    basis: String,
    bits: String,
}

/// Sample `n_samples` i.i.d. records from the target state under the given
/// ensemble. Record `i` is drawn on RNG substream `i`, making the dataset
/// independent of thread scheduling.
pub fn generate_dataset(
    target: &MpsState,
    spec: &EnsembleSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::invalid_argument("dataset must contain at least one sample"));
    }
    if spec.n != target.n() {
        return Err(Error::invalid_argument("ensemble size does not match target"));
    }
    let normalized = target.normalized()?;
    let sampler = MpsSampler::new(&normalized)?;
    let records: Vec<MeasurementRecord> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64 + 1);
            let basis = draw_basis(spec, &mut rng);
            let bits = sampler.sample(&basis, &mut rng).expect("sampler on normalized state");
            MeasurementRecord { basis, bits }
        })
        .collect();

    let target_hash = hex_digest(&normalized.to_bytes());
    Dataset::new(
        records,
        Provenance {
            version: DATASET_FORMAT_VERSION,
            n: spec.n,
            ensemble: spec.kind,
            seed,
            n_samples,
            target_hash,
            split: None,
        },
    )
}

/// Disjoint train/test partition by seeded shuffle, with sizes
/// `⌈f·N⌉` and `N − ⌈f·N⌉`.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid_argument("train fraction must lie strictly in (0, 1)"));
    }
    let total = ds.len();
    let train_size = (train_fraction * total as f64).ceil() as usize;
    if train_size == 0 || train_size >= total {
        return Err(Error::invalid_argument(format!(
            "degenerate split: {train_size} of {total} records"
        )));
    }
    let mut indices: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..indices.len()).rev() {
        indices.swap(i, rng.gen_range(0..=i));
    }
    let mut train = ds.subset(&indices[..train_size])?;
    let mut test = ds.subset(&indices[train_size..])?;
    train.provenance.split = Some("train".into());
    test.provenance.split = Some("test".into());
    Ok((train, test))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::ghz_state;

    #[test]
    fn global_ensemble_draws_uniform_strings() {
        let spec = EnsembleSpec::global_xz(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x_count = 0usize;
        let draws = 10_000;
        for _ in 0..draws {
            let basis = draw_basis(&spec, &mut rng);
            let s = basis.to_string();
            assert!(s == "XXX" || s == "ZZZ");
            if s == "XXX" {
                x_count += 1;
            }
        }
        let frac = x_count as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02, "global axis fraction {frac}");
    }

    #[test]
    fn random_ensemble_single_site_balance() {
        let spec = EnsembleSpec::random_xz(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 10_000;
        let x_count = (0..draws)
            .filter(|_| draw_basis(&spec, &mut rng).axis(0) == BasisAxis::X)
            .count();
        let frac = x_count as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02);
    }

    #[test]
    fn dataset_from_zero_state_is_deterministic() {
        let target = MpsState::product_state(&[0, 0, 0]).unwrap();
        let spec = EnsembleSpec::global_xz(3);
        let a = generate_dataset(&target, &spec, 200, 9).unwrap();
        let b = generate_dataset(&target, &spec, 200, 9).unwrap();
        assert_eq!(a, b);
        for record in a.records() {
            if record.basis.axis(0) == BasisAxis::Z {
                assert_eq!(record.bits, vec![0, 0, 0]);
            }
        }
    }

    #[test]
    fn ghz_z_records_have_matching_bits() {
        let ghz = ghz_state(3).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::random_xz(3), 2_000, 5).unwrap();
        for record in ds.records() {
            if record.basis.to_string() == "ZZZ" {
                assert!(record.bits == vec![0, 0, 0] || record.bits == vec![1, 1, 1]);
            }
        }
    }

    #[test]
    fn bell_xx_parity() {
        // (|00> + |11>)/√2 measured in XX: outcomes have even parity.
        let ghz2 = ghz_state(2).unwrap();
        let ds = generate_dataset(&ghz2, &EnsembleSpec::global_xz(2), 4_000, 13).unwrap();
        let mut even = 0usize;
        let mut count = 0usize;
        for record in ds.records() {
            if record.basis.axis(0) == BasisAxis::X {
                count += 1;
                if (record.bits[0] + record.bits[1]) % 2 == 0 {
                    even += 1;
                }
            }
        }
        assert!(count > 0);
        let frac = even as f64 / count as f64;
        assert!(frac > 0.99, "XX parity fraction {frac}");
    }

    #[test]
    fn split_sizes_and_determinism() {
        let target = MpsState::product_state(&[0, 0]).unwrap();
        let ds = generate_dataset(&target, &EnsembleSpec::random_xz(2), 101, 3).unwrap();
        let (train, test) = split_dataset(&ds, 0.5, 7).unwrap();
        assert_eq!(train.len(), 51);
        assert_eq!(test.len(), 50);
        let (train2, test2) = split_dataset(&ds, 0.5, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        let ds10 = ds.subset(&(0..10).collect::<Vec<_>>()).unwrap();
        let (t8, t2) = split_dataset(&ds10, 0.8, 1).unwrap();
        assert_eq!((t8.len(), t2.len()), (8, 2));

        assert!(split_dataset(&ds, 0.0, 1).is_err());
        assert!(split_dataset(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_validation() {
        let ghz = ghz_state(3).unwrap();
        let ds = generate_dataset(&ghz, &EnsembleSpec::random_xz(3), 50, 21).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let back = Dataset::read_jsonl(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(ds, back);
        let mut buf2 = Vec::new();
        back.write_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);

        // Length mismatches are rejected.
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let bad_line = r#"{"basis":"XZ","bits":"01"}"#;
        lines[1] = bad_line;
        let corrupted = lines.join("\n");
        assert!(Dataset::read_jsonl(std::io::Cursor::new(corrupted.as_bytes())).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let target = MpsState::product_state(&[0]).unwrap();
        assert!(generate_dataset(&target, &EnsembleSpec::random_xz(1), 0, 0).is_err());
    }
}
