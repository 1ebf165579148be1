//! Binary MPS container.
//!
//! Layout (all integers little-endian):
//! magic `MPSC`, `u32` version, `u64` n, `(n+1) × u64` bond dimensions,
//! `u8` canonical-center flag plus `u64` center, then for each site the
//! tensor entries in row-major `(left, physical, right)` order as
//! interleaved `f64` (re, im) pairs. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::C64;

use super::MpsState;

const MAGIC: &[u8; 4] = b"MPSC";
const VERSION: u32 = 1;

impl MpsState {
    /// Serialize into the single-file container format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to Vec cannot fail");
        buf
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        let n = self.n() as u64;
        w.write_u64::<LittleEndian>(n)?;
        for dim in self.bond_dims() {
            w.write_u64::<LittleEndian>(dim as u64)?;
        }
        match self.canonical_center {
            Some(c) => {
                w.write_u8(1)?;
                w.write_u64::<LittleEndian>(c as u64)?;
            }
            None => {
                w.write_u8(0)?;
                w.write_u64::<LittleEndian>(0)?;
            }
        }
        for t in self.tensors() {
            for z in t.iter() {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an MPS container".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported MPS container version {version}")));
        }
        let n = r.read_u64::<LittleEndian>()? as usize;
        if n == 0 || n > 1 << 20 {
            return Err(Error::Format(format!("implausible site count {n}")));
        }
        let mut dims = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            dims.push(r.read_u64::<LittleEndian>()? as usize);
        }
        if dims[0] != 1 || dims[n] != 1 {
            return Err(Error::Format("boundary bonds must be 1".into()));
        }
        let has_center = r.read_u8()? != 0;
        let center = r.read_u64::<LittleEndian>()? as usize;
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let len = dims[i] * 2 * dims[i + 1];
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                data.push(C64::new(re, im));
            }
            let t = Array3::from_shape_vec((dims[i], 2, dims[i + 1]), data)
                .map_err(|e| Error::Format(e.to_string()))?;
            tensors.push(t);
        }
        let state = MpsState::from_tensors(tensors)?;
        Ok(MpsState {
            canonical_center: if has_center && center < n { Some(center) } else { None },
            ..state
        })
    }
}

pub fn save_mps<P: AsRef<Path>>(path: P, state: &MpsState) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    state.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_mps<P: AsRef<Path>>(path: P) -> Result<MpsState> {
    let file = File::open(path)?;
    MpsState::read_from(BufReader::new(file))
}
