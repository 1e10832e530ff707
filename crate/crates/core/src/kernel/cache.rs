//! Binary on-disk cache for transition tables.
//!
//! Layout (little endian): magic `LWTT`, format version `u32`, 32-byte key,
//! `u64` number of times, `u64` number of sites, the times, then the fields
//! row by row. The key hashes the kernel, geometry, rate and grid, so a file
//! is only ever read back for the exact table it was written from.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{JumpKernel, TorusGeometry, TransitionTable};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LWTT";
const VERSION: u32 = 1;

pub fn table_cache_key(
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    rate: f64,
    times: &[f64],
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(kernel.content_hash());
    for &l in geom.sides() {
        h.update((l as u64).to_le_bytes());
    }
    h.update(rate.to_bits().to_le_bytes());
    for t in times {
        h.update(t.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

pub fn save_table(table: &TransitionTable, path: &Path) -> Result<()> {
    let key = table_cache_key(table.kernel(), table.geometry(), table.rate(), table.times());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&key)?;
    w.write_all(&(table.times().len() as u64).to_le_bytes())?;
    w.write_all(&(table.geometry().num_sites() as u64).to_le_bytes())?;
    for t in table.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    for f in table.fields() {
        for v in f {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Load a cached table; `Ok(None)` if the file was written for a different key.
pub fn load_table(
    path: &Path,
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    rate: f64,
    times: &[f64],
) -> Result<Option<TransitionTable>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{} is not a table cache", path.display())));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    if u32::from_le_bytes(ver) != VERSION {
        return Ok(None);
    }
    let mut key = [0u8; 32];
    r.read_exact(&mut key)?;
    if key != table_cache_key(kernel, geom, rate, times) {
        return Ok(None);
    }
    let n_times = read_u64(&mut r)? as usize;
    let n_sites = read_u64(&mut r)? as usize;
    if n_times != times.len() || n_sites != geom.num_sites() {
        return Err(Error::Config("table cache header is inconsistent".into()));
    }
    let stored: Vec<f64> = (0..n_times).map(|_| read_f64(&mut r)).collect::<Result<_>>()?;
    let fields = (0..n_times)
        .map(|_| (0..n_sites).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(TransitionTable::from_parts(
        geom.clone(),
        kernel.clone(),
        rate,
        stored,
        fields,
    )))
}
