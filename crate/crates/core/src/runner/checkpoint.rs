//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GVER" | version: u8
//! set_count: u32
//!   per set:    name_len: u32 | name | tensor_count: u32
//!     per tensor: name_len: u32 | name | rows: u64 | cols: u64
//! per tensor, manifest order: len: u64 | len x f64
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamSet};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"GVER";
pub const VERSION: u8 = 1;

/// Named parameter sets, in file order.
pub type Sets = Vec<(String, ParamSet)>;

pub fn encode(sets: &[(&str, &ParamSet)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(sets.len() as u32).to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    for (name, set) in sets {
        put_str(&mut out, name);
        out.extend_from_slice(&(set.len() as u32).to_le_bytes());
        for (tname, t) in set.iter() {
            put_str(&mut out, tname);
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        }
    }
    for (_, set) in sets {
        for t in set.tensors() {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format(format!("{what} is not utf-8")))
    }
}

/// Parses a whole checkpoint; nothing is returned unless every byte is valid.
pub fn decode(bytes: &[u8]) -> Result<Sets> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, not a checkpoint".into()));
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_sets = r.u32("set count")?;
    let mut manifest = Vec::new();
    for _ in 0..n_sets {
        let name = r.string("set name")?;
        let n = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..n {
            let tname = r.string("tensor name")?;
            let rows = r.u64("rows")? as usize;
            let cols = r.u64("cols")? as usize;
            tensors.push((tname, rows, cols));
        }
        manifest.push((name, tensors));
    }
    let mut sets = Vec::with_capacity(manifest.len());
    for (name, tensors) in manifest {
        let mut entries = Vec::with_capacity(tensors.len());
        for (tname, rows, cols) in tensors {
            let len = r.u64("array length")? as usize;
            let expect = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format(format!("`{name}/{tname}`: shape overflows")))?;
            if len != expect {
                return Err(Error::Format(format!(
                    "`{name}/{tname}`: {len} values for shape {rows}x{cols}"
                )));
            }
            let raw = r.take(len.saturating_mul(8), &format!("`{name}/{tname}` data"))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            entries.push((tname, Tensor::new(rows, cols, data)?));
        }
        sets.push((name, ParamSet::new(entries)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(sets)
}

/// Writes through a temporary file and a rename, so a reader never sees a
/// half-written checkpoint.
pub fn checkpoint_save(path: &Path, sets: &[(&str, &ParamSet)]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(sets)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<Sets> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Takes the set called `name` out of `sets` and checks it against `spec`.
pub fn take_set(sets: &mut Sets, name: &str, spec: &MlpSpec) -> Result<ParamSet> {
    let i = sets
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Format(format!("checkpoint has no `{name}` parameters")))?;
    let (_, set) = sets.remove(i);
    set.check_against(spec).map_err(|e| match e {
        Error::ParamMismatch(msg) => Error::ParamMismatch(format!("set `{name}`: {msg}")),
        other => other,
    })?;
    Ok(set)
}
