//! Binary checkpoint format:
//!
//! ```text
//! b"ATNLAB01"
//! u32 LE × 6: arch (0 = CNN, 1 = CAML), V, d, d_c, k, L
//! f32 LE arrays in ModelParams declaration order
//! ```

use std::fs;
use std::path::Path;

use super::params::{Arch, ModelParams, ModelShape};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ATNLAB01";
const HEADER_LEN: usize = 8 + 6 * 4;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let s = params.shape;
    let mut out = Vec::with_capacity(HEADER_LEN + params.num_values() * 4);
    out.extend_from_slice(MAGIC);
    for v in [
        s.arch.code(),
        s.vocab_size as u32,
        s.embed_dim as u32,
        s.filters as u32,
        s.kernel as u32,
        s.labels as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (_, arr) in params.arrays() {
        for &x in arr {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes a checkpoint, rejecting truncated, oversized or malformed input
/// before allocating parameter storage.
pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let field = |i: usize| {
        let o = 8 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap())
    };
    let arch = Arch::from_code(field(0))
        .ok_or_else(|| Error::Checkpoint(format!("unknown architecture code {}", field(0))))?;
    let shape = ModelShape {
        arch,
        vocab_size: field(1) as usize,
        embed_dim: field(2) as usize,
        filters: field(3) as usize,
        kernel: field(4) as usize,
        labels: field(5) as usize,
    };
    shape
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let expected = expected_values(&shape)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Checkpoint("declared shape overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} bytes for the declared shape, found {}",
            bytes.len()
        )));
    }

    let mut params = ModelParams::zeros(shape);
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    for (name, arr) in params.arrays_mut() {
        for x in arr.iter_mut() {
            *x = values.next().expect("length checked above");
            if !x.is_finite() {
                return Err(Error::Checkpoint(format!("non-finite value in {name}")));
            }
        }
    }
    Ok(params)
}

fn expected_values(s: &ModelShape) -> Option<usize> {
    let (v, d, c, k, l) = (s.vocab_size, s.embed_dim, s.filters, s.kernel, s.labels);
    let mut n = v.checked_mul(d)?;
    n = n.checked_add(c.checked_mul(d)?.checked_mul(k)?)?;
    n = n.checked_add(c)?;
    let lc = l.checked_mul(c)?;
    if s.arch == Arch::Caml {
        n = n.checked_add(lc)?;
    }
    n = n.checked_add(lc)?;
    n.checked_add(l)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
