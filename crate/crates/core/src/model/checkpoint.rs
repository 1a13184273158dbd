//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic     b"SLUJ"
//! version   u32
//! config    u32 count, then (string key, string value) pairs
//! vocabs    4 × (string name, u8 reserved, u32 count, strings)   words, chars, slots, intents
//! tensors   u32 count, then (string name, u32 ndim, u64 extents…, f64 values…)
//! string    u32 byte length, UTF-8 bytes
//! ```
//!
//! The prior mask is stored as the tensor `prior.mask`; its smoothing constant is the
//! `smoothing_eps` config entry.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{JointModel, ModelConfig, ModelError};
use crate::corpus::{Vocabs, Vocabulary};
use crate::heads::PriorMask;
use crate::numerics::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"SLUJ";
pub const FORMAT_VERSION: u32 = 1;
const PRIOR: &str = "prior.mask";

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn put_tensor(w: &mut impl Write, name: &str, t: &Tensor) -> std::io::Result<()> {
    put_str(w, name)?;
    put_u32(w, 2)?;
    w.write_all(&(t.rows() as u64).to_le_bytes())?;
    w.write_all(&(t.cols() as u64).to_le_bytes())?;
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str(r: &mut impl Read) -> Result<String, ModelError> {
    let n = get_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| ModelError::Format("string is not UTF-8".into()))
}

fn get_tensor(r: &mut impl Read) -> Result<(String, Tensor), ModelError> {
    let name = get_str(r)?;
    let ndim = get_u32(r)?;
    if ndim != 2 {
        return Err(ModelError::Format(format!("tensor {name:?} has {ndim} dimensions, expected 2")));
    }
    let rows = get_u64(r)? as usize;
    let cols = get_u64(r)? as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&n| n > 0 && n <= 1 << 32)
        .ok_or_else(|| ModelError::Format(format!("tensor {name:?} has bad extents {rows}x{cols}")))?;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((name, Tensor::new(Shape::new(rows, cols), data)?))
}

pub fn save_checkpoint(model: &JointModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    let kv = model.config.to_key_values();
    put_u32(&mut w, kv.len() as u32)?;
    for (k, v) in &kv {
        put_str(&mut w, k)?;
        put_str(&mut w, v)?;
    }
    let v = &model.vocabs;
    for (name, vocab) in [("words", &v.words), ("chars", &v.chars), ("slots", &v.slots), ("intents", &v.intents)] {
        put_str(&mut w, name)?;
        w.write_all(&[vocab.is_reserved() as u8])?;
        put_u32(&mut w, vocab.len() as u32)?;
        for e in vocab.entries() {
            put_str(&mut w, e)?;
        }
    }
    put_u32(&mut w, model.params.len() as u32 + 1)?;
    put_tensor(&mut w, PRIOR, &model.prior.matrix)?;
    for (name, t) in model.params.iter() {
        put_tensor(&mut w, name, t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<JointModel, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Format(format!("bad magic {magic:?}")));
    }
    let version = get_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion { found: version, expected: FORMAT_VERSION });
    }
    let n = get_u32(&mut r)?;
    let mut kv = Vec::new();
    for _ in 0..n {
        kv.push((get_str(&mut r)?, get_str(&mut r)?));
    }
    let config = ModelConfig::from_key_values(&kv)?;

    let mut vocabs = Vec::with_capacity(4);
    for expected in ["words", "chars", "slots", "intents"] {
        let name = get_str(&mut r)?;
        if name != expected {
            return Err(ModelError::Format(format!("expected vocabulary {expected:?}, found {name:?}")));
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let count = get_u32(&mut r)?;
        let entries = (0..count).map(|_| get_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
        vocabs.push(Vocabulary::from_entries(entries, flag[0] != 0)?);
    }
    let intents = vocabs.pop().unwrap();
    let slots = vocabs.pop().unwrap();
    let chars = vocabs.pop().unwrap();
    let words = vocabs.pop().unwrap();

    let count = get_u32(&mut r)?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        tensors.push(get_tensor(&mut r)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(ModelError::Format("trailing bytes after the last tensor".into()));
    }

    let pos = tensors
        .iter()
        .position(|(n, _)| n == PRIOR)
        .ok_or_else(|| ModelError::Format(format!("missing tensor {PRIOR:?}")))?;
    let (_, matrix) = tensors.remove(pos);
    let prior = PriorMask { matrix, eps: config.smoothing_eps };
    let mut model = JointModel::new(config, Vocabs { words, chars, slots, intents }, prior, 0)?;

    if tensors.len() != model.params.len() {
        return Err(ModelError::Format(format!(
            "checkpoint has {} parameter tensors, model needs {}",
            tensors.len(),
            model.params.len()
        )));
    }
    for (name, t) in tensors {
        let slot = model
            .params
            .by_name_mut(&name)
            .ok_or_else(|| ModelError::Format(format!("unexpected tensor {name:?}")))?;
        if slot.shape() != t.shape() {
            return Err(ModelError::Format(format!(
                "tensor {name:?} is {} but the model needs {}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    Ok(model)
}
