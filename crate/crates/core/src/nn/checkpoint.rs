//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "ADIF" | version: u32
//! n: u32 | n parameter records
//! n: u32 | n Adam records ("m/<name>", "v/<name>", and "adam.step" as a 0-d tensor)
//! n: u32 | n vocabulary tokens (len: u32, UTF-8 bytes)
//! n: u32 | n metadata pairs (key and value as length-prefixed UTF-8)
//! ```
//!
//! A record is `name_len: u32, name: UTF-8, ndim: u32, dims: u64 * ndim,
//! data: f64 * prod(dims)`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::store::ParamStore;
use super::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ADIF";
pub const FORMAT_VERSION: u32 = 1;
const STEP_RECORD: &str = "adam.step";

/// Everything a checkpoint file holds.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointData {
    pub store: ParamStore,
    pub vocab: Vec<String>,
    pub meta: Vec<(String, String)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn put_record<W: Write>(w: &mut W, name: &str, t: &Tensor) -> Result<()> {
    put_str(w, name)?;
    put_u32(w, t.shape().len() as u32)?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| bad(format!("truncated file: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| bad(format!("truncated file: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let len = get_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(|e| bad(format!("truncated file: {e}")))?;
    String::from_utf8(b).map_err(|_| bad("name is not UTF-8"))
}

fn get_record<R: Read>(r: &mut R) -> Result<(String, Tensor)> {
    let name = get_str(r)?;
    let ndim = get_u32(r)? as usize;
    let dims = (0..ndim).map(|_| get_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| get_u64(r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
    Ok((name, Tensor::new(dims, data)?))
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &CheckpointData) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    let params: Vec<_> = ckpt.store.iter().collect();
    put_u32(&mut w, params.len() as u32)?;
    for (name, p) in &params {
        put_record(&mut w, name, &p.value)?;
    }
    let trainable: Vec<_> = params.iter().filter(|(_, p)| !p.frozen).collect();
    put_u32(&mut w, (2 * trainable.len() + 1) as u32)?;
    for (name, p) in &trainable {
        put_record(&mut w, &format!("m/{name}"), &p.m)?;
        put_record(&mut w, &format!("v/{name}"), &p.v)?;
    }
    put_record(&mut w, STEP_RECORD, &Tensor::scalar(ckpt.store.step() as f64))?;
    put_u32(&mut w, ckpt.vocab.len() as u32)?;
    for t in &ckpt.vocab {
        put_str(&mut w, t)?;
    }
    put_u32(&mut w, ckpt.meta.len() as u32)?;
    for (k, v) in &ckpt.meta {
        put_str(&mut w, k)?;
        put_str(&mut w, v)?;
    }
    Ok(())
}

/// Parameters without an Adam record come back frozen.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<CheckpointData> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("file too short for magic"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = get_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let mut store = ParamStore::new();
    for _ in 0..get_u32(&mut r)? {
        let (name, t) = get_record(&mut r)?;
        store.insert_frozen(&name, t);
    }
    for _ in 0..get_u32(&mut r)? {
        let (name, t) = get_record(&mut r)?;
        if name == STEP_RECORD {
            store.set_step(t.data().first().copied().unwrap_or(0.0) as u64);
            continue;
        }
        let (slot, pname) = name.split_once('/').ok_or_else(|| bad(format!("bad Adam record `{name}`")))?;
        let p = store.param_mut(pname).map_err(|_| bad(format!("Adam record for unknown `{pname}`")))?;
        p.value.check_same(&t).map_err(|_| bad(format!("Adam record `{name}` has the wrong shape")))?;
        p.frozen = false;
        match slot {
            "m" => p.m = t,
            "v" => p.v = t,
            _ => return Err(bad(format!("bad Adam record `{name}`"))),
        }
    }
    let vocab = (0..get_u32(&mut r)?).map(|_| get_str(&mut r)).collect::<Result<Vec<_>>>()?;
    let meta = (0..get_u32(&mut r)?)
        .map(|_| Ok((get_str(&mut r)?, get_str(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckpointData { store, vocab, meta })
}

pub fn save_checkpoint(path: &Path, ckpt: &CheckpointData) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ckpt)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&bytes[..])
}
