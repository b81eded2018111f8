//! Flat feature-cache file: 16-byte header (`n_frames`, `n_mels` as u64 LE)
//! followed by the row-major values as f64 LE.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::LogMelPatch;

pub fn write_patch<W: Write>(mut w: W, patch: &LogMelPatch) -> Result<()> {
    w.write_all(&(patch.n_frames as u64).to_le_bytes())?;
    w.write_all(&(patch.n_mels as u64).to_le_bytes())?;
    for v in &patch.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a cached patch. The hop is not stored and comes from the caller.
pub fn read_patch<R: Read>(mut r: R, hop_s: f64) -> Result<LogMelPatch> {
    let mut u = [0u8; 8];
    r.read_exact(&mut u)?;
    let n_frames = u64::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let n_mels = u64::from_le_bytes(u) as usize;
    let n = n_frames
        .checked_mul(n_mels)
        .ok_or_else(|| Error::InvalidArgument("feature cache header overflows".into()))?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut u)?;
        values.push(f64::from_le_bytes(u));
    }
    Ok(LogMelPatch { values, n_frames, n_mels, hop_s })
}
