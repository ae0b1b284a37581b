//! Weight checkpoints.
//!
//! Layout, little-endian: magic `FLXCKPT1`, tensor count `u32`, then per
//! tensor its rank `u32`, each dimension `u32` and the values as `f32`.
//! Tensors are stored network by network (actor, critic, actor target,
//! critic target), each as weight then bias per layer.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::ddpg::ActorCritic;
use super::nn::Mlp;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FLXCKPT1";

fn nets(ac: &ActorCritic) -> [&Mlp; 4] {
    [&ac.actor, &ac.critic, &ac.actor_target, &ac.critic_target]
}

pub fn encode(ac: &ActorCritic) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    let count: usize = nets(ac).iter().map(|n| 2 * n.layers.len()).sum();
    out.extend_from_slice(&(count as u32).to_le_bytes());
    let mut tensor = |dims: &[usize], vals: &mut dyn Iterator<Item = f64>| {
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in vals {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    for net in nets(ac) {
        for l in &net.layers {
            tensor(&[l.w.nrows(), l.w.ncols()], &mut l.w.iter().copied());
            tensor(&[l.b.len()], &mut l.b.iter().copied());
        }
    }
    out
}

/// Overwrites the weights of `ac`, whose shapes must match the file.
pub fn decode_into(bytes: &[u8], ac: &mut ActorCritic) -> Result<()> {
    let corrupt = |m: &str| Error::Corrupt(format!("checkpoint: {m}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| corrupt("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap()) as usize;
    let count = u32_at(take(4)?);
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = u32_at(take(4)?);
        let dims = (0..rank)
            .map(|_| take(4).map(u32_at))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let raw = take(4 * n)?;
        let vals: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push((dims, vals));
    }
    if pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    let mut it = tensors.into_iter();
    for net in [
        &mut ac.actor,
        &mut ac.critic,
        &mut ac.actor_target,
        &mut ac.critic_target,
    ] {
        for l in &mut net.layers {
            let (wd, wv) = it.next().ok_or_else(|| corrupt("too few tensors"))?;
            if wd != [l.w.nrows(), l.w.ncols()] {
                return Err(corrupt("weight shape mismatch"));
            }
            l.w = Array2::from_shape_vec((wd[0], wd[1]), wv).expect("shape checked");
            let (bd, bv) = it.next().ok_or_else(|| corrupt("too few tensors"))?;
            if bd != [l.b.len()] {
                return Err(corrupt("bias shape mismatch"));
            }
            l.b = Array1::from_vec(bv);
        }
    }
    if it.next().is_some() {
        return Err(corrupt("too many tensors"));
    }
    Ok(())
}

pub fn save(path: &Path, ac: &ActorCritic) -> Result<()> {
    std::fs::write(path, encode(ac)).map_err(|e| Error::io(path, e))
}

pub fn load_into(path: &Path, ac: &mut ActorCritic) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_into(&bytes, ac)
}
