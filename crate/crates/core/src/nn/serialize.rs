//! Wire format for network parameters.
//!
//! Little-endian, 8-byte words throughout:
//! `n` (number of layer sizes), `n` sizes, `n - 1` activation codes
//! (0 = ReLU, 1 = tanh, 2 = identity), then the flat `f64` parameters.

use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};

pub fn mlp_to_bytes(net: &Mlp) -> Vec<u8> {
    let sizes = net.sizes();
    let mut out = Vec::with_capacity(8 * (2 * sizes.len() + net.param_count()));
    out.extend_from_slice(&(sizes.len() as u64).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for a in net.activations() {
        out.extend_from_slice(&a.code().to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<Mlp> {
    let mut words = bytes.chunks_exact(8);
    if !words.remainder().is_empty() {
        return Err(Error::Serialization("length is not a multiple of 8".into()));
    }
    let mut next = || {
        words
            .next()
            .map(|w| <[u8; 8]>::try_from(w).expect("chunks_exact yields 8 bytes"))
            .ok_or_else(|| Error::Serialization("truncated stream".into()))
    };
    let n = u64::from_le_bytes(next()?) as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Serialization(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| next().map(|w| u64::from_le_bytes(w) as usize)).collect::<Result<Vec<_>>>()?;
    let activations = (0..n - 1)
        .map(|_| {
            let code = u64::from_le_bytes(next()?);
            Activation::from_code(code).ok_or_else(|| Error::Serialization(format!("unknown activation {code}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = Mlp::count_params(&sizes);
    let params = (0..count).map(|_| next().map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
    if next().is_ok() {
        return Err(Error::Serialization("trailing bytes".into()));
    }
    Mlp::from_params(&sizes, &activations, params)
}
