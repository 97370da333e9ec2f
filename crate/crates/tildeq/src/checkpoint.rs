//! Flat binary GRU checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `TILDEQCK`                        |
//! | 8      | 4    | format version (`u32`, currently 1)     |
//! | 12     | 4    | hidden size (`u32`)                     |
//! | 16     | 8·k  | parameter blocks as `f64`, row-major    |
//!
//! Blocks follow [`GruForecaster::block_shapes`]: encoder input weights,
//! recurrent weights, input bias, recurrent bias; the same four for the
//! decoder; then output weights and output bias.

use std::path::Path;

use tildeq_core::gru::GruForecaster;
use tildeq_core::tape::Matrix;

use crate::error::{io_err, Result};

pub const MAGIC: [u8; 8] = *b"TILDEQCK";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn bad(msg: impl Into<String>) -> tildeq_core::Error {
    tildeq_core::Error::Checkpoint(msg.into())
}

pub fn encode(model: &GruForecaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * model.parameter_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.hidden_size() as u32).to_le_bytes());
    for block in model.params() {
        for v in block.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<GruForecaster, tildeq_core::Error> {
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err(bad("not a tildeq checkpoint"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"));
    let version = word(8);
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let hidden = word(12) as usize;
    if hidden == 0 {
        return Err(bad("hidden size is zero"));
    }
    let shapes = GruForecaster::block_shapes(hidden);
    let expected: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * expected {
        return Err(bad(format!(
            "expected {} parameter bytes for hidden size {hidden}, found {}",
            8 * expected,
            body.len()
        )));
    }
    let mut floats = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let blocks = shapes
        .iter()
        .map(|&(r, c)| Matrix::from_vec(r, c, floats.by_ref().take(r * c).collect()))
        .collect();
    GruForecaster::from_params(hidden, blocks)
}

pub fn save(path: &Path, model: &GruForecaster) -> Result<()> {
    std::fs::write(path, encode(model)).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<GruForecaster> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(decode(&bytes)?)
}
