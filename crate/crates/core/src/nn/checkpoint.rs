//! Checkpoint file: a magic line, one JSON header line, then parameters,
//! first moments and second moments as little-endian `f32` in header order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AdamState, Architecture, ModelState, Tensor};

const MAGIC: &str = "POSE2GAIT-CKPT";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    arch: Architecture,
    seed: u64,
    step: u64,
    tensors: Vec<TensorEntry>,
    extra: serde_json::Value,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Serialise `state` with an arbitrary JSON `extra` block.
pub fn write_checkpoint<W: Write>(mut w: W, state: &ModelState, extra: &serde_json::Value) -> Result<()> {
    let specs = state.arch.param_specs()?;
    if specs.len() != state.params.len() {
        return Err(ckpt_err("parameter count does not match architecture"));
    }
    let header = Header {
        version: VERSION,
        arch: state.arch.clone(),
        seed: state.seed,
        step: state.adam.step,
        tensors: specs
            .into_iter()
            .map(|s| TensorEntry {
                name: s.name,
                shape: s.shape,
            })
            .collect(),
        extra: extra.clone(),
    };
    let json = serde_json::to_string(&header).map_err(|e| ckpt_err(e.to_string()))?;
    let io = |e| ckpt_err(format!("write failed: {e}"));
    writeln!(w, "{MAGIC}").map_err(io)?;
    writeln!(w, "{json}").map_err(io)?;
    for group in [&state.params, &state.adam.m, &state.adam.v] {
        for t in group.iter() {
            let mut buf = Vec::with_capacity(t.len() * 4);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(ModelState, serde_json::Value)> {
    let mut line = String::new();
    let io = |e| ckpt_err(format!("read failed: {e}"));
    r.read_line(&mut line).map_err(io)?;
    if line.trim_end() != MAGIC {
        return Err(ckpt_err("not a checkpoint file"));
    }
    line.clear();
    r.read_line(&mut line).map_err(io)?;
    let header: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| ckpt_err(format!("bad header: {e}")))?;
    if header.version != VERSION {
        return Err(ckpt_err(format!("unsupported version {}", header.version)));
    }
    let specs = header.arch.param_specs()?;
    if specs.len() != header.tensors.len()
        || specs
            .iter()
            .zip(&header.tensors)
            .any(|(s, t)| s.name != t.name || s.shape != t.shape)
    {
        return Err(ckpt_err("tensor table does not match architecture"));
    }
    let mut read_group = || -> Result<Vec<Tensor<f32>>> {
        specs
            .iter()
            .map(|s| {
                let n: usize = s.shape.iter().product();
                let mut buf = vec![0u8; n * 4];
                r.read_exact(&mut buf)
                    .map_err(|_| ckpt_err(format!("truncated at tensor {}", s.name)))?;
                let data = buf
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Tensor::new(s.shape.clone(), data)
            })
            .collect()
    };
    let params = read_group()?;
    let m = read_group()?;
    let v = read_group()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(ckpt_err("trailing bytes after tensors"));
    }
    Ok((
        ModelState {
            arch: header.arch,
            seed: header.seed,
            params,
            adam: AdamState {
                m,
                v,
                step: header.step,
            },
        },
        header.extra,
    ))
}

pub fn save_checkpoint(path: &Path, state: &ModelState, extra: &serde_json::Value) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), state, extra)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, serde_json::Value)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
