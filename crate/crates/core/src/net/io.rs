//! `FNN1` parameter files.
//!
//! Layout (little-endian): magic `FNN1`, version byte, `u32` layer count,
//! per layer its `u32` input and output sizes, one activation tag byte per
//! layer, then weights (row-major `out x in`) and biases layer by layer as
//! 8-byte floats, then the input and output normalization statistics as a
//! `u32` count followed by `(mean, std)` pairs.

use super::mlp::{param_count, Activation, ChannelStats, NetParams, NormStats};
use crate::error::{HdaError, Result};
use crate::io::{ByteReader, ByteWriter};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FNN1";
const VERSION: u8 = 1;

pub fn to_bytes(net: &NetParams) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    let dims = net.dims();
    w.u32((dims.len() - 1) as u32);
    for d in dims.windows(2) {
        w.u32(d[0] as u32);
        w.u32(d[1] as u32);
    }
    for a in net.activations() {
        w.u8(a.tag());
    }
    w.f64s(&net.params);
    for stats in [&net.norm.input, &net.norm.output] {
        w.u32(stats.len() as u32);
        for s in stats {
            w.f64(s.mean);
            w.f64(s.std);
        }
    }
    w.buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<NetParams> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(HdaError::Malformed {
            offset: 0,
            reason: "bad magic, expected FNN1".into(),
        });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(r.malformed(format!("unsupported version {version}")));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 {
        return Err(r.malformed("network has no layers"));
    }
    let mut dims = Vec::with_capacity(n_layers + 1);
    for layer in 0..n_layers {
        let n_in = r.u32()? as usize;
        let n_out = r.u32()? as usize;
        if n_in == 0 || n_out == 0 {
            return Err(r.malformed(format!("layer {layer} has an empty dimension")));
        }
        match dims.last() {
            None => dims.push(n_in),
            Some(&prev) if prev != n_in => {
                return Err(r.malformed(format!(
                    "layer {layer} declares {n_in} inputs but layer {} has {prev} outputs",
                    layer - 1
                )))
            }
            _ => {}
        }
        dims.push(n_out);
    }
    let mut activations = Vec::with_capacity(n_layers);
    for layer in 0..n_layers {
        let tag = r.u8()?;
        activations.push(
            Activation::from_tag(tag)
                .ok_or_else(|| r.malformed(format!("layer {layer} has unknown activation {tag}")))?,
        );
    }
    let params = r.f64s(param_count(&dims))?;
    let read_stats = |r: &mut ByteReader, limit: usize, what: &str| -> Result<Vec<ChannelStats>> {
        let n = r.u32()? as usize;
        if n > limit {
            return Err(r.malformed(format!("{n} {what} statistics for {limit} channels")));
        }
        (0..n)
            .map(|_| {
                Ok(ChannelStats {
                    mean: r.f64()?,
                    std: r.f64()?,
                })
            })
            .collect()
    };
    let input = read_stats(&mut r, dims[0], "input")?;
    let output = read_stats(&mut r, *dims.last().unwrap(), "output")?;
    r.finish()?;
    let norm = NormStats { input, output };
    NetParams::from_parts(dims, activations, params, norm)
}

pub fn save(net: &NetParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<NetParams> {
    from_bytes(&std::fs::read(path)?)
}
