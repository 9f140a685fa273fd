//! NNWF weight files.
//!
//! ```text
//! "NNWF" | u32 version = 1 | u32 conv layer count | u32 rec layer count
//! per layer (conv part first):
//!     u8 kind | u32 name len | name (UTF-8) | u32 tensor count
//!     per tensor: u32 rank | u32 dims[rank] | f32 values (row-major)
//! u32 class count | per class: u32 len | name (UTF-8)
//! ```
//!
//! Kind codes: 0 Conv2D, 1 ReLU, 2 MaxPool2, 3 Flatten, 4 Dense, 5 LSTM, 6 Softmax.
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::codec::{put_f32s, put_str, put_u32, Reader};
use crate::error::{Error, Result};
use crate::net::{Layer, LayerOp, Network};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"NNWF";
pub const VERSION: u32 = 1;
const MAX_LAYERS: usize = 1024;
const MAX_CLASSES: usize = 65536;

fn kind_code(op: &LayerOp) -> u8 {
    match op {
        LayerOp::Conv2D { .. } => 0,
        LayerOp::ReLU => 1,
        LayerOp::MaxPool2 => 2,
        LayerOp::Flatten => 3,
        LayerOp::Dense { .. } => 4,
        LayerOp::Lstm { .. } => 5,
        LayerOp::Softmax => 6,
    }
}

fn params(op: &LayerOp) -> Vec<&Tensor> {
    match op {
        LayerOp::Conv2D { kernel, bias } => vec![kernel, bias],
        LayerOp::Dense { weight, bias } => vec![weight, bias],
        LayerOp::Lstm { w_ih, w_hh, bias } => vec![w_ih, w_hh, bias],
        _ => vec![],
    }
}

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    put_u32(&mut out, VERSION);
    put_u32(&mut out, net.conv_part().len() as u32);
    put_u32(&mut out, net.rec_part().len() as u32);
    for layer in net.conv_part().iter().chain(net.rec_part()) {
        out.push(kind_code(&layer.op));
        put_str(&mut out, &layer.name);
        let ts = params(&layer.op);
        put_u32(&mut out, ts.len() as u32);
        for t in ts {
            put_u32(&mut out, t.rank() as u32);
            for &d in t.dims() {
                put_u32(&mut out, d as u32);
            }
            put_f32s(&mut out, t.values());
        }
    }
    put_u32(&mut out, net.classes().len() as u32);
    for c in net.classes() {
        put_str(&mut out, c);
    }
    out
}

fn read_layer(r: &mut Reader<'_>, index: usize) -> Result<Layer> {
    let ctx = format!("layer {index}");
    let code = r.u8(&ctx)?;
    let name = r.string(&ctx)?;
    let count = r.u32(&ctx)? as usize;
    let layer_err = |detail: String| Error::LayerShape { layer: name.clone(), detail };
    let expected = match code {
        0 | 4 => 2,
        5 => 3,
        1 | 2 | 3 | 6 => 0,
        other => return Err(r.malformed(format!("layer {name:?}: unknown kind code {other}"))),
    };
    if count != expected {
        return Err(layer_err(format!("expected {expected} tensors, found {count}")));
    }
    let mut ts = Vec::with_capacity(count);
    for k in 0..count {
        let tctx = format!("layer {name:?} tensor {k}");
        let dims = r.shape(4, &tctx)?;
        let values = r.f32s(dims.iter().product(), &tctx)?;
        ts.push(Tensor::new(dims, values).map_err(|e| layer_err(e.to_string()))?);
    }
    let mut ts = ts.into_iter();
    let mut next = || ts.next().expect("count checked above");
    let op = match code {
        0 => LayerOp::Conv2D { kernel: next(), bias: next() },
        1 => LayerOp::ReLU,
        2 => LayerOp::MaxPool2,
        3 => LayerOp::Flatten,
        4 => LayerOp::Dense { weight: next(), bias: next() },
        5 => LayerOp::Lstm { w_ih: next(), w_hh: next(), bias: next() },
        _ => LayerOp::Softmax,
    };
    Layer::new(name, op)
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes, "NNWF");
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion { format: "NNWF", version });
    }
    let n_conv = r.u32("conv layer count")? as usize;
    let n_rec = r.u32("rec layer count")? as usize;
    if n_conv + n_rec > MAX_LAYERS {
        return Err(r.malformed(format!("{} layers exceeds limit {MAX_LAYERS}", n_conv + n_rec)));
    }
    let mut layers = (0..n_conv + n_rec)
        .map(|i| read_layer(&mut r, i))
        .collect::<Result<Vec<_>>>()?;
    let rec = layers.split_off(n_conv);
    let n_classes = r.u32("class count")? as usize;
    if n_classes > MAX_CLASSES {
        return Err(r.malformed(format!("{n_classes} classes exceeds limit")));
    }
    let classes = (0..n_classes)
        .map(|i| r.string(&format!("class {i}")))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Network::new(layers, rec, classes)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Network> {
    decode(&fs::read(path)?)
}

pub fn save_weights(path: impl AsRef<Path>, net: &Network) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}
