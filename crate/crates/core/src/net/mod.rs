//! Forward-only CNN + RNN runtime.
//!
//! A [`Network`] is split into a convolutional part applied to every frame
//! independently (producing the spatial features η, one row per frame) and a
//! recurrent part that consumes the feature sequence and emits one logit per
//! class. Convolutional activations are kept channel-first `[c, h, w]`; input
//! frames arrive channel-last `[h, w, ch]` and are transposed on entry.

mod lipschitz;
pub mod nnwf;

pub use lipschitz::{lipschitz_upper, spectral_norm};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Video};

/// Parameterised layer operation.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerOp {
    /// Valid-padding, stride-1 convolution. Kernel `[out, in, kh, kw]`, bias `[out]`.
    Conv2D { kernel: Tensor, bias: Tensor },
    ReLU,
    /// Non-overlapping 2x2 max pooling (floor on odd sizes).
    MaxPool2,
    /// Collapse a feature map or a whole sequence into a vector.
    Flatten,
    /// Weight `[out, in]`, bias `[out]`. Applied per step on sequences.
    Dense { weight: Tensor, bias: Tensor },
    /// Single LSTM layer returning the last hidden state. Gate order in the
    /// stacked weights is input, forget, cell, output.
    Lstm { w_ih: Tensor, w_hh: Tensor, bias: Tensor },
    Softmax,
}

impl LayerOp {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerOp::Conv2D { .. } => "Conv2D",
            LayerOp::ReLU => "ReLU",
            LayerOp::MaxPool2 => "MaxPool2",
            LayerOp::Flatten => "Flatten",
            LayerOp::Dense { .. } => "Dense",
            LayerOp::Lstm { .. } => "LSTM",
            LayerOp::Softmax => "Softmax",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub op: LayerOp,
}

impl Layer {
    pub fn new(name: impl Into<String>, op: LayerOp) -> Result<Self> {
        let layer = Self { name: name.into(), op };
        layer.check_params()?;
        Ok(layer)
    }

    fn shape_err(&self, detail: impl Into<String>) -> Error {
        Error::LayerShape { layer: self.name.clone(), detail: detail.into() }
    }

    fn check_params(&self) -> Result<()> {
        match &self.op {
            LayerOp::Conv2D { kernel, bias } => {
                if kernel.rank() != 4 {
                    return Err(self.shape_err(format!("conv kernel must be [out,in,kh,kw], got {:?}", kernel.dims())));
                }
                if bias.dims() != [kernel.dims()[0]] {
                    return Err(self.shape_err(format!(
                        "conv bias {:?} does not match {} output channels",
                        bias.dims(),
                        kernel.dims()[0]
                    )));
                }
            }
            LayerOp::Dense { weight, bias } => {
                if weight.rank() != 2 {
                    return Err(self.shape_err(format!("dense weight must be [out,in], got {:?}", weight.dims())));
                }
                if bias.dims() != [weight.dims()[0]] {
                    return Err(self.shape_err(format!(
                        "dense weight {:?} but bias {:?}",
                        weight.dims(),
                        bias.dims()
                    )));
                }
            }
            LayerOp::Lstm { w_ih, w_hh, bias } => {
                if w_hh.rank() != 2 || w_hh.dims()[0] != 4 * w_hh.dims()[1] {
                    return Err(self.shape_err(format!("recurrent weight must be [4h,h], got {:?}", w_hh.dims())));
                }
                let gates = w_hh.dims()[0];
                if w_ih.rank() != 2 || w_ih.dims()[0] != gates {
                    return Err(self.shape_err(format!("input weight must be [{gates},in], got {:?}", w_ih.dims())));
                }
                if bias.dims() != [gates] {
                    return Err(self.shape_err(format!("bias must be [{gates}], got {:?}", bias.dims())));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Declared input and output widths of linear layers.
    fn io_widths(&self) -> Option<(usize, usize)> {
        match &self.op {
            LayerOp::Dense { weight, .. } => Some((weight.dims()[1], weight.dims()[0])),
            LayerOp::Lstm { w_ih, w_hh, .. } => Some((w_ih.dims()[1], w_hh.dims()[1])),
            _ => None,
        }
    }
}

/// Intermediate value flowing between layers.
#[derive(Clone, Debug)]
enum Act {
    Map { c: usize, h: usize, w: usize, data: Vec<f64> },
    Seq { len: usize, dim: usize, data: Vec<f64> },
    Vector(Vec<f64>),
}

impl Act {
    fn describe(&self) -> String {
        match self {
            Act::Map { c, h, w, .. } => format!("feature map [{c},{h},{w}]"),
            Act::Seq { len, dim, .. } => format!("sequence [{len},{dim}]"),
            Act::Vector(v) => format!("vector [{}]", v.len()),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dense(weight: &Tensor, bias: &Tensor, x: &[f64], out: &mut Vec<f64>) {
    let (rows, cols) = (weight.dims()[0], weight.dims()[1]);
    let w = weight.values();
    out.extend((0..rows).map(|r| {
        let row = &w[r * cols..(r + 1) * cols];
        bias.values()[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn apply(layer: &Layer, act: Act) -> Result<Act> {
    let mismatch = |act: &Act| layer.shape_err(format!("{} cannot take {}", layer.op.kind_name(), act.describe()));
    Ok(match (&layer.op, act) {
        (LayerOp::ReLU, Act::Map { c, h, w, data }) => Act::Map { c, h, w, data: data.into_iter().map(|v| v.max(0.0)).collect() },
        (LayerOp::ReLU, Act::Seq { len, dim, data }) => Act::Seq { len, dim, data: data.into_iter().map(|v| v.max(0.0)).collect() },
        (LayerOp::ReLU, Act::Vector(v)) => Act::Vector(v.into_iter().map(|v| v.max(0.0)).collect()),

        (LayerOp::Conv2D { kernel, bias }, Act::Map { c, h, w, data }) => {
            let [out_c, in_c, kh, kw] = [kernel.dims()[0], kernel.dims()[1], kernel.dims()[2], kernel.dims()[3]];
            if in_c != c || kh > h || kw > w {
                return Err(mismatch(&Act::Map { c, h, w, data }));
            }
            let (oh, ow) = (h - kh + 1, w - kw + 1);
            let k = kernel.values();
            let mut out = vec![0.0; out_c * oh * ow];
            for o in 0..out_c {
                for y in 0..oh {
                    for x in 0..ow {
                        let mut acc = bias.values()[o];
                        for i in 0..in_c {
                            for dy in 0..kh {
                                let krow = &k[((o * in_c + i) * kh + dy) * kw..][..kw];
                                let drow = &data[(i * h + y + dy) * w + x..][..kw];
                                acc += krow.iter().zip(drow).map(|(a, b)| a * b).sum::<f64>();
                            }
                        }
                        out[(o * oh + y) * ow + x] = acc;
                    }
                }
            }
            Act::Map { c: out_c, h: oh, w: ow, data: out }
        }

        (LayerOp::MaxPool2, Act::Map { c, h, w, data }) => {
            let (oh, ow) = (h / 2, w / 2);
            if oh == 0 || ow == 0 {
                return Err(mismatch(&Act::Map { c, h, w, data }));
            }
            let mut out = Vec::with_capacity(c * oh * ow);
            for ch in 0..c {
                for y in 0..oh {
                    for x in 0..ow {
                        let at = |dy: usize, dx: usize| data[(ch * h + 2 * y + dy) * w + 2 * x + dx];
                        out.push(at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1)));
                    }
                }
            }
            Act::Map { c, h: oh, w: ow, data: out }
        }

        (LayerOp::Flatten, Act::Map { data, .. }) | (LayerOp::Flatten, Act::Seq { data, .. }) => Act::Vector(data),
        (LayerOp::Flatten, Act::Vector(v)) => Act::Vector(v),

        (LayerOp::Dense { weight, bias }, Act::Vector(v)) => {
            if v.len() != weight.dims()[1] {
                return Err(mismatch(&Act::Vector(v)));
            }
            let mut out = Vec::with_capacity(weight.dims()[0]);
            dense(weight, bias, &v, &mut out);
            Act::Vector(out)
        }
        (LayerOp::Dense { weight, bias }, Act::Seq { len, dim, data }) => {
            if dim != weight.dims()[1] {
                return Err(mismatch(&Act::Seq { len, dim, data }));
            }
            let mut out = Vec::with_capacity(len * weight.dims()[0]);
            for step in data.chunks_exact(dim) {
                dense(weight, bias, step, &mut out);
            }
            Act::Seq { len, dim: weight.dims()[0], data: out }
        }

        (LayerOp::Lstm { w_ih, w_hh, bias }, Act::Seq { len, dim, data }) => {
            if dim != w_ih.dims()[1] {
                return Err(mismatch(&Act::Seq { len, dim, data }));
            }
            let hidden = w_hh.dims()[1];
            let mut h = vec![0.0; hidden];
            let mut c = vec![0.0; hidden];
            let mut zx = Vec::with_capacity(4 * hidden);
            let mut zh = Vec::with_capacity(4 * hidden);
            let zero = Tensor::zeros(vec![4 * hidden]);
            for step in data.chunks_exact(dim) {
                zx.clear();
                zh.clear();
                dense(w_ih, bias, step, &mut zx);
                dense(w_hh, &zero, &h, &mut zh);
                for j in 0..hidden {
                    let gate = |g: usize| zx[g * hidden + j] + zh[g * hidden + j];
                    let i = sigmoid(gate(0));
                    let f = sigmoid(gate(1));
                    let g = gate(2).tanh();
                    let o = sigmoid(gate(3));
                    c[j] = f * c[j] + i * g;
                    h[j] = o * c[j].tanh();
                }
            }
            Act::Vector(h)
        }

        (LayerOp::Softmax, Act::Vector(v)) => Act::Vector(softmax(&v)),
        (LayerOp::Softmax, Act::Seq { len, dim, data }) => Act::Seq {
            len,
            dim,
            data: data.chunks_exact(dim).flat_map(softmax).collect(),
        },

        (_, act) => return Err(mismatch(&act)),
    })
}

/// Per-frame spatial features, one row of width `m` per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFeatures {
    pub features: Tensor,
}

impl SpatialFeatures {
    pub fn frames(&self) -> usize {
        self.features.dims()[0]
    }

    pub fn dim(&self) -> usize {
        self.features.dims()[1]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let m = self.dim();
        &self.features.values()[t * m..(t + 1) * m]
    }

    /// Copy with row `t` replaced.
    pub fn with_row(&self, t: usize, row: &[f64]) -> Result<Self> {
        let m = self.dim();
        if row.len() != m || t >= self.frames() {
            return Err(Error::ShapeMismatch(format!("row {t} of width {} for {}x{m} features", row.len(), self.frames())));
        }
        let mut values = self.features.values().to_vec();
        values[t * m..(t + 1) * m].copy_from_slice(row);
        Ok(Self { features: Tensor::new(self.features.dims().to_vec(), values)? })
    }
}

/// Score whose increase pushes a video towards misclassification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `max_{c ≠ label} z_c − z_label` on raw logits.
    #[default]
    LogitDiscrepancy,
    /// Categorical cross-entropy of the label.
    CrossEntropy,
}

impl Objective {
    pub fn evaluate(self, logits: &[f64], label: usize) -> f64 {
        match self {
            Objective::LogitDiscrepancy => {
                let rival = logits
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != label)
                    .map(|(_, &z)| z)
                    .fold(f64::NEG_INFINITY, f64::max);
                rival - logits[label]
            }
            Objective::CrossEntropy => cross_entropy(logits, label),
        }
    }
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    (lse - logits[label]).max(0.0)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A CNN + RNN classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    conv_part: Vec<Layer>,
    rec_part: Vec<Layer>,
    classes: Vec<String>,
}

impl Network {
    pub fn new(conv_part: Vec<Layer>, rec_part: Vec<Layer>, classes: Vec<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 classes, got {}", classes.len())));
        }
        for layer in conv_part.iter().chain(&rec_part) {
            layer.check_params()?;
        }
        if let Some(l) = conv_part.iter().find(|l| matches!(l.op, LayerOp::Lstm { .. })) {
            return Err(l.shape_err("LSTM is not allowed in the per-frame part"));
        }
        if let Some(l) = rec_part.iter().find(|l| matches!(l.op, LayerOp::Conv2D { .. } | LayerOp::MaxPool2)) {
            return Err(l.shape_err("spatial layers are not allowed in the recurrent part"));
        }
        // Adjacent linear layers must agree on widths. Flatten over a sequence
        // changes width in a frame-count dependent way, so the chain restarts.
        let mut width: Option<usize> = None;
        for layer in conv_part.iter().chain(&rec_part) {
            if let Some((input, output)) = layer.io_widths() {
                if let Some(w) = width {
                    if w != input {
                        return Err(layer.shape_err(format!("expects width {input}, previous layer produces {w}")));
                    }
                }
                width = Some(output);
            } else if matches!(layer.op, LayerOp::Flatten) {
                width = None;
            }
        }
        let last_linear = rec_part.iter().rev().find_map(|l| l.io_widths().map(|(_, o)| (l, o)));
        match last_linear {
            Some((l, out)) if out != classes.len() => {
                return Err(l.shape_err(format!("produces {out} outputs for {} classes", classes.len())))
            }
            None => return Err(Error::InvalidConfig("recurrent part has no output layer".into())),
            _ => {}
        }
        Ok(Self { conv_part, rec_part, classes })
    }

    pub fn conv_part(&self) -> &[Layer] {
        &self.conv_part
    }

    pub fn rec_part(&self) -> &[Layer] {
        &self.rec_part
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// Whether the last layer is a softmax (so logits are its input).
    pub fn ends_in_softmax(&self) -> bool {
        matches!(self.rec_part.last().map(|l| &l.op), Some(LayerOp::Softmax))
    }

    fn logit_layers(&self) -> &[Layer] {
        if self.ends_in_softmax() {
            &self.rec_part[..self.rec_part.len() - 1]
        } else {
            &self.rec_part
        }
    }

    /// η row for one `[h, w, ch]` frame given as flat channel-last values.
    pub fn frame_features(&self, frame: &[f64], h: usize, w: usize, ch: usize) -> Result<Vec<f64>> {
        if frame.len() != h * w * ch {
            return Err(Error::ShapeMismatch(format!("frame has {} values, expected {h}x{w}x{ch}", frame.len())));
        }
        let mut data = vec![0.0; frame.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    data[(c * h + y) * w + x] = frame[(y * w + x) * ch + c];
                }
            }
        }
        let mut act = Act::Map { c: ch, h, w, data };
        for layer in &self.conv_part {
            act = apply(layer, act)?;
        }
        match act {
            Act::Vector(v) => Ok(v),
            Act::Map { data, .. } => Ok(data),
            Act::Seq { .. } => unreachable!("per-frame part never builds sequences"),
        }
    }

    pub fn spatial_features(&self, v: &Video) -> Result<SpatialFeatures> {
        let (h, w, ch) = (v.height(), v.width(), v.channels());
        let rows = (0..v.frames())
            .into_par_iter()
            .map(|t| self.frame_features(v.frame_values(t), h, w, ch))
            .collect::<Result<Vec<_>>>()?;
        let m = rows[0].len();
        Ok(SpatialFeatures {
            features: Tensor::new(vec![rows.len(), m], rows.concat())?,
        })
    }

    /// Raw logits from a feature sequence (trailing softmax excluded).
    pub fn logits_from_features(&self, eta: &SpatialFeatures) -> Result<Vec<f64>> {
        let mut act = Act::Seq {
            len: eta.frames(),
            dim: eta.dim(),
            data: eta.features.values().to_vec(),
        };
        for layer in self.logit_layers() {
            act = apply(layer, act)?;
        }
        match act {
            Act::Vector(v) if v.len() == self.classes.len() => Ok(v),
            other => Err(Error::ShapeMismatch(format!(
                "network output is {} but there are {} classes",
                other.describe(),
                self.classes.len()
            ))),
        }
    }

    pub fn logits(&self, v: &Video) -> Result<Vec<f64>> {
        self.logits_from_features(&self.spatial_features(v)?)
    }

    /// `N(v, c)` for every class: softmax probabilities when the network ends
    /// in a softmax, raw outputs otherwise.
    pub fn confidences(&self, v: &Video) -> Result<Vec<f64>> {
        let z = self.logits(v)?;
        Ok(if self.ends_in_softmax() { softmax(&z) } else { z })
    }

    pub fn classify(&self, v: &Video) -> Result<usize> {
        Ok(argmax(&self.logits(v)?))
    }

    /// Categorical cross-entropy `−log softmax(z)[label]`.
    pub fn loss(&self, v: &Video, label: usize) -> Result<f64> {
        self.check_label(label)?;
        Ok(cross_entropy(&self.logits(v)?, label))
    }

    pub fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.classes.len() {
            return Err(Error::LabelOutOfRange { label, classes: self.classes.len() });
        }
        Ok(())
    }
}
