//! Dense optical flow: extraction, imposition onto frames, and decomposition.
//!
//! A flow `(u, v)` at pixel `(y, x)` of frame `t` says that content moves to
//! `(y + v, x + u)` in frame `t + 1`. Displacements are in pixels.

mod horn_schunck;
mod warp;

pub use horn_schunck::{HornSchunck, HsRun};
pub use warp::{bilinear, warp_backward};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Video};

/// Which displacement component of a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U,
    V,
}

/// One dense flow field.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Tensor,
    pub v: Tensor,
}

impl FlowField {
    pub fn new(u: Tensor, v: Tensor) -> Result<Self> {
        if u.rank() != 2 || u.dims() != v.dims() {
            return Err(Error::ShapeMismatch(format!("flow components {:?} and {:?}", u.dims(), v.dims())));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { u: Tensor::zeros(vec![h, w]), v: Tensor::zeros(vec![h, w]) }
    }

    pub fn height(&self) -> usize {
        self.u.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.u.dims()[1]
    }

    pub fn pixels(&self) -> usize {
        self.u.len()
    }

    pub fn component(&self, c: Component) -> &Tensor {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }
}

/// Per-pixel magnitude and direction (radians in `(−π, π]`, 0 where still).
pub fn magnitude_direction(f: &FlowField) -> (Tensor, Tensor) {
    let dims = f.u.dims().to_vec();
    let (mag, dir): (Vec<f64>, Vec<f64>) = f
        .u
        .values()
        .iter()
        .zip(f.v.values())
        .map(|(&u, &v)| {
            let m = u.hypot(v);
            let d = if m == 0.0 { 0.0 } else { v.atan2(u) };
            // atan2 yields −π for (negative u, −0.0); fold it onto +π.
            (m, if d == -std::f64::consts::PI { std::f64::consts::PI } else { d })
        })
        .unzip();
    (
        Tensor::new(dims.clone(), mag).expect("finite flow gives finite magnitude"),
        Tensor::new(dims, dir).expect("finite angle"),
    )
}

/// The `l − 1` flows of an `l`-frame clip.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSequence {
    flows: Vec<FlowField>,
}

impl FlowSequence {
    pub fn new(flows: Vec<FlowField>) -> Result<Self> {
        let first = flows.first().ok_or_else(|| Error::ShapeMismatch("empty flow sequence".into()))?;
        if flows.iter().any(|f| f.u.dims() != first.u.dims()) {
            return Err(Error::ShapeMismatch("flow fields differ in size".into()));
        }
        Ok(Self { flows })
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn flows(&self) -> &[FlowField] {
        &self.flows
    }

    pub fn flow(&self, t: usize) -> &FlowField {
        &self.flows[t]
    }

    pub fn height(&self) -> usize {
        self.flows[0].height()
    }

    pub fn width(&self) -> usize {
        self.flows[0].width()
    }

    pub fn pixels(&self) -> usize {
        self.flows[0].pixels()
    }

    pub fn get(&self, t: usize, pixel: usize, c: Component) -> f64 {
        self.flows[t].component(c).values()[pixel]
    }

    /// All components in `(flow, pixel, u/v)` order.
    pub fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.pixels() * 2);
        for f in &self.flows {
            for (u, v) in f.u.values().iter().zip(f.v.values()) {
                out.push(*u);
                out.push(*v);
            }
        }
        out
    }

    /// `[l − 1, h, w, 2]` tensor with channel 0 = u, channel 1 = v.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.len(), self.height(), self.width(), 2], self.flat_values())
            .expect("flow values are finite")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.dims();
        if d.len() != 4 || d[3] != 2 {
            return Err(Error::ShapeMismatch(format!("flow tensor must be [n, h, w, 2], got {d:?}")));
        }
        let (h, w) = (d[1], d[2]);
        let flows = t
            .values()
            .chunks_exact(h * w * 2)
            .map(|chunk| {
                let u = chunk.iter().step_by(2).copied().collect();
                let v = chunk.iter().skip(1).step_by(2).copied().collect();
                FlowField::new(Tensor::new(vec![h, w], u)?, Tensor::new(vec![h, w], v)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(flows)
    }

    /// Rebuild from flat values in [`flat_values`](Self::flat_values) order.
    pub fn from_flat(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_tensor(&Tensor::new(vec![self.len(), self.height(), self.width(), 2], values)?)
    }
}

/// Image-gradient triple used by gradient-based flow estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub fx: Tensor,
    pub fy: Tensor,
    pub ft: Tensor,
}

/// A dense optical-flow estimator between two `[h, w, ch]` frames.
pub trait FlowExtractor: Sync {
    fn extract(&self, f1: &Tensor, f2: &Tensor) -> Result<FlowField>;
}

/// Mean over channels of a `[h, w, ch]` (or `[h, w]`) frame.
pub fn luminance(frame: &Tensor) -> Result<(usize, usize, Vec<f64>)> {
    let d = frame.dims();
    let (h, w, ch) = match d {
        [h, w] => (*h, *w, 1),
        [h, w, ch] => (*h, *w, *ch),
        _ => return Err(Error::ShapeMismatch(format!("frame dims {d:?} are not [h, w, ch]"))),
    };
    let vals = frame.values();
    let lum = if ch == 1 {
        vals.to_vec()
    } else {
        vals.chunks_exact(ch).map(|px| px.iter().sum::<f64>() / ch as f64).collect()
    };
    Ok((h, w, lum))
}

/// Horn–Schunck flow with default parameters.
pub fn extract_flow(f1: &Tensor, f2: &Tensor) -> Result<FlowField> {
    HornSchunck::default().extract(f1, f2)
}

pub fn flow_sequence(v: &Video) -> Result<FlowSequence> {
    flow_sequence_with(&HornSchunck::default(), v)
}

pub fn flow_sequence_with(extractor: &dyn FlowExtractor, v: &Video) -> Result<FlowSequence> {
    if v.frames() < 2 {
        return Err(Error::InvalidVideo("need at least two frames".into()));
    }
    let flows = (0..v.frames() - 1)
        .into_par_iter()
        .map(|t| extractor.extract(&v.frame(t), &v.frame(t + 1)))
        .collect::<Result<Vec<_>>>()?;
    FlowSequence::new(flows)
}

/// Rebuild `v` so that its motion follows `target`: the first frame is kept
/// and each next frame is the previous rebuilt frame backward-warped along
/// the corresponding flow, clamped into `[0, 1]`.
pub fn impose_flow(v: &Video, target: &FlowSequence) -> Result<Video> {
    if target.len() != v.frames() - 1 || target.height() != v.height() || target.width() != v.width() {
        return Err(Error::ShapeMismatch(format!(
            "{} flows of {}x{} for a {}-frame {}x{} video",
            target.len(),
            target.height(),
            target.width(),
            v.frames(),
            v.height(),
            v.width()
        )));
    }
    let (h, w, ch) = (v.height(), v.width(), v.channels());
    let mut frames = Vec::with_capacity(v.frames());
    frames.push(v.frame_values(0).to_vec());
    for flow in target.flows() {
        let prev = frames.last().expect("seeded with frame 0");
        frames.push(warp_backward(prev, h, w, ch, flow));
    }
    v.with_values_clamped(frames.concat())
}
