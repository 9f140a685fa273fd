//! Finite-difference saliency of pixels, combining how much a pixel moves the
//! flow with how much it moves the objective per unit of feature change.

use rayon::prelude::*;

use crate::error::Result;
use crate::flow::{extract_flow, FlowField};
use crate::net::{Network, Objective, SpatialFeatures};
use crate::tensor::{NormKind, Tensor, Video};

/// Entries whose denominator falls below this are set to zero.
const ZERO_DENOM: f64 = 1e-12;

/// Per-flow saliency maps `[h, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMap {
    pub maps: Vec<Tensor>,
}

impl GradientMap {
    /// Total absolute saliency of flow `t`.
    pub fn mass(&self, t: usize) -> f64 {
        self.maps[t].values().iter().map(|g| g.abs()).sum()
    }
}

/// Frame `t` with every channel of `pixel` moved by `step` (downwards when
/// upwards would leave `[0, 1]`).
fn perturbed_frame(v: &Video, t: usize, pixel: usize, step: f64) -> Vec<f64> {
    let ch = v.channels();
    let mut f = v.frame_values(t).to_vec();
    for x in &mut f[pixel * ch..(pixel + 1) * ch] {
        *x = if *x + step <= 1.0 { *x + step } else { *x - step };
    }
    f
}

fn frame_tensor(v: &Video, values: Vec<f64>) -> Tensor {
    Tensor::new(vec![v.height(), v.width(), v.channels()], values).expect("frame dims are valid")
}

fn flow_norm(f: &FlowField, p: NormKind) -> f64 {
    p.norm(f.u.values().iter().chain(f.v.values()).copied())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den.abs() < ZERO_DENOM {
        0.0
    } else {
        num / den
    }
}

/// `‖F_{m,n} − F‖_p / ‖δp_{m,n}‖_p` for each `pixel` of frame `t`, where
/// `δp_{m,n}` is the flow from `F` to the perturbed frame.
pub fn features_wrt_flow_frame(v: &Video, t: usize, step: f64, p: NormKind, pixels: &[usize]) -> Result<Vec<f64>> {
    let original = v.frame(t);
    pixels
        .par_iter()
        .map(|&px| {
            let pert = perturbed_frame(v, t, px, step);
            let num = crate::tensor::slice_distance(original.values(), &pert, p);
            let dp = extract_flow(&original, &frame_tensor(v, pert))?;
            Ok(ratio(num, flow_norm(&dp, p)))
        })
        .collect()
}

/// Objective change per unit of feature change for each `pixel` of frame `t`.
pub fn loss_wrt_features_frame(
    net: &Network,
    v: &Video,
    eta: &SpatialFeatures,
    t: usize,
    step: f64,
    label: usize,
    objective: Objective,
    p: NormKind,
    pixels: &[usize],
) -> Result<Vec<f64>> {
    let base = objective.evaluate(&net.logits_from_features(eta)?, label);
    pixels
        .par_iter()
        .map(|&px| {
            let pert = perturbed_frame(v, t, px, step);
            let row = net.frame_features(&pert, v.height(), v.width(), v.channels())?;
            let den = crate::tensor::slice_distance(&row, eta.row(t), p);
            let eta2 = eta.with_row(t, &row)?;
            let num = objective.evaluate(&net.logits_from_features(&eta2)?, label) - base;
            Ok(ratio(num, den))
        })
        .collect()
}

fn all_pixels(v: &Video) -> Vec<usize> {
    (0..v.height() * v.width()).collect()
}

fn as_map(v: &Video, vals: Vec<f64>) -> Tensor {
    Tensor::new(vec![v.height(), v.width()], vals).expect("finite saliency")
}

/// Flow-sensitivity factor for every frame.
pub fn grad_features_wrt_flow(v: &Video, tau: f64, p: NormKind) -> Result<Vec<Tensor>> {
    let px = all_pixels(v);
    (0..v.frames()).map(|t| Ok(as_map(v, features_wrt_flow_frame(v, t, tau, p, &px)?))).collect()
}

/// Objective-sensitivity factor for every frame.
pub fn grad_loss_wrt_features(
    net: &Network,
    v: &Video,
    tau: f64,
    label: usize,
    objective: Objective,
    p: NormKind,
) -> Result<Vec<Tensor>> {
    let eta = net.spatial_features(v)?;
    let px = all_pixels(v);
    (0..v.frames())
        .map(|t| Ok(as_map(v, loss_wrt_features_frame(net, v, &eta, t, tau, label, objective, p, &px)?)))
        .collect()
}

/// Saliency for each flow `t` from frame `t + 1`, the frame that flow shapes
/// when imposed. Only `pixels` of the flows in `flows` are computed; the rest
/// stay zero.
#[allow(clippy::too_many_arguments)]
pub fn flow_saliency(
    net: &Network,
    v: &Video,
    step: f64,
    label: usize,
    objective: Objective,
    p: NormKind,
    flows: &[usize],
    pixels: &[usize],
) -> Result<GradientMap> {
    let eta = net.spatial_features(v)?;
    let n = v.height() * v.width();
    let mut maps = vec![as_map(v, vec![0.0; n]); v.frames() - 1];
    for &t in flows {
        let a = features_wrt_flow_frame(v, t + 1, step, p, pixels)?;
        let b = loss_wrt_features_frame(net, v, &eta, t + 1, step, label, objective, p, pixels)?;
        let mut vals = vec![0.0; n];
        for (i, &px) in pixels.iter().enumerate() {
            vals[px] = a[i] * b[i];
        }
        maps[t] = as_map(v, vals);
    }
    Ok(GradientMap { maps })
}
