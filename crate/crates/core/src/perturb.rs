//! Flow-space manipulations on the τ-grid, grid widths, confidence margins and
//! the safe-radius error interval.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Component, FlowSequence};
use crate::net::{lipschitz_upper, Network};
use crate::tensor::{NormKind, Video};

/// One manipulable flow dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DimKey {
    pub flow: usize,
    pub pixel: usize,
    pub component: Component,
}

impl fmt::Display for DimKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.component {
            Component::U => 'u',
            Component::V => 'v',
        };
        write!(f, "{}:{}:{c}", self.flow, self.pixel)
    }
}

/// `±τ` on a single flow component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomicMove {
    pub flow: usize,
    pub pixel: usize,
    pub component: Component,
    /// `+1` or `−1`.
    pub sign: i8,
}

impl AtomicMove {
    pub fn key(&self) -> DimKey {
        DimKey { flow: self.flow, pixel: self.pixel, component: self.component }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionEntry {
    #[serde(flatten)]
    pub key: DimKey,
    pub multiplier: i64,
}

/// Integer multipliers `Θ` of `τ` per flow dimension. Zero entries are never
/// stored, so equal grid points have equal instructions.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<InstructionEntry>", into = "Vec<InstructionEntry>")]
pub struct Instruction {
    targets: BTreeMap<DimKey, i64>,
}

impl From<Vec<InstructionEntry>> for Instruction {
    fn from(entries: Vec<InstructionEntry>) -> Self {
        let mut ins = Instruction::new();
        for e in entries {
            ins.add(e.key, e.multiplier);
        }
        ins
    }
}

impl From<Instruction> for Vec<InstructionEntry> {
    fn from(ins: Instruction) -> Self {
        ins.targets.into_iter().map(|(key, multiplier)| InstructionEntry { key, multiplier }).collect()
    }
}

impl Instruction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &DimKey) -> i64 {
        self.targets.get(key).copied().unwrap_or(0)
    }

    pub fn add(&mut self, key: DimKey, delta: i64) {
        let v = self.get(&key) + delta;
        if v == 0 {
            self.targets.remove(&key);
        } else {
            self.targets.insert(key, v);
        }
    }

    pub fn with_move(&self, m: &AtomicMove) -> Self {
        let mut out = self.clone();
        out.add(m.key(), m.sign as i64);
        out
    }

    /// Pointwise sum.
    pub fn plus(&self, other: &Instruction) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.targets {
            out.add(*k, *v);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DimKey, &i64)> {
        self.targets.iter()
    }

    /// Number of non-zero dimensions.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Total atomic moves needed to reach this grid point.
    pub fn moves(&self) -> u64 {
        self.targets.values().map(|v| v.unsigned_abs()).sum()
    }

    /// `‖Θ‖_p · τ`, the flow-space distance of the grid point from the origin.
    pub fn distance(&self, p: NormKind, tau: f64) -> f64 {
        p.norm(self.targets.values().map(|&v| v as f64)) * tau
    }

    pub fn validate_for(&self, ps: &FlowSequence) -> Result<()> {
        for k in self.targets.keys() {
            if k.flow >= ps.len() || k.pixel >= ps.pixels() {
                return Err(Error::IndexOutOfRange(format!(
                    "dimension {k} outside {} flows of {} pixels",
                    ps.len(),
                    ps.pixels()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.targets.iter().map(|(k, v)| format!("{k}={v:+}")).collect();
        write!(f, "{{{}}}", parts.join(";"))
    }
}

/// `p_t[i] + Θ(i)·τ` on targeted components, everything else untouched.
pub fn apply_manipulation(ps: &FlowSequence, ins: &Instruction, tau: f64) -> Result<FlowSequence> {
    ins.validate_for(ps)?;
    if ins.is_empty() {
        return Ok(ps.clone());
    }
    let mut flat = ps.flat_values();
    for (k, &m) in ins.iter() {
        let idx = (k.flow * ps.pixels() + k.pixel) * 2 + matches!(k.component, Component::V) as usize;
        flat[idx] += m as f64 * tau;
    }
    ps.from_flat(flat)
}

/// Grid width `d̃(L^p, τ)` over `dim_count` manipulable dimensions.
pub fn grid_width(p: NormKind, tau: f64, dim_count: usize) -> f64 {
    match p {
        NormKind::L1 => dim_count as f64 * tau,
        NormKind::L2 => (dim_count as f64).sqrt() * tau,
        NormKind::Linf => tau,
    }
}

/// Inverse of [`grid_width`] in `tau`.
pub fn tau_for_width(p: NormKind, width: f64, dim_count: usize) -> f64 {
    width / grid_width(p, 1.0, dim_count)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau: f64,
    pub norm: NormKind,
    pub radius: f64,
    pub dim_count: usize,
}

impl GridSpec {
    pub fn new(tau: f64, norm: NormKind, radius: f64, dim_count: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {radius}")));
        }
        if dim_count == 0 {
            return Err(Error::NoManipulableFlows);
        }
        Ok(Self { tau, norm, radius, dim_count })
    }

    pub fn width(&self) -> f64 {
        grid_width(self.norm, self.tau, self.dim_count)
    }
}

/// Top logit minus the runner-up.
pub fn margin_from_logits(logits: &[f64]) -> f64 {
    let k = crate::net::argmax(logits);
    logits
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != k)
        .map(|(_, &z)| logits[k] - z)
        .fold(f64::INFINITY, f64::min)
}

pub fn min_confidence_margin(net: &Network, v: &Video) -> Result<f64> {
    Ok(margin_from_logits(&net.logits(v)?))
}

/// Input-space radius within which the decision provably cannot change.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBound {
    pub margin: f64,
    pub lipschitz_sum: f64,
    /// `margin / lipschitz_sum`.
    pub input_width: f64,
}

impl TauBound {
    /// Flow-space `τ`: the input width divided by `kappa`, read as a grid
    /// width over `dim_count` dimensions and inverted.
    pub fn flow_tau(&self, kappa: f64, p: NormKind, dim_count: usize) -> f64 {
        tau_for_width(p, self.input_width / kappa, dim_count)
    }
}

pub fn tau_bound(net: &Network, v: &Video, p: NormKind) -> Result<TauBound> {
    let logits = net.logits(v)?;
    let k = crate::net::argmax(&logits);
    let lips: Vec<f64> = (0..net.num_classes()).map(|c| lipschitz_upper(net, c, p, v.frames())).collect();
    let lipschitz_sum = (0..lips.len()).filter(|&c| c != k).map(|c| lips[k] + lips[c]).fold(0.0, f64::max);
    if lipschitz_sum == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    let margin = margin_from_logits(&logits);
    Ok(TauBound { margin, lipschitz_sum, input_width: margin / lipschitz_sum })
}

/// `[fmsr − d̃/2, fmsr]` with the lower end clamped at zero.
pub fn msr_interval(fmsr: f64, spec: &GridSpec) -> (f64, f64) {
    ((fmsr - spec.width() / 2.0).max(0.0), fmsr)
}
