//! Dense row-major tensors, videos, and L^p distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense tensor of finite `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidTensor(format!("zero-sized dimension in {dims:?}")));
        }
        let expected: usize = dims.iter().product();
        if expected != values.len() {
            return Err(Error::InvalidTensor(format!(
                "dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, values: vec![0.0; n] }
    }

    /// Rank-1 tensor.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same values under new dims with equal element count.
    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.values)
    }
}

/// The three distance metrics used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

    /// Norm of an iterator of values.
    pub fn norm<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        let iter = values.into_iter();
        match self {
            // Folding from +0.0 keeps the empty norm at +0.0 (a float `sum`
            // starts from −0.0).
            NormKind::L1 => iter.fold(0.0, |acc, v| acc + v.abs()),
            NormKind::L2 => iter.fold(0.0, |acc, v| acc + v * v).sqrt(),
            NormKind::Linf => iter.fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }

    /// Hölder conjugate: the norm `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" | "l_inf" | "inf" => Ok(NormKind::Linf),
            other => Err(Error::InvalidConfig(format!("unknown norm {other:?}"))),
        }
    }
}

/// `‖a − b‖_p` over flat values.
pub fn lp_distance(a: &Tensor, b: &Tensor, p: NormKind) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(slice_distance(&a.values, &b.values, p))
}

pub(crate) fn slice_distance(a: &[f64], b: &[f64], p: NormKind) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    p.norm(a.iter().zip(b).map(|(x, y)| x - y))
}

/// Inclusive ball membership: `‖center − candidate‖_p ≤ d`.
pub fn in_norm_ball(center: &Tensor, candidate: &Tensor, p: NormKind, d: f64) -> Result<bool> {
    Ok(lp_distance(center, candidate, p)? <= d)
}

/// A clip of `l ≥ 2` frames, stored `[l, h, w, ch]` with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    data: Tensor,
}

impl Video {
    pub fn new(data: Tensor) -> Result<Self> {
        if data.rank() != 4 {
            return Err(Error::InvalidVideo(format!("expected rank 4, got dims {:?}", data.dims())));
        }
        if data.dims()[0] < 2 {
            return Err(Error::InvalidVideo("need at least two frames".into()));
        }
        if let Some(pos) = data.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidVideo(format!(
                "value {} at flat index {pos} outside [0, 1]",
                data.values()[pos]
            )));
        }
        Ok(Self { data })
    }

    /// Build from `[h, w, ch]` frames of identical shape.
    pub fn from_frames(frames: &[Tensor]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidVideo("no frames".into()))?;
        if first.rank() != 3 {
            return Err(Error::InvalidVideo(format!("frame dims {:?} are not [h, w, ch]", first.dims())));
        }
        let mut values = Vec::with_capacity(first.len() * frames.len());
        for f in frames {
            if f.dims() != first.dims() {
                return Err(Error::ShapeMismatch(format!("frame {:?} vs {:?}", f.dims(), first.dims())));
            }
            values.extend_from_slice(f.values());
        }
        let mut dims = vec![frames.len()];
        dims.extend_from_slice(first.dims());
        Self::new(Tensor::new(dims, values)?)
    }

    pub fn frames(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.data.dims()[2]
    }

    pub fn channels(&self) -> usize {
        self.data.dims()[3]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn frame_len(&self) -> usize {
        self.height() * self.width() * self.channels()
    }

    pub fn frame_values(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data.values()[t * n..(t + 1) * n]
    }

    /// Frame `t` as a `[h, w, ch]` tensor.
    pub fn frame(&self, t: usize) -> Tensor {
        Tensor {
            dims: vec![self.height(), self.width(), self.channels()],
            values: self.frame_values(t).to_vec(),
        }
    }

    /// Apply `f` to every value, clamping the result into `[0, 1]`.
    pub fn map_clamped(&self, f: impl Fn(f64) -> f64) -> Video {
        let values = self.data.values().iter().map(|&v| f(v).clamp(0.0, 1.0)).collect();
        Video {
            data: Tensor { dims: self.data.dims().to_vec(), values },
        }
    }

    /// Replace the values wholesale; they are clamped into `[0, 1]`.
    pub fn with_values_clamped(&self, values: Vec<f64>) -> Result<Video> {
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Video::new(Tensor::new(self.data.dims().to_vec(), values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let a = t(&[0.3, -1.0, 2.5]);
        for p in NormKind::ALL {
            assert_eq!(lp_distance(&a, &a, p).unwrap(), 0.0);
        }
        assert_eq!(lp_distance(&t(&[0.0, 0.0]), &t(&[3.0, 4.0]), NormKind::L2).unwrap(), 5.0);
        assert_eq!(lp_distance(&t(&[1.0, 2.0]), &t(&[2.0, 4.0]), NormKind::L1).unwrap(), 3.0);
        assert_eq!(lp_distance(&t(&[1.0, 2.0]), &t(&[2.0, 4.0]), NormKind::Linf).unwrap(), 2.0);
    }

    #[test]
    fn distance_shape_mismatch() {
        let err = lp_distance(&t(&[1.0]), &t(&[1.0, 2.0]), NormKind::L1).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
    }

    #[test]
    fn ball_boundary_is_inclusive() {
        let c = t(&[0.0, 0.0]);
        let x = t(&[3.0, 4.0]);
        assert!(in_norm_ball(&c, &c, NormKind::L2, 0.0).unwrap());
        assert!(!in_norm_ball(&c, &x, NormKind::L2, 4.9).unwrap());
        assert!(in_norm_ball(&c, &x, NormKind::L2, 5.0).unwrap());
    }

    #[test]
    fn rejects_non_finite_and_bad_counts() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn video_invariants() {
        let one = Tensor::new(vec![1, 2, 2, 1], vec![0.5; 4]).unwrap();
        assert!(Video::new(one).is_err());
        let out = Tensor::new(vec![2, 1, 1, 1], vec![0.5, 1.5]).unwrap();
        assert!(Video::new(out).is_err());
        let ok = Video::new(Tensor::new(vec![2, 1, 2, 1], vec![0.0, 0.25, 0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(ok.frame(1).values(), &[0.5, 1.0]);
        assert_eq!(Video::from_frames(&[ok.frame(0), ok.frame(1)]).unwrap(), ok);
    }

    fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            let v = || prop::collection::vec(-10.0f64..10.0, n);
            (v(), v(), v())
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality((a, b, c) in triple()) {
            let (a, b, c) = (t(&a), t(&b), t(&c));
            for p in NormKind::ALL {
                let ab = lp_distance(&a, &b, p).unwrap();
                let bc = lp_distance(&b, &c, p).unwrap();
                let ac = lp_distance(&a, &c, p).unwrap();
                prop_assert!(ac <= ab + bc + 1e-9);
            }
        }

        #[test]
        fn norm_ordering((a, b, _c) in triple()) {
            let (a, b) = (t(&a), t(&b));
            let inf = lp_distance(&a, &b, NormKind::Linf).unwrap();
            let two = lp_distance(&a, &b, NormKind::L2).unwrap();
            let one = lp_distance(&a, &b, NormKind::L1).unwrap();
            prop_assert!(inf <= two + 1e-12);
            prop_assert!(two <= one + 1e-12);
        }

        #[test]
        fn permutation_invariance((a, b, _c) in triple(), seed in any::<u64>()) {
            let n = a.len();
            let mut perm: Vec<usize> = (0..n).collect();
            // Fisher-Yates with a tiny LCG so the permutation follows the seed.
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
            for p in NormKind::ALL {
                let d0 = lp_distance(&t(&a), &t(&b), p).unwrap();
                let d1 = lp_distance(&t(&pa), &t(&pb), p).unwrap();
                prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
            }
        }
    }
}
