use super::{luminance, FlowExtractor, FlowField, GradientField};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Horn–Schunck variational flow with Jacobi updates.
///
/// Intensities are rescaled from `[0, 1]` to `[0, 255]` before the gradients
/// are taken so that `alpha_sq` has its customary magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct HornSchunck {
    pub alpha_sq: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub intensity_scale: f64,
}

impl Default for HornSchunck {
    fn default() -> Self {
        Self { alpha_sq: 100.0, max_iters: 200, tolerance: 1e-4, intensity_scale: 255.0 }
    }
}

/// Outcome of one run, including the per-iteration data-term residual.
#[derive(Clone, Debug)]
pub struct HsRun {
    pub flow: FlowField,
    pub gradients: GradientField,
    /// Mean `|fx·u + fy·v + ft|` after each iteration.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn clamp_at(img: &[f64], h: usize, w: usize, y: isize, x: isize) -> f64 {
    let y = y.clamp(0, h as isize - 1) as usize;
    let x = x.clamp(0, w as isize - 1) as usize;
    img[y * w + x]
}

/// 1/6 on the 4-neighbours and 1/12 on the diagonals, border replicated.
fn local_average(f: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    for y in 0..h as isize {
        for x in 0..w as isize {
            let at = |dy, dx| clamp_at(f, h, w, y + dy, x + dx);
            let edges = at(-1, 0) + at(1, 0) + at(0, -1) + at(0, 1);
            let diags = at(-1, -1) + at(-1, 1) + at(1, -1) + at(1, 1);
            out.push(edges / 6.0 + diags / 12.0);
        }
    }
    out
}

impl HornSchunck {
    pub fn gradients(&self, f1: &Tensor, f2: &Tensor) -> Result<GradientField> {
        let (h, w, a, b) = self.prepare(f1, f2)?;
        Ok(Self::gradients_of(h, w, &a, &b))
    }

    fn prepare(&self, f1: &Tensor, f2: &Tensor) -> Result<(usize, usize, Vec<f64>, Vec<f64>)> {
        if f1.dims() != f2.dims() {
            return Err(Error::ShapeMismatch(format!("frames {:?} and {:?}", f1.dims(), f2.dims())));
        }
        let (h, w, a) = luminance(f1)?;
        let (_, _, b) = luminance(f2)?;
        if h < 3 || w < 3 {
            return Err(Error::FrameTooSmall { h, w });
        }
        let s = self.intensity_scale;
        Ok((h, w, a.into_iter().map(|x| x * s).collect(), b.into_iter().map(|x| x * s).collect()))
    }

    fn gradients_of(h: usize, w: usize, a: &[f64], b: &[f64]) -> GradientField {
        let n = h * w;
        let (mut fx, mut fy, mut ft) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for y in 0..h as isize {
            for x in 0..w as isize {
                let dx = |img: &[f64]| (clamp_at(img, h, w, y, x + 1) - clamp_at(img, h, w, y, x - 1)) / 2.0;
                let dy = |img: &[f64]| (clamp_at(img, h, w, y + 1, x) - clamp_at(img, h, w, y - 1, x)) / 2.0;
                fx.push((dx(a) + dx(b)) / 2.0);
                fy.push((dy(a) + dy(b)) / 2.0);
                let p = y as usize * w + x as usize;
                ft.push(b[p] - a[p]);
            }
        }
        let t = |v| Tensor::new(vec![h, w], v).expect("finite gradients");
        GradientField { fx: t(fx), fy: t(fy), ft: t(ft) }
    }

    /// Run the iteration and keep diagnostics.
    pub fn run(&self, f1: &Tensor, f2: &Tensor) -> Result<HsRun> {
        let (h, w, a, b) = self.prepare(f1, f2)?;
        let g = Self::gradients_of(h, w, &a, &b);
        let (fx, fy, ft) = (g.fx.values(), g.fy.values(), g.ft.values());
        let n = h * w;
        let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
        let mut residuals = Vec::new();
        let mut iterations = 0;
        while iterations < self.max_iters {
            let (ub, vb) = (local_average(&u, h, w), local_average(&v, h, w));
            let mut change = 0f64;
            for p in 0..n {
                let k = (fx[p] * ub[p] + fy[p] * vb[p] + ft[p]) / (self.alpha_sq + fx[p] * fx[p] + fy[p] * fy[p]);
                let (nu, nv) = (ub[p] - fx[p] * k, vb[p] - fy[p] * k);
                change = change.max((nu - u[p]).abs()).max((nv - v[p]).abs());
                u[p] = nu;
                v[p] = nv;
            }
            iterations += 1;
            let res = (0..n).map(|p| (fx[p] * u[p] + fy[p] * v[p] + ft[p]).abs()).sum::<f64>() / n as f64;
            residuals.push(res);
            if change < self.tolerance {
                break;
            }
        }
        let flow = FlowField::new(
            Tensor::new(vec![h, w], u).expect("finite flow"),
            Tensor::new(vec![h, w], v).expect("finite flow"),
        )?;
        Ok(HsRun { flow, gradients: g, residuals, iterations })
    }
}

impl FlowExtractor for HornSchunck {
    fn extract(&self, f1: &Tensor, f2: &Tensor) -> Result<FlowField> {
        Ok(self.run(f1, f2)?.flow)
    }
}
