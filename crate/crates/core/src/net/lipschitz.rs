//! Certified per-class Lipschitz upper bounds.
//!
//! The bound for class `c` is a product of per-layer operator-norm bounds.
//! Dense and convolution layers use exact induced norms for L1 and L∞ and a
//! certified spectral bound for L2. The LSTM is unrolled over the sequence
//! with gate derivatives bounded by 1/4 (sigmoid) and 1 (tanh), and the last
//! logit layer contributes only the dual norm of row `c`.

use crate::net::{LayerOp, Network};
use crate::tensor::{NormKind, Tensor};

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 200;
const SQUARINGS: usize = 10;

fn mat_rows(w: &[f64], rows: usize, cols: usize) -> impl Iterator<Item = &[f64]> {
    (0..rows).map(move |r| &w[r * cols..(r + 1) * cols])
}

/// Gram matrix of the smaller side, so its top eigenvalue is σ_max².
fn gram(w: &[f64], rows: usize, cols: usize) -> (Vec<f64>, usize) {
    if rows <= cols {
        let mut g = vec![0.0; rows * rows];
        for i in 0..rows {
            for j in i..rows {
                let v: f64 = w[i * cols..(i + 1) * cols].iter().zip(&w[j * cols..(j + 1) * cols]).map(|(a, b)| a * b).sum();
                g[i * rows + j] = v;
                g[j * rows + i] = v;
            }
        }
        (g, rows)
    } else {
        let mut g = vec![0.0; cols * cols];
        for row in mat_rows(w, rows, cols) {
            for i in 0..cols {
                for j in i..cols {
                    g[i * cols + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..cols {
            for j in 0..i {
                g[i * cols + j] = g[j * cols + i];
            }
        }
        (g, cols)
    }
}

/// Power-iteration estimate of σ_max (a lower bound unless fully converged).
pub fn power_iteration(w: &[f64], rows: usize, cols: usize) -> f64 {
    let (g, n) = gram(w, rows, cols);
    // Deterministic start with a little asymmetry so it is not orthogonal to
    // the top eigenvector by accident.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let norm = NormKind::L2.norm(x.iter().copied());
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let y: Vec<f64> = mat_rows(&g, n, n).map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let next: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        x = y;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Certified upper bound on the spectral norm of a `[rows, cols]` matrix.
///
/// Uses `λ_max(G) ≤ ‖G^k‖_F^{1/k}` for the Gram matrix `G` with `k = 2^10`,
/// intersected with the Frobenius norm. Never below the power-iteration
/// estimate.
pub fn spectral_norm_matrix(w: &[f64], rows: usize, cols: usize) -> f64 {
    let fro = NormKind::L2.norm(w.iter().copied());
    if fro == 0.0 {
        return 0.0;
    }
    let (mut g, n) = gram(w, rows, cols);
    // Track G^(2^k) = scale · M with M normalised each step.
    let mut log_scale = 0.0f64;
    for _ in 0..SQUARINGS {
        let f = NormKind::L2.norm(g.iter().copied());
        if f == 0.0 {
            return 0.0;
        }
        g.iter_mut().for_each(|v| *v /= f);
        log_scale = 2.0 * (log_scale + f.ln());
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = g[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    sq[i * n + j] += a * g[k * n + j];
                }
            }
        }
        g = sq;
    }
    let f = NormKind::L2.norm(g.iter().copied());
    if f == 0.0 {
        return 0.0;
    }
    let k = (1u64 << SQUARINGS) as f64;
    let lambda = ((log_scale + f.ln()) / k).exp();
    let gelfand = lambda.sqrt() * (1.0 + 1e-9);
    gelfand.min(fro).max(power_iteration(w, rows, cols))
}

/// Certified spectral-norm bound of a rank-2 weight tensor.
pub fn spectral_norm(weight: &Tensor) -> f64 {
    let d = weight.dims();
    spectral_norm_matrix(weight.values(), d[0], d[1])
}

/// Induced `p → p` norm bound of a dense `[rows, cols]` matrix.
fn dense_norm(w: &[f64], rows: usize, cols: usize, p: NormKind) -> f64 {
    match p {
        NormKind::L1 => (0..cols)
            .map(|c| (0..rows).map(|r| w[r * cols + c].abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Linf => mat_rows(w, rows, cols)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::L2 => spectral_norm_matrix(w, rows, cols),
    }
}

/// Valid-padding stride-1 convolution, any input size.
fn conv_norm(kernel: &Tensor, p: NormKind) -> f64 {
    let [out_c, in_c, kh, kw] = [kernel.dims()[0], kernel.dims()[1], kernel.dims()[2], kernel.dims()[3]];
    let k = kernel.values();
    let patch = kh * kw;
    match p {
        // Each input value feeds at most kh·kw outputs per output channel.
        NormKind::L1 => (0..in_c)
            .map(|i| {
                (0..out_c)
                    .map(|o| k[(o * in_c + i) * patch..][..patch].iter().map(|v| v.abs()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max),
        NormKind::Linf => dense_norm(k, out_c, in_c * patch, NormKind::Linf),
        // Every input value appears in at most kh·kw patches.
        NormKind::L2 => (patch as f64).sqrt() * spectral_norm_matrix(k, out_c, in_c * patch),
    }
}

fn row_dual_norm(weight: &Tensor, row: usize, p: NormKind) -> f64 {
    let cols = weight.dims()[1];
    p.dual().norm(weight.values()[row * cols..(row + 1) * cols].iter().copied())
}

fn lstm_gain(w_ih: &Tensor, w_hh: &Tensor, frames: usize, p: NormKind) -> f64 {
    let hidden = w_hh.dims()[1];
    let input = w_ih.dims()[1];
    let block = |w: &Tensor, cols: usize, g: usize| dense_norm(&w.values()[g * hidden * cols..(g + 1) * hidden * cols], hidden, cols, p);
    let a: Vec<f64> = (0..4).map(|g| block(w_ih, input, g)).collect();
    let b: Vec<f64> = (0..4).map(|g| block(w_hh, hidden, g)).collect();

    // Bounds are linear in the per-step input changes e_1..e_T; track the
    // coefficient vectors of ‖Δh_t‖ and ‖Δc_t‖.
    let mut dh = vec![0.0; frames];
    let mut dc = vec![0.0; frames];
    for t in 0..frames {
        // ‖Δz_g‖ ≤ a_g e_t + b_g ‖Δh_{t−1}‖
        let dz = |g: usize| {
            let mut v: Vec<f64> = dh.iter().map(|x| b[g] * x).collect();
            v[t] += a[g];
            v
        };
        let (zi, zf, zg, zo) = (dz(0), dz(1), dz(2), dz(3));
        // |c_{t−1}| ≤ t−1 elementwise since |f|, |i·g| ≤ 1.
        let c_prev = t as f64;
        for k in 0..frames {
            dc[k] = 0.25 * c_prev * zf[k] + dc[k] + 0.25 * zi[k] + zg[k];
        }
        for k in 0..frames {
            dh[k] = 0.25 * zo[k] + dc[k];
        }
    }
    p.dual().norm(dh)
}

/// Certified upper bound on the Lipschitz constant of `v ↦ z_c(v)` (the raw
/// logit of class `c`) under norm `p`, for clips of `frames` frames.
pub fn lipschitz_upper(net: &Network, class: usize, p: NormKind, frames: usize) -> f64 {
    let mut gain = 1.0;
    for layer in net.conv_part() {
        gain *= match &layer.op {
            LayerOp::Conv2D { kernel, .. } => conv_norm(kernel, p),
            LayerOp::Dense { weight, .. } => dense_norm(weight.values(), weight.dims()[0], weight.dims()[1], p),
            _ => 1.0,
        };
    }
    let layers = if net.ends_in_softmax() {
        &net.rec_part()[..net.rec_part().len() - 1]
    } else {
        net.rec_part()
    };
    for (idx, layer) in layers.iter().enumerate() {
        let last = idx + 1 == layers.len();
        gain *= match &layer.op {
            LayerOp::Dense { weight, .. } if last => row_dual_norm(weight, class, p),
            LayerOp::Dense { weight, .. } => dense_norm(weight.values(), weight.dims()[0], weight.dims()[1], p),
            LayerOp::Lstm { w_ih, w_hh, .. } => lstm_gain(w_ih, w_hh, frames, p),
            _ => 1.0,
        };
    }
    gain
}
