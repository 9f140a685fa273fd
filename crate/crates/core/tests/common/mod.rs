#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use flowcert::flow::{impose_flow, FlowSequence};
use flowcert::game::{Game, GameConfig};
use flowcert::net::{nnwf, Layer, LayerOp, Network};
use flowcert::perturb::DimKey;
use flowcert::{vten, NormKind, Tensor, Video};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_net() -> Network {
    nnwf::load_weights(fixtures_dir().join("tiny.nnwf")).expect("fixture weights load")
}

#[derive(Deserialize)]
pub struct Fixture {
    pub video: String,
    pub logits: Vec<f64>,
}

pub fn fixtures() -> Vec<(Video, Vec<f64>)> {
    let text = std::fs::read_to_string(fixtures_dir().join("fixtures.json")).unwrap();
    let list: Vec<Fixture> = serde_json::from_str(&text).unwrap();
    list.into_iter()
        .map(|f| (vten::read_video(fixtures_dir().join(&f.video)).unwrap(), f.logits))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng, dims: Vec<usize>, std: f64) -> Tensor {
    let n = dims.iter().product();
    let d = Normal::new(0.0, std).unwrap();
    Tensor::new(dims, (0..n).map(|_| d.sample(rng)).collect()).unwrap()
}

fn dense(name: &str, rng: &mut ChaCha8Rng, out: usize, inp: usize, std: f64) -> Layer {
    Layer::new(name, LayerOp::Dense { weight: gaussian(rng, vec![out, inp], std), bias: gaussian(rng, vec![out], std) })
        .unwrap()
}

fn classes(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("c{c}")).collect()
}

/// Per-frame dense embedding with ReLU, then an LSTM and a two-way logit
/// layer.
pub fn random_lstm_net(rng: &mut ChaCha8Rng, frame_len: usize, m: usize) -> Network {
    let lstm = LayerOp::Lstm {
        w_ih: gaussian(rng, vec![4 * m, m], 0.6),
        w_hh: gaussian(rng, vec![4 * m, m], 0.4),
        bias: gaussian(rng, vec![4 * m], 0.2),
    };
    Network::new(
        vec![Layer::new("flat", LayerOp::Flatten).unwrap(), dense("embed", rng, m, frame_len, 0.8), Layer::new("relu", LayerOp::ReLU).unwrap()],
        vec![Layer::new("lstm", lstm).unwrap(), dense("out", rng, 2, m, 1.0)],
        classes(2),
    )
    .unwrap()
}

/// Linear per-frame embedding followed by a linear read-out of the whole
/// sequence.
pub fn random_linear_net(rng: &mut ChaCha8Rng, frame_len: usize, frames: usize, m: usize) -> Network {
    Network::new(
        vec![Layer::new("flat", LayerOp::Flatten).unwrap(), dense("embed", rng, m, frame_len, 0.8)],
        vec![Layer::new("seq", LayerOp::Flatten).unwrap(), dense("out", rng, 2, m * frames, 1.0)],
        classes(2),
    )
    .unwrap()
}

/// Shift the class-0 logit bias so that `z₀ − z₁ = margin` on `v`.
pub fn set_margin(net: &Network, v: &Video, margin: f64) -> Network {
    set_min_margin(net, &[v], margin)
}

/// Shift the class-0 logit bias so that the smallest `z₀ − z₁` over `clips`
/// equals `margin`.
pub fn set_min_margin(net: &Network, clips: &[&Video], margin: f64) -> Network {
    let gap = clips
        .iter()
        .map(|v| {
            let z = net.logits(v).unwrap();
            z[0] - z[1]
        })
        .fold(f64::INFINITY, f64::min);
    let mut rec = net.rec_part().to_vec();
    let last = rec.len() - 1;
    let LayerOp::Dense { weight, bias } = &rec[last].op else { panic!("last layer must be dense") };
    let mut b = bias.values().to_vec();
    b[0] += margin - gap;
    rec[last] = Layer::new("out", LayerOp::Dense { weight: weight.clone(), bias: Tensor::from_vec(b).unwrap() }).unwrap();
    Network::new(net.conv_part().to_vec(), rec, net.classes().to_vec()).unwrap()
}

/// A blob drifting across a shaded background, values in `[0, 1]`.
pub fn tiny_video(rng: &mut ChaCha8Rng, frames: usize, h: usize, w: usize) -> Video {
    let (gx, gy) = (rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08));
    let (mut cx, mut cy) = (rng.random_range(0.5..h as f64 - 1.5), rng.random_range(0.5..w as f64 - 1.5));
    let (vx, vy) = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
    let mut vals = Vec::with_capacity(frames * h * w);
    for _ in 0..frames {
        for y in 0..h {
            for x in 0..w {
                let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let base = 0.3 + gx * x as f64 + gy * y as f64;
                vals.push((base + 0.5 * (-r2 / 2.0).exp()).clamp(0.0, 1.0));
            }
        }
        cx += vx;
        cy += vy;
    }
    Video::new(Tensor::new(vec![frames, h, w, 1], vals).unwrap()).unwrap()
}

/// Row-major indices of the `rows × cols` window at `(top, left)`.
pub fn window(w: usize, top: usize, left: usize, rows: usize, cols: usize) -> Vec<usize> {
    (top..top + rows).flat_map(|y| (left..left + cols).map(move |x| y * w + x)).collect()
}

pub const NORMS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

pub struct Tiny {
    pub game: Game,
    pub cap: usize,
    pub seed: u64,
}

/// Seeded tiny game: 4×4 clips, a 2×2 manipulable window, 2–3 flows, a move
/// cap of 3–4 and a decision margin scaled to the clip's single-move
/// sensitivity, so that some instances flip inside the ball and some do not.
pub fn tiny_instance(seed: u64) -> Tiny {
    let mut r = rng(seed);
    let flows = if seed % 2 == 0 { 2 } else { 3 };
    let frames = flows + 1;
    let video = tiny_video(&mut r, frames, 4, 4);
    let base = random_lstm_net(&mut r, 16, 3);
    let norm = NORMS[(seed / 2 % 3) as usize];
    let tau = r.random_range(0.3..0.8);
    let cap = if flows == 2 { 4 } else { 3 };
    let radius = match norm {
        NormKind::L1 => tau * r.random_range(2.5..4.5),
        NormKind::L2 => tau * r.random_range(1.2..2.5),
        NormKind::Linf => tau * r.random_range(1.0..2.5),
    };
    let pixels = window(4, r.random_range(0..3), r.random_range(0..3), 2, 2);

    let make = |net: Network| {
        let mut cfg = GameConfig::new(Arc::new(net), video.clone(), norm, radius, tau).unwrap();
        cfg.pixel_mask = Some(pixels.clone());
        cfg.max_moves = Some(cap);
        Game::new(cfg).unwrap()
    };
    // The game starts from the clip realised by the unmodified flows, which
    // differs slightly from `video`; both must land in class 0.
    let start = make(base.clone()).manipulated_video(&Default::default()).unwrap();
    let clips = [&video, &start];
    // Largest change of z₁ − z₀ over one atomic move sets the margin scale.
    let probe = make(set_min_margin(&base, &clips, 1.0));
    let z0 = probe.evaluate(&Default::default()).unwrap().logits;
    let mut scale: f64 = 0.0;
    for key in probe.dims() {
        for sign in [1, -1] {
            let mut ins = flowcert::perturb::Instruction::new();
            ins.add(key, sign);
            let z = probe.evaluate(&ins).unwrap().logits;
            scale = scale.max(((z[1] - z[0]) - (z0[1] - z0[0])).abs());
        }
    }
    let q = [0.4, 0.9, 1.6, 2.5, 1e3][(seed / 6 % 5) as usize];
    let margin = (q * scale).max(1e-6);
    Tiny { game: make(set_min_margin(&base, &clips, margin)), cap, seed }
}

/// Flow sequence `P(v) + δ`, where `δ[i]` moves dimension `dims[i]` by that
/// many pixels.
pub fn shifted_flows(game: &Game, dims: &[DimKey], delta: &[f64]) -> FlowSequence {
    let base = &game.config().flows;
    let mut vals = base.flat_values();
    let px = base.pixels();
    for (k, d) in dims.iter().zip(delta) {
        let c = match k.component {
            flowcert::flow::Component::U => 0,
            flowcert::flow::Component::V => 1,
        };
        vals[(k.flow * px + k.pixel) * 2 + c] += d;
    }
    base.from_flat(vals).unwrap()
}

/// Class of the clip realised by `P(v) + δ`.
pub fn classify_shift(game: &Game, dims: &[DimKey], delta: &[f64]) -> usize {
    let c = game.config();
    let v = impose_flow(&c.video, &shifted_flows(game, dims, delta)).unwrap();
    c.network.classify(&v).unwrap()
}

/// Uniform sample from the `p`-ball of radius `r` in `n` dimensions.
pub fn sample_ball(rng: &mut ChaCha8Rng, n: usize, p: NormKind, r: f64) -> Vec<f64> {
    match p {
        NormKind::Linf => (0..n).map(|_| rng.random_range(-r..=r)).collect(),
        NormKind::L2 => {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = r * rng.random::<f64>().powf(1.0 / n as f64) / len;
            g.into_iter().map(|x| x * s).collect()
        }
        NormKind::L1 => {
            // Exponential magnitudes normalised onto the simplex, random signs.
            let e: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
            let sum: f64 = e.iter().sum();
            let s = r * rng.random::<f64>().powf(1.0 / n as f64) / sum;
            e.into_iter().map(|x| if rng.random::<bool>() { x * s } else { -x * s }).collect()
        }
    }
}

/// Largest absolute difference between horizontally or vertically adjacent
/// pixels. The bilinear interpolant of the image has slopes bounded by it.
pub fn max_adjacent_step(frame: &[f64], h: usize, w: usize) -> f64 {
    let mut s: f64 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let a = frame[y * w + x];
            if x + 1 < w {
                s = s.max((frame[y * w + x + 1] - a).abs());
            }
            if y + 1 < h {
                s = s.max((frame[(y + 1) * w + x] - a).abs());
            }
        }
    }
    s
}
