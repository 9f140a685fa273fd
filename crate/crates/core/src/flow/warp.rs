use super::FlowField;

/// Bilinear sample of channel `c` at real coordinates, clamped to the border.
pub fn bilinear(img: &[f64], h: usize, w: usize, ch: usize, c: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |yy: usize, xx: usize| img[(yy * w + xx) * ch + c];
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// `out(y, x) = img(y − v, x − u)` for every channel, `(u, v)` read at `(y, x)`.
pub fn warp_backward(img: &[f64], h: usize, w: usize, ch: usize, flow: &FlowField) -> Vec<f64> {
    let (u, v) = (flow.u.values(), flow.v.values());
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let (sy, sx) = (y as f64 - v[p], x as f64 - u[p]);
            for c in 0..ch {
                out.push(bilinear(img, h, w, ch, c, sy, sx));
            }
        }
    }
    out
}
