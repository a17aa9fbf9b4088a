//! Bilinear resampling with half-pixel centers (corner alignment off).

fn source_coords(out_len: usize, in_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Resizes a row-major `in_h × in_w` grid to `out_h × out_w`.
pub fn bilinear(src: &[f64], in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), in_h * in_w);
    let rows = source_coords(out_h, in_h);
    let cols = source_coords(out_w, in_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            let top = src[r0 * in_w + c0] * (1.0 - fx) + src[r0 * in_w + c1] * fx;
            let bottom = src[r1 * in_w + c0] * (1.0 - fx) + src[r1 * in_w + c1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Mean over non-overlapping `factor × factor` blocks of a square grid.
pub fn block_mean(src: &[f64], size: usize, factor: usize) -> Vec<f64> {
    let out = size / factor;
    let norm = 1.0 / (factor * factor) as f64;
    let mut res = vec![0.0; out * out];
    for i in 0..size {
        let oi = i / factor;
        for j in 0..size {
            res[oi * out + j / factor] += src[i * size + j];
        }
    }
    res.iter_mut().for_each(|v| *v *= norm);
    res
}
