//! Independent oracles and synthetic data shared by the integration tests.
#![allow(dead_code)]

use panosga::{ErpImage, ImageDims, LabelMap, OffsetField, PatchGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: PatchGrid, rng: &mut ChaCha8Rng) -> OffsetField {
    let data = (0..grid.field_len())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    OffsetField::new(grid, data).unwrap()
}

/// Reads offset `(m, n, i, j, c)` straight from the documented flat layout.
fn at(data: &[f64], g: &PatchGrid, m: usize, n: usize, i: usize, j: usize, c: usize) -> f64 {
    let s = g.patch_size();
    data[(((m * g.cols() + n) * s + i) * s + j) * 2 + c]
}

/// Materializes the mirrored field explicitly and sums squared differences.
pub fn brute_intra(grid: &PatchGrid, data: &[f64]) -> f64 {
    let s = grid.patch_size();
    let mut total = 0.0;
    for m in 0..grid.rows() {
        for n in 0..grid.cols() {
            let mut mirrored = vec![[0.0f64; 2]; s * s];
            for i in 0..s {
                for j in 0..s {
                    mirrored[i * s + j] = [
                        at(data, grid, m, n, i, s - 1 - j, 0),
                        -at(data, grid, m, n, i, s - 1 - j, 1),
                    ];
                }
            }
            for i in 0..s {
                for j in 0..s {
                    for (c, mirror) in mirrored[i * s + j].iter().enumerate() {
                        let d = at(data, grid, m, n, i, j, c) - mirror;
                        total += d * d;
                    }
                }
            }
        }
    }
    total
}

pub fn brute_inter(grid: &PatchGrid, data: &[f64]) -> f64 {
    let s = grid.patch_size();
    let mut total = 0.0;
    for m in 0..grid.rows() {
        for i in 0..s {
            for j in 0..s {
                for c in 0..2 {
                    let vals: Vec<f64> = (0..grid.cols())
                        .map(|n| at(data, grid, m, n, i, j, c))
                        .collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    total += vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                }
            }
        }
    }
    total
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let up = f(&probe);
            probe[k] = orig - h;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_k |a_k − b_k| / max(‖a‖∞, ‖b‖∞)`; 0 when both vectors are zero.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |acc, v| acc.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Per-class IoU by set counting, plus mIoU and pixel accuracy.
pub struct BruteMetrics {
    pub iou: Vec<Option<f64>>,
    pub miou: f64,
    pub pacc: f64,
}

pub fn brute_metrics(pred: &[u8], gt: &[u8], classes: usize, ignore: u8) -> BruteMetrics {
    let valid: Vec<usize> = (0..gt.len()).filter(|&p| gt[p] != ignore).collect();
    let iou: Vec<Option<f64>> = (0..classes as u8)
        .map(|c| {
            let inter = valid
                .iter()
                .filter(|&&p| gt[p] == c && pred[p] == c)
                .count();
            let union = valid
                .iter()
                .filter(|&&p| gt[p] == c || pred[p] == c)
                .count();
            (union > 0).then(|| inter as f64 / union as f64)
        })
        .collect();
    let defined: Vec<f64> = iou.iter().flatten().copied().collect();
    let miou = defined.iter().sum::<f64>() / defined.len() as f64;
    let correct = valid.iter().filter(|&&p| gt[p] == pred[p]).count();
    BruteMetrics {
        iou,
        miou,
        pacc: correct as f64 / valid.len() as f64,
    }
}

/// Label map tiled with `block`×`block` squares of random classes.
pub fn block_labels(
    h: usize,
    w: usize,
    block: usize,
    classes: u8,
    rng: &mut ChaCha8Rng,
) -> LabelMap {
    let bh = h.div_ceil(block);
    let bw = w.div_ceil(block);
    let tiles: Vec<u8> = (0..bh * bw).map(|_| rng.gen_range(0..classes)).collect();
    let data = (0..h * w)
        .map(|p| tiles[(p / w / block) * bw + (p % w) / block])
        .collect();
    LabelMap::new(ImageDims::new(h, w).unwrap(), data, 255).unwrap()
}

/// Grayscale image whose intensity encodes the label.
pub fn image_from_labels(lbl: &LabelMap) -> ErpImage {
    let data = lbl.data().iter().map(|&v| v as f64 / 16.0).collect();
    ErpImage::new(lbl.dims(), 1, data).unwrap()
}

/// Circular shift by `k` columns to the right, row by row.
pub fn shift_columns(lbl: &LabelMap, k: usize) -> Vec<u8> {
    let d = lbl.dims();
    let mut out = vec![0u8; d.pixel_count()];
    for i in 0..d.height {
        for j in 0..d.width {
            out[i * d.width + (j + k) % d.width] = lbl.data()[i * d.width + j];
        }
    }
    out
}
