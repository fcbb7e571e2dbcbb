//! Latitude-dependent loss weighting for equirectangular images.
//!
//! Row `m` (1-based, `m ∈ [1, H]`) receives `cos(|2m − H| / H · π/2)`, so the
//! equator gets weight 1 and the bottom row gets exactly 0. Because the index
//! is 1-based the top row keeps a small positive weight.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::raster::LabelMap;
use crate::sphere::ImageDims;

/// Probability floor used by [`per_pixel_ce`].
pub const PROB_CLAMP: f64 = 1e-12;

/// Tolerance on per-pixel probability sums.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Weight of the 1-based row `m` in an image of height `h`.
pub fn row_weight(m: usize, height: usize) -> f64 {
    let offset = (2 * m).abs_diff(height);
    if offset == height {
        // cos(π/2) is not exactly 0 in floating point
        return 0.0;
    }
    let h = height as f64;
    let dist = offset as f64 / h;
    (dist * FRAC_PI_2).cos()
}

/// Row-constant weight map.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    dims: ImageDims,
    rows: Vec<f64>,
}

impl WeightMap {
    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    /// Weight for the 0-based pixel row `row`.
    pub fn row(&self, row: usize) -> f64 {
        self.rows[row]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn get(&self, row: usize, _col: usize) -> f64 {
        self.rows[row]
    }

    pub fn mean(&self) -> f64 {
        self.rows.iter().sum::<f64>() / self.rows.len() as f64
    }
}

pub fn weight_map(dims: ImageDims) -> WeightMap {
    let rows = (1..=dims.height)
        .map(|m| row_weight(m, dims.height))
        .collect();
    WeightMap { dims, rows }
}

/// Class probabilities per pixel, `data[(row·w + col)·C + class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities {
    dims: ImageDims,
    num_classes: usize,
    data: Vec<f64>,
}

impl ClassProbabilities {
    pub fn new(dims: ImageDims, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidProbabilities("zero classes".into()));
        }
        if data.len() != dims.pixel_count() * num_classes {
            return Err(Error::DimensionMismatch {
                expected: format!("{} probabilities", dims.pixel_count() * num_classes),
                actual: data.len().to_string(),
            });
        }
        for (p, px) in data.chunks_exact(num_classes).enumerate() {
            let sum: f64 = px.iter().sum();
            if px.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::InvalidProbabilities(format!(
                    "pixel {p} sums to {sum}"
                )));
            }
        }
        Ok(ClassProbabilities {
            dims,
            num_classes,
            data,
        })
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn pixel(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.num_classes..(flat + 1) * self.num_classes]
    }
}

/// Per-pixel loss values plus a mask of pixels that count.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelLossMap {
    dims: ImageDims,
    loss: Vec<f64>,
    included: Vec<bool>,
}

impl PixelLossMap {
    pub fn new(dims: ImageDims, loss: Vec<f64>, included: Vec<bool>) -> Result<Self> {
        if loss.len() != dims.pixel_count() || included.len() != dims.pixel_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels", dims.pixel_count()),
                actual: format!("{} losses, {} flags", loss.len(), included.len()),
            });
        }
        Ok(PixelLossMap {
            dims,
            loss,
            included,
        })
    }

    /// Every pixel included with the same loss.
    pub fn uniform(dims: ImageDims, value: f64) -> Self {
        PixelLossMap {
            dims,
            loss: vec![value; dims.pixel_count()],
            included: vec![true; dims.pixel_count()],
        }
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }
}

/// Cross-entropy `−ln p(true class)` per pixel. Ignore pixels get 0 and are
/// excluded.
pub fn per_pixel_ce(probs: &ClassProbabilities, lbl: &LabelMap) -> Result<PixelLossMap> {
    if probs.dims != lbl.dims() {
        return Err(Error::DimensionMismatch {
            expected: probs.dims.to_string(),
            actual: lbl.dims().to_string(),
        });
    }
    let n = lbl.dims().pixel_count();
    let mut loss = vec![0.0; n];
    let mut included = vec![false; n];
    for (p, &class) in lbl.data().iter().enumerate() {
        if class == lbl.ignore_id() {
            continue;
        }
        if class as usize >= probs.num_classes {
            return Err(Error::ClassOutOfRange {
                id: class,
                num_classes: probs.num_classes,
            });
        }
        let prob = probs.pixel(p)[class as usize].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss[p] = -prob.ln();
        included[p] = true;
    }
    Ok(PixelLossMap {
        dims: lbl.dims(),
        loss,
        included,
    })
}

/// Weights of the two auxiliary terms of the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossHyper {
    lambda_w: f64,
    lambda_s: f64,
}

impl LossHyper {
    pub fn new(lambda_w: f64, lambda_s: f64) -> Result<Self> {
        for (name, v) in [("lambda_w", lambda_w), ("lambda_s", lambda_s)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(LossHyper { lambda_w, lambda_s })
    }

    pub fn lambda_w(&self) -> f64 {
        self.lambda_w
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }
}

impl Default for LossHyper {
    fn default() -> Self {
        LossHyper {
            lambda_w: 0.3,
            lambda_s: 0.3,
        }
    }
}

/// `mean_included((1 + λ_w·w_pan) · seg) + λ_s · sdpe`.
///
/// The weighted term is averaged over included pixels (0 when none are).
pub fn combine_losses(
    seg: &PixelLossMap,
    wmap: &WeightMap,
    sdpe_value: f64,
    hyper: &LossHyper,
) -> Result<f64> {
    if seg.dims != wmap.dims {
        return Err(Error::DimensionMismatch {
            expected: wmap.dims.to_string(),
            actual: seg.dims.to_string(),
        });
    }
    let w = seg.dims.width;
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, (&l, &inc)) in seg.loss.iter().zip(&seg.included).enumerate() {
        if inc {
            total += (1.0 + hyper.lambda_w * wmap.rows[p / w]) * l;
            count += 1;
        }
    }
    let seg_term = if count == 0 {
        0.0
    } else {
        total / count as f64
    };
    Ok(seg_term + hyper.lambda_s * sdpe_value)
}
