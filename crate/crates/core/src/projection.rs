//! Rotation of equirectangular images and label maps on the sphere, and the
//! training-time rotation sampler.
//!
//! Resampling is pull-based: every output pixel is mapped to the sphere,
//! rotated by `Rᵀ` back into the source frame and read from the nearest
//! source pixel. Rounding is half away from zero; columns wrap modulo the
//! width and rows clamp to `[0, h − 1]`. Images and labels share the same
//! source map, so a prediction rotated alongside its ground truth stays
//! aligned with it.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ErpImage, LabelMap};
use crate::rotation::{inverse, RotMat, RotationAngles};
use crate::sphere::{wrap_angle, ImageDims, POLE_EPS};

/// For every output pixel, the flat index of the source pixel it copies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMap {
    dims: ImageDims,
    index: Vec<usize>,
}

impl SourceMap {
    pub fn new(dims: ImageDims, r: &RotMat) -> Self {
        let h = dims.height;
        let w = dims.width;
        if r.is_identity() {
            return SourceMap {
                dims,
                index: (0..h * w).collect(),
            };
        }
        let back = inverse(r);
        let mut index = vec![0usize; h * w];
        index.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                let (si, sj) = source_pixel(&back, i, j, dims);
                *slot = si * w + sj;
            }
        });
        SourceMap { dims, index }
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    /// Source `(row, col)` for output pixel `(row, col)`.
    pub fn source_of(&self, row: usize, col: usize) -> (usize, usize) {
        let flat = self.index[row * self.dims.width + col];
        (flat / self.dims.width, flat % self.dims.width)
    }
}

/// Nearest source pixel for output pixel `(i, j)` under the inverse rotation `back`.
fn source_pixel(back: &RotMat, i: usize, j: usize, dims: ImageDims) -> (usize, usize) {
    let h = dims.height as f64;
    let w = dims.width as f64;
    let lat = PI * i as f64 / h;
    let lon = TAU * j as f64 / w;
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();

    let v = back.mul_vec([sin_lat * cos_lon, sin_lat * sin_lon, cos_lat]);
    let rho = v[0].hypot(v[1]);
    let src_lat = rho.atan2(v[2]);
    let src_lon = if src_lat.sin().abs() < POLE_EPS {
        // Source lands on a pole, where longitude is degenerate. Use the
        // direction in which the output pixel's meridian leaves it, which
        // keeps pure yaw an exact column shift on the pole row.
        let t = back.mul_vec([cos_lat * cos_lon, cos_lat * sin_lon, -sin_lat]);
        wrap_angle(t[1].atan2(t[0]))
    } else {
        wrap_angle(v[1].atan2(v[0]))
    };

    let row = (src_lat * h / PI).round();
    let row = row.clamp(0.0, h - 1.0) as usize;
    let col = (src_lon * w / TAU).round() as i64;
    let col = col.rem_euclid(dims.width as i64) as usize;
    (row, col)
}

pub fn rotate_erp(img: &ErpImage, r: &RotMat) -> ErpImage {
    let map = SourceMap::new(img.dims(), r);
    resample_image(img, &map)
}

pub fn rotate_labels(lbl: &LabelMap, r: &RotMat) -> LabelMap {
    let map = SourceMap::new(lbl.dims(), r);
    resample_labels(lbl, &map)
}

/// Applies a precomputed source map. Panics if the dimensions differ.
pub fn resample_image(img: &ErpImage, map: &SourceMap) -> ErpImage {
    assert_eq!(
        img.dims(),
        map.dims(),
        "source map built for other dimensions"
    );
    let c = img.channels();
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    for &s in map.indices() {
        out.extend_from_slice(&src[s * c..(s + 1) * c]);
    }
    ErpImage::new(img.dims(), c, out).expect("resampled image keeps shape and finiteness")
}

/// Applies a precomputed source map. Panics if the dimensions differ.
pub fn resample_labels(lbl: &LabelMap, map: &SourceMap) -> LabelMap {
    assert_eq!(
        lbl.dims(),
        map.dims(),
        "source map built for other dimensions"
    );
    let src = lbl.data();
    let out = map.indices().iter().map(|&s| src[s]).collect();
    LabelMap::new(lbl.dims(), out, lbl.ignore_id()).expect("resampled labels keep shape")
}

/// Training-time rotation policy: maximum angle per axis and how often to
/// rotate at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    max_angles: RotationAngles,
    apply_probability: f64,
}

impl AugmentationConfig {
    pub fn new(max_angles: RotationAngles, apply_probability: f64) -> Result<Self> {
        let m = max_angles;
        if !m.is_finite() || m.yaw < 0.0 || m.pitch < 0.0 || m.roll < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "maximum angles must be finite and >= 0, got {m:?}"
            )));
        }
        if !(0.0..=1.0).contains(&apply_probability) {
            return Err(Error::InvalidConfig(format!(
                "apply probability {apply_probability} outside [0, 1]"
            )));
        }
        Ok(AugmentationConfig {
            max_angles,
            apply_probability,
        })
    }

    pub fn max_angles(&self) -> RotationAngles {
        self.max_angles
    }

    pub fn apply_probability(&self) -> f64 {
        self.apply_probability
    }
}

impl Default for AugmentationConfig {
    /// Yaw up to 360°, pitch and roll up to 10°, rotate half the time.
    fn default() -> Self {
        AugmentationConfig {
            max_angles: RotationAngles::new(360.0, 10.0, 10.0),
            apply_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSample {
    pub applied: bool,
    pub angles: RotationAngles,
}

/// Draws one augmentation decision.
///
/// Always consumes four `f64` draws (gate, yaw, pitch, roll) so streams stay
/// aligned whatever the outcome. Angles are uniform on `[0, max]`.
pub fn sample_augmentation<R: Rng + ?Sized>(
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> AugmentationSample {
    let gate: f64 = rng.gen();
    let u_yaw: f64 = rng.gen();
    let u_pitch: f64 = rng.gen();
    let u_roll: f64 = rng.gen();
    if gate < cfg.apply_probability {
        let m = cfg.max_angles;
        AugmentationSample {
            applied: true,
            angles: RotationAngles::new(u_yaw * m.yaw, u_pitch * m.pitch, u_roll * m.roll),
        }
    } else {
        AugmentationSample {
            applied: false,
            angles: RotationAngles::ZERO,
        }
    }
}
