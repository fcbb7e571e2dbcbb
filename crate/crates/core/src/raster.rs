//! Equirectangular rasters: continuous-valued images and class-id label maps.

use crate::error::{Error, Result};
use crate::sphere::ImageDims;

/// Default class id excluded from losses and metrics.
pub const DEFAULT_IGNORE_ID: u8 = 255;

/// Interleaved multi-channel image, row-major, values typically in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpImage {
    dims: ImageDims,
    channels: usize,
    data: Vec<f64>,
}

impl ErpImage {
    pub fn new(dims: ImageDims, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidDimensions(
                "image needs at least one channel".into(),
            ));
        }
        let expected = dims.pixel_count() * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} values ({dims}x{channels})"),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite image value at flat index {bad}"
            )));
        }
        Ok(ErpImage {
            dims,
            channels,
            data,
        })
    }

    pub fn filled(dims: ImageDims, channels: usize, value: f64) -> Result<Self> {
        ErpImage::new(dims, channels, vec![value; dims.pixel_count() * channels])
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.dims.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.dims.width + col) * self.channels + channel]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: ImageDims,
    data: Vec<u8>,
    ignore_id: u8,
}

impl LabelMap {
    pub fn new(dims: ImageDims, data: Vec<u8>, ignore_id: u8) -> Result<Self> {
        if data.len() != dims.pixel_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels ({dims})", dims.pixel_count()),
                actual: format!("{} labels", data.len()),
            });
        }
        Ok(LabelMap {
            dims,
            data,
            ignore_id,
        })
    }

    pub fn filled(dims: ImageDims, value: u8, ignore_id: u8) -> Self {
        LabelMap {
            dims,
            data: vec![value; dims.pixel_count()],
            ignore_id,
        }
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn ignore_id(&self) -> u8 {
        self.ignore_id
    }

    pub fn with_ignore_id(mut self, ignore_id: u8) -> Self {
        self.ignore_id = ignore_id;
        self
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.dims.width + col]
    }

    /// Checks every value is `< num_classes` or the ignore id.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self
            .data
            .iter()
            .find(|&&v| v != self.ignore_id && v as usize >= num_classes)
        {
            Some(&id) => Err(Error::ClassOutOfRange { id, num_classes }),
            None => Ok(()),
        }
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}
