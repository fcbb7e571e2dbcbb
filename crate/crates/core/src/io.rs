//! File formats: PNG rasters, dataset manifests, offset fields and reports.
//!
//! * Images: 8-bit grayscale or RGB PNG, decoded to `value / 255`.
//! * Labels: 8-bit grayscale PNG, pixel value = class id. Palette and 16-bit
//!   files are rejected.
//! * Manifest: JSON `{"num_classes", "ignore_id", "entries": [{"sample_id",
//!   "image_path", "label_path"}]}`, paths relative to the manifest's
//!   directory.
//! * Offset fields: text (`rows cols patch_size clamp_factor` header, then one
//!   `row col` pair per line) or binary (`SDPEOFF1`, three little-endian
//!   `u32`, one `f64` clamp factor, then `f64` data), both in
//!   [`OffsetField`] flat order.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ErpImage, LabelMap, DEFAULT_IGNORE_ID};
use crate::sdpe::{OffsetField, PatchGrid};
use crate::sphere::ImageDims;
use crate::validation::{Dataset, Sample, SgaReport};

struct DecodedPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<DecodedPng> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::malformed(path, "image too large"))?;
    let mut bytes = vec![0u8; size];
    let frame = reader
        .next_frame(&mut bytes)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    bytes.truncate(frame.buffer_size());
    if frame.width == 0 || frame.height == 0 {
        return Err(Error::malformed(path, "zero-sized image"));
    }
    Ok(DecodedPng {
        width: frame.width as usize,
        height: frame.height as usize,
        color,
        depth,
        bytes,
    })
}

fn dims_for(path: &Path, height: usize, width: usize) -> Result<ImageDims> {
    ImageDims::new(height, width).map_err(|e| Error::malformed(path, e.to_string()))
}

fn encode_png(path: &Path, dims: ImageDims, color: png::ColorType, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder =
        png::Encoder::new(BufWriter::new(file), dims.width as u32, dims.height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| Error::malformed(path, e.to_string());
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ErpImage> {
    let path = path.as_ref();
    let png = decode_png(path)?;
    if png.depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!("{:?} bit depth, expected 8-bit", png.depth),
        });
    }
    let channels = match png.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("{other:?} color, expected grayscale or RGB"),
            })
        }
    };
    let dims = dims_for(path, png.height, png.width)?;
    let data = png.bytes.iter().map(|&b| b as f64 / 255.0).collect();
    ErpImage::new(dims, channels, data)
}

/// Writes a 1- or 3-channel image, quantizing `round(clamp(v, 0, 1)·255)`.
pub fn save_image(img: &ErpImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("cannot write {c}-channel image"),
            })
        }
    };
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    encode_png(path, img.dims(), color, &bytes)
}

/// Loads labels with the default ignore id 255.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let png = decode_png(path)?;
    if png.color == png::ColorType::Indexed {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: "palette PNG; labels must be 8-bit grayscale class ids".into(),
        });
    }
    if png.depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!("{:?} bit depth; labels must be 8-bit", png.depth),
        });
    }
    if png.color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!("{:?} color; labels must be single-channel", png.color),
        });
    }
    let dims = dims_for(path, png.height, png.width)?;
    LabelMap::new(dims, png.bytes, DEFAULT_IGNORE_ID)
}

pub fn save_labels(lbl: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    encode_png(
        path.as_ref(),
        lbl.dims(),
        png::ColorType::Grayscale,
        lbl.data(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub num_classes: usize,
    #[serde(default = "default_ignore_id")]
    pub ignore_id: u8,
    /// Directory relative paths resolve against; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_ignore_id() -> u8 {
    DEFAULT_IGNORE_ID
}

impl DatasetManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: DatasetManifest = serde_json::from_str(text)
            .map_err(|e| Error::malformed("<manifest>", e.to_string()))?;
        m.base_dir = base_dir.into();
        m.check()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        DatasetManifest::parse(&text, base).map_err(|e| match e {
            Error::Malformed { reason, .. } => Error::malformed(path, reason),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    fn check(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::DuplicateSampleId(e.sample_id.clone()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads one entry, applying the manifest's ignore id.
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<Sample> {
        let image = load_image(self.resolve(&entry.image_path))?;
        let labels = load_labels(self.resolve(&entry.label_path))?.with_ignore_id(self.ignore_id);
        Ok(Sample {
            id: entry.sample_id.clone(),
            image,
            labels,
        })
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        use rayon::prelude::*;
        let samples = self
            .entries
            .par_iter()
            .map(|e| self.load_sample(e))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.num_classes, samples)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::malformed(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_report(report: &SgaReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path.as_ref())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<SgaReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn save_report_csv(report: &SgaReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))
}

const OFFSET_MAGIC: &[u8; 8] = b"SDPEOFF1";

pub fn offsets_to_text(field: &OffsetField) -> String {
    let g = field.grid();
    let mut out = format!(
        "{} {} {} {}\n",
        g.rows(),
        g.cols(),
        g.patch_size(),
        g.clamp_factor()
    );
    for pair in field.data().chunks_exact(2) {
        out.push_str(&format!("{} {}\n", pair[0], pair[1]));
    }
    out
}

pub fn offsets_from_text(text: &str) -> Result<OffsetField> {
    let bad = |reason: String| Error::malformed("<offset table>", reason);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .split_whitespace()
        .collect();
    if header.len() != 4 {
        return Err(bad(format!("header needs 4 fields, got {}", header.len())));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
    let grid = PatchGrid::new(
        num(header[0])?,
        num(header[1])?,
        num(header[2])?,
        header[3]
            .parse()
            .map_err(|e| bad(format!("{}: {e}", header[3])))?,
    )?;
    let mut data = Vec::with_capacity(grid.field_len());
    for line in lines {
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| bad(format!("{tok}: {e}")))?);
        }
    }
    OffsetField::new(grid, data)
}

pub fn offsets_to_bytes(field: &OffsetField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(8 + 12 + 8 + field.data().len() * 8);
    out.extend_from_slice(OFFSET_MAGIC);
    for v in [g.rows(), g.cols(), g.patch_size()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.clamp_factor().to_le_bytes());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn offsets_from_bytes(bytes: &[u8]) -> Result<OffsetField> {
    let bad = |reason: &str| Error::malformed("<offset binary>", reason);
    if bytes.len() < 28 || &bytes[..8] != OFFSET_MAGIC {
        return Err(bad("missing SDPEOFF1 header"));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let grid = PatchGrid::new(
        u32_at(8),
        u32_at(12),
        u32_at(16),
        f64::from_le_bytes(bytes[20..28].try_into().unwrap()),
    )?;
    let body = &bytes[28..];
    if body.len() != grid.field_len() * 8 {
        return Err(bad("payload length does not match header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    OffsetField::new(grid, data)
}

pub fn save_offsets(field: &OffsetField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let bytes = if path.extension().is_some_and(|e| e == "txt") {
        offsets_to_text(field).into_bytes()
    } else {
        offsets_to_bytes(field)
    };
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// `.txt` files are read as text tables, anything else as binary.
pub fn load_offsets(path: impl AsRef<Path>) -> Result<OffsetField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "txt") {
        let text = String::from_utf8(bytes).map_err(|e| Error::malformed(path, e.to_string()))?;
        offsets_from_text(&text)
    } else {
        offsets_from_bytes(&bytes)
    };
    parsed.map_err(|e| match e {
        Error::Malformed { reason, .. } => Error::malformed(path, reason),
        other => other,
    })
}
