//! Offset fields of a deformable patch embedding and the spherical
//! constraints on them.
//!
//! An [`OffsetField`] holds one `(row, col)` pixel offset for every pixel of
//! every patch. The flat layout is patch-major (patch `(m, n)` at index
//! `m·W + n`), row-major inside a patch, row component first:
//!
//! ```text
//! data[(((m·W + n)·s + i)·s + j)·2 + c]
//! ```
//!
//! Two losses constrain the field:
//!
//! * the intra-patch loss compares every offset with the patch's
//!   left-right mirror image (column mirrored, column component negated);
//! * the inter-patch loss compares every offset with the mean offset at the
//!   same intra-patch position across its patch row.
//!
//! Both are plain sums of squared component differences and come with
//! analytic gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::ErpImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGrid {
    rows: usize,
    cols: usize,
    patch_size: usize,
    clamp_factor: f64,
}

impl PatchGrid {
    pub fn new(rows: usize, cols: usize, patch_size: usize, clamp_factor: f64) -> Result<Self> {
        if rows == 0 || cols == 0 || patch_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "patch grid {rows}x{cols} with patch size {patch_size}: all must be >= 1"
            )));
        }
        if !clamp_factor.is_finite() || clamp_factor < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "clamp factor {clamp_factor} must be finite and >= 0"
            )));
        }
        Ok(PatchGrid {
            rows,
            cols,
            patch_size,
            clamp_factor,
        })
    }

    /// Patch rows `H`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Patch columns `W`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn clamp_factor(&self) -> f64 {
        self.clamp_factor
    }

    pub fn patch_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of scalars in an offset field on this grid.
    pub fn field_len(&self) -> usize {
        self.patch_count() * self.patch_size * self.patch_size * 2
    }

    pub fn index(&self, m: usize, n: usize, i: usize, j: usize, c: usize) -> usize {
        let s = self.patch_size;
        (((m * self.cols + n) * s + i) * s + j) * 2 + c
    }

    fn row_len(&self) -> usize {
        self.cols * self.patch_size * self.patch_size * 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    grid: PatchGrid,
    data: Vec<f64>,
}

impl OffsetField {
    pub fn new(grid: PatchGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.field_len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} offset scalars", grid.field_len()),
                actual: format!("{}", data.len()),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite offset at index {bad}"
            )));
        }
        Ok(OffsetField { grid, data })
    }

    pub fn zeros(grid: PatchGrid) -> Self {
        OffsetField {
            grid,
            data: vec![0.0; grid.field_len()],
        }
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(row, col)` offset of pixel `(i, j)` in patch `(m, n)`.
    pub fn get(&self, m: usize, n: usize, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.index(m, n, i, j, 0);
        (self.data[k], self.data[k + 1])
    }

    pub fn set(&mut self, m: usize, n: usize, i: usize, j: usize, value: (f64, f64)) {
        let k = self.grid.index(m, n, i, j, 0);
        self.data[k] = value.0;
        self.data[k + 1] = value.1;
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn same_shape(&self, data: Vec<f64>) -> OffsetField {
        OffsetField {
            grid: self.grid,
            data,
        }
    }
}

/// How a loss is reduced over the field's scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Sum,
    /// Sum divided by the number of scalars in the field.
    Mean,
}

impl Reduction {
    fn scale(self, grid: &PatchGrid) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / grid.field_len() as f64,
        }
    }
}

/// A loss value and its gradient with respect to every offset scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: OffsetField,
}

/// Clamps row components to `±k_D·H` and column components to `±k_D·W`.
pub fn clamp_offsets(raw: &OffsetField) -> OffsetField {
    let g = raw.grid;
    let row_bound = g.clamp_factor * g.rows as f64;
    let col_bound = g.clamp_factor * g.cols as f64;
    let data = raw
        .data
        .chunks_exact(2)
        .flat_map(|d| {
            [
                d[0].clamp(-row_bound, row_bound),
                d[1].clamp(-col_bound, col_bound),
            ]
        })
        .collect();
    raw.same_shape(data)
}

/// Left-right mirror inside each patch: entry `(i, j)` takes entry
/// `(i, s−1−j)` with its column component negated.
pub fn mirror_offsets(field: &OffsetField) -> OffsetField {
    let g = field.grid;
    let s = g.patch_size;
    let mut out = vec![0.0; field.data.len()];
    for m in 0..g.rows {
        for n in 0..g.cols {
            for i in 0..s {
                for j in 0..s {
                    let src = g.index(m, n, i, s - 1 - j, 0);
                    let dst = g.index(m, n, i, j, 0);
                    out[dst] = field.data[src];
                    out[dst + 1] = -field.data[src + 1];
                }
            }
        }
    }
    field.same_shape(out)
}

/// Per `(m, i, j)` mean offset over the patch columns `n`, laid out as
/// `[(m·s + i)·s + j][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAverage {
    rows: usize,
    patch_size: usize,
    data: Vec<[f64; 2]>,
}

impl RowAverage {
    pub fn get(&self, m: usize, i: usize, j: usize) -> (f64, f64) {
        let v = self.data[(m * self.patch_size + i) * self.patch_size + j];
        (v[0], v[1])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

pub fn row_average(field: &OffsetField) -> RowAverage {
    let g = field.grid;
    let s = g.patch_size;
    let count = g.cols as f64;
    let mut data = vec![[0.0; 2]; g.rows * s * s];
    for m in 0..g.rows {
        for i in 0..s {
            for j in 0..s {
                let mut acc = [0.0; 2];
                for n in 0..g.cols {
                    let (r, c) = field.get(m, n, i, j);
                    acc[0] += r;
                    acc[1] += c;
                }
                data[(m * s + i) * s + j] = [acc[0] / count, acc[1] / count];
            }
        }
    }
    RowAverage {
        rows: g.rows,
        patch_size: s,
        data,
    }
}

/// Mirror-symmetry loss `Σ ‖Δ − mirror(Δ)‖²`.
pub fn intra_loss(field: &OffsetField) -> LossGrad {
    intra_loss_with(field, Reduction::Sum)
}

pub fn intra_loss_with(field: &OffsetField, reduction: Reduction) -> LossGrad {
    let mirrored = mirror_offsets(field);
    let diff: Vec<f64> = field
        .data
        .iter()
        .zip(&mirrored.data)
        .map(|(a, b)| a - b)
        .collect();
    let value = ordered_sum_sq(&field.grid, &diff);
    // L = ‖(I − M)Δ‖² with M symmetric, so ∇L = 2(d − M d).
    let diff_field = field.same_shape(diff);
    let mirrored_diff = mirror_offsets(&diff_field);
    let scale = reduction.scale(&field.grid);
    let grad = diff_field
        .data
        .iter()
        .zip(&mirrored_diff.data)
        .map(|(d, md)| 2.0 * (d - md) * scale)
        .collect();
    LossGrad {
        value: value * scale,
        grad: field.same_shape(grad),
    }
}

/// Row-consistency loss `Σ ‖Δ − row_average(Δ)‖²`, with the gradient taken
/// through the average.
pub fn inter_loss(field: &OffsetField) -> LossGrad {
    inter_loss_with(field, Reduction::Sum)
}

pub fn inter_loss_with(field: &OffsetField, reduction: Reduction) -> LossGrad {
    let g = field.grid;
    let s = g.patch_size;
    let count = g.cols as f64;
    // Deviations from the row mean, pivoted on patch column 0: Δ_n − avg =
    // (Δ_n − Δ_0) − mean_k(Δ_k − Δ_0). Exactly zero on row-constant fields.
    let mut diff = vec![0.0; field.data.len()];
    for m in 0..g.rows {
        for i in 0..s {
            for j in 0..s {
                for c in 0..2 {
                    let pivot = field.data[g.index(m, 0, i, j, c)];
                    let shift = (0..g.cols)
                        .map(|n| field.data[g.index(m, n, i, j, c)] - pivot)
                        .sum::<f64>()
                        / count;
                    for n in 0..g.cols {
                        let k = g.index(m, n, i, j, c);
                        diff[k] = (field.data[k] - pivot) - shift;
                    }
                }
            }
        }
    }
    let value = ordered_sum_sq(&g, &diff);
    // ∂/∂Δ_n Σ_n' (Δ_n' − avg)² = 2(Δ_n − avg) − (2/W) Σ_n' (Δ_n' − avg),
    // and the second term is the sum of deviations from the mean.
    let mut dev_sum = vec![[0.0; 2]; g.rows * s * s];
    for m in 0..g.rows {
        for n in 0..g.cols {
            for i in 0..s {
                for j in 0..s {
                    let k = g.index(m, n, i, j, 0);
                    let slot = &mut dev_sum[(m * s + i) * s + j];
                    slot[0] += diff[k];
                    slot[1] += diff[k + 1];
                }
            }
        }
    }
    let scale = reduction.scale(&g);
    let inv_w = 1.0 / g.cols as f64;
    let mut grad = vec![0.0; field.data.len()];
    for m in 0..g.rows {
        for n in 0..g.cols {
            for i in 0..s {
                for j in 0..s {
                    let k = g.index(m, n, i, j, 0);
                    let ds = dev_sum[(m * s + i) * s + j];
                    grad[k] = 2.0 * (diff[k] - ds[0] * inv_w) * scale;
                    grad[k + 1] = 2.0 * (diff[k + 1] - ds[1] * inv_w) * scale;
                }
            }
        }
    }
    LossGrad {
        value: value * scale,
        grad: field.same_shape(grad),
    }
}

/// Total constraint loss: inter + intra.
pub fn sdpe_loss(field: &OffsetField) -> LossGrad {
    sdpe_loss_with(field, Reduction::Sum)
}

pub fn sdpe_loss_with(field: &OffsetField, reduction: Reduction) -> LossGrad {
    let inter = inter_loss_with(field, reduction);
    let intra = intra_loss_with(field, reduction);
    let grad = inter
        .grad
        .data
        .iter()
        .zip(&intra.grad.data)
        .map(|(a, b)| a + b)
        .collect();
    LossGrad {
        value: inter.value + intra.value,
        grad: field.same_shape(grad),
    }
}

/// Sum of squares, one partial sum per patch row, folded in row order.
fn ordered_sum_sq(grid: &PatchGrid, values: &[f64]) -> f64 {
    values
        .par_chunks(grid.row_len())
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Bilinearly sampled patches: `values[patch][(i·s + j)·C + channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPatches {
    pub grid: PatchGrid,
    pub channels: usize,
    pub values: Vec<Vec<f64>>,
}

impl SampledPatches {
    pub fn get(&self, m: usize, n: usize, i: usize, j: usize, channel: usize) -> f64 {
        let s = self.grid.patch_size;
        self.values[m * self.grid.cols + n][(i * s + j) * self.channels + channel]
    }
}

/// Deformable patch extraction: pixel `(i, j)` of patch `(m, n)` reads the
/// image at `(m·s + i + Δr, n·s + j + Δc)` with bilinear interpolation. Rows
/// clamp at the image border; columns wrap around.
pub fn deformable_sample(
    img: &ErpImage,
    grid: &PatchGrid,
    field: &OffsetField,
) -> Result<SampledPatches> {
    if field.grid != *grid {
        return Err(Error::DimensionMismatch {
            expected: format!("{grid:?}"),
            actual: format!("{:?}", field.grid),
        });
    }
    let dims = img.dims();
    let s = grid.patch_size;
    if grid.rows * s > dims.height || grid.cols * s > dims.width {
        return Err(Error::DimensionMismatch {
            expected: format!("image covering {}x{} pixels", grid.rows * s, grid.cols * s),
            actual: dims.to_string(),
        });
    }
    let channels = img.channels();
    let values = (0..grid.patch_count())
        .into_par_iter()
        .map(|p| {
            let (m, n) = (p / grid.cols, p % grid.cols);
            let mut out = Vec::with_capacity(s * s * channels);
            for i in 0..s {
                for j in 0..s {
                    let (dr, dc) = field.get(m, n, i, j);
                    let y = (m * s + i) as f64 + dr;
                    let x = (n * s + j) as f64 + dc;
                    for c in 0..channels {
                        out.push(bilinear(img, y, x, c));
                    }
                }
            }
            out
        })
        .collect();
    Ok(SampledPatches {
        grid: *grid,
        channels,
        values,
    })
}

fn bilinear(img: &ErpImage, y: f64, x: f64, channel: usize) -> f64 {
    let dims = img.dims();
    let max_row = (dims.height - 1) as f64;
    let y = y.clamp(0.0, max_row);
    let y0 = y.floor();
    let fy = y - y0;
    let r0 = y0 as usize;
    let r1 = (r0 + 1).min(dims.height - 1);

    let x0 = x.floor();
    let fx = x - x0;
    let w = dims.width as i64;
    let c0 = (x0 as i64).rem_euclid(w) as usize;
    let c1 = (x0 as i64 + 1).rem_euclid(w) as usize;

    let top = img.get(r0, c0, channel) * (1.0 - fx) + img.get(r0, c1, channel) * fx;
    if fy == 0.0 {
        return top;
    }
    let bottom = img.get(r1, c0, channel) * (1.0 - fx) + img.get(r1, c1, channel) * fx;
    top * (1.0 - fy) + bottom * fy
}
