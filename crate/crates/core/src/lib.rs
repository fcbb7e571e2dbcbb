//! Spherical geometry tools for equirectangular (ERP) panoramic segmentation.
//!
//! * [`sphere`]: pixel ↔ (colatitude, longitude) ↔ unit vector.
//! * [`rotation`]: yaw / pitch / roll matrices, `R = R_z · R_y · R_x`.
//! * [`projection`]: nearest-neighbour rotation of images and label maps on
//!   the sphere, plus the random rotation sampler used for augmentation.
//! * [`sdpe`]: offset fields of a deformable patch embedding with clamping,
//!   mirror and row-average constraint losses and their gradients.
//! * [`panorama_loss`]: latitude weighting of per-pixel losses.
//! * [`metrics`]: confusion matrix, IoU, mIoU, pixel accuracy.
//! * [`validation`]: evaluation over a grid of rotations with mean /
//!   variance / range aggregation.
//! * [`io`]: PNG, manifest, offset-field and report formats.

pub mod error;
pub mod io;
pub mod metrics;
pub mod panorama_loss;
pub mod projection;
pub mod raster;
pub mod rotation;
pub mod sdpe;
pub mod sphere;
pub mod validation;

pub use error::{Error, Result};
pub use metrics::{accumulate, ConfusionMatrix, MetricsRecord};
pub use panorama_loss::{
    combine_losses, per_pixel_ce, weight_map, ClassProbabilities, LossHyper, PixelLossMap,
    WeightMap,
};
pub use projection::{
    rotate_erp, rotate_labels, sample_augmentation, AugmentationConfig, AugmentationSample,
    SourceMap,
};
pub use raster::{ErpImage, LabelMap, DEFAULT_IGNORE_ID};
pub use rotation::{apply, compose, inverse, rot_x, rot_y, rot_z, RotMat, RotationAngles};
pub use sdpe::{
    clamp_offsets, deformable_sample, inter_loss, intra_loss, mirror_offsets, row_average,
    sdpe_loss, LossGrad, OffsetField, PatchGrid, Reduction,
};
pub use sphere::{
    pixel_to_sphere, sphere_to_pixel, sphere_to_unitvec, unitvec_to_sphere, ImageDims, PixelCoord,
    SphericalCoord, UnitVec3,
};
pub use validation::{
    aggregate, build_grid, evaluate_situation, run_validation, summarize, Dataset, GridSpec,
    Predictor, RotationGrid, SgaReport, Situation, SituationResult, Summary,
};
