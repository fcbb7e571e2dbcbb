//! Rotation-grid evaluation.
//!
//! A predictor is run on every dataset image under every rotation of a
//! [`RotationGrid`]; image and ground truth are rotated with the same
//! nearest-neighbour source map. Each rotation ("situation") yields pooled
//! metrics, and the situations are summarized by mean, population variance
//! and range.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_labels, save_image};
use crate::metrics::{accumulate_into, ConfusionMatrix, MetricsRecord};
use crate::projection::{resample_image, resample_labels, SourceMap};
use crate::raster::{ErpImage, LabelMap};
use crate::rotation::{compose, RotationAngles};

/// Angle lists (degrees) for each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub yaw: Vec<f64>,
    pub pitch: Vec<f64>,
    pub roll: Vec<f64>,
}

impl Default for GridSpec {
    /// Yaw 0/90/180/270, pitch 0/5, roll 0/5: sixteen situations.
    fn default() -> Self {
        GridSpec {
            yaw: vec![0.0, 90.0, 180.0, 270.0],
            pitch: vec![0.0, 5.0],
            roll: vec![0.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Situation {
    pub index: usize,
    pub angles: RotationAngles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationGrid {
    yaw: Vec<f64>,
    pitch: Vec<f64>,
    roll: Vec<f64>,
}

impl RotationGrid {
    /// Situations ordered by pitch, then roll, then yaw (yaw varies fastest).
    pub fn situations(&self) -> Vec<Situation> {
        let mut out = Vec::with_capacity(self.len());
        for &pitch in &self.pitch {
            for &roll in &self.roll {
                for &yaw in &self.yaw {
                    out.push(Situation {
                        index: out.len(),
                        angles: RotationAngles::new(yaw, pitch, roll),
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.yaw.len() * self.pitch.len() * self.roll.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_grid(spec: &GridSpec) -> Result<RotationGrid> {
    for (axis, values) in [
        ("yaw", &spec.yaw),
        ("pitch", &spec.pitch),
        ("roll", &spec.roll),
    ] {
        if values.is_empty() {
            return Err(Error::Empty(format!("{axis} angle list")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{axis} angle {v} is not finite"
            )));
        }
        let mut seen = HashSet::new();
        if let Some(v) = values.iter().find(|v| !seen.insert(v.to_bits())) {
            return Err(Error::InvalidConfig(format!("duplicate {axis} angle {v}")));
        }
    }
    Ok(RotationGrid {
        yaw: spec.yaw.clone(),
        pitch: spec.pitch.clone(),
        roll: spec.roll.clone(),
    })
}

/// One dataset entry held in memory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: ErpImage,
    pub labels: LabelMap,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub num_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(num_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("dataset has no samples".into()));
        }
        let mut ids = HashSet::new();
        for s in &samples {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateSampleId(s.id.clone()));
            }
            if s.image.dims() != s.labels.dims() {
                return Err(Error::DimensionMismatch {
                    expected: format!("labels of {} to match image", s.id),
                    actual: format!("{} vs {}", s.image.dims(), s.labels.dims()),
                });
            }
            s.labels.validate(num_classes)?;
        }
        Ok(Dataset {
            num_classes,
            samples,
        })
    }
}

/// What a predictor sees for one rotated image.
#[derive(Debug, Clone, Copy)]
pub struct PredictRequest<'a> {
    pub sample_id: &'a str,
    pub situation: usize,
    pub angles: RotationAngles,
    pub image: &'a ErpImage,
}

/// Produces a label map for a rotated image.
pub trait Predictor: Sync {
    fn predict(&self, request: &PredictRequest<'_>) -> Result<LabelMap>;
}

/// Adapts a closure.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&PredictRequest<'_>) -> Result<LabelMap> + Sync,
{
    fn predict(&self, request: &PredictRequest<'_>) -> Result<LabelMap> {
        (self.0)(request)
    }
}

/// Precomputed predictions stored as `<root>/<situation index>/<sample id>.png`.
#[derive(Debug, Clone)]
pub struct DirPredictor {
    root: PathBuf,
}

impl DirPredictor {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirPredictor { root: root.into() }
    }

    pub fn path_for(root: &Path, situation: usize, sample_id: &str) -> PathBuf {
        root.join(situation.to_string())
            .join(format!("{sample_id}.png"))
    }
}

impl Predictor for DirPredictor {
    fn predict(&self, request: &PredictRequest<'_>) -> Result<LabelMap> {
        let path = DirPredictor::path_for(&self.root, request.situation, request.sample_id);
        load_labels(&path).map_err(|e| Error::Predictor(format!("{}: {e}", path.display())))
    }
}

/// Runs an external command once per rotated image.
///
/// The template's `{input}` and `{output}` tokens are replaced by
/// shell-quoted paths of the rotated image PNG and the label PNG the command
/// must write; the result runs under `sh -c`.
#[derive(Debug, Clone)]
pub struct CommandPredictor {
    template: String,
    work_dir: PathBuf,
}

impl CommandPredictor {
    pub fn new(template: impl Into<String>, work_dir: impl Into<PathBuf>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{input}") || !template.contains("{output}") {
            return Err(Error::InvalidConfig(format!(
                "predictor template must contain {{input}} and {{output}}: {template}"
            )));
        }
        Ok(CommandPredictor {
            template,
            work_dir: work_dir.into(),
        })
    }

    pub fn render(&self, input: &Path, output: &Path) -> String {
        self.template
            .replace("{input}", &shell_quote(&input.to_string_lossy()))
            .replace("{output}", &shell_quote(&output.to_string_lossy()))
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl Predictor for CommandPredictor {
    fn predict(&self, request: &PredictRequest<'_>) -> Result<LabelMap> {
        let stem = format!("s{}_{}", request.situation, request.sample_id);
        let input = self.work_dir.join(format!("{stem}.png"));
        let output = self.work_dir.join(format!("{stem}_pred.png"));
        save_image(request.image, &input)?;
        let cmd = self.render(&input, &output);
        let status = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .status()
            .map_err(|e| Error::Predictor(format!("cannot spawn `{cmd}`: {e}")))?;
        if !status.success() {
            return Err(Error::Predictor(format!("`{cmd}` exited with {status}")));
        }
        let labels = load_labels(&output)
            .map_err(|e| Error::Predictor(format!("`{cmd}` output unreadable: {e}")))?;
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        Ok(labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SituationStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationResult {
    pub index: usize,
    pub angles: RotationAngles,
    pub status: SituationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: Option<MetricsRecord>,
}

impl SituationResult {
    pub fn ok(situation: Situation, metrics: MetricsRecord) -> Self {
        SituationResult {
            index: situation.index,
            angles: situation.angles,
            status: SituationStatus::Ok,
            error: None,
            metrics: Some(metrics),
        }
    }

    pub fn failed(situation: Situation, error: impl Into<String>) -> Self {
        SituationResult {
            index: situation.index,
            angles: situation.angles,
            status: SituationStatus::Failed,
            error: Some(error.into()),
            metrics: None,
        }
    }

    pub fn miou(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.miou)
    }

    pub fn pixel_accuracy(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.pixel_accuracy)
    }
}

/// Rotates every sample by `compose(situation.angles)`, runs the predictor on
/// the rotated image and pools the metrics against the rotated ground truth.
/// Any failure marks the whole situation failed.
pub fn evaluate_situation(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    situation: Situation,
) -> SituationResult {
    match pooled_confusion(dataset, predictor, situation).and_then(|cm| cm.record()) {
        Ok(record) => SituationResult::ok(situation, record),
        Err(e) => SituationResult::failed(situation, e.to_string()),
    }
}

fn pooled_confusion(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    situation: Situation,
) -> Result<ConfusionMatrix> {
    let r = compose(situation.angles);
    let mut maps: Vec<SourceMap> = Vec::new();
    for s in &dataset.samples {
        if !maps.iter().any(|m| m.dims() == s.image.dims()) {
            maps.push(SourceMap::new(s.image.dims(), &r));
        }
    }
    let per_sample: Vec<Result<ConfusionMatrix>> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let map = maps
                .iter()
                .find(|m| m.dims() == s.image.dims())
                .expect("map built for every size");
            let image = resample_image(&s.image, map);
            let gt = resample_labels(&s.labels, map);
            let pred = predictor.predict(&PredictRequest {
                sample_id: &s.id,
                situation: situation.index,
                angles: situation.angles,
                image: &image,
            })?;
            let mut cm = ConfusionMatrix::new(dataset.num_classes);
            accumulate_into(&mut cm, &pred, &gt)?;
            Ok(cm)
        })
        .collect();
    let mut total = ConfusionMatrix::new(dataset.num_classes);
    for cm in per_sample {
        total.merge(&cm?);
    }
    Ok(total)
}

/// Mean, population variance and range of a list of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub range: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("no values to aggregate".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite value {v}")));
    }
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary {
        mean,
        variance,
        range: max - min,
        min,
        max,
    })
}

/// A value per reported metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub miou: f64,
    pub pixel_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgaReport {
    pub situations: Vec<SituationResult>,
    pub mean: MetricPair,
    pub variance: MetricPair,
    pub range: MetricPair,
    /// Indices of failed situations, excluded from the aggregates.
    #[serde(default)]
    pub failed: Vec<usize>,
}

impl SgaReport {
    pub fn has_failures(&self) -> bool {
        !self.failed.is_empty()
    }

    /// Situation table followed by Mean / Variance / Range rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("situation,pitch,roll,yaw,status,miou,pixel_accuracy\n");
        for s in &self.situations {
            let (status, miou, pacc) = match &s.metrics {
                Some(m) => ("ok", m.miou.to_string(), m.pixel_accuracy.to_string()),
                None => ("failed", String::new(), String::new()),
            };
            let a = s.angles;
            let _ = writeln!(
                out,
                "{},{},{},{},{status},{miou},{pacc}",
                s.index, a.pitch, a.roll, a.yaw
            );
        }
        for (name, pair) in [
            ("mean", self.mean),
            ("variance", self.variance),
            ("range", self.range),
        ] {
            let _ = writeln!(out, "{name},,,,,{},{}", pair.miou, pair.pixel_accuracy);
        }
        out
    }
}

/// Aggregates the successful situations. Fails when none succeeded.
pub fn aggregate(results: Vec<SituationResult>) -> Result<SgaReport> {
    let ok: Vec<&MetricsRecord> = results.iter().filter_map(|r| r.metrics.as_ref()).collect();
    if ok.is_empty() {
        return Err(Error::Empty("no successful situations to aggregate".into()));
    }
    let miou = summarize(&ok.iter().map(|m| m.miou).collect::<Vec<_>>())?;
    let pacc = summarize(&ok.iter().map(|m| m.pixel_accuracy).collect::<Vec<_>>())?;
    let failed = results
        .iter()
        .filter(|r| r.status == SituationStatus::Failed)
        .map(|r| r.index)
        .collect();
    Ok(SgaReport {
        situations: results,
        mean: MetricPair {
            miou: miou.mean,
            pixel_accuracy: pacc.mean,
        },
        variance: MetricPair {
            miou: miou.variance,
            pixel_accuracy: pacc.variance,
        },
        range: MetricPair {
            miou: miou.range,
            pixel_accuracy: pacc.range,
        },
        failed,
    })
}

/// Evaluates every situation of the grid, in grid order.
pub fn run_validation(
    dataset: &Dataset,
    predictor: &dyn Predictor,
    grid: &RotationGrid,
) -> Vec<SituationResult> {
    grid.situations()
        .into_par_iter()
        .map(|s| evaluate_situation(dataset, predictor, s))
        .collect()
}
