//! Confusion-matrix segmentation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// Pixel counts indexed `[ground truth][prediction]`.
///
/// Pixels whose ground truth is the ignore id are skipped. A prediction equal
/// to the ignore id on a valid ground-truth pixel counts as a miss for that
/// class (it lowers recall and accuracy but is a false positive for nobody).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
    missed: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            num_classes,
            counts: vec![0; num_classes * num_classes],
            missed: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    /// Ground-truth pixels of `gt` predicted as the ignore id.
    pub fn missed(&self, gt: usize) -> u64 {
        self.missed[gt]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.missed.iter().sum::<u64>()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.count(c, c)).sum()
    }

    pub fn add_pixel(&mut self, gt: usize, pred: Option<usize>) {
        match pred {
            Some(p) => self.counts[gt * self.num_classes + p] += 1,
            None => self.missed[gt] += 1,
        }
    }

    /// Element-wise sum; panics on a class-count mismatch.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.num_classes, other.num_classes, "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.missed.iter_mut().zip(&other.missed) {
            *a += b;
        }
    }

    /// IoU per class; `None` where `TP + FP + FN = 0`.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        let c = self.num_classes;
        (0..c)
            .map(|k| {
                let tp = self.count(k, k);
                let gt_total: u64 = (0..c).map(|p| self.count(k, p)).sum::<u64>() + self.missed[k];
                let pred_total: u64 = (0..c).map(|g| self.count(g, k)).sum();
                let union = gt_total + pred_total - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over classes with a defined IoU.
    pub fn miou(&self) -> Result<f64> {
        self.check_nonempty()?;
        let defined: Vec<f64> = self.iou_per_class().into_iter().flatten().collect();
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    }

    pub fn pixel_accuracy(&self) -> Result<f64> {
        self.check_nonempty()?;
        Ok(self.trace() as f64 / self.total() as f64)
    }

    pub fn record(&self) -> Result<MetricsRecord> {
        Ok(MetricsRecord {
            per_class_iou: self.iou_per_class(),
            miou: self.miou()?,
            pixel_accuracy: self.pixel_accuracy()?,
            evaluated_pixels: self.total(),
        })
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::UndefinedMetric("no evaluated pixels".into()));
        }
        Ok(())
    }
}

/// Confusion matrix of one prediction against its ground truth.
pub fn accumulate(pred: &LabelMap, gt: &LabelMap, num_classes: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(num_classes);
    accumulate_into(&mut cm, pred, gt)?;
    Ok(cm)
}

pub fn accumulate_into(cm: &mut ConfusionMatrix, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims().to_string(),
            actual: pred.dims().to_string(),
        });
    }
    let c = cm.num_classes;
    let ignore = gt.ignore_id();
    for (&g, &p) in gt.data().iter().zip(pred.data()) {
        if g == ignore {
            continue;
        }
        if g as usize >= c {
            return Err(Error::ClassOutOfRange {
                id: g,
                num_classes: c,
            });
        }
        let p = if p == ignore || p == pred.ignore_id() {
            None
        } else if (p as usize) < c {
            Some(p as usize)
        } else {
            return Err(Error::ClassOutOfRange {
                id: p,
                num_classes: c,
            });
        };
        cm.add_pixel(g as usize, p);
    }
    Ok(())
}

/// Exported metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub pixel_accuracy: f64,
    pub evaluated_pixels: u64,
}
