//! Token-to-pixel projection, patch voting, confusion matrix and metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::cluster::AssignmentMap;
use crate::cube::{ClassMap, LabelMap, IGNORE};
use crate::error::{invalid, shape, Error, Result};

/// Every pixel takes the class of the token it is assigned to.
pub fn project_to_pixels(token_classes: &[u16], assignment: &AssignmentMap) -> Result<ClassMap> {
    let ids = assignment
        .ids()
        .iter()
        .map(|&j| {
            token_classes
                .get(j as usize)
                .copied()
                .ok_or_else(|| invalid!("token {j} has no predicted class ({} given)", token_classes.len()))
        })
        .collect::<Result<Vec<u16>>>()?;
    ClassMap::new(assignment.height(), assignment.width(), ids)
}

/// Top-left corners of `size × size` windows with the given stride; the last
/// row/column of windows is shifted to end at the image border so every
/// pixel is covered.
pub fn overlapping_patches(height: usize, width: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || stride == 0 || size > height || size > width {
        return Err(invalid!("patch size {size} / stride {stride} invalid for {height}x{width}"));
    }
    let starts = |len: usize| {
        let mut s: Vec<usize> = (0..=len - size).step_by(stride).collect();
        if *s.last().unwrap() != len - size {
            s.push(len - size);
        }
        s
    };
    let ys = starts(height);
    let xs = starts(width);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| (y, x))).collect())
}

/// Per-pixel majority over all patch predictions covering it; ties go to the
/// lower class id. `patches` holds each patch map with its top-left offset.
pub fn patch_vote(patches: &[(ClassMap, (usize, usize))], height: usize, width: usize) -> Result<ClassMap> {
    let classes = patches.iter().flat_map(|(m, _)| m.ids().iter().copied()).max().map_or(0, |c| c as usize + 1);
    let mut votes = vec![0u32; height * width * classes];
    for (map, (y0, x0)) in patches {
        if y0 + map.height() > height || x0 + map.width() > width {
            return Err(shape!("patch {}x{} at ({y0},{x0}) exceeds {height}x{width}", map.height(), map.width()));
        }
        for y in 0..map.height() {
            for x in 0..map.width() {
                let p = (y0 + y) * width + x0 + x;
                votes[p * classes + map.get(y, x) as usize] += 1;
            }
        }
    }
    let ids = (0..height * width)
        .map(|p| {
            let v = &votes[p * classes..(p + 1) * classes];
            let mut best: Option<usize> = None;
            for (c, &n) in v.iter().enumerate() {
                if n > 0 && best.is_none_or(|b| n > v[b]) {
                    best = Some(c);
                }
            }
            best.map(|c| c as u16)
                .ok_or_else(|| invalid!("pixel ({}, {}) is not covered by any patch", p / width, p % width))
        })
        .collect::<Result<Vec<u16>>>()?;
    ClassMap::new(height, width, ids)
}

/// Counts indexed `[ground truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(shape!("{} counts for {classes} classes", counts.len()));
        }
        Ok(Self { classes, counts })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        Self::from_counts(rows.len(), rows.concat())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, c)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\pred");
        for c in 0..self.classes {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for t in 0..self.classes {
            let _ = write!(out, "{t}");
            for p in 0..self.classes {
                let _ = write!(out, ",{}", self.get(t, p));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Accumulates `[gt][pred]` over labeled pixels. Rows are split into fixed
/// chunks whose partial matrices are merged in chunk order.
pub fn confusion(pred: &ClassMap, gt: &LabelMap, classes: usize) -> Result<ConfusionMatrix> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(shape!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        ));
    }
    gt.check_classes(classes)?;
    pred.check_classes(classes)?;
    const CHUNK: usize = 4096;
    let partials: Vec<Vec<u64>> = pred
        .ids()
        .par_chunks(CHUNK)
        .zip(gt.ids().par_chunks(CHUNK))
        .map(|(p, g)| {
            let mut counts = vec![0u64; classes * classes];
            for (&p, &g) in p.iter().zip(g) {
                if g != IGNORE {
                    counts[g as usize * classes + p as usize] += 1;
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; classes * classes];
    for part in partials {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    ConfusionMatrix::from_counts(classes, counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub kappa: f64,
    pub miou: f64,
    /// Per-class F1 (0 where precision + recall = 0).
    pub f1: Vec<f64>,
    pub iou: Vec<f64>,
    /// Mean F1 over classes present in the ground truth.
    pub class_f1: f64,
    /// Classes with ground-truth support.
    pub supported: Vec<bool>,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "OA,{}", self.overall_accuracy);
        let _ = writeln!(out, "AA,{}", self.average_accuracy);
        let _ = writeln!(out, "kappa,{}", self.kappa);
        let _ = writeln!(out, "mIoU,{}", self.miou);
        let _ = writeln!(out, "CF1,{}", self.class_f1);
        for (c, f) in self.f1.iter().enumerate() {
            let _ = writeln!(out, "F1_{c},{f}");
        }
        for (c, v) in self.iou.iter().enumerate() {
            let _ = writeln!(out, "IoU_{c},{v}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// OA, AA, Cohen's kappa, IoU/mIoU and F1/CF1 from a confusion matrix.
///
/// AA, mIoU and CF1 average over classes with ground-truth support. When the
/// chance agreement is 1 (a single class everywhere) kappa is 1 if OA is 1
/// and 0 otherwise.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(invalid!("confusion matrix is empty"));
    }
    let k = cm.classes();
    let n = total as f64;
    let trace: u64 = (0..k).map(|c| cm.get(c, c)).sum();
    let oa = trace as f64 / n;
    let mut chance = 0.0;
    let (mut f1, mut iou, mut supported) = (vec![0.0; k], vec![0.0; k], vec![false; k]);
    let (mut recall_sum, mut support_count) = (0.0, 0usize);
    for c in 0..k {
        let tp = cm.get(c, c) as f64;
        let row = cm.row_sum(c) as f64;
        let col = cm.col_sum(c) as f64;
        chance += row * col;
        let (fn_, fp) = (row - tp, col - tp);
        if tp + fp + fn_ > 0.0 {
            iou[c] = tp / (tp + fp + fn_);
        }
        let precision = if col > 0.0 { tp / col } else { 0.0 };
        let recall = if row > 0.0 { tp / row } else { 0.0 };
        if precision + recall > 0.0 {
            f1[c] = 2.0 * precision * recall / (precision + recall);
        }
        if row > 0.0 {
            supported[c] = true;
            recall_sum += recall;
            support_count += 1;
        }
    }
    let pe = chance / (n * n);
    let kappa = if (1.0 - pe).abs() < f64::EPSILON {
        if trace == total {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - pe) / (1.0 - pe)
    };
    let mean_supported =
        |v: &[f64]| v.iter().zip(&supported).filter(|(_, &s)| s).map(|(x, _)| x).sum::<f64>() / support_count as f64;
    Ok(MetricsReport {
        overall_accuracy: oa,
        average_accuracy: recall_sum / support_count as f64,
        kappa,
        miou: mean_supported(&iou),
        class_f1: mean_supported(&f1),
        f1,
        iou,
        supported,
    })
}
