//! Class-proportion soft labels per supertoken, and their hard counterpart.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cluster::{AssignmentMap, AssociationMatrix};
use crate::cube::{LabelMap, IGNORE};
use crate::error::{invalid, shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Fraction of the token's labeled pixels carrying each class.
    #[default]
    HardCount,
    /// Same proportions with each pixel weighted by its association to the token.
    AssocWeighted,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard-count" => Ok(Self::HardCount),
            "assoc-weighted" => Ok(Self::AssocWeighted),
            other => Err(invalid!("unknown soft-label mode `{other}` (expected hard-count|assoc-weighted)")),
        }
    }
}

/// `tokens × classes` proportions. Tokens holding only unlabeled pixels are
/// invalid and carry an all-zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    tokens: usize,
    classes: usize,
    rows: Vec<f64>,
    valid: Vec<bool>,
}

impl SoftLabelMatrix {
    pub fn new(tokens: usize, classes: usize, rows: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if classes == 0 {
            return Err(invalid!("soft labels need at least one class"));
        }
        if rows.len() != tokens * classes || valid.len() != tokens {
            return Err(shape!("soft-label matrix {tokens}x{classes} has inconsistent buffers"));
        }
        Ok(Self { tokens, classes, rows, valid })
    }

    /// One-hot rows from a per-token class vector; [`IGNORE`] entries are invalid.
    pub fn one_hot(token_classes: &[u16], classes: usize) -> Result<Self> {
        let mut rows = vec![0.0; token_classes.len() * classes];
        let mut valid = vec![false; token_classes.len()];
        for (m, &c) in token_classes.iter().enumerate() {
            if c == IGNORE {
                continue;
            }
            if c as usize >= classes {
                return Err(invalid!("token {m} has class {c} ≥ {classes}"));
            }
            rows[m * classes + c as usize] = 1.0;
            valid[m] = true;
        }
        Self::new(token_classes.len(), classes, rows, valid)
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m * self.classes..(m + 1) * self.classes]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn is_valid(&self, m: usize) -> bool {
        self.valid[m]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Replaces every valid row by the one-hot vector of its argmax.
    pub fn hardened(&self) -> Self {
        Self::one_hot(&hard_labels(self), self.classes).expect("argmax classes are in range")
    }

    /// CSV with header `valid,p0,..,p{C-1}` and one row per token.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("valid");
        for c in 0..self.classes {
            let _ = write!(out, ",p{c}");
        }
        out.push('\n');
        for m in 0..self.tokens {
            out.push(if self.valid[m] { '1' } else { '0' });
            for v in self.row(m) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty soft-label CSV".into()))?;
        let classes = header.split(',').count().saturating_sub(1);
        let (mut rows, mut valid) = (Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != classes + 1 {
                return Err(Error::Format(format!("soft-label row {k}: expected {} fields", classes + 1)));
            }
            valid.push(match fields[0] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Format(format!("soft-label row {k}: bad validity {other:?}"))),
            });
            for f in &fields[1..] {
                rows.push(f.parse::<f64>().map_err(|_| Error::Format(format!("soft-label row {k}: bad value {f:?}")))?);
            }
        }
        Self::new(valid.len(), classes, rows, valid)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Per-token class proportions over the token's labeled pixels.
///
/// In `AssocWeighted` mode each pixel counts with weight `A(i, m)`; the
/// weights of a token are rescaled by a common factor before summing, which
/// leaves the proportions unchanged and keeps them defined when the raw
/// weights underflow.
pub fn soft_labels(
    assignment: &AssignmentMap,
    assoc: &AssociationMatrix,
    gt: &LabelMap,
    classes: usize,
    mode: LabelMode,
) -> Result<SoftLabelMatrix> {
    if gt.height() != assignment.height() || gt.width() != assignment.width() {
        return Err(shape!(
            "ground truth is {}x{}, assignment is {}x{}",
            gt.height(),
            gt.width(),
            assignment.height(),
            assignment.width()
        ));
    }
    if mode == LabelMode::AssocWeighted && assoc.num_pixels() != assignment.len() {
        return Err(shape!("association rows do not match assignment"));
    }
    if classes == 0 {
        return Err(invalid!("class count must be ≥ 1"));
    }
    gt.check_classes(classes)?;

    let members = assignment.members();
    let ids = gt.ids();
    let per_token: Vec<(Vec<f64>, bool)> = members
        .par_iter()
        .enumerate()
        .map(|(m, pixels)| {
            let labeled: Vec<usize> = pixels.iter().copied().filter(|&i| ids[i] != IGNORE).collect();
            let mut row = vec![0.0; classes];
            if labeled.is_empty() {
                return (row, false);
            }
            match mode {
                LabelMode::HardCount => {
                    for &i in &labeled {
                        row[ids[i] as usize] += 1.0;
                    }
                    let total = labeled.len() as f64;
                    row.iter_mut().for_each(|v| *v /= total);
                }
                LabelMode::AssocWeighted => {
                    let dist: Vec<f64> = labeled.iter().map(|&i| sq_dist_to(assoc, i, m)).collect();
                    let shift = dist.iter().copied().fold(f64::INFINITY, f64::min);
                    let mut total = 0.0;
                    for (&i, d2) in labeled.iter().zip(&dist) {
                        let w = (shift - d2).exp();
                        row[ids[i] as usize] += w;
                        total += w;
                    }
                    row.iter_mut().for_each(|v| *v /= total);
                }
            }
            (row, true)
        })
        .collect();

    let mut rows = Vec::with_capacity(members.len() * classes);
    let mut valid = Vec::with_capacity(members.len());
    for (r, v) in per_token {
        rows.extend(r);
        valid.push(v);
    }
    SoftLabelMatrix::new(members.len(), classes, rows, valid)
}

fn sq_dist_to(assoc: &AssociationMatrix, i: usize, m: usize) -> f64 {
    assoc.row(i).iter().find(|e| e.center as usize == m).map_or(f64::INFINITY, |e| e.sq_dist)
}

/// Argmax class of each valid token (ties to the lower id); [`IGNORE`] for
/// invalid tokens.
pub fn hard_labels(labels: &SoftLabelMatrix) -> Vec<u16> {
    (0..labels.tokens())
        .map(|m| {
            if !labels.is_valid(m) {
                return IGNORE;
            }
            let row = labels.row(m);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best as u16
        })
        .collect()
}
