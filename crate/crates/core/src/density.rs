//! Per-level information density and working-scale selection.
//!
//! The density of a level is the zeroth-order Shannon entropy, in bits, of its
//! causal prediction residuals: each pixel is predicted by its left neighbour,
//! and first-column pixels by the pixel above. Residuals are rounded to the
//! nearest integer before they are histogrammed.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::image::Image;
use crate::pyramid::Pyramid;

/// Default fraction of the running maximum below which density counts as dropped.
pub const DEFAULT_DROP_RATIO: f64 = 0.8;

/// Rounded causal residuals in raster order, skipping pixel (0, 0).
pub fn prediction_residuals(img: &Image) -> Vec<i64> {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut out = Vec::with_capacity(w * h - 1);
    for r in 0..h {
        let row = &px[r * w..(r + 1) * w];
        if r > 0 {
            out.push((row[0] - px[(r - 1) * w]).round() as i64);
        }
        for c in 1..w {
            out.push((row[c] - row[c - 1]).round() as i64);
        }
    }
    out
}

/// Entropy of the residual histogram in bits. A 1x1 image has density 0.
pub fn information_density(img: &Image) -> f64 {
    let residuals = prediction_residuals(img);
    if residuals.is_empty() {
        return 0.0;
    }
    let mut histogram: BTreeMap<i64, usize> = BTreeMap::new();
    for r in residuals.iter() {
        *histogram.entry(*r).or_default() += 1;
    }
    let n = residuals.len() as f64;
    let entropy: f64 = histogram
        .values()
        .map(|&count| {
            let p = count as f64 / n;
            -p * p.log2()
        })
        .sum();
    // A single-bin histogram yields -0.0.
    entropy.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    values: Vec<f64>,
}

impl DensityCurve {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn density_curve(pyr: &Pyramid) -> DensityCurve {
    DensityCurve::new(pyr.levels().iter().map(information_density).collect())
}

/// Picks the level one step before the first density drop.
///
/// A drop at level `j` means `curve[j] < drop_ratio * max(curve[..j])`. When no
/// level drops, the last (coarsest) level is returned. An empty curve yields 0.
pub fn select_working_scale(curve: &DensityCurve, drop_ratio: f64) -> usize {
    let values = curve.values();
    let Some(&first) = values.first() else {
        return 0;
    };
    let mut running_max = first;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < drop_ratio * running_max {
            return j - 1;
        }
        running_max = running_max.max(v);
    }
    values.len() - 1
}
