//! Label maps, region statistics, and the three segmentation stages:
//! region growing at the top level, map expansion, and per-level refinement.
//!
//! Region means are tracked as `(count, sum)` pairs and every tolerance test is
//! written as `|v * count - sum| <= tol * count`. The comparisons therefore only
//! ever see intensity differences, which keeps labelling exactly invariant when
//! a constant is added to the image.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::config::SegmentationConfig;
use crate::image::Image;
use crate::pyramid::coarser_dims;

pub type Label = u32;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("label buffer holds {actual} entries, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("label 0 is reserved for unassigned pixels (found at index {index})")]
    UnassignedPixel { index: usize },
    #[error("label {label} has no region statistics")]
    MissingRegion { label: Label },
}

/// Per-pixel region labels, row-major. Label 0 never survives a public operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self, SegmentError> {
        if labels.len() != width * height {
            return Err(SegmentError::LengthMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if let Some(index) = labels.iter().position(|&l| l == 0) {
            return Err(SegmentError::UnassignedPixel { index });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Self {
        assert!(label != 0, "label 0 is reserved");
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Label {
        self.labels[row * self.width + col]
    }

    pub fn max_label(&self) -> Label {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn distinct_labels(&self) -> BTreeSet<Label> {
        self.labels.iter().copied().collect()
    }

    fn check_dims(&self, width: usize, height: usize) -> Result<(), SegmentError> {
        if (self.width, self.height) == (width, height) {
            Ok(())
        } else {
            Err(SegmentError::DimensionMismatch {
                expected: (width, height),
                actual: (self.width, self.height),
            })
        }
    }
}

/// Pixel count and intensity sum of one region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegionStat {
    pub count: usize,
    pub sum: f64,
}

impl RegionStat {
    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    fn add(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
    }

    /// `|value - mean| > tol`, evaluated without dividing.
    #[inline]
    fn exceeds(&self, value: f64, tol: f64) -> bool {
        let n = self.count as f64;
        (value * n - self.sum).abs() > tol * n
    }

    #[inline]
    fn deviation(&self, value: f64) -> f64 {
        let n = self.count as f64;
        (value * n - self.sum).abs() / n
    }
}

/// Mean intensity and pixel count for every label of a paired [`LabelMap`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RegionMeans {
    stats: BTreeMap<Label, RegionStat>,
}

impl RegionMeans {
    /// Recomputes statistics from a label map over `img`.
    pub fn from_map(lm: &LabelMap, img: &Image) -> Result<Self, SegmentError> {
        lm.check_dims(img.width(), img.height())?;
        let mut stats: BTreeMap<Label, RegionStat> = BTreeMap::new();
        for (&l, &v) in lm.labels.iter().zip(img.pixels()) {
            stats.entry(l).or_default().add(v);
        }
        Ok(Self { stats })
    }

    pub fn from_stats(stats: BTreeMap<Label, RegionStat>) -> Self {
        Self { stats }
    }

    pub fn mean(&self, label: Label) -> Option<f64> {
        self.stats.get(&label).map(RegionStat::mean)
    }

    pub fn count(&self, label: Label) -> Option<usize> {
        self.stats.get(&label).map(|s| s.count)
    }

    pub fn stat(&self, label: Label) -> Option<&RegionStat> {
        self.stats.get(&label)
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.stats.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &RegionStat)> + '_ {
        self.stats.iter().map(|(&l, s)| (l, s))
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn total_count(&self) -> usize {
        self.stats.values().map(|s| s.count).sum()
    }

    pub fn max_label(&self) -> Label {
        self.stats.keys().next_back().copied().unwrap_or(0)
    }
}

/// Calls `f` for each in-bounds 4-neighbour of `p`, in the order up, left, right, down.
#[inline]
fn for_each_neighbor(p: usize, width: usize, height: usize, mut f: impl FnMut(usize)) {
    let (r, c) = (p / width, p % width);
    if r > 0 {
        f(p - width);
    }
    if c > 0 {
        f(p - 1);
    }
    if c + 1 < width {
        f(p + 1);
    }
    if r + 1 < height {
        f(p + width);
    }
}

/// Seeded region growing with a running mean.
///
/// Pixels are scanned in raster order; the first unassigned pixel opens a new
/// region, which grows breadth-first over 4-neighbours. A neighbour joins when
/// it lies within `delta` of the region's current mean, and the mean is updated
/// on every admission. Labels are numbered 1, 2, 3, ... in creation order.
pub fn segment_top(img: &Image, delta: f64) -> (LabelMap, RegionMeans) {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut labels = vec![0 as Label; px.len()];
    let mut stats = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut next: Label = 1;

    for seed in 0..px.len() {
        if labels[seed] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut region = RegionStat::default();
        labels[seed] = label;
        region.add(px[seed]);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for_each_neighbor(p, w, h, |q| {
                if labels[q] == 0 && !region.exceeds(px[q], delta) {
                    labels[q] = label;
                    region.add(px[q]);
                    queue.push_back(q);
                }
            });
        }
        stats.insert(label, region);
    }

    (
        LabelMap {
            width: w,
            height: h,
            labels,
        },
        RegionMeans { stats },
    )
}

/// Replicates each parent label and region mean onto its children at the next finer level.
///
/// `target_w x target_h` must be exactly the finer level whose halving gives the
/// parent dimensions. Child `(r, c)` inherits parent `(r / 2, c / 2)`, clamped to
/// the parent grid.
pub fn expand_maps(
    lm: &LabelMap,
    rm: &RegionMeans,
    target_w: usize,
    target_h: usize,
) -> Result<(LabelMap, Image), SegmentError> {
    if target_w == 0 || target_h == 0 || coarser_dims(target_w, target_h) != (lm.width, lm.height)
    {
        return Err(SegmentError::DimensionMismatch {
            expected: coarser_dims(target_w, target_h),
            actual: (lm.width, lm.height),
        });
    }
    let mut labels = Vec::with_capacity(target_w * target_h);
    let mut means = Vec::with_capacity(target_w * target_h);
    for r in 0..target_h {
        let pr = (r / 2).min(lm.height - 1);
        for c in 0..target_w {
            let pc = (c / 2).min(lm.width - 1);
            let label = lm.labels[pr * lm.width + pc];
            let mean = rm.mean(label).ok_or(SegmentError::MissingRegion { label })?;
            labels.push(label);
            means.push(mean);
        }
    }
    Ok((
        LabelMap {
            width: target_w,
            height: target_h,
            labels,
        },
        Image::from_parts_unchecked(target_w, target_h, means),
    ))
}

/// Output of [`refine_level`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub labels: LabelMap,
    pub means: RegionMeans,
    /// Labels of regions that emerged as new seeds at this level, ascending.
    pub new_seeds: Vec<Label>,
    /// Refinement iterations actually performed.
    pub iterations: usize,
    /// Pixels moved to a neighbouring region, summed over iterations.
    pub reassigned: usize,
}

/// Stats indexed directly by label.
struct DenseStats(Vec<RegionStat>);

impl DenseStats {
    fn recompute(&mut self, labels: &[Label], px: &[f64], capacity: usize) {
        self.0.clear();
        self.0.resize(capacity, RegionStat::default());
        for (&l, &v) in labels.iter().zip(px) {
            self.0[l as usize].add(v);
        }
    }
}

/// Refines an expanded label map against the reference image of its level.
///
/// Fresh labels start above the largest label present in `lm` or `rm`.
pub fn refine_level(
    reference: &Image,
    lm: &LabelMap,
    rm: &RegionMeans,
    cfg: &SegmentationConfig,
) -> Result<Refinement, SegmentError> {
    let mut next_label = lm.max_label().max(rm.max_label()) + 1;
    refine_level_from(reference, lm, rm, cfg, &mut next_label)
}

/// [`refine_level`] with an explicit label allocator.
///
/// `next_label` is advanced past every label this call allocates, so a caller
/// descending several levels never reuses a label number.
///
/// Each iteration:
/// 1. In raster order, a pixel deviating from its region mean by more than
///    `tau` moves to the 4-neighbour region whose mean is closest (ties to the
///    smaller label), provided that deviation is within `tau`. Means are the
///    ones in force at the start of the iteration.
/// 2. Region statistics are recomputed. Pixels still deviating by more than
///    `tau` are seed candidates; each 4-connected group of candidates becomes a
///    new region, labelled in order of its first raster pixel.
/// 3. Statistics are recomputed again.
///
/// Iteration stops after `max_refine_iters` or once an iteration changes no
/// label. Finally every disconnected label is split into its 4-connected
/// components; the component holding the label's first raster pixel keeps the
/// label and the others receive fresh labels in raster order.
pub fn refine_level_from(
    reference: &Image,
    lm: &LabelMap,
    rm: &RegionMeans,
    cfg: &SegmentationConfig,
    next_label: &mut Label,
) -> Result<Refinement, SegmentError> {
    let (w, h) = (reference.width(), reference.height());
    lm.check_dims(w, h)?;
    let px = reference.pixels();
    let n = px.len();
    let tau = cfg.tau;
    let mut labels = lm.labels.clone();

    *next_label = (*next_label).max(lm.max_label().max(rm.max_label()) + 1);
    let mut stats = DenseStats(vec![RegionStat::default(); *next_label as usize]);
    for (label, stat) in rm.iter() {
        stats.0[label as usize] = *stat;
    }
    for &l in &labels {
        if stats.0[l as usize].count == 0 {
            return Err(SegmentError::MissingRegion { label: l });
        }
    }

    let mut seeds: BTreeSet<Label> = BTreeSet::new();
    let mut candidate = vec![false; n];
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    let mut iterations = 0;
    let mut reassigned_total = 0;

    for _ in 0..cfg.max_refine_iters {
        iterations += 1;

        let mut reassigned = 0;
        for p in 0..n {
            let own = labels[p];
            let v = px[p];
            if !stats.0[own as usize].exceeds(v, tau) {
                continue;
            }
            let mut best: Option<(f64, Label)> = None;
            for_each_neighbor(p, w, h, |q| {
                let l = labels[q];
                if l == own {
                    return;
                }
                let d = stats.0[l as usize].deviation(v);
                let better = match best {
                    None => true,
                    Some((bd, bl)) => d < bd || (d == bd && l < bl),
                };
                if better {
                    best = Some((d, l));
                }
            });
            if let Some((_, l)) = best {
                if !stats.0[l as usize].exceeds(v, tau) {
                    labels[p] = l;
                    reassigned += 1;
                }
            }
        }
        reassigned_total += reassigned;

        stats.recompute(&labels, px, *next_label as usize);
        for p in 0..n {
            candidate[p] = stats.0[labels[p] as usize].exceeds(px[p], tau);
        }
        visited.fill(false);
        let mut new_regions = 0;
        for start in 0..n {
            if !candidate[start] || visited[start] {
                continue;
            }
            let label = *next_label;
            *next_label += 1;
            new_regions += 1;
            seeds.insert(label);
            visited[start] = true;
            stack.push(start);
            while let Some(p) = stack.pop() {
                labels[p] = label;
                for_each_neighbor(p, w, h, |q| {
                    if candidate[q] && !visited[q] {
                        visited[q] = true;
                        stack.push(q);
                    }
                });
            }
        }

        stats.recompute(&labels, px, *next_label as usize);
        if reassigned == 0 && new_regions == 0 {
            break;
        }
    }

    split_disconnected(&mut labels, w, h, next_label, &mut seeds);
    stats.recompute(&labels, px, *next_label as usize);

    let region_stats: BTreeMap<Label, RegionStat> = stats
        .0
        .iter()
        .enumerate()
        .filter(|(_, s)| s.count > 0)
        .map(|(l, s)| (l as Label, *s))
        .collect();
    let new_seeds = seeds
        .into_iter()
        .filter(|l| region_stats.contains_key(l))
        .collect();

    Ok(Refinement {
        labels: LabelMap {
            width: w,
            height: h,
            labels,
        },
        means: RegionMeans {
            stats: region_stats,
        },
        new_seeds,
        iterations,
        reassigned: reassigned_total,
    })
}

/// Gives every 4-connected piece of a label its own label. Pieces split from a
/// seed label are recorded as seeds too.
fn split_disconnected(
    labels: &mut [Label],
    w: usize,
    h: usize,
    next_label: &mut Label,
    seeds: &mut BTreeSet<Label>,
) {
    let n = labels.len();
    let mut visited = vec![false; n];
    let mut seen = vec![false; *next_label as usize];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let label = labels[start];
        visited[start] = true;
        stack.push(start);
        component.clear();
        while let Some(p) = stack.pop() {
            component.push(p);
            for_each_neighbor(p, w, h, |q| {
                if !visited[q] && labels[q] == label {
                    visited[q] = true;
                    stack.push(q);
                }
            });
        }
        if !seen[label as usize] {
            seen[label as usize] = true;
            continue;
        }
        let fresh = *next_label;
        *next_label += 1;
        if seeds.contains(&label) {
            seeds.insert(fresh);
        }
        for &p in &component {
            labels[p] = fresh;
        }
    }
}
