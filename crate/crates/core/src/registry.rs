//! The object registry: one record per region per level, with size, centroid,
//! mean intensity, bounding box, parent in the level above, adjacency and
//! pairwise spatial relations.
//!
//! Coordinates are pixel centres at integer `(row, col)`, origin top-left.

use std::collections::BTreeSet;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::image::Image;
use crate::pyramid::coarser_dims;
use crate::segment::{Label, LabelMap};

/// Centroids must differ by more than this many pixels for `left-of` / `above`.
pub const RELATION_MARGIN: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("label map is {map:?} but image is {image:?}")]
    DimensionMismatch {
        map: (usize, usize),
        image: (usize, usize),
    },
    #[error("parent label map is {actual:?}, expected {expected:?}")]
    ParentMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

/// Where a region came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    /// Region of the top (first segmented) level.
    Top,
    /// Majority label among the parent cells of the region's pixels.
    Label(Label),
    /// Region emerged as a refinement seed at this level.
    New,
}

impl Serialize for Parent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Parent::Top => s.serialize_none(),
            Parent::Label(l) => s.serialize_u32(*l),
            Parent::New => s.serialize_str("new"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SpatialPredicate {
    #[serde(rename = "left-of")]
    LeftOf,
    #[serde(rename = "above")]
    Above,
    #[serde(rename = "contains")]
    Contains,
}

/// `(predicate, other_label)`: this region stands in `predicate` to `other_label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Relation(pub SpatialPredicate, pub Label);

/// Inclusive pixel bounds `[min_row, min_col, max_row, max_col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "[usize; 4]")]
pub struct BBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.min_row, b.min_col, b.max_row, b.max_col]
    }
}

impl BBox {
    fn point(row: usize, col: usize) -> Self {
        Self {
            min_row: row,
            min_col: col,
            max_row: row,
            max_col: col,
        }
    }

    fn include(&mut self, row: usize, col: usize) {
        self.min_row = self.min_row.min(row);
        self.min_col = self.min_col.min(col);
        self.max_row = self.max_row.max(row);
        self.max_col = self.max_col.max(col);
    }

    pub fn covers(&self, other: &BBox) -> bool {
        self.min_row <= other.min_row
            && self.min_col <= other.min_col
            && self.max_row >= other.max_row
            && self.max_col >= other.max_col
    }

    /// Covers `other` and differs from it.
    pub fn strictly_contains(&self, other: &BBox) -> bool {
        self.covers(other) && self != other
    }

    pub fn contains_point(&self, row: f64, col: f64) -> bool {
        row >= self.min_row as f64
            && row <= self.max_row as f64
            && col >= self.min_col as f64
            && col <= self.max_col as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRecord {
    pub level: usize,
    pub label: Label,
    pub size: usize,
    /// `(row, col)`.
    pub centroid: (f64, f64),
    pub mean_intensity: f64,
    pub bbox: BBox,
    pub parent: Parent,
    pub adjacent: BTreeSet<Label>,
    pub relations: BTreeSet<Relation>,
    /// For seed regions, the majority parent-cell label they emerged inside.
    #[serde(skip)]
    pub emerged_from: Option<Label>,
}

impl RegionRecord {
    pub fn is_new(&self) -> bool {
        self.parent == Parent::New
    }

    pub fn has_relation(&self, predicate: SpatialPredicate, other: Label) -> bool {
        self.relations.contains(&Relation(predicate, other))
    }
}

type RelationTest = fn(&RegionRecord, &RegionRecord) -> bool;

pub fn left_of(a: &RegionRecord, b: &RegionRecord) -> bool {
    a.centroid.1 < b.centroid.1 - RELATION_MARGIN
}

pub fn above(a: &RegionRecord, b: &RegionRecord) -> bool {
    a.centroid.0 < b.centroid.0 - RELATION_MARGIN
}

pub fn contains(a: &RegionRecord, b: &RegionRecord) -> bool {
    a.label != b.label && a.bbox.strictly_contains(&b.bbox)
}

/// All records of one level, sorted by label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecords {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub records: Vec<RegionRecord>,
}

impl LevelRecords {
    pub fn get(&self, label: Label) -> Option<&RegionRecord> {
        self.records
            .binary_search_by_key(&label, |r| r.label)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Default)]
struct Accumulator {
    label: Label,
    size: usize,
    sum_row: f64,
    sum_col: f64,
    sum_value: f64,
    bbox: Option<BBox>,
    majority_parent: Option<Label>,
}

/// Builds the records for one level, including adjacency and relations.
///
/// `parent_lm` is the label map of the level above, absent for the top level.
/// Each record's parent is the label most of its pixels' parent cells carry
/// (ties to the smaller label); labels in `seeds` are marked [`Parent::New`].
pub fn register_level(
    level: usize,
    lm: &LabelMap,
    img: &Image,
    parent_lm: Option<&LabelMap>,
    seeds: &[Label],
) -> Result<LevelRecords, RegistryError> {
    let (w, h) = (lm.width(), lm.height());
    if (img.width(), img.height()) != (w, h) {
        return Err(RegistryError::DimensionMismatch {
            map: (w, h),
            image: (img.width(), img.height()),
        });
    }
    if let Some(parent) = parent_lm {
        let expected = coarser_dims(w, h);
        if (parent.width(), parent.height()) != expected {
            return Err(RegistryError::ParentMismatch {
                expected,
                actual: (parent.width(), parent.height()),
            });
        }
    }

    let labels = lm.labels();
    let px = img.pixels();

    // Dense slots in ascending label order.
    let mut slot = vec![usize::MAX; lm.max_label() as usize + 1];
    for &l in labels {
        slot[l as usize] = 0;
    }
    let mut acc: Vec<Accumulator> = Vec::new();
    for (l, s) in slot.iter_mut().enumerate() {
        if *s == 0 {
            *s = acc.len();
            acc.push(Accumulator {
                label: l as Label,
                ..Default::default()
            });
        }
    }
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let a = &mut acc[slot[labels[p] as usize]];
            a.size += 1;
            a.sum_row += r as f64;
            a.sum_col += c as f64;
            a.sum_value += px[p];
            match a.bbox.as_mut() {
                Some(b) => b.include(r, c),
                None => a.bbox = Some(BBox::point(r, c)),
            }
        }
    }

    if let Some(parent) = parent_lm {
        let mut votes: Vec<(Label, Label)> = Vec::with_capacity(labels.len());
        for r in 0..h {
            for c in 0..w {
                votes.push((labels[r * w + c], parent.get(r / 2, c / 2)));
            }
        }
        votes.sort_unstable();
        // Runs of equal (label, parent) pairs; strict `>` keeps the smaller parent on ties.
        let mut best: Option<(Label, Label, usize)> = None;
        let mut i = 0;
        while i < votes.len() {
            let j = i + votes[i..].iter().take_while(|v| **v == votes[i]).count();
            let (label, parent_label) = votes[i];
            let count = j - i;
            match best {
                Some((bl, _, bc)) if bl == label && bc >= count => {}
                _ => best = Some((label, parent_label, count)),
            }
            if j == votes.len() || votes[j].0 != label {
                let (_, winner, _) = best.take().expect("run recorded");
                acc[slot[label as usize]].majority_parent = Some(winner);
            }
            i = j;
        }
    }

    let seeds: BTreeSet<Label> = seeds.iter().copied().collect();
    let mut records: Vec<RegionRecord> = acc
        .into_iter()
        .map(|a| {
            let n = a.size as f64;
            let label = a.label;
            let majority = a.majority_parent;
            let (parent, emerged_from) = match (parent_lm, seeds.contains(&label)) {
                (None, _) => (Parent::Top, None),
                (Some(_), true) => (Parent::New, majority),
                (Some(_), false) => (
                    Parent::Label(majority.expect("region has at least one pixel")),
                    None,
                ),
            };
            RegionRecord {
                level,
                label,
                size: a.size,
                centroid: (a.sum_row / n, a.sum_col / n),
                mean_intensity: a.sum_value / n,
                bbox: a.bbox.expect("region has at least one pixel"),
                parent,
                adjacent: BTreeSet::new(),
                relations: BTreeSet::new(),
                emerged_from,
            }
        })
        .collect();

    spatial_relations(&mut records, lm);
    Ok(LevelRecords {
        level,
        width: w,
        height: h,
        records,
    })
}

/// Fills `adjacent` and `relations` for records sorted by label.
///
/// Two regions are adjacent when some 4-neighbour pixel pair carries their
/// labels. Relations are evaluated for every adjacent pair:
/// `left-of(A, B)` iff `col(A) < col(B) - 0.5`, `above(A, B)` iff
/// `row(A) < row(B) - 0.5`, and `contains(A, B)` iff A's box strictly contains B's.
pub fn spatial_relations(records: &mut [RegionRecord], lm: &LabelMap) {
    let (w, h) = (lm.width(), lm.height());
    let labels = lm.labels();
    let mut pairs: Vec<(Label, Label)> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let a = labels[r * w + c];
            if c + 1 < w {
                let b = labels[r * w + c + 1];
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
            if r + 1 < h {
                let b = labels[(r + 1) * w + c];
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
        }
    }

    pairs.sort_unstable();
    pairs.dedup();

    let index = |records: &[RegionRecord], label: Label| {
        records
            .binary_search_by_key(&label, |r| r.label)
            .expect("every label in the map has a record")
    };
    for (a, b) in pairs {
        let (ia, ib) = (index(records, a), index(records, b));
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        {
            let (ra, rb) = (&records[ia], &records[ib]);
            let checks: [(SpatialPredicate, RelationTest); 3] = [
                (SpatialPredicate::LeftOf, left_of),
                (SpatialPredicate::Above, above),
                (SpatialPredicate::Contains, contains),
            ];
            for (pred, test) in checks {
                if test(ra, rb) {
                    forward.push(Relation(pred, b));
                }
                if test(rb, ra) {
                    backward.push(Relation(pred, a));
                }
            }
        }
        records[ia].adjacent.insert(b);
        records[ia].relations.extend(forward);
        records[ib].adjacent.insert(a);
        records[ib].relations.extend(backward);
    }
}

/// Records of every segmented level, ordered from the top level down to level 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObjectRegistry {
    pub levels: Vec<LevelRecords>,
}

impl ObjectRegistry {
    pub fn level(&self, level: usize) -> Option<&LevelRecords> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn record(&self, level: usize, label: Label) -> Option<&RegionRecord> {
        self.level(level)?.get(label)
    }

    pub fn top_level(&self) -> Option<usize> {
        self.levels.iter().map(|l| l.level).max()
    }

    pub fn records(&self) -> impl Iterator<Item = &RegionRecord> + '_ {
        self.levels.iter().flat_map(|l| l.records.iter())
    }

    /// Labels reached by walking up from `(level, label)`: parent links, and for
    /// seed regions the region they emerged inside. Excludes the start label.
    pub fn ancestors(&self, level: usize, label: Label) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        let mut cur = self.record(level, label);
        while let Some(rec) = cur {
            let up = match rec.parent {
                Parent::Top => None,
                Parent::Label(l) => Some(l),
                Parent::New => rec.emerged_from,
            };
            let Some(up) = up else { break };
            if up != label {
                out.insert(up);
            }
            cur = self.record(rec.level + 1, up);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes to JSON")
    }
}
