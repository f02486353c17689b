//! Externally authored knowledge base and the annotator that labels level-0
//! registry objects against it.
//!
//! The knowledge base holds stories; a story is an ordered list of object
//! templates, each describing an intensity range, a size range (as a fraction
//! of the level's pixel count) and the relations the object must have to other
//! words of the same story. Nothing here writes image-derived data back into
//! the knowledge base.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::MAX_INTENSITY;
use crate::registry::{ObjectRegistry, RegionRecord, SpatialPredicate};
use crate::segment::Label;

/// Default minimum context score for a label to be kept.
pub const DEFAULT_THETA: f64 = 0.5;

/// Word emitted for objects no template accounts for.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed knowledge base at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: duplicate story id `{id}`")]
    DuplicateStory { location: String, id: String },
    #[error("{location}: duplicate word `{word}` within story")]
    DuplicateWord { location: String, word: String },
    #[error("{location}: relation target `{target}` is not a word of this story")]
    DanglingTarget { location: String, target: String },
    #[error("{location}: inverted range [{lo}, {hi}]")]
    InvertedRange { location: String, lo: f64, hi: f64 },
    #[error("{location}: range [{lo}, {hi}] leaves [0, 1]")]
    RangeOutOfBounds { location: String, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    LeftOf,
    Above,
    Contains,
    SubPartOf,
}

impl Predicate {
    pub fn spatial(self) -> Option<SpatialPredicate> {
        match self {
            Predicate::LeftOf => Some(SpatialPredicate::LeftOf),
            Predicate::Above => Some(SpatialPredicate::Above),
            Predicate::Contains => Some(SpatialPredicate::Contains),
            Predicate::SubPartOf => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTemplate {
    pub word: String,
    /// Mean intensity range on the 0..=1 scale.
    pub intensity_range: [f64; 2],
    /// Size range as a fraction of the level's pixel count.
    pub size_fraction_range: [f64; 2],
    #[serde(default)]
    pub required_relations: Vec<(Predicate, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Story {
    pub id: String,
    pub templates: Vec<ObjectTemplate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeBase {
    pub stories: Vec<Story>,
}

impl KnowledgeBase {
    pub fn validate(&self) -> Result<(), KbError> {
        let mut ids = BTreeSet::new();
        for (si, story) in self.stories.iter().enumerate() {
            let at = format!("stories[{si}]");
            if !ids.insert(story.id.as_str()) {
                return Err(KbError::DuplicateStory {
                    location: format!("{at}.id"),
                    id: story.id.clone(),
                });
            }
            let mut words = BTreeSet::new();
            for (ti, t) in story.templates.iter().enumerate() {
                if !words.insert(t.word.as_str()) {
                    return Err(KbError::DuplicateWord {
                        location: format!("{at}.templates[{ti}].word"),
                        word: t.word.clone(),
                    });
                }
            }
            for (ti, t) in story.templates.iter().enumerate() {
                let tat = format!("{at}.templates[{ti}]");
                check_range(&format!("{tat}.intensity_range"), t.intensity_range)?;
                check_range(&format!("{tat}.size_fraction_range"), t.size_fraction_range)?;
                for (ri, (_, target)) in t.required_relations.iter().enumerate() {
                    if !words.contains(target.as_str()) {
                        return Err(KbError::DanglingTarget {
                            location: format!("{tat}.required_relations[{ri}]"),
                            target: target.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("knowledge base serializes to JSON")
    }
}

fn check_range(location: &str, [lo, hi]: [f64; 2]) -> Result<(), KbError> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
        return Err(KbError::RangeOutOfBounds {
            location: location.to_owned(),
            lo,
            hi,
        });
    }
    if lo > hi {
        return Err(KbError::InvertedRange {
            location: location.to_owned(),
            lo,
            hi,
        });
    }
    Ok(())
}

/// Parses and validates a knowledge base JSON document.
pub fn load_knowledge_base(document: &str) -> Result<KnowledgeBase, KbError> {
    let kb: KnowledgeBase = serde_json::from_str(document).map_err(|e| KbError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    kb.validate()?;
    Ok(kb)
}

pub fn load_knowledge_base_file(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    load_knowledge_base(&std::fs::read_to_string(path)?)
}

fn in_range(value: f64, [lo, hi]: [f64; 2]) -> bool {
    lo <= value && value <= hi
}

/// Inclusive range test of mean intensity and relative size.
pub fn match_object(rec: &RegionRecord, tmpl: &ObjectTemplate, level_pixel_count: usize) -> bool {
    in_range(rec.mean_intensity / MAX_INTENSITY, tmpl.intensity_range)
        && in_range(rec.size as f64 / level_pixel_count as f64, tmpl.size_fraction_range)
}

/// Whether level-0 object `x` stands in `predicate` to level-0 object `y`.
///
/// `sub-part-of` holds when `y` is an ancestor of `x` in the registry
/// hierarchy, or when `y` spatially contains `x`.
pub fn holds(registry: &ObjectRegistry, predicate: Predicate, x: &RegionRecord, y: &RegionRecord) -> bool {
    if x.label == y.label {
        return false;
    }
    match predicate.spatial() {
        Some(p) => x.has_relation(p, y.label),
        None => {
            y.has_relation(SpatialPredicate::Contains, x.label)
                || registry.ancestors(x.level, x.label).contains(&y.label)
        }
    }
}

/// Context score per assigned level-0 object: the fraction of its template's
/// required relations that some object assigned the target word satisfies.
/// Templates without required relations score 1.0.
pub fn verify_context(
    assignment: &BTreeMap<Label, String>,
    story: &Story,
    registry: &ObjectRegistry,
) -> BTreeMap<Label, f64> {
    let mut scores = BTreeMap::new();
    let Some(base) = registry.level(0) else {
        return scores;
    };
    let templates: BTreeMap<&str, &ObjectTemplate> =
        story.templates.iter().map(|t| (t.word.as_str(), t)).collect();
    for (&label, word) in assignment {
        let (Some(tmpl), Some(x)) = (templates.get(word.as_str()), base.get(label)) else {
            continue;
        };
        let total = tmpl.required_relations.len();
        if total == 0 {
            scores.insert(label, 1.0);
            continue;
        }
        let satisfied = tmpl
            .required_relations
            .iter()
            .filter(|(pred, target)| {
                assignment
                    .iter()
                    .filter(|(_, w)| *w == target)
                    .filter_map(|(&l, _)| base.get(l))
                    .any(|y| holds(registry, *pred, x, y))
            })
            .count();
        scores.insert(label, satisfied as f64 / total as f64);
    }
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectAnnotation {
    pub level: usize,
    pub label: Label,
    pub word: String,
    /// Context score of the assigned template, or 0 when no template matched.
    pub context_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoryScore {
    pub id: String,
    pub score: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub story: Option<String>,
    pub theta: f64,
    pub story_scores: Vec<StoryScore>,
    pub objects: Vec<ObjectAnnotation>,
}

impl Annotation {
    pub fn word(&self, label: Label) -> Option<&str> {
        self.objects
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.word.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes to JSON")
    }
}

/// Greedy first-match assignment: objects in label order take the first
/// unclaimed template they match.
fn assign(story: &Story, objects: &[RegionRecord], pixel_count: usize) -> BTreeMap<Label, String> {
    let mut claimed = vec![false; story.templates.len()];
    let mut out = BTreeMap::new();
    for rec in objects {
        if let Some(i) = (0..story.templates.len())
            .find(|&i| !claimed[i] && match_object(rec, &story.templates[i], pixel_count))
        {
            claimed[i] = true;
            out.insert(rec.label, story.templates[i].word.clone());
        }
    }
    out
}

type Assignment = BTreeMap<Label, String>;

/// Labels the level-0 objects with the best-supported story.
///
/// Each story scores the number of objects whose context score reaches
/// `theta`. The highest score wins, earlier stories on ties; when no story
/// scores above zero no story is chosen. Objects without a match, or below
/// `theta`, are labelled [`UNKNOWN`].
pub fn annotate(registry: &ObjectRegistry, kb: &KnowledgeBase, theta: f64) -> Annotation {
    let base = registry.level(0);
    let objects: &[RegionRecord] = base.map(|l| l.records.as_slice()).unwrap_or(&[]);
    let pixel_count = base.map(|l| l.pixel_count()).unwrap_or(0);

    let mut story_scores = Vec::with_capacity(kb.stories.len());
    // (story index, assignment, context scores) of the best story so far.
    let mut best: Option<(usize, Assignment, BTreeMap<Label, f64>)> = None;
    for (si, story) in kb.stories.iter().enumerate() {
        let assignment = assign(story, objects, pixel_count);
        let scores = verify_context(&assignment, story, registry);
        let score = scores.values().filter(|&&s| s >= theta).count();
        story_scores.push(StoryScore {
            id: story.id.clone(),
            score,
        });
        let current_best = best.as_ref().map_or(0, |(i, _, _)| story_scores[*i].score);
        if score > current_best {
            best = Some((si, assignment, scores));
        }
    }

    let objects = objects
        .iter()
        .map(|rec| {
            let (word, context_score) = match &best {
                Some((_, assignment, scores)) => match assignment.get(&rec.label) {
                    Some(w) => {
                        let s = scores.get(&rec.label).copied().unwrap_or(0.0);
                        (if s >= theta { w.clone() } else { UNKNOWN.to_owned() }, s)
                    }
                    None => (UNKNOWN.to_owned(), 0.0),
                },
                None => (UNKNOWN.to_owned(), 0.0),
            };
            ObjectAnnotation {
                level: rec.level,
                label: rec.label,
                word,
                context_score,
            }
        })
        .collect();

    Annotation {
        story: best.map(|(i, _, _)| kb.stories[i].id.clone()),
        theta,
        story_scores,
        objects,
    }
}
