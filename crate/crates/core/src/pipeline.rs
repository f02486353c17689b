//! End-to-end top-down pass: pyramid, top-level segmentation, then expand,
//! refine and register at every finer level down to the input resolution.

use serde::Serialize;

use crate::config::{ConfigError, ScaleSelection, SegmentationConfig};
use crate::density::{density_curve, select_working_scale, DensityCurve};
use crate::image::Image;
use crate::pyramid::Pyramid;
use crate::registry::{register_level, ObjectRegistry};
use crate::segment::{
    expand_maps, refine_level_from, segment_top, Label, LabelMap, RegionMeans,
};

/// Segmentation state of one pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSegmentation {
    pub level: usize,
    pub labels: LabelMap,
    pub means: RegionMeans,
    /// Regions that emerged as seeds at this level (empty at the top).
    pub new_seeds: Vec<Label>,
    /// Refinement iterations performed (0 at the top).
    pub refine_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    /// Level where segmentation started.
    pub top_level: usize,
    /// Present when the top was chosen by information density.
    pub density: Option<DensityCurve>,
    /// From `top_level` down to level 0.
    pub levels: Vec<LevelSegmentation>,
    pub registry: ObjectRegistry,
}

impl SegmentationResult {
    pub fn level(&self, level: usize) -> Option<&LevelSegmentation> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// Final segmentation at the input resolution.
    pub fn base(&self) -> &LevelSegmentation {
        self.levels.last().expect("at least one level is segmented")
    }
}

pub fn run_pipeline(
    img: &Image,
    cfg: &SegmentationConfig,
) -> Result<SegmentationResult, ConfigError> {
    cfg.validate()?;
    let pyramid = Pyramid::build(img, cfg.stop_threshold);
    Ok(run_on_pyramid(&pyramid, cfg))
}

/// Runs the top-down pass over an already built pyramid. `cfg` is assumed valid.
pub fn run_on_pyramid(pyramid: &Pyramid, cfg: &SegmentationConfig) -> SegmentationResult {
    let (top_level, density) = match cfg.scale_selection {
        ScaleSelection::Fixed => (pyramid.top_index(), None),
        ScaleSelection::Density => {
            let curve = density_curve(pyramid);
            (select_working_scale(&curve, cfg.drop_ratio), Some(curve))
        }
    };

    let top_img = pyramid.level(top_level);
    let (mut labels, mut means) = segment_top(top_img, cfg.delta);
    let mut next_label = labels.max_label() + 1;
    let mut registry = ObjectRegistry::default();
    registry.levels.push(
        register_level(top_level, &labels, top_img, None, &[])
            .expect("top-level maps match their image"),
    );
    let mut levels = vec![LevelSegmentation {
        level: top_level,
        labels: labels.clone(),
        means: means.clone(),
        new_seeds: Vec::new(),
        refine_iterations: 0,
    }];

    for level in (0..top_level).rev() {
        let reference = pyramid.level(level);
        let (expanded, _) = expand_maps(&labels, &means, reference.width(), reference.height())
            .expect("pyramid levels halve exactly");
        let refined = refine_level_from(reference, &expanded, &means, cfg, &mut next_label)
            .expect("expanded maps match the reference level");
        registry.levels.push(
            register_level(level, &refined.labels, reference, Some(&labels), &refined.new_seeds)
                .expect("refined maps match the reference level"),
        );
        labels = refined.labels;
        means = refined.means;
        levels.push(LevelSegmentation {
            level,
            labels: labels.clone(),
            means: means.clone(),
            new_seeds: refined.new_seeds,
            refine_iterations: refined.iterations,
        });
    }

    SegmentationResult {
        top_level,
        density,
        levels,
        registry,
    }
}
