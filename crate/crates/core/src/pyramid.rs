//! Bottom-up shrinking pyramid built from 2x2 block averages.
//!
//! Each coarser pixel is the mean of its four children. Odd widths or heights
//! are padded by replicating the last column or row, so no input pixel is
//! dropped and every level has `ceil(w / 2) x ceil(h / 2)` pixels.

use serde::Serialize;

use crate::image::Image;

/// Default pixel budget of the pyramid top.
pub const DEFAULT_STOP_THRESHOLD: usize = 100;

/// Dimensions of the next coarser level.
#[inline]
pub fn coarser_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// Averages every 2x2 block into one pixel.
pub fn downsample_once(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = coarser_dims(w, h);
    let src = img.pixels();
    let mut out = Vec::with_capacity(ow * oh);
    for r in 0..oh {
        let r0 = 2 * r;
        let r1 = (r0 + 1).min(h - 1);
        for c in 0..ow {
            let c0 = 2 * c;
            let c1 = (c0 + 1).min(w - 1);
            let sum = src[r0 * w + c0] + src[r0 * w + c1] + src[r1 * w + c0] + src[r1 * w + c1];
            out.push(sum / 4.0);
        }
    }
    Image::from_parts_unchecked(ow, oh, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pyramid {
    levels: Vec<Image>,
    stop_threshold: usize,
}

impl Pyramid {
    /// Shrinks `img` until the level fits within `stop_threshold` pixels or is 1x1.
    ///
    /// The top is the first level at or below the threshold. A `stop_threshold`
    /// of zero is treated as one.
    pub fn build(img: &Image, stop_threshold: usize) -> Self {
        let stop_threshold = stop_threshold.max(1);
        let mut levels = vec![img.clone()];
        loop {
            let last = levels.last().expect("pyramid has a base level");
            if last.len() <= stop_threshold || last.len() == 1 {
                break;
            }
            let next = downsample_once(last);
            levels.push(next);
        }
        Self {
            levels,
            stop_threshold,
        }
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &Image {
        &self.levels[index]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn top_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn top(&self) -> &Image {
        &self.levels[self.top_index()]
    }

    pub fn stop_threshold(&self) -> usize {
        self.stop_threshold
    }
}

pub fn build_pyramid(img: &Image, stop_threshold: usize) -> Pyramid {
    Pyramid::build(img, stop_threshold)
}
