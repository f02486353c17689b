//! Independent reference implementations and fixtures shared by the integration tests.
//!
//! The references are written directly from the rule statements with 2-D
//! vectors, hash maps and plain division, and deliberately share no code with
//! the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdseg::Image;

pub fn random_image(seed: u64, width: usize, height: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px: Vec<u8> = (0..width * height).map(|_| rng.gen()).collect();
    Image::from_gray8(width, height, &px).unwrap()
}

pub fn random_even_image(rng: &mut ChaCha8Rng) -> Image {
    let w = 2 * rng.gen_range(1..=40);
    let h = 2 * rng.gen_range(1..=40);
    let px: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
    Image::from_gray8(w, h, &px).unwrap()
}

pub fn two_halves(size: usize, left: f64, right: f64) -> Image {
    Image::from_fn(size, size, |_, c| if c < size / 2 { left } else { right }).unwrap()
}

pub fn block_checkerboard(size: usize, block: usize) -> Image {
    Image::from_fn(size, size, |r, c| if (r / block + c / block) % 2 == 1 { 255.0 } else { 0.0 }).unwrap()
}

/// 64x64 of intensity 30 with a 2x2 block of 200 at rows/cols 31..=32.
pub fn bright_dot() -> Image {
    Image::from_fn(64, 64, |r, c| {
        if (31..=32).contains(&r) && (31..=32).contains(&c) {
            200.0
        } else {
            30.0
        }
    })
    .unwrap()
}

/// 64x64 of intensity 30 with a 16x16 square of 200 at rows/cols 24..40.
pub fn bright_square() -> Image {
    Image::from_fn(64, 64, |r, c| {
        if (24..40).contains(&r) && (24..40).contains(&c) {
            200.0
        } else {
            30.0
        }
    })
    .unwrap()
}

pub const TEACHING_KB: &str = r#"{
  "stories": [
    {
      "id": "bright-square-scene",
      "templates": [
        {
          "word": "bright-object",
          "intensity_range": [0.7, 0.9],
          "size_fraction_range": [0.01, 0.2],
          "required_relations": [["sub-part-of", "background"]]
        },
        {
          "word": "background",
          "intensity_range": [0.0, 0.3],
          "size_fraction_range": [0.5, 1.0],
          "required_relations": []
        }
      ]
    }
  ]
}"#;

fn to_grid(img: &Image) -> Vec<Vec<f64>> {
    (0..img.height())
        .map(|r| (0..img.width()).map(|c| img.get(r, c)).collect())
        .collect()
}

// ---------------------------------------------------------------- entropy

/// Entropy of rounded causal residuals, counted by sorting and run-length.
pub fn entropy_oracle(img: &Image) -> f64 {
    let g = to_grid(img);
    let mut residuals = Vec::new();
    for r in 0..g.len() {
        for c in 0..g[0].len() {
            if c > 0 {
                residuals.push((g[r][c] - g[r][c - 1]).round() as i64);
            } else if r > 0 {
                residuals.push((g[r][0] - g[r - 1][0]).round() as i64);
            }
        }
    }
    if residuals.is_empty() {
        return 0.0;
    }
    residuals.sort();
    let n = residuals.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < residuals.len() {
        let mut j = i;
        while j < residuals.len() && residuals[j] == residuals[i] {
            j += 1;
        }
        let p = (j - i) as f64 / n;
        h -= p * p.log2();
        i = j;
    }
    h.abs()
}

/// 2x2 mean with edge replication, on grids.
pub fn downsample_oracle(img: &Image) -> Image {
    let g = to_grid(img);
    let (h, w) = (g.len(), g[0].len());
    let at = |r: usize, c: usize| g[r.min(h - 1)][c.min(w - 1)];
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    Image::from_fn(ow, oh, |r, c| {
        (at(2 * r, 2 * c) + at(2 * r, 2 * c + 1) + at(2 * r + 1, 2 * c) + at(2 * r + 1, 2 * c + 1)) / 4.0
    })
    .unwrap()
}

// ---------------------------------------------------------- region growing

/// Breadth-first growing from raster-order seeds, admitting a neighbour when
/// |v - running mean| <= delta. Returns a label grid numbered from 1.
pub fn region_growing_oracle(img: &Image, delta: f64) -> Vec<Vec<u32>> {
    let g = to_grid(img);
    let (h, w) = (g.len(), g[0].len());
    let mut lab = vec![vec![0u32; w]; h];
    let mut next = 1;
    for sr in 0..h {
        for sc in 0..w {
            if lab[sr][sc] != 0 {
                continue;
            }
            let mut sum = g[sr][sc];
            let mut n = 1.0;
            lab[sr][sc] = next;
            let mut queue = std::collections::VecDeque::from([(sr, sc)]);
            while let Some((r, c)) = queue.pop_front() {
                for (nr, nc) in neighbors(r, c, h, w) {
                    if lab[nr][nc] == 0 && (g[nr][nc] - sum / n).abs() <= delta {
                        lab[nr][nc] = next;
                        sum += g[nr][nc];
                        n += 1.0;
                        queue.push_back((nr, nc));
                    }
                }
            }
            next += 1;
        }
    }
    lab
}

/// Up, left, right, down.
fn neighbors(r: usize, c: usize, h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(4);
    if r > 0 {
        v.push((r - 1, c));
    }
    if c > 0 {
        v.push((r, c - 1));
    }
    if c + 1 < w {
        v.push((r, c + 1));
    }
    if r + 1 < h {
        v.push((r + 1, c));
    }
    v
}

// -------------------------------------------------------------- refinement

#[derive(Debug, PartialEq)]
pub struct ReferenceRefinement {
    pub labels: Vec<u32>,
    /// label -> (count, mean)
    pub means: BTreeMap<u32, (usize, f64)>,
    pub new_seeds: Vec<u32>,
}

fn grid_means(g: &[Vec<f64>], lab: &[Vec<u32>]) -> HashMap<u32, f64> {
    let mut acc: HashMap<u32, (f64, f64)> = HashMap::new();
    for (row, lrow) in g.iter().zip(lab) {
        for (&v, &l) in row.iter().zip(lrow) {
            let e = acc.entry(l).or_insert((0.0, 0.0));
            e.0 += v;
            e.1 += 1.0;
        }
    }
    acc.into_iter().map(|(l, (s, n))| (l, s / n)).collect()
}

fn flood(
    r: usize,
    c: usize,
    member: &dyn Fn(usize, usize) -> bool,
    seen: &mut Vec<Vec<bool>>,
    out: &mut Vec<(usize, usize)>,
) {
    if seen[r][c] || !member(r, c) {
        return;
    }
    seen[r][c] = true;
    out.push((r, c));
    let (h, w) = (seen.len(), seen[0].len());
    for (nr, nc) in neighbors(r, c, h, w) {
        flood(nr, nc, member, seen, out);
    }
}

/// Straight transcription of the refinement rules.
pub fn reference_refine(
    img: &Image,
    labels: &[u32],
    initial_means: &BTreeMap<u32, f64>,
    tau: f64,
    max_iters: usize,
) -> ReferenceRefinement {
    let g = to_grid(img);
    let (h, w) = (g.len(), g[0].len());
    let mut lab: Vec<Vec<u32>> = labels.chunks(w).map(|r| r.to_vec()).collect();
    let mut means: HashMap<u32, f64> = initial_means.iter().map(|(&l, &m)| (l, m)).collect();
    let mut next = labels
        .iter()
        .copied()
        .chain(initial_means.keys().copied())
        .max()
        .unwrap()
        + 1;
    let mut seeds = BTreeSet::new();

    for _ in 0..max_iters {
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let own = lab[r][c];
                let v = g[r][c];
                if (v - means[&own]).abs() <= tau {
                    continue;
                }
                let mut options: Vec<(f64, u32)> = neighbors(r, c, h, w)
                    .into_iter()
                    .map(|(nr, nc)| lab[nr][nc])
                    .filter(|&l| l != own)
                    .map(|l| ((v - means[&l]).abs(), l))
                    .collect();
                options.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if let Some(&(d, l)) = options.first() {
                    if d <= tau {
                        lab[r][c] = l;
                        changed = true;
                    }
                }
            }
        }

        means = grid_means(&g, &lab);
        let candidate: Vec<Vec<bool>> = (0..h)
            .map(|r| (0..w).map(|c| (g[r][c] - means[&lab[r][c]]).abs() > tau).collect())
            .collect();
        let mut seen = vec![vec![false; w]; h];
        for r in 0..h {
            for c in 0..w {
                let mut comp = Vec::new();
                flood(r, c, &|rr, cc| candidate[rr][cc], &mut seen, &mut comp);
                if comp.is_empty() {
                    continue;
                }
                for (rr, cc) in comp {
                    lab[rr][cc] = next;
                }
                seeds.insert(next);
                next += 1;
                changed = true;
            }
        }
        means = grid_means(&g, &lab);
        if !changed {
            break;
        }
    }

    // Split disconnected labels: collect every component with its first raster pixel.
    let mut seen = vec![vec![false; w]; h];
    let mut components: Vec<(usize, u32, Vec<(usize, usize)>)> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let l = lab[r][c];
            let mut comp = Vec::new();
            let snapshot = lab.clone();
            flood(r, c, &|rr, cc| snapshot[rr][cc] == l, &mut seen, &mut comp);
            if !comp.is_empty() {
                let first = comp.iter().map(|&(rr, cc)| rr * w + cc).min().unwrap();
                components.push((first, l, comp));
            }
        }
    }
    components.sort_by_key(|(first, _, _)| *first);
    let mut kept = BTreeSet::new();
    for (_, l, comp) in components {
        if kept.insert(l) {
            continue;
        }
        for (rr, cc) in comp {
            lab[rr][cc] = next;
        }
        if seeds.contains(&l) {
            seeds.insert(next);
        }
        next += 1;
    }

    let flat: Vec<u32> = lab.concat();
    let mut stats: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for (&l, &v) in flat.iter().zip(img.pixels()) {
        let e = stats.entry(l).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += v;
    }
    let means = stats
        .into_iter()
        .map(|(l, (n, s))| (l, (n, s / n as f64)))
        .collect::<BTreeMap<_, _>>();
    let new_seeds = seeds.into_iter().filter(|l| means.contains_key(l)).collect();
    ReferenceRefinement {
        labels: flat,
        means,
        new_seeds,
    }
}

/// 4-connected component count of `label` in a row-major map.
pub fn component_count(labels: &[u32], w: usize, h: usize, label: u32) -> usize {
    let mut seen = vec![vec![false; w]; h];
    let grid: Vec<Vec<u32>> = labels.chunks(w).map(|r| r.to_vec()).collect();
    let mut count = 0;
    for r in 0..h {
        for c in 0..w {
            let mut comp = Vec::new();
            flood(r, c, &|rr, cc| grid[rr][cc] == label, &mut seen, &mut comp);
            if !comp.is_empty() {
                count += 1;
            }
        }
    }
    count
}
