//! Hybrid floor segmentation.
//!
//! A semantic mask and a normal-derived mask are intersected into
//! high-confidence candidates, small components are dropped, K prompt
//! points are sampled stratified across the surviving components, and a
//! promptable segmenter run on the normal map produces the final mask.
//! Foundation models are injected behind [`SegmentationProviders`]; the
//! shipped fallback is deterministic region growing over normals.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, PixelCoord};
use crate::math::Vec3;
use crate::rng::SplitMix64;

/// Per-pixel world-frame surface normals.
#[derive(Clone, Debug)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Vec3>,
}

impl NormalMap {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Vec3) -> Self {
        let mut normals = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                normals.push(f(r, c));
            }
        }
        NormalMap {
            width,
            height,
            normals,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Vec3 {
        self.normals[row * self.width + col]
    }
}

/// The three segmentation capabilities the pipeline needs. Real foundation
/// models plug in here; [`crate::synth`] ships geometric implementations
/// and [`region_grow`] backs the promptable call offline.
pub trait SegmentationProviders {
    /// Text-prompted semantic mask over an RGB image.
    fn semantic(&self, image: &crate::image::Image, text_prompt: &str) -> Result<BinaryMask>;

    /// Surface normal map for the view.
    fn normals(&self) -> Result<NormalMap>;

    /// Point-prompted segmentation over a normal map.
    fn promptable(&self, normal_map: &NormalMap, points: &[PixelCoord]) -> Result<BinaryMask>;
}

/// Mask of pixels whose normal points sufficiently upward.
pub fn normal_to_floor_mask(n: &NormalMap, up_thresh: f64) -> BinaryMask {
    BinaryMask::from_fn(n.width, n.height, |r, c| n.get(r, c).z >= up_thresh)
}

/// Pixelwise AND of the semantic and normal masks.
pub fn fuse_candidates(m_sem: &BinaryMask, m_norm: &BinaryMask) -> Result<BinaryMask> {
    if m_sem.width != m_norm.width || m_sem.height != m_norm.height {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            m_sem.height, m_sem.width, m_norm.height, m_norm.width
        )));
    }
    Ok(BinaryMask {
        width: m_sem.width,
        height: m_sem.height,
        bits: m_sem
            .bits
            .iter()
            .zip(&m_norm.bits)
            .map(|(&a, &b)| a && b)
            .collect(),
    })
}

/// 8-connected components of a mask, each a sorted list of pixel indices.
/// Components are ordered by their smallest pixel index.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut comp = Vec::new();
        while let Some(p) = stack.pop() {
            comp.push(p);
            let (r, c) = (p / w, p % w);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let np = nr as usize * w + nc as usize;
                    if mask.bits[np] && !seen[np] {
                        seen[np] = true;
                        stack.push(np);
                    }
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Drop 8-connected components smaller than `min_area_px`.
pub fn filter_components(mask: &BinaryMask, min_area_px: usize) -> BinaryMask {
    let mut out = BinaryMask::new_false(mask.width, mask.height);
    for comp in connected_components(mask) {
        if comp.len() >= min_area_px {
            for p in comp {
                out.bits[p] = true;
            }
        }
    }
    out
}

/// Sample K distinct prompt points, stratified across the mask's largest
/// components (largest first, round-robin), deterministic per seed.
pub fn sample_prompts(mask: &BinaryMask, k: usize, seed: u64) -> Result<Vec<PixelCoord>> {
    let available = mask.count_true();
    if available < k {
        return Err(Error::InsufficientFloorCandidates {
            needed: k,
            available,
        });
    }
    let mut components = connected_components(mask);
    // Largest area first; equal areas keep smallest-first-pixel order.
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let mut rng = SplitMix64::new(seed);
    let mut remaining: Vec<Vec<usize>> = components;
    let mut picks = Vec::with_capacity(k);
    let mut slot = 0usize;
    while picks.len() < k {
        let ci = slot % remaining.len();
        slot += 1;
        if remaining[ci].is_empty() {
            // Component exhausted; skip it this round.
            if remaining.iter().all(|c| c.is_empty()) {
                break;
            }
            continue;
        }
        let pi = rng.next_below(remaining[ci].len());
        let p = remaining[ci].swap_remove(pi);
        picks.push(PixelCoord {
            row: p / mask.width,
            col: p % mask.width,
        });
    }
    debug_assert_eq!(picks.len(), k);
    Ok(picks)
}

/// Region growing over a normal map from seed points.
///
/// A pixel joins if its normal deviates less than `tol_deg` from the
/// running mean of its region's normals. Deterministic: BFS in fixed
/// neighbor order from each seed in turn.
pub fn region_grow(n: &NormalMap, seeds: &[PixelCoord], tol_deg: f64) -> Result<BinaryMask> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "must be non-empty"));
    }
    for s in seeds {
        if s.row >= n.height || s.col >= n.width {
            return Err(Error::invalid(
                "seeds",
                format!("({}, {}) outside {}x{}", s.row, s.col, n.height, n.width),
            ));
        }
    }
    let cos_tol = tol_deg.to_radians().cos();
    let (w, h) = (n.width, n.height);
    let mut out = BinaryMask::new_false(w, h);
    let mut visited = vec![false; w * h];
    for seed in seeds {
        let start = seed.row * w + seed.col;
        if visited[start] {
            continue;
        }
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        let mut mean = n.normals[start];
        let mut count = 1.0;
        out.bits[start] = true;
        while let Some(p) = queue.pop_front() {
            let (r, c) = (p / w, p % w);
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                    continue;
                }
                let np = nr as usize * w + nc as usize;
                if visited[np] {
                    continue;
                }
                let candidate = n.normals[np];
                let m = mean / count;
                if m.norm() > 1e-9 && candidate.dot(&m.normalize()) >= cos_tol {
                    visited[np] = true;
                    out.bits[np] = true;
                    mean += candidate;
                    count += 1.0;
                    queue.push_back(np);
                }
            }
        }
    }
    Ok(out)
}

/// Final mask via the injected promptable segmenter over the normal map.
pub fn final_mask(
    providers: &dyn SegmentationProviders,
    n: &NormalMap,
    points: &[PixelCoord],
) -> Result<BinaryMask> {
    if points.is_empty() {
        return Err(Error::invalid("points", "must be non-empty"));
    }
    for p in points {
        if p.row >= n.height || p.col >= n.width {
            return Err(Error::invalid(
                "points",
                format!("({}, {}) outside image", p.row, p.col),
            ));
        }
    }
    providers.promptable(n, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    fn side() -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }

    #[test]
    fn normal_mask_all_up() {
        let n = NormalMap::from_fn(8, 8, |_, _| up());
        let m = normal_to_floor_mask(&n, 0.85);
        assert_eq!(m.count_true(), 64);
    }

    #[test]
    fn normal_mask_all_side() {
        let n = NormalMap::from_fn(8, 8, |_, _| side());
        let m = normal_to_floor_mask(&n, 0.85);
        assert_eq!(m.count_true(), 0);
    }

    #[test]
    fn normal_mask_floor_wall_split_geometry_oracle() {
        // Bottom half floor, top half wall; ground truth from the same rule.
        let n = NormalMap::from_fn(16, 16, |r, _| if r >= 8 { up() } else { side() });
        let m = normal_to_floor_mask(&n, 0.85);
        let gt = BinaryMask::from_fn(16, 16, |r, _| r >= 8);
        assert!(m.iou(&gt) >= 0.99);
    }

    #[test]
    fn fuse_identity_and_disjoint() {
        let all = BinaryMask::new_true(8, 8);
        let x = BinaryMask::from_fn(8, 8, |r, c| (r + c) % 3 == 0);
        assert_eq!(fuse_candidates(&all, &x).unwrap(), x);

        let left = BinaryMask::from_fn(8, 8, |_, c| c < 4);
        let right = BinaryMask::from_fn(8, 8, |_, c| c >= 4);
        assert_eq!(fuse_candidates(&left, &right).unwrap().count_true(), 0);
    }

    #[test]
    fn fuse_matches_per_pixel_and_oracle() {
        let mut rng = SplitMix64::new(5);
        let a = BinaryMask::from_fn(9, 7, |_, _| rng.next_f64() < 0.5);
        let b = BinaryMask::from_fn(9, 7, |_, _| rng.next_f64() < 0.5);
        let fused = fuse_candidates(&a, &b).unwrap();
        for r in 0..7 {
            for c in 0..9 {
                assert_eq!(fused.get(r, c), a.get(r, c) && b.get(r, c));
            }
        }
        assert!(fused.is_subset_of(&a) && fused.is_subset_of(&b));
    }

    #[test]
    fn fuse_dimension_mismatch_errors() {
        let a = BinaryMask::new_true(8, 8);
        let b = BinaryMask::new_true(8, 9);
        assert!(fuse_candidates(&a, &b).is_err());
    }

    fn blob(mask: &mut BinaryMask, r0: usize, c0: usize, size: usize) {
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                mask.set(r, c, true);
            }
        }
    }

    #[test]
    fn filter_drops_small_blob() {
        let mut m = BinaryMask::new_false(16, 16);
        // 5-pixel plus-shape blob.
        m.set(2, 2, true);
        m.set(1, 2, true);
        m.set(3, 2, true);
        m.set(2, 1, true);
        m.set(2, 3, true);
        assert_eq!(filter_components(&m, 10).count_true(), 0);
    }

    #[test]
    fn filter_min_area_zero_is_identity() {
        let mut m = BinaryMask::new_false(16, 16);
        blob(&mut m, 1, 1, 3);
        blob(&mut m, 10, 10, 2);
        assert_eq!(filter_components(&m, 0), m);
    }

    #[test]
    fn filter_keeps_only_large_blob_pixel_exact() {
        let mut m = BinaryMask::new_false(32, 32);
        blob(&mut m, 2, 2, 10); // 100 px
        // 8-pixel blob, separated.
        blob(&mut m, 20, 20, 2);
        blob(&mut m, 20, 23, 2);
        let filtered = filter_components(&m, 10);
        let mut expect = BinaryMask::new_false(32, 32);
        blob(&mut expect, 2, 2, 10);
        assert_eq!(filtered, expect);
    }

    #[test]
    fn filter_output_subset_and_idempotent() {
        let mut rng = SplitMix64::new(9);
        let m = BinaryMask::from_fn(24, 24, |_, _| rng.next_f64() < 0.4);
        let f1 = filter_components(&m, 6);
        assert!(f1.is_subset_of(&m));
        assert_eq!(filter_components(&f1, 6), f1);
    }

    #[test]
    fn diagonal_pixels_are_8_connected() {
        let mut m = BinaryMask::new_false(4, 4);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        assert_eq!(connected_components(&m).len(), 1);
    }

    #[test]
    fn prompts_forced_when_exactly_k() {
        let mut m = BinaryMask::new_false(8, 8);
        m.set(1, 1, true);
        m.set(4, 5, true);
        m.set(7, 2, true);
        let pts = sample_prompts(&m, 3, 42).unwrap();
        let mut got: Vec<(usize, usize)> = pts.iter().map(|p| (p.row, p.col)).collect();
        got.sort_unstable();
        assert_eq!(got, vec![(1, 1), (4, 5), (7, 2)]);
        // Deterministic order too.
        assert_eq!(sample_prompts(&m, 3, 42).unwrap(), pts);
    }

    #[test]
    fn prompts_deterministic_per_seed() {
        let mut m = BinaryMask::new_false(32, 32);
        blob(&mut m, 2, 2, 12);
        let a = sample_prompts(&m, 3, 7).unwrap();
        let b = sample_prompts(&m, 3, 7).unwrap();
        let c = sample_prompts(&m, 3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn prompts_error_when_insufficient() {
        let mut m = BinaryMask::new_false(8, 8);
        m.set(0, 0, true);
        assert!(matches!(
            sample_prompts(&m, 3, 1),
            Err(Error::InsufficientFloorCandidates { .. })
        ));
    }

    #[test]
    fn prompts_stratify_across_components_1000_draws() {
        // Two components, areas 900 and 100.
        let mut m = BinaryMask::new_false(64, 64);
        blob(&mut m, 0, 0, 30); // 900 px
        blob(&mut m, 40, 40, 10); // 100 px
        for seed in 0..1000u64 {
            let pts = sample_prompts(&m, 3, seed).unwrap();
            let in_big = pts.iter().filter(|p| p.row < 30 && p.col < 30).count();
            let in_small = pts.iter().filter(|p| p.row >= 40 && p.col >= 40).count();
            assert_eq!(in_big + in_small, 3);
            assert!(in_big >= 1, "seed {seed}");
            assert!(in_small >= 1, "seed {seed}");
        }
    }

    #[test]
    fn prompts_are_distinct_and_inside() {
        let mut m = BinaryMask::new_false(16, 16);
        blob(&mut m, 3, 3, 4);
        for seed in 0..50u64 {
            let pts = sample_prompts(&m, 3, seed).unwrap();
            for p in &pts {
                assert!(m.get(p.row, p.col));
            }
            let mut dedup = pts.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), 3);
        }
    }

    fn floor_wall_normals() -> NormalMap {
        // Left half floor (up), right half wall (side).
        NormalMap::from_fn(32, 32, |_, c| if c < 16 { up() } else { side() })
    }

    #[test]
    fn region_grow_uniform_fills_image() {
        let n = NormalMap::from_fn(16, 16, |_, _| up());
        let m = region_grow(&n, &[PixelCoord { row: 3, col: 9 }], 10.0).unwrap();
        assert_eq!(m.count_true(), 256);
    }

    #[test]
    fn region_grow_floor_seed_recovers_floor() {
        let n = floor_wall_normals();
        let m = region_grow(&n, &[PixelCoord { row: 10, col: 3 }], 10.0).unwrap();
        let gt = BinaryMask::from_fn(32, 32, |_, c| c < 16);
        assert!(m.iou(&gt) >= 0.99);
    }

    #[test]
    fn region_grow_wall_seed_stays_on_wall() {
        let n = floor_wall_normals();
        let m = region_grow(&n, &[PixelCoord { row: 10, col: 20 }], 10.0).unwrap();
        let floor_pixels = (0..32)
            .flat_map(|r| (0..16).map(move |c| (r, c)))
            .filter(|&(r, c)| m.get(r, c))
            .count();
        assert_eq!(floor_pixels, 0);
        let wall_gt = BinaryMask::from_fn(32, 32, |_, c| c >= 16);
        assert!(m.iou(&wall_gt) >= 0.99);
    }
}
