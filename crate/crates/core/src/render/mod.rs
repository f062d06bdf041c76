//! CPU forward splat renderer.
//!
//! Perspective rasterization with front-to-back alpha blending over
//! depth-sorted splats, tiled for parallelism; the spherical renderer in
//! [`equirect`] reuses it for cube faces. Output is bitwise identical for
//! any tile size or worker count: splat-to-pixel coverage is decided per
//! pixel, tiles only prune candidates, and every pixel blends sequentially
//! in global depth order.

mod equirect;
mod project;

pub use equirect::{pano_direction, render_equirect, Panorama};
pub use project::{project_gaussian, ProjectedGaussian};

use rayon::prelude::*;

use crate::background::{AppearanceMlp, BackgroundEvaluator, BackgroundModel};
use crate::config::RenderConfig;
use crate::image::Image;
use crate::math::Vec3;
use crate::scene::{CameraPose, Intrinsics, SubmapModel};
use crate::sh::eval_sh_color;

/// Per-pixel render product: color, accumulated alpha, expected depth.
#[derive(Clone, Debug)]
pub struct RenderOutput {
    /// H x W x 3, in [0, 1] after compositing.
    pub rgb: Image,
    /// H x W accumulated alpha in [0, 1].
    pub alpha: Image,
    /// H x W alpha-weighted expected depth in meters, 0 where alpha is 0.
    pub depth: Image,
    /// Splats dropped for near-singular projected covariance.
    pub skipped_gaussians: usize,
}

/// Splat prepared for rasterization: inverse 2D covariance, footprint
/// radius, view-dependent color, and the depth/index sort key.
struct PreparedSplat {
    mean_x: f64,
    mean_y: f64,
    // Inverse covariance, symmetric: [a, b; b, c].
    inv_a: f64,
    inv_b: f64,
    inv_c: f64,
    radius: f64,
    depth: f64,
    opacity: f64,
    color: [f64; 3],
}

fn prepare_splats(
    submap: &SubmapModel,
    pose: &CameraPose,
    k: &Intrinsics,
    cfg: &RenderConfig,
) -> (Vec<PreparedSplat>, usize) {
    let mut skipped = 0usize;
    let mut splats: Vec<PreparedSplat> = Vec::new();
    // Frustum planes through the camera center (CV convention, z forward).
    let planes = [
        Vec3::new(k.fx, 0.0, k.cx),
        Vec3::new(-k.fx, 0.0, k.width as f64 - k.cx),
        Vec3::new(0.0, k.fy, k.cy),
        Vec3::new(0.0, -k.fy, k.height as f64 - k.cy),
    ]
    .map(|n| n.normalize());
    for g in &submap.gaussians {
        if g.opacity < cfg.alpha_cutoff {
            continue;
        }
        // Cull splats whose cutoff-radius ball cannot reach the frustum;
        // the EWA linearization is meaningless far off-axis and would
        // otherwise smear spurious footprints across the image.
        let p_cam = crate::scene::world_to_camera(pose, g.position);
        let margin = g.scale.max() * (2.0 * (g.opacity / cfg.alpha_cutoff).ln()).sqrt();
        if planes.iter().any(|n| p_cam.dot(n) < -margin) {
            continue;
        }
        let Some(p) = project_gaussian(g, pose, k, cfg) else {
            continue;
        };
        let (a, b, c) = (p.cov2d[(0, 0)], p.cov2d[(0, 1)], p.cov2d[(1, 1)]);
        let det = a * c - b * b;
        let half_trace = 0.5 * (a + c);
        let disc = (half_trace * half_trace - det).max(0.0).sqrt();
        let lam_max = half_trace + disc;
        let lam_min = half_trace - disc;
        if !(det > 0.0) || lam_min <= 0.0 || lam_max / lam_min > cfg.max_condition {
            skipped += 1;
            continue;
        }
        // Footprint where this splat's alpha can still reach the cutoff.
        let radius = (2.0 * (g.opacity / cfg.alpha_cutoff).ln() * lam_max).sqrt();
        let view_dir = {
            let v = g.position - pose.translation;
            let n = v.norm();
            if n > 1e-9 {
                v / n
            } else {
                Vec3::new(0.0, 0.0, 1.0)
            }
        };
        splats.push(PreparedSplat {
            mean_x: p.mean2d.x,
            mean_y: p.mean2d.y,
            inv_a: c / det,
            inv_b: -b / det,
            inv_c: a / det,
            radius,
            depth: p.depth,
            opacity: g.opacity,
            color: eval_sh_color(&g.sh_coeffs, view_dir),
        });
    }
    // Depth ties break by original order; the stable sort preserves it.
    splats.sort_by(|x, y| x.depth.partial_cmp(&y.depth).unwrap());
    (splats, skipped)
}

/// Render one pinhole view of a submap composited over its background.
pub fn render_perspective(
    submap: &SubmapModel,
    bg: &BackgroundModel,
    app: &AppearanceMlp,
    pose: &CameraPose,
    k: &Intrinsics,
    cfg: &RenderConfig,
) -> RenderOutput {
    let (splats, skipped) = prepare_splats(submap, pose, k, cfg);
    let (w, h) = (k.width, k.height);
    let ts = cfg.tile_size.max(1);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);

    // Bin splats to tiles in depth order so tile lists stay sorted.
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (si, s) in splats.iter().enumerate() {
        let x0 = ((s.mean_x - s.radius).floor().max(0.0)) as usize;
        let x1 = ((s.mean_x + s.radius).ceil()).min(w as f64 - 1.0) as usize;
        let y0 = ((s.mean_y - s.radius).floor().max(0.0)) as usize;
        let y1 = ((s.mean_y + s.radius).ceil()).min(h as f64 - 1.0) as usize;
        if s.mean_x + s.radius < 0.0 || s.mean_y + s.radius < 0.0 || x0 > x1 || y0 > y1 {
            continue;
        }
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                bins[ty * tiles_x + tx].push(si as u32);
            }
        }
    }

    let bg_eval = BackgroundEvaluator::new(bg, app, pose.translation);
    let rot = pose.rotation;

    struct TileOut {
        rgb: Vec<f64>,
        alpha: Vec<f64>,
        depth: Vec<f64>,
    }

    let tiles: Vec<TileOut> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|ti| {
            let tx = ti % tiles_x;
            let ty = ti / tiles_x;
            let px0 = tx * ts;
            let py0 = ty * ts;
            let tw = ts.min(w - px0);
            let th = ts.min(h - py0);
            let mut out = TileOut {
                rgb: vec![0.0; tw * th * 3],
                alpha: vec![0.0; tw * th],
                depth: vec![0.0; tw * th],
            };
            let bin = &bins[ti];
            for py in 0..th {
                for px in 0..tw {
                    let cx = (px0 + px) as f64 + 0.5;
                    let cy = (py0 + py) as f64 + 0.5;
                    let mut t = 1.0;
                    let mut rgb = [0.0; 3];
                    let mut alpha = 0.0;
                    let mut depth_acc = 0.0;
                    for &si in bin {
                        let s = &splats[si as usize];
                        let dx = cx - s.mean_x;
                        let dy = cy - s.mean_y;
                        if dx.abs() > s.radius || dy.abs() > s.radius {
                            continue;
                        }
                        let q = s.inv_a * dx * dx + 2.0 * s.inv_b * dx * dy + s.inv_c * dy * dy;
                        if q < 0.0 {
                            continue;
                        }
                        let a = (s.opacity * (-0.5 * q).exp()).min(cfg.alpha_cap);
                        if a < cfg.alpha_cutoff {
                            continue;
                        }
                        let wgt = t * a;
                        rgb[0] += wgt * s.color[0];
                        rgb[1] += wgt * s.color[1];
                        rgb[2] += wgt * s.color[2];
                        alpha += wgt;
                        depth_acc += wgt * s.depth;
                        t *= 1.0 - a;
                        if t < cfg.transmittance_min {
                            break;
                        }
                    }
                    // Composite over the background along this pixel's ray.
                    let dir_cam = Vec3::new((cx - k.cx) / k.fx, (cy - k.cy) / k.fy, 1.0);
                    let dir_world = (rot * dir_cam).normalize();
                    let bg_rgb = bg_eval.eval(dir_world);
                    let i = (py * tw + px) * 3;
                    out.rgb[i] = rgb[0] + (1.0 - alpha) * bg_rgb[0];
                    out.rgb[i + 1] = rgb[1] + (1.0 - alpha) * bg_rgb[1];
                    out.rgb[i + 2] = rgb[2] + (1.0 - alpha) * bg_rgb[2];
                    out.alpha[py * tw + px] = alpha;
                    out.depth[py * tw + px] = if alpha > 0.0 { depth_acc / alpha } else { 0.0 };
                }
            }
            out
        })
        .collect();

    let mut rgb = Image::zeros(w, h, 3);
    let mut alpha = Image::zeros(w, h, 1);
    let mut depth = Image::zeros(w, h, 1);
    for (ti, tile) in tiles.iter().enumerate() {
        let tx = ti % tiles_x;
        let ty = ti / tiles_x;
        let px0 = tx * ts;
        let py0 = ty * ts;
        let tw = ts.min(w - px0);
        let th = ts.min(h - py0);
        for py in 0..th {
            for px in 0..tw {
                let (r, c) = (py0 + py, px0 + px);
                for ch in 0..3 {
                    rgb.set(r, c, ch, tile.rgb[(py * tw + px) * 3 + ch]);
                }
                alpha.set(r, c, 0, tile.alpha[py * tw + px]);
                depth.set(r, c, 0, tile.depth[py * tw + px]);
            }
        }
    }

    RenderOutput {
        rgb,
        alpha,
        depth,
        skipped_gaussians: skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{AppearanceMlp, BackgroundModel};
    use crate::math::Vec3;
    use crate::scene::Gaussian;
    use approx::assert_relative_eq;

    fn submap_with(gaussians: Vec<Gaussian>) -> SubmapModel {
        SubmapModel {
            submap_id: 0,
            gaussians,
            background: BackgroundModel::zeros(2, 4, 8),
            appearance: AppearanceMlp::zeros(4, 4),
            centroid: Vec3::zeros(),
            member_frames: vec![],
        }
    }

    fn const_bg(rgb: [f64; 3]) -> (BackgroundModel, AppearanceMlp) {
        (
            BackgroundModel::constant_color(2, 4, 8, rgb),
            AppearanceMlp::zeros(4, 4),
        )
    }

    fn test_intrinsics() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 32.5, 32.5, 65, 65).unwrap()
    }

    #[test]
    fn zero_gaussians_render_pure_background() {
        let submap = submap_with(vec![]);
        let (bg, app) = const_bg([0.2, 0.4, 0.6]);
        let out = render_perspective(
            &submap,
            &bg,
            &app,
            &CameraPose::identity(),
            &test_intrinsics(),
            &RenderConfig::default(),
        );
        for r in 0..65 {
            for c in 0..65 {
                assert_eq!(out.alpha.get(r, c, 0), 0.0);
                assert_relative_eq!(out.rgb.get(r, c, 0), 0.2, epsilon = 1e-6);
                assert_relative_eq!(out.rgb.get(r, c, 1), 0.4, epsilon = 1e-6);
                assert_relative_eq!(out.rgb.get(r, c, 2), 0.6, epsilon = 1e-6);
                assert_eq!(out.depth.get(r, c, 0), 0.0);
            }
        }
    }

    /// Closed-form single-splat oracle: the projected footprint is an
    /// isotropic Gaussian with sigma^2 = (fx s / z)^2 + dilation.
    #[test]
    fn single_splat_alpha_matches_closed_form() {
        // sigma = 5 px exactly: (100 * s / 5)^2 + 0.3 = 25 with s below.
        let s = 5.0 * (24.7_f64).sqrt() / 100.0;
        let g = Gaussian::new(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(s, s, s),
            [1.0, 0.0, 0.0, 0.0],
            0.8,
            vec![[1.0, 1.0, 1.0]],
        )
        .unwrap();
        let submap = submap_with(vec![g]);
        let (bg, app) = const_bg([0.0, 0.0, 0.0]);
        let out = render_perspective(
            &submap,
            &bg,
            &app,
            &CameraPose::identity(),
            &test_intrinsics(),
            &RenderConfig::default(),
        );
        // Pixel (32,32) center is (32.5, 32.5), exactly the projected mean.
        assert_relative_eq!(out.alpha.get(32, 32, 0), 0.8, epsilon = 1e-3);
        // 1 sigma: 5 px off-center. 2 sigma: 10 px.
        assert_relative_eq!(
            out.alpha.get(32, 37, 0),
            0.8 * (-0.5_f64).exp(),
            epsilon = 1e-3
        );
        assert_relative_eq!(
            out.alpha.get(32, 42, 0),
            0.8 * (-2.0_f64).exp(),
            epsilon = 1e-3
        );
        assert_relative_eq!(out.depth.get(32, 32, 0), 5.0, epsilon = 1e-9);
    }

    fn opaque_wall() -> Vec<Gaussian> {
        // Dense slab of fat splats in front of the camera.
        let mut gs = Vec::new();
        for layer in 0..6 {
            for i in -12..=12 {
                for j in -12..=12 {
                    gs.push(Gaussian::isotropic(
                        Vec3::new(i as f64 * 0.4, j as f64 * 0.4, 3.0 + layer as f64 * 0.1),
                        0.4,
                        0.95,
                        [0.7, 0.2, 0.1],
                    ));
                }
            }
        }
        gs
    }

    #[test]
    fn opaque_wall_hides_background() {
        let submap = submap_with(opaque_wall());
        let (bg_a, app) = const_bg([0.0, 0.0, 0.0]);
        let (bg_b, _) = const_bg([1.0, 1.0, 1.0]);
        let k = test_intrinsics();
        let cfg = RenderConfig::default();
        let pose = CameraPose::identity();
        let out_a = render_perspective(&submap, &bg_a, &app, &pose, &k, &cfg);
        let out_b = render_perspective(&submap, &bg_b, &app, &pose, &k, &cfg);
        for r in 0..65 {
            for c in 0..65 {
                assert!(out_a.alpha.get(r, c, 0) > 0.99);
            }
        }
        assert!(out_a.rgb.max_abs_diff(&out_b.rgb) < 1.0 / 255.0);
    }

    #[test]
    fn alpha_is_monotone_in_added_gaussians() {
        let base = opaque_wall()[..40].to_vec();
        let submap_small = submap_with(base.clone());
        let mut plus = base;
        plus.push(Gaussian::isotropic(
            Vec3::new(0.2, -0.1, 2.0),
            0.5,
            0.7,
            [0.5, 0.5, 0.5],
        ));
        let submap_big = submap_with(plus);
        let (bg, app) = const_bg([0.5, 0.5, 0.5]);
        let k = test_intrinsics();
        let cfg = RenderConfig::default();
        let pose = CameraPose::identity();
        let small = render_perspective(&submap_small, &bg, &app, &pose, &k, &cfg);
        let big = render_perspective(&submap_big, &bg, &app, &pose, &k, &cfg);
        for (a, b) in small.alpha.data.iter().zip(&big.alpha.data) {
            // Early termination may trim up to transmittance_min of mass.
            assert!(b + cfg.transmittance_min >= *a);
        }
    }

    #[test]
    fn output_is_independent_of_tile_size() {
        let submap = submap_with(opaque_wall()[..150].to_vec());
        let (bg, app) = const_bg([0.3, 0.3, 0.3]);
        let k = test_intrinsics();
        let pose = CameraPose::identity();
        let mut outputs = Vec::new();
        for ts in [8usize, 16, 64] {
            let cfg = RenderConfig {
                tile_size: ts,
                ..RenderConfig::default()
            };
            outputs.push(render_perspective(&submap, &bg, &app, &pose, &k, &cfg));
        }
        for o in &outputs[1..] {
            assert_eq!(o.rgb.data, outputs[0].rgb.data);
            assert_eq!(o.alpha.data, outputs[0].alpha.data);
            assert_eq!(o.depth.data, outputs[0].depth.data);
        }
    }

    #[test]
    fn render_is_deterministic_across_thread_counts() {
        let submap = submap_with(opaque_wall()[..150].to_vec());
        let (bg, app) = const_bg([0.3, 0.3, 0.3]);
        let k = test_intrinsics();
        let pose = CameraPose::identity();
        let cfg = RenderConfig::default();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| render_perspective(&submap, &bg, &app, &pose, &k, &cfg));
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| render_perspective(&submap, &bg, &app, &pose, &k, &cfg));
        assert_eq!(single.rgb.data, multi.rgb.data);
        assert_eq!(single.alpha.data, multi.alpha.data);
        assert_eq!(single.depth.data, multi.depth.data);
    }
}
