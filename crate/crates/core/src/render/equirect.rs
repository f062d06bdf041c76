//! Equirectangular panorama assembly from six rendered cube faces.
//!
//! Convention: width = 2 * height, row 0 is the zenith, column 0 looks
//! along world +X (azimuth 0), and azimuth grows toward +Y. Faces are
//! rendered with a one-pixel pad at identical angular density so bilinear
//! lookups near edges stay inside a single face. Splats whose mean falls
//! behind a face's near plane are culled from that face, so seam
//! continuity assumes splat extents small against their distance — true
//! for the wall-splat scale this renderer serves.

use rayon::prelude::*;

use crate::background::{AppearanceMlp, BackgroundModel};
use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::render::{render_perspective, RenderOutput};
use crate::scene::{CameraPose, Intrinsics, SubmapModel};

/// Spherical render product, 2:1 equirectangular.
#[derive(Clone, Debug)]
pub struct Panorama {
    /// H x 2H x 3 color.
    pub rgb: Image,
    /// H x 2H accumulated alpha.
    pub alpha: Image,
    /// H x 2H expected depth, meters.
    pub depth: Image,
    /// Render center in world coordinates.
    pub center: Vec3,
}

impl Panorama {
    pub fn height(&self) -> usize {
        self.rgb.height
    }

    pub fn width(&self) -> usize {
        self.rgb.width
    }
}

/// World direction of pano pixel (row, col) for a given pano height.
pub fn pano_direction(row: usize, col: usize, height: usize) -> Vec3 {
    let width = 2 * height;
    let polar = std::f64::consts::PI * (row as f64 + 0.5) / height as f64;
    let azimuth = std::f64::consts::TAU * (col as f64 + 0.5) / width as f64;
    Vec3::new(
        polar.sin() * azimuth.cos(),
        polar.sin() * azimuth.sin(),
        polar.cos(),
    )
}

/// The six cube-face poses: forward axis and image-down axis per face.
/// Equatorial faces keep world -Z as image-down ("identity roll").
fn face_axes() -> [(Vec3, Vec3); 6] {
    let down = Vec3::new(0.0, 0.0, -1.0);
    [
        (Vec3::new(1.0, 0.0, 0.0), down),
        (Vec3::new(-1.0, 0.0, 0.0), down),
        (Vec3::new(0.0, 1.0, 0.0), down),
        (Vec3::new(0.0, -1.0, 0.0), down),
        // Zenith and nadir: down axis chosen so the triads stay right-handed.
        (Vec3::new(0.0, 0.0, 1.0), Vec3::new(-1.0, 0.0, 0.0)),
        (Vec3::new(0.0, 0.0, -1.0), Vec3::new(1.0, 0.0, 0.0)),
    ]
}

/// Index of the face whose forward axis dominates `d`, plus the camera-space
/// direction on that face.
fn select_face(d: Vec3) -> usize {
    let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
    if az >= ax && az >= ay {
        if d.z >= 0.0 {
            4
        } else {
            5
        }
    } else if ax >= ay {
        if d.x >= 0.0 {
            0
        } else {
            1
        }
    } else if d.y >= 0.0 {
        2
    } else {
        3
    }
}

fn bilinear(img: &Image, ch: usize, x: f64, y: f64) -> f64 {
    // x, y in continuous pixel coordinates where integers are pixel centers.
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v00 = img.get(y0, x0, ch);
    let v01 = img.get(y0, x1, ch);
    let v10 = img.get(y1, x0, ch);
    let v11 = img.get(y1, x1, ch);
    v00 * (1.0 - fx) * (1.0 - fy) + v01 * fx * (1.0 - fy) + v10 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Render a spherical view by rasterizing six 90-degree faces and
/// resampling them onto the equirectangular grid.
pub fn render_equirect(
    submap: &SubmapModel,
    bg: &BackgroundModel,
    app: &AppearanceMlp,
    center: Vec3,
    height_px: usize,
    cfg: &RenderConfig,
) -> Result<Panorama> {
    if height_px < 16 || height_px % 2 != 0 {
        return Err(Error::invalid(
            "pano height",
            "must be even and at least 16",
        ));
    }
    let n = height_px;
    let padded = n + 2;
    // fx = n/2 gives a 90-degree field over the inner n pixels; the pad
    // extends the grid by one pixel on each side at the same density.
    let k = Intrinsics::new(
        n as f64 / 2.0,
        n as f64 / 2.0,
        padded as f64 / 2.0,
        padded as f64 / 2.0,
        padded,
        padded,
    )?;

    let axes = face_axes();
    let faces: Vec<RenderOutput> = axes
        .par_iter()
        .map(|(forward, down)| {
            let pose = CameraPose::from_axes(*forward, *down, center)
                .expect("face axes are orthonormal");
            render_perspective(submap, bg, app, &pose, &k, cfg)
        })
        .collect();

    let width = 2 * n;
    let mut rgb = Image::zeros(width, n, 3);
    let mut alpha = Image::zeros(width, n, 1);
    let mut depth = Image::zeros(width, n, 1);

    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut row_rgb = vec![0.0; width * 3];
            let mut row_alpha = vec![0.0; width];
            let mut row_depth = vec![0.0; width];
            for c in 0..width {
                let d = pano_direction(r, c, n);
                let fi = select_face(d);
                let (forward, down) = axes[fi];
                let right = down.cross(&forward);
                // Camera-space direction on the face.
                let v = Vec3::new(right.dot(&d), down.dot(&d), forward.dot(&d));
                let inv_z = 1.0 / v.z;
                // Continuous coordinates with integer = pixel center.
                let x = k.fx * v.x * inv_z + k.cx - 0.5;
                let y = k.fy * v.y * inv_z + k.cy - 0.5;
                let face = &faces[fi];
                for ch in 0..3 {
                    row_rgb[c * 3 + ch] = bilinear(&face.rgb, ch, x, y);
                }
                row_alpha[c] = bilinear(&face.alpha, 0, x, y);
                row_depth[c] = bilinear(&face.depth, 0, x, y);
            }
            (row_rgb, row_alpha, row_depth)
        })
        .collect();

    for (r, (row_rgb, row_alpha, row_depth)) in rows.into_iter().enumerate() {
        for c in 0..width {
            for ch in 0..3 {
                rgb.set(r, c, ch, row_rgb[c * 3 + ch]);
            }
            alpha.set(r, c, 0, row_alpha[c]);
            depth.set(r, c, 0, row_depth[c]);
        }
    }

    Ok(Panorama {
        rgb,
        alpha,
        depth,
        center,
    })
}
