//! EWA projection of a 3D splat into screen space.

use crate::config::RenderConfig;
use crate::math::{Mat2, Vec2};
use crate::scene::{world_to_camera, CameraPose, Gaussian, Intrinsics};

/// Screen-space footprint of one splat.
#[derive(Clone, Debug)]
pub struct ProjectedGaussian {
    /// Projected mean in pixel coordinates.
    pub mean2d: Vec2,
    /// Projected covariance in px^2, dilation already added.
    pub cov2d: Mat2,
    /// Camera-space depth in meters.
    pub depth: f64,
}

/// Project a splat; `None` when it sits behind the near plane.
///
/// cov2d = J W Sigma W^T J^T + dilation * I, with Sigma the world-space
/// covariance, W the world-to-camera rotation, and J the perspective
/// Jacobian at the mean.
pub fn project_gaussian(
    g: &Gaussian,
    pose: &CameraPose,
    k: &Intrinsics,
    cfg: &RenderConfig,
) -> Option<ProjectedGaussian> {
    let p = world_to_camera(pose, g.position);
    if p.z <= cfg.min_depth_m {
        return None;
    }
    let inv_z = 1.0 / p.z;
    let mean2d = Vec2::new(k.fx * p.x * inv_z + k.cx, k.fy * p.y * inv_z + k.cy);

    // J is the 2x3 Jacobian of (fx x / z, fy y / z).
    let j = nalgebra::Matrix2x3::new(
        k.fx * inv_z,
        0.0,
        -k.fx * p.x * inv_z * inv_z,
        0.0,
        k.fy * inv_z,
        -k.fy * p.y * inv_z * inv_z,
    );
    let w = pose.rotation.transpose();
    let jw = j * w;
    let mut cov2d = jw * g.covariance() * jw.transpose();
    cov2d[(0, 0)] += cfg.cov_dilation_px2;
    cov2d[(1, 1)] += cfg.cov_dilation_px2;
    // Symmetrize against rounding drift.
    let off = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(0, 1)] = off;
    cov2d[(1, 0)] = off;

    Some(ProjectedGaussian {
        mean2d,
        cov2d,
        depth: p.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use approx::assert_relative_eq;

    fn k100() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn on_axis_projection() {
        let g = Gaussian::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.1, 1.0, [1.0; 3]);
        let p = project_gaussian(&g, &CameraPose::identity(), &k100(), &RenderConfig::default())
            .unwrap();
        assert_relative_eq!(p.mean2d.x, 50.0, epsilon = 1e-12);
        assert_relative_eq!(p.mean2d.y, 50.0, epsilon = 1e-12);
        assert_relative_eq!(p.depth, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let g = Gaussian::isotropic(Vec3::new(0.0, 0.0, -1.0), 0.1, 1.0, [1.0; 3]);
        assert!(project_gaussian(&g, &CameraPose::identity(), &k100(), &RenderConfig::default())
            .is_none());
    }

    #[test]
    fn isotropic_covariance_closed_form() {
        // (fx * s / z)^2 I + 0.3 I = 4.3 I for s = 0.1, z = 5, fx = 100.
        let g = Gaussian::isotropic(Vec3::new(0.0, 0.0, 5.0), 0.1, 1.0, [1.0; 3]);
        let p = project_gaussian(&g, &CameraPose::identity(), &k100(), &RenderConfig::default())
            .unwrap();
        assert_relative_eq!(p.cov2d[(0, 0)], 4.3, max_relative = 0.01);
        assert_relative_eq!(p.cov2d[(1, 1)], 4.3, max_relative = 0.01);
        assert!(p.cov2d[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn covariance_is_positive_definite_off_axis() {
        let g = Gaussian::new(
            Vec3::new(2.0, -1.5, 4.0),
            Vec3::new(0.3, 0.05, 0.1),
            [0.9238795325112867, 0.0, 0.3826834323650898, 0.0],
            1.0,
            vec![[1.0; 3]],
        )
        .unwrap();
        let p = project_gaussian(&g, &CameraPose::identity(), &k100(), &RenderConfig::default())
            .unwrap();
        let det = p.cov2d[(0, 0)] * p.cov2d[(1, 1)] - p.cov2d[(0, 1)] * p.cov2d[(1, 0)];
        assert!(det > 0.0 && p.cov2d[(0, 0)] > 0.0);
        assert_relative_eq!(p.cov2d[(0, 1)], p.cov2d[(1, 0)], epsilon = 1e-12);
    }
}
