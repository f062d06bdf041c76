//! Scene, camera, and trajectory types plus the coordinate transforms and
//! submap selection everything else builds on.
//!
//! Conventions: world frame is right-handed with +Z up; camera frame is the
//! usual pinhole layout (x right, y down, z forward); poses store the
//! world-from-camera rotation and the camera center in world coordinates.

use serde::{Deserialize, Serialize};

use crate::background::{AppearanceMlp, BackgroundModel};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec3};

/// One anisotropic 3D splat.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    /// Center in world coordinates, meters.
    pub position: Vec3,
    /// Standard deviation along each principal axis, meters. Strictly positive.
    pub scale: Vec3,
    /// Principal-axis orientation (unit quaternion, w x y z).
    pub rotation: Quat,
    /// Opacity in [0, 1].
    pub opacity: f64,
    /// One RGB triple per real spherical-harmonics basis function,
    /// (degree + 1)^2 entries.
    pub sh_coeffs: Vec<[f64; 3]>,
}

impl Gaussian {
    pub fn new(
        position: Vec3,
        scale: Vec3,
        rotation: [f64; 4],
        opacity: f64,
        sh_coeffs: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if !(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0) {
            return Err(Error::invalid("gaussian scale", "components must be > 0"));
        }
        let q = nalgebra::Quaternion::new(rotation[0], rotation[1], rotation[2], rotation[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "gaussian rotation",
                format!("quaternion norm {norm} deviates from 1 by more than 1e-6"),
            ));
        }
        let degree_ok = matches!(sh_coeffs.len(), 1 | 4 | 9 | 16 | 25);
        if !degree_ok {
            return Err(Error::invalid(
                "gaussian sh_coeffs",
                format!("length {} is not (degree+1)^2 for degree 0..4", sh_coeffs.len()),
            ));
        }
        Ok(Gaussian {
            position,
            scale,
            rotation: Quat::new_normalize(q),
            opacity: opacity.clamp(0.0, 1.0),
            sh_coeffs,
        })
    }

    /// Isotropic splat with a view-independent color.
    pub fn isotropic(position: Vec3, sigma: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        // Y00 is constant, so a single DC coefficient of c / Y00 renders as c.
        let dc = 1.0 / crate::sh::Y00;
        Gaussian::new(
            position,
            Vec3::new(sigma, sigma, sigma),
            [1.0, 0.0, 0.0, 0.0],
            opacity,
            vec![[rgb[0] * dc, rgb[1] * dc, rgb[2] * dc]],
        )
        .expect("isotropic parameters are valid by construction")
    }

    /// World-space covariance R diag(scale^2) R^T.
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation.to_rotation_matrix();
        let d = Mat3::from_diagonal(&Vec3::new(
            self.scale.x * self.scale.x,
            self.scale.y * self.scale.y,
            self.scale.z * self.scale.z,
        ));
        r.matrix() * d * r.matrix().transpose()
    }

    /// Surface-normal estimate: the principal axis with the smallest scale,
    /// flipped so its upward component is non-negative.
    pub fn normal_estimate(&self) -> Vec3 {
        let r = self.rotation.to_rotation_matrix();
        let mut axis = 0;
        if self.scale.y < self.scale[axis] {
            axis = 1;
        }
        if self.scale.z < self.scale[axis] {
            axis = 2;
        }
        let n = r.matrix().column(axis).into_owned();
        if n.z < 0.0 {
            -n
        } else {
            n
        }
    }
}

/// Rigid camera pose: world-from-camera rotation and camera center.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraPose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let rtr = rotation.transpose() * rotation;
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((rtr[(i, j)] - expect).abs());
            }
        }
        if dev > 1e-6 {
            return Err(Error::invalid(
                "camera rotation",
                format!("not orthonormal (max deviation {dev:.3e})"),
            ));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "camera rotation",
                "determinant must be +1",
            ));
        }
        Ok(CameraPose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        CameraPose {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Pose looking along `forward` with `down` as the image-down direction.
    /// The pair must be orthogonal unit vectors.
    pub fn from_axes(forward: Vec3, down: Vec3, center: Vec3) -> Result<Self> {
        let right = down.cross(&forward);
        let r = Mat3::from_columns(&[right, down, forward]);
        CameraPose::new(r, center)
    }
}

/// World point into camera coordinates: R^T (p - t).
pub fn world_to_camera(pose: &CameraPose, point: Vec3) -> Vec3 {
    pose.rotation.transpose() * (point - pose.translation)
}

/// Camera point into world coordinates: R p + t.
pub fn camera_to_world(pose: &CameraPose, point: Vec3) -> Vec3 {
    pose.rotation * point + pose.translation
}

/// Pinhole intrinsics in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::invalid("intrinsics", "focal lengths must be > 0"));
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(Error::invalid(
                "intrinsics",
                "principal point must lie inside the image",
            ));
        }
        Ok(Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// One trajectory sample: a frame id, its pose, and an optional image path.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryFrame {
    pub frame_id: u64,
    pub pose: CameraPose,
    pub image_path: Option<String>,
}

/// A cluster's splats plus its background and appearance models.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmapModel {
    pub submap_id: u32,
    pub gaussians: Vec<Gaussian>,
    pub background: BackgroundModel,
    pub appearance: AppearanceMlp,
    /// Mean of the member frames' camera positions.
    pub centroid: Vec3,
    pub member_frames: Vec<u64>,
}

impl SubmapModel {
    /// Centroid recomputed from `frames`; errors if any member is missing.
    pub fn centroid_of(member_frames: &[u64], trajectory: &[TrajectoryFrame]) -> Result<Vec3> {
        if member_frames.is_empty() {
            return Err(Error::invalid("submap", "must reference at least one frame"));
        }
        let mut sum = Vec3::zeros();
        for id in member_frames {
            let f = trajectory
                .iter()
                .find(|f| f.frame_id == *id)
                .ok_or_else(|| {
                    Error::invalid("submap member", format!("frame {id} not in trajectory"))
                })?;
            sum += f.pose.translation;
        }
        Ok(sum / member_frames.len() as f64)
    }
}

/// Whole scene: submaps, the shared trajectory, intrinsics, and config.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub submaps: Vec<SubmapModel>,
    pub trajectory: Vec<TrajectoryFrame>,
    pub intrinsics: Intrinsics,
    pub config: PipelineConfig,
}

impl SceneBundle {
    /// Check the cross-referencing invariants.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for f in &self.trajectory {
            if !ids.insert(f.frame_id) {
                return Err(Error::invalid(
                    "trajectory",
                    format!("duplicate frame_id {}", f.frame_id),
                ));
            }
        }
        let mut submap_ids = std::collections::BTreeSet::new();
        for s in &self.submaps {
            if !submap_ids.insert(s.submap_id) {
                return Err(Error::invalid(
                    "submaps",
                    format!("duplicate submap_id {}", s.submap_id),
                ));
            }
            let centroid = SubmapModel::centroid_of(&s.member_frames, &self.trajectory)?;
            if (centroid - s.centroid).norm() > 1e-9 {
                return Err(Error::invalid(
                    "submap centroid",
                    format!("submap {} centroid differs from member mean", s.submap_id),
                ));
            }
        }
        Ok(())
    }

    pub fn find_frame(&self, frame_id: u64) -> Option<&TrajectoryFrame> {
        self.trajectory.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn submap(&self, submap_id: u32) -> Option<&SubmapModel> {
        self.submaps.iter().find(|s| s.submap_id == submap_id)
    }
}

/// Submap whose centroid is nearest to `position`; ties go to the lowest id.
pub fn nearest_submap(scene: &SceneBundle, position: Vec3) -> Result<u32> {
    let mut best: Option<(f64, u32)> = None;
    for s in &scene.submaps {
        let d = (s.centroid - position).norm_squared();
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && s.submap_id < bid),
        };
        if better {
            best = Some((d, s.submap_id));
        }
    }
    best.map(|(_, id)| id).ok_or(Error::EmptyScene)
}

/// Rotation taking +Y-up world coordinates into the +Z-up convention used
/// throughout the crate (x stays, old -z becomes y, old y becomes z).
pub fn y_up_to_z_up() -> Mat3 {
    Mat3::new(
        1.0, 0.0, 0.0, //
        0.0, 0.0, -1.0, //
        0.0, 1.0, 0.0,
    )
}

/// Re-express a pose given in a +Y-up world in the +Z-up convention.
pub fn convert_pose_y_up(pose: &CameraPose) -> CameraPose {
    let c = y_up_to_z_up();
    CameraPose {
        rotation: c * pose.rotation,
        translation: c * pose.translation,
    }
}

/// Re-express a splat authored in a +Y-up world in the +Z-up convention.
pub fn convert_gaussian_y_up(g: &Gaussian) -> Gaussian {
    let c = y_up_to_z_up();
    let rot = nalgebra::Rotation3::from_matrix_unchecked(c);
    Gaussian {
        position: c * g.position,
        scale: g.scale,
        rotation: Quat::from_rotation_matrix(&rot) * g.rotation,
        opacity: g.opacity,
        sh_coeffs: g.sh_coeffs.clone(),
    }
}
