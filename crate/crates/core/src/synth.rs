//! Declarative synthetic rooms: floor rectangles plus wall segments, with
//! everything downstream derived from the same geometry — splats on the
//! wall faces, an analytic raycaster, ground-truth occupancy, segmentation
//! providers, and the upward-normal panorama provider.

use serde::{Deserialize, Serialize};

use crate::background::{AppearanceMlp, BackgroundModel};
use crate::cluster::{augment_overlap, cluster_trajectory};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image, PixelCoord};
use crate::mask::{region_grow, NormalMap, SegmentationProviders};
use crate::math::{Mat3, Vec3};
use crate::occupancy::{Cell, OccupancyGrid};
use crate::render::pano_direction;
use crate::rng::SplitMix64;
use crate::scene::{
    CameraPose, Gaussian, Intrinsics, SceneBundle, SubmapModel, TrajectoryFrame,
};
use crate::topomap::UpwardNormalProvider;

/// Axis-aligned floor rectangle in world xy, meters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

/// One wall: a segment with height and thickness. The footprint extends
/// half a thickness beyond each endpoint so axis-aligned corners close.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WallSpec {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub height: f64,
    pub thickness: f64,
}

/// Declarative scene description consumed by `synth`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSceneSpec {
    pub name: String,
    pub seed: u64,
    pub floor_rects: Vec<Rect>,
    pub walls: Vec<WallSpec>,
    /// Splat density on wall faces, per square meter.
    pub splats_per_m2: f64,
    pub splat_sigma_m: f64,
    pub splat_opacity: f64,
    /// Emit no floor splats, mimicking a floor-suppressed model.
    pub suppress_floor: bool,
    pub floor_color: [f64; 3],
    pub wall_color: [f64; 3],
    pub camera_height_m: f64,
    /// Trajectory waypoints in xy; frames are laid along the polyline.
    pub trajectory: Vec<[f64; 2]>,
    pub trajectory_step_m: f64,
    pub occupancy_resolution_m: f64,
    pub num_submaps: usize,
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for SynthSceneSpec {
    fn default() -> Self {
        SynthSceneSpec {
            name: "room".into(),
            seed: 1,
            floor_rects: vec![],
            walls: vec![],
            splats_per_m2: 156.0,
            splat_sigma_m: 0.05,
            splat_opacity: 0.92,
            suppress_floor: true,
            floor_color: [0.55, 0.52, 0.48],
            wall_color: [0.75, 0.73, 0.70],
            camera_height_m: 1.2,
            trajectory: vec![],
            trajectory_step_m: 0.25,
            occupancy_resolution_m: 0.05,
            num_submaps: 1,
            image_width: 128,
            image_height: 96,
        }
    }
}

impl SynthSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.floor_rects.is_empty() {
            return Err(Error::invalid("synth spec", "needs at least one floor rect"));
        }
        for r in &self.floor_rects {
            if r.min[0] >= r.max[0] || r.min[1] >= r.max[1] {
                return Err(Error::invalid("synth spec", "degenerate floor rect"));
            }
        }
        for w in &self.walls {
            let len = ((w.to[0] - w.from[0]).powi(2) + (w.to[1] - w.from[1]).powi(2)).sqrt();
            if len <= 0.0 || w.height <= 0.0 || w.thickness <= 0.0 {
                return Err(Error::invalid("synth spec", "degenerate wall"));
            }
        }
        if self.trajectory.len() < 2 {
            return Err(Error::invalid("synth spec", "trajectory needs >= 2 waypoints"));
        }
        if self.num_submaps == 0 {
            return Err(Error::invalid("synth spec", "num_submaps must be >= 1"));
        }
        Ok(())
    }
}

/// Wall resolved to an oriented box.
#[derive(Clone, Debug)]
struct WallBox {
    center: [f64; 2],
    /// Unit axis along the segment.
    u: [f64; 2],
    /// Unit axis across the segment.
    v: [f64; 2],
    half_len: f64,
    half_thick: f64,
    height: f64,
}

impl WallBox {
    fn from_spec(w: &WallSpec) -> WallBox {
        let dx = w.to[0] - w.from[0];
        let dy = w.to[1] - w.from[1];
        let len = (dx * dx + dy * dy).sqrt();
        let u = [dx / len, dy / len];
        WallBox {
            center: [(w.from[0] + w.to[0]) / 2.0, (w.from[1] + w.to[1]) / 2.0],
            u,
            v: [-u[1], u[0]],
            half_len: len / 2.0 + w.thickness / 2.0,
            half_thick: w.thickness / 2.0,
            height: w.height,
        }
    }

    fn footprint_contains(&self, x: f64, y: f64) -> bool {
        let px = x - self.center[0];
        let py = y - self.center[1];
        let lu = px * self.u[0] + py * self.u[1];
        let lv = px * self.v[0] + py * self.v[1];
        lu.abs() <= self.half_len && lv.abs() <= self.half_thick
    }
}

/// What a ray hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    Floor,
    Wall,
}

#[derive(Clone, Copy, Debug)]
pub struct RayHit {
    pub t: f64,
    pub surface: Surface,
    pub normal: Vec3,
}

/// Resolved geometry with the analytic queries the pipeline needs.
#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub spec: SynthSceneSpec,
    walls: Vec<WallBox>,
}

impl SynthWorld {
    pub fn new(spec: SynthSceneSpec) -> Result<SynthWorld> {
        spec.validate()?;
        let walls = spec.walls.iter().map(WallBox::from_spec).collect();
        Ok(SynthWorld { spec, walls })
    }

    pub fn from_json(text: &str) -> Result<SynthWorld> {
        let spec: SynthSceneSpec =
            serde_json::from_str(text).map_err(|e| Error::invalid("synth spec", e.to_string()))?;
        SynthWorld::new(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("spec serializes")
    }

    pub fn on_floor(&self, x: f64, y: f64) -> bool {
        self.spec.floor_rects.iter().any(|r| r.contains(x, y))
    }

    pub fn in_wall_footprint(&self, x: f64, y: f64) -> bool {
        self.walls.iter().any(|w| w.footprint_contains(x, y))
    }

    /// Nearest surface along a ray, if any.
    pub fn raycast(&self, origin: Vec3, dir: Vec3) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        // Floor plane z = 0 within some floor rect.
        if dir.z < -1e-12 {
            let t = -origin.z / dir.z;
            if t > 1e-9 {
                let x = origin.x + t * dir.x;
                let y = origin.y + t * dir.y;
                if self.on_floor(x, y) {
                    best = Some(RayHit {
                        t,
                        surface: Surface::Floor,
                        normal: Vec3::new(0.0, 0.0, 1.0),
                    });
                }
            }
        }
        for w in &self.walls {
            if let Some(hit) = ray_box(origin, dir, w) {
                if best.map_or(true, |b| hit.t < b.t) {
                    best = Some(hit);
                }
            }
        }
        best
    }

    /// Ground-truth color seen along a ray; `None` when nothing is hit.
    pub fn raycast_color(&self, origin: Vec3, dir: Vec3) -> Option<[f64; 3]> {
        self.raycast(origin, dir).map(|h| match h.surface {
            Surface::Floor => self.spec.floor_color,
            Surface::Wall => self.spec.wall_color,
        })
    }

    /// Bounding box of the floor union, padded by `pad` meters.
    pub fn bounds(&self, pad: f64) -> ([f64; 2], [f64; 2]) {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for r in &self.spec.floor_rects {
            for k in 0..2 {
                min[k] = min[k].min(r.min[k]);
                max[k] = max[k].max(r.max[k]);
            }
        }
        ([min[0] - pad, min[1] - pad], [max[0] + pad, max[1] + pad])
    }
}

/// Slab test against a wall box; returns the entering hit with its outward
/// face normal.
fn ray_box(origin: Vec3, dir: Vec3, w: &WallBox) -> Option<RayHit> {
    // Local frame: u along the wall, v across, z up from the floor.
    let ox = origin.x - w.center[0];
    let oy = origin.y - w.center[1];
    let o = [
        ox * w.u[0] + oy * w.u[1],
        ox * w.v[0] + oy * w.v[1],
        origin.z,
    ];
    let d = [
        dir.x * w.u[0] + dir.y * w.u[1],
        dir.x * w.v[0] + dir.y * w.v[1],
        dir.z,
    ];
    let lo = [-w.half_len, -w.half_thick, 0.0];
    let hi = [w.half_len, w.half_thick, w.height];
    let mut t_enter = 1e-9;
    let mut t_exit = f64::INFINITY;
    let mut enter_axis = 3usize;
    let mut enter_sign = 0.0;
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut t0, mut t1) = ((lo[a] - o[a]) * inv, (hi[a] - o[a]) * inv);
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_enter {
            t_enter = t0;
            enter_axis = a;
            enter_sign = sign;
        }
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if enter_axis == 3 {
        // Origin inside the box.
        return None;
    }
    let normal_local = match enter_axis {
        0 => [enter_sign, 0.0, 0.0],
        1 => [0.0, enter_sign, 0.0],
        _ => [0.0, 0.0, enter_sign],
    };
    let normal = Vec3::new(
        normal_local[0] * w.u[0] + normal_local[1] * w.v[0],
        normal_local[0] * w.u[1] + normal_local[1] * w.v[1],
        normal_local[2],
    );
    Some(RayHit {
        t: t_enter,
        surface: Surface::Wall,
        normal,
    })
}

/// Frames along the waypoint polyline, facing the direction of travel.
pub fn trajectory_frames(spec: &SynthSceneSpec) -> Vec<TrajectoryFrame> {
    let mut frames = Vec::new();
    let mut id = 0u64;
    let z = spec.camera_height_m;
    for seg in spec.trajectory.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let len = (dx * dx + dy * dy).sqrt();
        if len < 1e-12 {
            continue;
        }
        let forward = Vec3::new(dx / len, dy / len, 0.0);
        let down = Vec3::new(0.0, 0.0, -1.0);
        let steps = (len / spec.trajectory_step_m).ceil() as usize;
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            let pos = Vec3::new(a[0] + t * dx, a[1] + t * dy, z);
            frames.push(TrajectoryFrame {
                frame_id: id,
                pose: CameraPose::from_axes(forward, down, pos)
                    .expect("horizontal forward and straight down are orthonormal"),
                image_path: None,
            });
            id += 1;
        }
    }
    // Final waypoint, keeping the last heading.
    if let (Some(last), Some(seg)) = (spec.trajectory.last(), spec.trajectory.windows(2).last()) {
        let dx = seg[1][0] - seg[0][0];
        let dy = seg[1][1] - seg[0][1];
        let len = (dx * dx + dy * dy).sqrt().max(1e-12);
        let forward = Vec3::new(dx / len, dy / len, 0.0);
        frames.push(TrajectoryFrame {
            frame_id: id,
            pose: CameraPose::from_axes(forward, Vec3::new(0.0, 0.0, -1.0), Vec3::new(last[0], last[1], z))
                .expect("orthonormal axes"),
            image_path: None,
        });
    }
    frames
}

fn wall_faces(w: &WallBox) -> Vec<(Vec3, Vec3, Vec3, f64, f64)> {
    // (corner, edge_u, edge_z, width, height) per rectangular face.
    let c = Vec3::new(w.center[0], w.center[1], 0.0);
    let u3 = Vec3::new(w.u[0], w.u[1], 0.0);
    let v3 = Vec3::new(w.v[0], w.v[1], 0.0);
    let z3 = Vec3::new(0.0, 0.0, 1.0);
    let mut faces = Vec::new();
    // Two long side faces.
    for side in [-1.0, 1.0] {
        let corner = c + v3 * (side * w.half_thick) - u3 * w.half_len;
        faces.push((corner, u3, z3, 2.0 * w.half_len, w.height));
    }
    // Two end caps.
    for side in [-1.0, 1.0] {
        let corner = c + u3 * (side * w.half_len) - v3 * w.half_thick;
        faces.push((corner, v3, z3, 2.0 * w.half_thick, w.height));
    }
    faces
}

/// Splats covering every wall face (and, unless suppressed, the floor),
/// jitter-gridded at the spec density; thin axis along the face normal.
pub fn generate_gaussians(world: &SynthWorld, rng: &mut SplitMix64) -> Vec<Gaussian> {
    let spec = &world.spec;
    let spacing = 1.0 / spec.splats_per_m2.sqrt();
    let sigma = spec.splat_sigma_m;
    let thin = sigma * 0.2;
    let mut out = Vec::new();

    for w in &world.walls {
        let normal_xy = w.v;
        for (corner, eu, ez, width, height) in wall_faces(w) {
            let nu = (width / spacing).ceil().max(1.0) as usize;
            let nz = (height / spacing).ceil().max(1.0) as usize;
            // Quaternion aligning the local thin axis with the face normal.
            let face_normal = if (eu.x * normal_xy[0] + eu.y * normal_xy[1]).abs() < 0.5 {
                Vec3::new(normal_xy[0], normal_xy[1], 0.0)
            } else {
                Vec3::new(w.u[0], w.u[1], 0.0)
            };
            let rot = rotation_with_z_axis(face_normal);
            for iu in 0..nu {
                for iz in 0..nz {
                    let ju = (iu as f64 + 0.5 + rng.next_range(-0.3, 0.3)) / nu as f64;
                    let jz = (iz as f64 + 0.5 + rng.next_range(-0.3, 0.3)) / nz as f64;
                    let pos = corner + eu * (ju * width) + ez * (jz * height);
                    out.push(splat(pos, sigma, thin, rot, spec.splat_opacity, spec.wall_color));
                }
            }
        }
    }

    if !spec.suppress_floor {
        let rot = rotation_with_z_axis(Vec3::new(0.0, 0.0, 1.0));
        for r in &spec.floor_rects {
            let w = r.max[0] - r.min[0];
            let h = r.max[1] - r.min[1];
            let nx = (w / spacing).ceil().max(1.0) as usize;
            let ny = (h / spacing).ceil().max(1.0) as usize;
            for ix in 0..nx {
                for iy in 0..ny {
                    let jx = (ix as f64 + 0.5 + rng.next_range(-0.3, 0.3)) / nx as f64;
                    let jy = (iy as f64 + 0.5 + rng.next_range(-0.3, 0.3)) / ny as f64;
                    let pos = Vec3::new(r.min[0] + jx * w, r.min[1] + jy * h, 0.0);
                    out.push(splat(pos, sigma, thin, rot, spec.splat_opacity, spec.floor_color));
                }
            }
        }
    }
    out
}

/// Rotation whose local z axis equals `axis` (unit, any orientation).
fn rotation_with_z_axis(axis: Vec3) -> crate::math::Quat {
    let z = axis.normalize();
    let helper = if z.z.abs() < 0.9 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    let m = Mat3::from_columns(&[x, y, z]);
    crate::math::Quat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}

fn splat(
    pos: Vec3,
    sigma: f64,
    thin: f64,
    rot: crate::math::Quat,
    opacity: f64,
    color: [f64; 3],
) -> Gaussian {
    let q = rot.quaternion();
    Gaussian::new(
        pos,
        Vec3::new(sigma, sigma, thin),
        [q.w, q.i, q.j, q.k],
        opacity,
        vec![[
            color[0] / crate::sh::Y00,
            color[1] / crate::sh::Y00,
            color[2] / crate::sh::Y00,
        ]],
    )
    .expect("generated splat parameters are valid")
}

/// Clustering block carried in the scene bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringMeta {
    pub labels: Vec<u32>,
    pub augmented: Vec<Vec<u64>>,
}

/// Build the full scene bundle plus its world, deterministically from the
/// spec and its seed.
pub fn build_scene(spec: &SynthSceneSpec, config: &PipelineConfig) -> Result<(SceneBundle, SynthWorld, ClusteringMeta)> {
    let world = SynthWorld::new(spec.clone())?;
    let mut rng = SplitMix64::new(spec.seed);
    let gaussians = generate_gaussians(&world, &mut rng);
    let trajectory = trajectory_frames(spec);
    if trajectory.is_empty() {
        return Err(Error::invalid("synth spec", "trajectory produced no frames"));
    }

    let positions: Vec<Vec3> = trajectory.iter().map(|f| f.pose.translation).collect();
    let cluster_cfg = crate::config::ClusteringConfig {
        num_clusters: spec.num_submaps.min(positions.len()),
        ..config.clustering.clone()
    };
    let labels = cluster_trajectory(&positions, &cluster_cfg)?;
    let augmented = augment_overlap(&positions, &labels, cluster_cfg.overlap_delta_m);

    let (bounds_min, bounds_max) = world.bounds(0.0);
    let diag = ((bounds_max[0] - bounds_min[0]).powi(2) + (bounds_max[1] - bounds_min[1]).powi(2))
        .sqrt();

    let n_clusters = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut submaps = Vec::new();
    for cluster in 0..n_clusters {
        let member_frames: Vec<u64> = trajectory
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == cluster)
            .map(|(f, _)| f.frame_id)
            .collect();
        let centroid = SubmapModel::centroid_of(&member_frames, &trajectory)?;
        let bg = BackgroundModel::constant_color(
            config.background.sh_degree,
            config.background.embed_dim,
            config.background.hidden_width,
            spec.floor_color,
        );
        let mut app = AppearanceMlp::zeros(
            config.background.hidden_width.min(16),
            config.background.embed_dim,
        );
        app.position_scale = diag.max(1.0);
        submaps.push(SubmapModel {
            submap_id: cluster as u32,
            gaussians: Vec::new(),
            background: bg,
            appearance: app,
            centroid,
            member_frames,
        });
    }
    // Assign splats to the submap with the nearest centroid.
    for g in gaussians {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, s) in submaps.iter().enumerate() {
            let d = (s.centroid - g.position).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        submaps[best].gaussians.push(g);
    }

    let intrinsics = Intrinsics::new(
        0.8 * spec.image_width as f64,
        0.8 * spec.image_width as f64,
        spec.image_width as f64 / 2.0,
        spec.image_height as f64 / 2.0,
        spec.image_width,
        spec.image_height,
    )?;

    let scene = SceneBundle {
        submaps,
        trajectory,
        intrinsics,
        config: config.clone(),
    };
    scene.validate()?;
    let meta = ClusteringMeta {
        labels: labels.iter().map(|&l| l as u32).collect(),
        augmented: augmented
            .into_iter()
            .map(|set| set.into_iter().map(|i| i as u64).collect())
            .collect(),
    };
    Ok((scene, world, meta))
}

/// Ground-truth occupancy raster of the world. Cells overlapping a wall
/// footprint are occupied; cells fully on the floor are free; the rest
/// (outside or straddling the floor edge) are unknown.
pub fn occupancy_from_world(world: &SynthWorld) -> Result<OccupancyGrid> {
    let res = world.spec.occupancy_resolution_m;
    let (min, max) = world.bounds(2.0 * res);
    let width = ((max[0] - min[0]) / res).ceil() as usize;
    let height = ((max[1] - min[1]) / res).ceil() as usize;
    let mut cells = vec![Cell::Unknown; width * height];
    for r in 0..height {
        for c in 0..width {
            let x0 = min[0] + c as f64 * res;
            let y0 = min[1] + r as f64 * res;
            // Wall test: sample the cell densely; any overlap -> occupied.
            let mut occupied = false;
            let mut fully_floor = true;
            const K: usize = 4;
            'grid: for i in 0..=K {
                for j in 0..=K {
                    let x = x0 + res * i as f64 / K as f64;
                    let y = y0 + res * j as f64 / K as f64;
                    if world.in_wall_footprint(x, y) {
                        occupied = true;
                        break 'grid;
                    }
                    if !world.on_floor(x, y) {
                        fully_floor = false;
                    }
                }
            }
            cells[r * width + c] = if occupied {
                Cell::Occupied
            } else if fully_floor {
                Cell::Free
            } else {
                Cell::Unknown
            };
        }
    }
    OccupancyGrid::new(res, [min[0], min[1]], width, height, cells)
}

/// Geometric segmentation providers for one rendered view of a world.
pub struct SynthFrameProviders<'w> {
    pub world: &'w SynthWorld,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    pub region_grow_tol_deg: f64,
}

impl<'w> SynthFrameProviders<'w> {
    fn pixel_dir(&self, row: usize, col: usize) -> Vec3 {
        let k = &self.intrinsics;
        let cam = Vec3::new(
            (col as f64 + 0.5 - k.cx) / k.fx,
            (row as f64 + 0.5 - k.cy) / k.fy,
            1.0,
        );
        (self.pose.rotation * cam).normalize()
    }
}

impl<'w> SegmentationProviders for SynthFrameProviders<'w> {
    fn semantic(&self, _image: &Image, text_prompt: &str) -> Result<BinaryMask> {
        if !text_prompt.eq_ignore_ascii_case("floor") {
            return Err(Error::Provider(format!(
                "geometric fallback only answers the 'floor' prompt, got {text_prompt:?}"
            )));
        }
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        Ok(BinaryMask::from_fn(w, h, |r, c| {
            self.world
                .raycast(self.pose.translation, self.pixel_dir(r, c))
                .map_or(false, |hit| hit.surface == Surface::Floor)
        }))
    }

    fn normals(&self) -> Result<NormalMap> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        Ok(NormalMap::from_fn(w, h, |r, c| {
            match self.world.raycast(self.pose.translation, self.pixel_dir(r, c)) {
                Some(hit) => hit.normal,
                // Rays that miss report a downward sentinel so sky never
                // classifies as floor.
                None => Vec3::new(0.0, 0.0, -1.0),
            }
        }))
    }

    fn promptable(&self, normal_map: &NormalMap, points: &[PixelCoord]) -> Result<BinaryMask> {
        region_grow(normal_map, points, self.region_grow_tol_deg)
    }
}

impl UpwardNormalProvider for SynthWorld {
    fn upward_normal_pano(
        &self,
        _scene: &SceneBundle,
        center: Vec3,
        height_px: usize,
    ) -> Result<Image> {
        let width = 2 * height_px;
        let mut img = Image::zeros(width, height_px, 1);
        for r in 0..height_px {
            for c in 0..width {
                let d = pano_direction(r, c, height_px);
                let v = match self.raycast(center, d) {
                    Some(hit) => hit.normal.z,
                    None => 0.0,
                };
                img.set(r, c, 0, v);
            }
        }
        Ok(img)
    }
}

/// Canned world: a closed corridor, X-aligned, interior `length` x `width`.
pub fn corridor_spec(length: f64, width: f64) -> SynthSceneSpec {
    let hx = length / 2.0;
    let hy = width / 2.0;
    let t = 0.15;
    let h = 2.5;
    SynthSceneSpec {
        name: "corridor".into(),
        floor_rects: vec![Rect {
            min: [-hx, -hy],
            max: [hx, hy],
        }],
        walls: vec![
            // Side walls sit just outside the floor; end walls close it.
            WallSpec {
                from: [-hx - t, hy + t / 2.0],
                to: [hx + t, hy + t / 2.0],
                height: h,
                thickness: t,
            },
            WallSpec {
                from: [-hx - t, -hy - t / 2.0],
                to: [hx + t, -hy - t / 2.0],
                height: h,
                thickness: t,
            },
            WallSpec {
                from: [hx + t / 2.0, -hy - t],
                to: [hx + t / 2.0, hy + t],
                height: h,
                thickness: t,
            },
            WallSpec {
                from: [-hx - t / 2.0, -hy - t],
                to: [-hx - t / 2.0, hy + t],
                height: h,
                thickness: t,
            },
        ],
        trajectory: vec![[-hx + 1.0, 0.0], [hx - 1.0, 0.0]],
        ..SynthSceneSpec::default()
    }
}

/// Canned world: L-shaped room, a horizontal arm joined to a vertical arm.
pub fn l_room_spec() -> SynthSceneSpec {
    let t = 0.15;
    let h = 2.5;
    let wall = |from: [f64; 2], to: [f64; 2]| WallSpec {
        from,
        to,
        height: h,
        thickness: t,
    };
    SynthSceneSpec {
        name: "l_room".into(),
        floor_rects: vec![
            Rect {
                min: [-6.0, -1.3],
                max: [4.0, 1.3],
            },
            Rect {
                min: [1.4, -1.3],
                max: [4.0, 6.0],
            },
        ],
        // Outer perimeter of the L, walls just outside the floor.
        walls: vec![
            wall([-6.0 - t, 1.3 + t / 2.0], [1.4 + t, 1.3 + t / 2.0]),
            wall([1.4 - t / 2.0, 1.3], [1.4 - t / 2.0, 6.0 + t]),
            wall([1.4 - t, 6.0 + t / 2.0], [4.0 + t, 6.0 + t / 2.0]),
            wall([4.0 + t / 2.0, 6.0 + t], [4.0 + t / 2.0, -1.3 - t]),
            wall([4.0 + t, -1.3 - t / 2.0], [-6.0 - t, -1.3 - t / 2.0]),
            wall([-6.0 - t / 2.0, -1.3 - t], [-6.0 - t / 2.0, 1.3 + t]),
        ],
        trajectory: vec![[-5.0, 0.0], [2.7, 0.0], [2.7, 5.0]],
        ..SynthSceneSpec::default()
    }
}

/// Canned world: two corridor-width rooms joined by a doorway in the
/// shared wall. Narrow rooms keep the grown lattice on the centerline,
/// away from walls, so every traversability decision carries a wide
/// threshold margin.
pub fn two_room_spec() -> SynthSceneSpec {
    let t = 0.15;
    let h = 2.5;
    let hy = 1.3;
    let wall = |from: [f64; 2], to: [f64; 2]| WallSpec {
        from,
        to,
        height: h,
        thickness: t,
    };
    SynthSceneSpec {
        name: "two_room".into(),
        floor_rects: vec![Rect {
            min: [-5.0, -hy],
            max: [5.0, hy],
        }],
        walls: vec![
            // Perimeter.
            wall([-5.0 - t, hy + t / 2.0], [5.0 + t, hy + t / 2.0]),
            wall([-5.0 - t, -hy - t / 2.0], [5.0 + t, -hy - t / 2.0]),
            wall([5.0 + t / 2.0, -hy - t], [5.0 + t / 2.0, hy + t]),
            wall([-5.0 - t / 2.0, -hy - t], [-5.0 - t / 2.0, hy + t]),
            // Shared wall with a 2 m doorway centered on y = 0.
            wall([0.0, -hy], [0.0, -1.0]),
            wall([0.0, 1.0], [0.0, hy]),
        ],
        trajectory: vec![[-4.0, 0.0], [4.0, 0.0]],
        num_submaps: 2,
        ..SynthSceneSpec::default()
    }
}

/// Canned world: a large two-room hall for navigation experiments. The
/// grown graph is a rich lattice (dozens of nodes), which random-walk
/// baselines need; traversability margins are not curated here.
pub fn two_room_large_spec() -> SynthSceneSpec {
    let t = 0.15;
    let h = 2.5;
    let (hx, hy) = (8.0, 3.0);
    let wall = |from: [f64; 2], to: [f64; 2]| WallSpec {
        from,
        to,
        height: h,
        thickness: t,
    };
    SynthSceneSpec {
        name: "two_room_large".into(),
        floor_rects: vec![Rect {
            min: [-hx, -hy],
            max: [hx, hy],
        }],
        walls: vec![
            wall([-hx - t, hy + t / 2.0], [hx + t, hy + t / 2.0]),
            wall([-hx - t, -hy - t / 2.0], [hx + t, -hy - t / 2.0]),
            wall([hx + t / 2.0, -hy - t], [hx + t / 2.0, hy + t]),
            wall([-hx - t / 2.0, -hy - t], [-hx - t / 2.0, hy + t]),
            wall([0.0, -hy], [0.0, -1.0]),
            wall([0.0, 1.0], [0.0, hy]),
        ],
        trajectory: vec![[-7.0, 0.0], [7.0, 0.0]],
        num_submaps: 2,
        ..SynthSceneSpec::default()
    }
}
