//! Versioned binary scene container.
//!
//! Layout (all little-endian): an 8-byte magic, version, up-axis and unit
//! tags, payload length, and an FNV-1a 64 checksum over the payload,
//! followed by the payload blocks: intrinsics, trajectory, submaps
//! (splats in fixed field order as 64-bit floats, then background and
//! appearance weights), optional clustering metadata, and the config tree
//! as JSON. Full byte-level notes in `docs/formats.md`.

use std::path::Path;

use crate::background::{AppearanceMlp, BackgroundModel};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::manifest::fnv1a64;
use crate::math::{Mat3, Vec3};
use crate::mlp::{Linear, MlpWeights};
use crate::scene::{
    convert_gaussian_y_up, convert_pose_y_up, CameraPose, Gaussian, Intrinsics, SceneBundle,
    SubmapModel, TrajectoryFrame,
};
use crate::synth::ClusteringMeta;

const MAGIC: &[u8; 8] = b"SPLATNAV";
const VERSION: u32 = 1;
const UP_AXIS_Z: u8 = 0;
const UP_AXIS_Y: u8 = 1;
const UNITS_METERS: u8 = 0;

/// Scene plus the optional clustering block stored alongside it.
#[derive(Clone, Debug)]
pub struct SceneFilePayload {
    pub scene: SceneBundle,
    pub clustering: Option<ClusteringMeta>,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt(format!(
                "payload truncated at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        Ok(String::from_utf8_lossy(self.take(n)?).into_owned())
    }
}

fn write_mlp(w: &mut Writer, mlp: &MlpWeights) {
    w.u32(mlp.layers.len() as u32);
    for layer in &mlp.layers {
        w.u32(layer.out_dim as u32);
        w.u32(layer.in_dim as u32);
        for v in &layer.weights {
            w.f64(*v);
        }
        for v in &layer.bias {
            w.f64(*v);
        }
    }
}

fn read_mlp(r: &mut Reader) -> Result<MlpWeights> {
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out_dim = r.u32()? as usize;
        let in_dim = r.u32()? as usize;
        let mut weights = Vec::with_capacity(out_dim * in_dim);
        for _ in 0..out_dim * in_dim {
            weights.push(r.f64()?);
        }
        let mut bias = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            bias.push(r.f64()?);
        }
        layers.push(Linear {
            out_dim,
            in_dim,
            weights,
            bias,
        });
    }
    Ok(MlpWeights { layers })
}

fn encode_payload(payload: &SceneFilePayload) -> Result<Vec<u8>> {
    let scene = &payload.scene;
    let mut w = Writer::new();

    let k = &scene.intrinsics;
    w.f64(k.fx);
    w.f64(k.fy);
    w.f64(k.cx);
    w.f64(k.cy);
    w.u32(k.width as u32);
    w.u32(k.height as u32);

    w.u32(scene.trajectory.len() as u32);
    for f in &scene.trajectory {
        w.u64(f.frame_id);
        for row in 0..3 {
            for col in 0..3 {
                w.f64(f.pose.rotation[(row, col)]);
            }
        }
        w.vec3(f.pose.translation);
        match &f.image_path {
            Some(p) => {
                w.u8(1);
                w.str(p);
            }
            None => w.u8(0),
        }
    }

    w.u32(scene.submaps.len() as u32);
    for s in &scene.submaps {
        w.u32(s.submap_id);
        w.vec3(s.centroid);
        w.u32(s.member_frames.len() as u32);
        for &fid in &s.member_frames {
            w.u64(fid);
        }
        w.u32(s.gaussians.len() as u32);
        for g in &s.gaussians {
            w.vec3(g.position);
            w.vec3(g.scale);
            let q = g.rotation.quaternion();
            w.f64(q.w);
            w.f64(q.i);
            w.f64(q.j);
            w.f64(q.k);
            w.f64(g.opacity);
            w.u32(g.sh_coeffs.len() as u32);
            for c in &g.sh_coeffs {
                w.f64(c[0]);
                w.f64(c[1]);
                w.f64(c[2]);
            }
        }
        w.u32(s.background.sh_degree as u32);
        w.u32(s.background.embed_dim as u32);
        write_mlp(&mut w, &s.background.mlp);
        w.f64(s.appearance.position_scale);
        write_mlp(&mut w, &s.appearance.mlp);
    }

    match &payload.clustering {
        Some(meta) => {
            w.u8(1);
            w.u32(meta.labels.len() as u32);
            for &l in &meta.labels {
                w.u32(l);
            }
            w.u32(meta.augmented.len() as u32);
            for set in &meta.augmented {
                w.u32(set.len() as u32);
                for &fid in set {
                    w.u64(fid);
                }
            }
        }
        None => w.u8(0),
    }

    let config_json = serde_json::to_string(&scene.config)
        .map_err(|e| Error::invalid("config", e.to_string()))?;
    w.str(&config_json);
    Ok(w.buf)
}

fn decode_payload(bytes: &[u8], assume_y_up: bool, header_up_axis: u8) -> Result<SceneFilePayload> {
    let mut r = Reader::new(bytes);

    let fx = r.f64()?;
    let fy = r.f64()?;
    let cx = r.f64()?;
    let cy = r.f64()?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let intrinsics = Intrinsics::new(fx, fy, cx, cy, width, height)?;

    let convert = assume_y_up || header_up_axis == UP_AXIS_Y;

    let n_frames = r.u32()? as usize;
    let mut trajectory = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let frame_id = r.u64()?;
        let mut rot = Mat3::zeros();
        for row in 0..3 {
            for col in 0..3 {
                rot[(row, col)] = r.f64()?;
            }
        }
        let t = r.vec3()?;
        let has_path = r.u8()? == 1;
        let image_path = if has_path { Some(r.str()?) } else { None };
        let mut pose = CameraPose {
            rotation: rot,
            translation: t,
        };
        if convert {
            pose = convert_pose_y_up(&pose);
        }
        CameraPose::new(pose.rotation, pose.translation)?;
        trajectory.push(TrajectoryFrame {
            frame_id,
            pose,
            image_path,
        });
    }

    let n_submaps = r.u32()? as usize;
    let mut submaps = Vec::with_capacity(n_submaps);
    for _ in 0..n_submaps {
        let submap_id = r.u32()?;
        let mut centroid = r.vec3()?;
        if convert {
            centroid = crate::scene::y_up_to_z_up() * centroid;
        }
        let n_members = r.u32()? as usize;
        let mut member_frames = Vec::with_capacity(n_members);
        for _ in 0..n_members {
            member_frames.push(r.u64()?);
        }
        let n_gaussians = r.u32()? as usize;
        let mut gaussians = Vec::with_capacity(n_gaussians);
        for _ in 0..n_gaussians {
            let position = r.vec3()?;
            let scale = r.vec3()?;
            let rotation = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
            let opacity = r.f64()?;
            let n_sh = r.u32()? as usize;
            let mut sh_coeffs = Vec::with_capacity(n_sh);
            for _ in 0..n_sh {
                sh_coeffs.push([r.f64()?, r.f64()?, r.f64()?]);
            }
            let mut g = Gaussian::new(position, scale, rotation, opacity, sh_coeffs)?;
            if convert {
                g = convert_gaussian_y_up(&g);
            }
            gaussians.push(g);
        }
        let sh_degree = r.u32()? as usize;
        let embed_dim = r.u32()? as usize;
        let bg_mlp = read_mlp(&mut r)?;
        let background = BackgroundModel {
            sh_degree,
            embed_dim,
            mlp: bg_mlp,
        };
        background.validate()?;
        let position_scale = r.f64()?;
        let app_mlp = read_mlp(&mut r)?;
        let appearance = AppearanceMlp {
            mlp: app_mlp,
            position_scale,
        };
        appearance.validate()?;
        submaps.push(SubmapModel {
            submap_id,
            gaussians,
            background,
            appearance,
            centroid,
            member_frames,
        });
    }

    let clustering = if r.u8()? == 1 {
        let n_labels = r.u32()? as usize;
        let mut labels = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            labels.push(r.u32()?);
        }
        let n_sets = r.u32()? as usize;
        let mut augmented = Vec::with_capacity(n_sets);
        for _ in 0..n_sets {
            let n = r.u32()? as usize;
            let mut set = Vec::with_capacity(n);
            for _ in 0..n {
                set.push(r.u64()?);
            }
            augmented.push(set);
        }
        Some(ClusteringMeta { labels, augmented })
    } else {
        None
    };

    let config_json = r.str()?;
    let config: PipelineConfig = serde_json::from_str(&config_json)
        .map_err(|e| Error::Corrupt(format!("config block: {e}")))?;

    let scene = SceneBundle {
        submaps,
        trajectory,
        intrinsics,
        config,
    };
    scene.validate()?;
    Ok(SceneFilePayload { scene, clustering })
}

/// Serialize a scene (plus optional clustering block) to bytes.
pub fn scene_to_bytes(payload: &SceneFilePayload) -> Result<Vec<u8>> {
    let body = encode_payload(payload)?;
    let mut out = Vec::with_capacity(body.len() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(UP_AXIS_Z);
    out.push(UNITS_METERS);
    out.extend_from_slice(&[0u8, 0]);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&fnv1a64(&body).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Parse scene bytes, verifying magic, version, and checksum.
pub fn scene_from_bytes(bytes: &[u8], assume_y_up: bool) -> Result<SceneFilePayload> {
    if bytes.len() < 32 {
        return Err(Error::Corrupt("shorter than header".into()));
    }
    if &bytes[0..8] != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}")));
    }
    let up_axis = bytes[12];
    if bytes[13] != UNITS_METERS {
        return Err(Error::Corrupt("unsupported units".into()));
    }
    let payload_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let checksum = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
    if bytes.len() != 32 + payload_len {
        return Err(Error::Corrupt(format!(
            "payload length {} does not match header {payload_len}",
            bytes.len() - 32
        )));
    }
    let body = &bytes[32..];
    if fnv1a64(body) != checksum {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    decode_payload(body, assume_y_up, up_axis)
}

pub fn save_scene(path: &Path, payload: &SceneFilePayload) -> Result<()> {
    std::fs::write(path, scene_to_bytes(payload)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_scene(path: &Path) -> Result<SceneFilePayload> {
    load_scene_with_options(path, false)
}

/// Load with an explicit up-axis override for data authored +Y-up.
pub fn load_scene_with_options(path: &Path, assume_y_up: bool) -> Result<SceneFilePayload> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    scene_from_bytes(&bytes, assume_y_up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_scene, corridor_spec};

    fn sample_payload() -> SceneFilePayload {
        let cfg = PipelineConfig::default();
        let (scene, _, meta) = build_scene(&corridor_spec(6.0, 2.6), &cfg).unwrap();
        SceneFilePayload {
            scene,
            clustering: Some(meta),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let payload = sample_payload();
        let bytes = scene_to_bytes(&payload).unwrap();
        let back = scene_from_bytes(&bytes, false).unwrap();
        assert_eq!(back.scene.trajectory.len(), payload.scene.trajectory.len());
        assert_eq!(back.scene.submaps.len(), payload.scene.submaps.len());
        for (a, b) in payload.scene.submaps.iter().zip(&back.scene.submaps) {
            assert_eq!(a.gaussians.len(), b.gaussians.len());
            for (ga, gb) in a.gaussians.iter().zip(&b.gaussians) {
                assert_eq!(ga.position.x.to_bits(), gb.position.x.to_bits());
                assert_eq!(ga.opacity.to_bits(), gb.opacity.to_bits());
                assert_eq!(ga.sh_coeffs, gb.sh_coeffs);
            }
            assert_eq!(a.background, b.background);
            assert_eq!(a.appearance, b.appearance);
        }
        assert_eq!(back.clustering, payload.clustering);
        assert_eq!(back.scene.config, payload.scene.config);
        // Serialization itself is deterministic.
        assert_eq!(bytes, scene_to_bytes(&back).unwrap());
    }

    #[test]
    fn checksum_detects_corruption() {
        let payload = sample_payload();
        let mut bytes = scene_to_bytes(&payload).unwrap();
        let n = bytes.len();
        bytes[n / 2] ^= 0xFF;
        assert!(matches!(
            scene_from_bytes(&bytes, false),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let payload = sample_payload();
        let mut bytes = scene_to_bytes(&payload).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            scene_from_bytes(&bytes, false),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn y_up_conversion_on_load() {
        let payload = sample_payload();
        let bytes = scene_to_bytes(&payload).unwrap();
        let converted = scene_from_bytes(&bytes, true).unwrap();
        // A +Y-up point (x, y, z) lands at (x, -z, y).
        let orig = payload.scene.trajectory[0].pose.translation;
        let conv = converted.scene.trajectory[0].pose.translation;
        assert_eq!(conv.x, orig.x);
        assert_eq!(conv.y, -orig.z);
        assert_eq!(conv.z, orig.y);
    }
}
