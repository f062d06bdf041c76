//! Breadth-first topological map growth over rendered spherical views.
//!
//! From a start viewpoint, each popped node renders an equirectangular
//! alpha panorama from its nearest submap and obtains an upward-normal
//! panorama from a provider. Eight compass directions are tested with ROI
//! statistics; passing directions step a fixed distance, snap their height
//! to the nearest trajectory frame, merge into existing nodes within the
//! merge radius, and connect with an edge. The loop is strictly FIFO with
//! direction order 0..8, so the graph is reproducible byte for byte.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::{RoiConfig, RoiStat, TopomapConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{wrap_angle, Vec3};
use crate::render::render_equirect;
use crate::scene::{nearest_submap, SceneBundle, TrajectoryFrame};

/// A reachable viewpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewpointNode {
    pub node_id: u32,
    pub position: Vec3,
    pub submap_id: u32,
    /// Direction index (0..8) of the step that created this node; `None`
    /// for the start node.
    pub origin_direction: Option<u8>,
}

/// Navigable topological map.
#[derive(Clone, Debug, PartialEq)]
pub struct TopoGraph {
    pub nodes: Vec<ViewpointNode>,
    /// Unordered unique pairs, each stored as (low id, high id), sorted.
    pub edges: Vec<(u32, u32)>,
    pub config: TopomapConfig,
    /// Set when growth stopped at `max_nodes`.
    pub truncated: bool,
}

impl TopoGraph {
    pub fn node(&self, id: u32) -> Option<&ViewpointNode> {
        self.nodes.get(id as usize).filter(|n| n.node_id == id)
    }

    /// Sorted neighbor ids of a node.
    pub fn neighbors(&self, id: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_length(&self, a: u32, b: u32) -> f64 {
        (self.nodes[a as usize].position - self.nodes[b as usize].position).norm()
    }

    /// Structural invariants: edge endpoints exist, no self-loops or
    /// duplicates, and every node is reachable from node 0.
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.node_id as usize != i {
                return Err(Error::invalid("graph", "node ids must be dense and sorted"));
            }
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(Error::invalid("graph", "self-loop"));
            }
            if a > b {
                return Err(Error::invalid("graph", "edges must store (low, high)"));
            }
            if b as usize >= self.nodes.len() {
                return Err(Error::invalid("graph", "edge references missing node"));
            }
            if !seen.insert((a, b)) {
                return Err(Error::invalid("graph", "duplicate edge"));
            }
        }
        if !self.nodes.is_empty() {
            let mut reach = vec![false; self.nodes.len()];
            let mut q = VecDeque::from([0u32]);
            reach[0] = true;
            while let Some(v) = q.pop_front() {
                for nb in self.neighbors(v) {
                    if !reach[nb as usize] {
                        reach[nb as usize] = true;
                        q.push_back(nb);
                    }
                }
            }
            if !reach.iter().all(|&r| r) {
                return Err(Error::invalid("graph", "not connected from node 0"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let wire = GraphJson {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.node_id,
                    x: n.position.x,
                    y: n.position.y,
                    z: n.position.z,
                    submap: n.submap_id,
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            config: GraphMeta {
                topomap: self.config.clone(),
                truncated: self.truncated,
            },
        };
        serde_json::to_string_pretty(&wire).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<TopoGraph> {
        let wire: GraphJson = serde_json::from_str(text)
            .map_err(|e| Error::invalid("graph json", e.to_string()))?;
        let graph = TopoGraph {
            nodes: wire
                .nodes
                .iter()
                .map(|n| ViewpointNode {
                    node_id: n.id,
                    position: Vec3::new(n.x, n.y, n.z),
                    submap_id: n.submap,
                    origin_direction: None,
                })
                .collect(),
            edges: wire.edges.iter().map(|e| (e[0], e[1])).collect(),
            config: wire.config.topomap,
            truncated: wire.config.truncated,
        };
        graph.validate()?;
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<NodeJson>,
    edges: Vec<[u32; 2]>,
    config: GraphMeta,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: u32,
    x: f64,
    y: f64,
    z: f64,
    submap: u32,
}

#[derive(Serialize, Deserialize)]
struct GraphMeta {
    #[serde(flatten)]
    topomap: TopomapConfig,
    truncated: bool,
}

/// Supplies the upward-normal panorama channel (raw n_z in [-1, 1]) for a
/// viewpoint. Implementations: analytic geometry for synthetic worlds
/// ([`crate::synth::SynthWorld`]) or splat-normal blending
/// ([`SplatNormalProvider`]).
pub trait UpwardNormalProvider {
    fn upward_normal_pano(
        &self,
        scene: &SceneBundle,
        center: Vec3,
        height_px: usize,
    ) -> Result<Image>;
}

/// Default provider for scenes without analytic geometry: renders each
/// splat's (thin-axis) normal upward component through the alpha blender
/// and normalizes by accumulated alpha.
pub struct SplatNormalProvider;

impl UpwardNormalProvider for SplatNormalProvider {
    fn upward_normal_pano(
        &self,
        scene: &SceneBundle,
        center: Vec3,
        height_px: usize,
    ) -> Result<Image> {
        let submap_id = nearest_submap(scene, center)?;
        let submap = scene.submap(submap_id).expect("id from nearest_submap");
        // Recolor: DC coefficient encodes the normal's upward component.
        let mut recolored = submap.clone();
        for g in &mut recolored.gaussians {
            let nz = g.normal_estimate().z.clamp(0.0, 1.0);
            g.sh_coeffs = vec![[nz / crate::sh::Y00; 3]];
        }
        let bg = crate::background::BackgroundModel::constant_color(0, 1, 2, [0.0; 3]);
        let app = crate::background::AppearanceMlp::zeros(2, 1);
        let pano = render_equirect(
            &recolored,
            &bg,
            &app,
            center,
            height_px,
            &scene.config.render,
        )?;
        let mut out = Image::zeros(pano.width(), pano.height(), 1);
        for i in 0..out.data.len() {
            let a = pano.alpha.data[i];
            out.data[i] = if a > 1e-6 { pano.rgb.data[i * 3] / a } else { 0.0 };
        }
        Ok(out)
    }
}

/// Pixel row/col angular coordinates of an equirectangular raster.
fn pixel_angles(row: usize, col: usize, height: usize) -> (f64, f64) {
    let width = 2 * height;
    let elevation = std::f64::consts::FRAC_PI_2
        - std::f64::consts::PI * (row as f64 + 0.5) / height as f64;
    let azimuth = std::f64::consts::TAU * (col as f64 + 0.5) / width as f64;
    (azimuth, elevation)
}

/// Indices of panorama pixels inside the ROI window of a direction.
pub fn roi_pixel_indices(height: usize, direction: u8, roi: &RoiConfig) -> Vec<usize> {
    assert!(direction < 8);
    let width = 2 * height;
    let center_az = direction as f64 * std::f64::consts::FRAC_PI_4;
    let halfwidth = roi.azimuth_halfwidth_deg.to_radians();
    let el_min = roi.elevation_min_deg.to_radians();
    let el_max = roi.elevation_max_deg.to_radians();
    let mut out = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let (az, el) = pixel_angles(r, c, height);
            if el < el_min || el > el_max {
                continue;
            }
            if wrap_angle(az - center_az).abs() <= halfwidth {
                out.push(r * width + c);
            }
        }
    }
    out
}

fn roi_statistic(values: &[f64], stat: RoiStat) -> f64 {
    match stat {
        RoiStat::Mean => crate::math::pairwise_sum(values) / values.len() as f64,
        RoiStat::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RoiStat::Quantile(q) => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
            sorted[idx]
        }
    }
}

/// Mean of a panorama channel over one direction's ROI window.
pub fn roi_mean(channel: &Image, direction: u8, roi: &RoiConfig) -> Result<f64> {
    roi_stat_value(channel, direction, roi, RoiStat::Mean)
}

/// Configurable ROI statistic (mean is the contract default).
pub fn roi_stat_value(
    channel: &Image,
    direction: u8,
    roi: &RoiConfig,
    stat: RoiStat,
) -> Result<f64> {
    if channel.channels != 1 || channel.width != 2 * channel.height {
        return Err(Error::ShapeMismatch(
            "ROI channel must be single-channel H x 2H".into(),
        ));
    }
    let idx = roi_pixel_indices(channel.height, direction, roi);
    if idx.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let values: Vec<f64> = idx.iter().map(|&i| channel.data[i]).collect();
    Ok(roi_statistic(&values, stat))
}

/// Alg. traversability test for one direction: the alpha statistic must
/// stay below tau_alpha and the upward-normal statistic above tau_normal.
pub fn traversable(
    alpha_pano: &Image,
    normal_pano: &Image,
    direction: u8,
    cfg: &TopomapConfig,
) -> Result<bool> {
    let a = roi_stat_value(alpha_pano, direction, &cfg.roi, cfg.roi_stat)?;
    let n = roi_stat_value(normal_pano, direction, &cfg.roi, cfg.roi_stat)?;
    Ok(a < cfg.tau_alpha && n > cfg.tau_normal)
}

/// Step target for one direction: a fixed horizontal offset with the
/// height snapped to the nearest trajectory frame (by xy distance).
pub fn next_viewpoint(
    position: Vec3,
    direction: u8,
    tau_dist: f64,
    trajectory: &[TrajectoryFrame],
) -> Vec3 {
    let angle = direction as f64 * std::f64::consts::FRAC_PI_4;
    let xy = Vec3::new(
        position.x + tau_dist * angle.cos(),
        position.y + tau_dist * angle.sin(),
        0.0,
    );
    Vec3::new(xy.x, xy.y, snap_height(xy.x, xy.y, trajectory))
}

fn snap_height(x: f64, y: f64, trajectory: &[TrajectoryFrame]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for f in trajectory {
        let t = f.pose.translation;
        let d = (t.x - x) * (t.x - x) + (t.y - y) * (t.y - y);
        if d < best.0 {
            best = (d, t.z);
        }
    }
    best.1
}

/// Grow the navigable graph from `v0`.
///
/// Candidate positions within `merge_radius_m` (xy distance) of an existing
/// node merge into the nearest one; otherwise a node is created. Edges are
/// recorded for every traversable step, including into merged nodes. When
/// `max_nodes` is reached the graph is returned with `truncated` set.
pub fn build_topomap(
    scene: &SceneBundle,
    v0: Vec3,
    cfg: &TopomapConfig,
    normal_provider: &dyn UpwardNormalProvider,
) -> Result<TopoGraph> {
    cfg.validate()?;
    if scene.submaps.is_empty() {
        return Err(Error::EmptyScene);
    }
    if scene.trajectory.is_empty() {
        return Err(Error::invalid("scene", "trajectory must be non-empty"));
    }
    if !(v0.x.is_finite() && v0.y.is_finite() && v0.z.is_finite()) {
        return Err(Error::invalid("v0", "must be finite"));
    }

    // The start node's height snaps like every other node's.
    let start = Vec3::new(v0.x, v0.y, snap_height(v0.x, v0.y, &scene.trajectory));
    let start_submap = nearest_submap(scene, start)?;

    let mut nodes = vec![ViewpointNode {
        node_id: 0,
        position: start,
        submap_id: start_submap,
        origin_direction: None,
    }];
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut queue: VecDeque<u32> = VecDeque::from([0]);
    let mut truncated = false;

    while let Some(current) = queue.pop_front() {
        let pos = nodes[current as usize].position;
        let submap_id = nearest_submap(scene, pos)?;
        let submap = scene.submap(submap_id).expect("id from nearest_submap");
        let pano = render_equirect(
            submap,
            &submap.background,
            &submap.appearance,
            pos,
            cfg.pano_height_px,
            &scene.config.render,
        )?;
        let normal_pano = normal_provider.upward_normal_pano(scene, pos, cfg.pano_height_px)?;

        for direction in 0..8u8 {
            if !traversable(&pano.alpha, &normal_pano, direction, cfg)? {
                continue;
            }
            let cand = next_viewpoint(pos, direction, cfg.tau_dist_m, &scene.trajectory);
            // Merge into the nearest existing node within the radius.
            let mut merged: Option<(f64, u32)> = None;
            for n in &nodes {
                let dx = n.position.x - cand.x;
                let dy = n.position.y - cand.y;
                let d2 = dx * dx + dy * dy;
                if d2 <= cfg.merge_radius_m * cfg.merge_radius_m
                    && merged.map_or(true, |(bd, _)| d2 < bd)
                {
                    merged = Some((d2, n.node_id));
                }
            }
            let target = match merged {
                Some((_, id)) => id,
                None => {
                    if nodes.len() >= cfg.max_nodes {
                        truncated = true;
                        continue;
                    }
                    let id = nodes.len() as u32;
                    nodes.push(ViewpointNode {
                        node_id: id,
                        position: cand,
                        submap_id: nearest_submap(scene, cand)?,
                        origin_direction: Some(direction),
                    });
                    queue.push_back(id);
                    id
                }
            };
            if target != current {
                edges.insert((current.min(target), current.max(target)));
            }
        }
    }

    let graph = TopoGraph {
        nodes,
        edges: edges.into_iter().collect(),
        config: cfg.clone(),
        truncated,
    };
    graph.validate()?;
    Ok(graph)
}
