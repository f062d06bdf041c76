//! Pipeline configuration tree.
//!
//! Every tunable in the crate lives here with its shipped default; the CLI
//! loads the same tree from a TOML file and applies flag overrides on top.
//! The annotated copy of the defaults lives in `config/default.toml`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub render: RenderConfig,
    pub background: BackgroundConfig,
    pub clustering: ClusteringConfig,
    pub mask: MaskConfig,
    pub loss: LossConfig,
    pub topomap: TopomapConfig,
    pub nav: NavConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        self.background.validate()?;
        self.clustering.validate()?;
        self.mask.validate()?;
        self.loss.validate()?;
        self.topomap.validate()?;
        self.nav.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Rasterizer work unit in pixels; output must not depend on it.
    pub tile_size: usize,
    /// Per-splat alpha ceiling applied before blending.
    pub alpha_cap: f64,
    /// Isotropic dilation added to every projected covariance, in px^2.
    pub cov_dilation_px2: f64,
    /// Front-to-back blending stops once transmittance drops below this.
    pub transmittance_min: f64,
    /// Splats closer than this camera-space depth are culled, meters.
    pub min_depth_m: f64,
    /// Splats are rasterized out to the radius where their alpha falls to
    /// this value; contributions below it are dropped with the footprint.
    pub alpha_cutoff: f64,
    /// Projected covariances with a condition number above this are skipped.
    pub max_condition: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            tile_size: 16,
            alpha_cap: 0.99,
            cov_dilation_px2: 0.3,
            transmittance_min: 1e-4,
            min_depth_m: 0.01,
            alpha_cutoff: 1e-3,
            max_condition: 1e12,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(Error::invalid("render.tile_size", "must be positive"));
        }
        if !(0.0 < self.alpha_cap && self.alpha_cap <= 1.0) {
            return Err(Error::invalid("render.alpha_cap", "must be in (0, 1]"));
        }
        if self.transmittance_min <= 0.0 || self.transmittance_min >= 1.0 {
            return Err(Error::invalid(
                "render.transmittance_min",
                "must be in (0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundConfig {
    /// Direction-encoding spherical-harmonics degree L.
    pub sh_degree: usize,
    /// Hidden width of the three-layer background MLP.
    pub hidden_width: usize,
    /// Appearance embedding dimension D.
    pub embed_dim: usize,
    /// Stable fixed step size for plain gradient descent.
    pub learning_rate: f64,
    /// Default step budget for background fitting.
    pub train_steps: usize,
    /// Scene extent used to scale raw camera positions fed to the
    /// appearance MLP; typically the bounding-box diagonal.
    pub position_scale: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            sh_degree: 4,
            hidden_width: 64,
            embed_dim: 16,
            learning_rate: 0.05,
            train_steps: 2000,
            position_scale: 1.0,
        }
    }
}

impl BackgroundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > 4 {
            return Err(Error::invalid("background.sh_degree", "supported up to 4"));
        }
        if self.hidden_width == 0 || self.embed_dim == 0 {
            return Err(Error::invalid(
                "background.widths",
                "hidden_width and embed_dim must be positive",
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid(
                "background.learning_rate",
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Average,
    Single,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    /// Number of submaps C.
    pub num_clusters: usize,
    /// Overlap augmentation distance, meters.
    pub overlap_delta_m: f64,
    pub linkage: Linkage,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            num_clusters: 15,
            overlap_delta_m: 3.0,
            linkage: Linkage::Average,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::invalid("clustering.num_clusters", "must be >= 1"));
        }
        if self.overlap_delta_m < 0.0 {
            return Err(Error::invalid(
                "clustering.overlap_delta_m",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    /// Upward-normal threshold for the horizontal-surface mask.
    pub up_thresh: f64,
    /// Components smaller than this fraction of the image are dropped.
    pub min_area_fraction: f64,
    /// Prompt points sampled from the candidate mask, K.
    pub prompt_count: usize,
    /// Angular tolerance of the fallback region-growing segmenter, degrees.
    pub region_grow_tol_deg: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            up_thresh: 0.85,
            min_area_fraction: 0.005,
            prompt_count: 3,
            region_grow_tol_deg: 10.0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.up_thresh && self.up_thresh < 1.0) {
            return Err(Error::invalid("mask.up_thresh", "must be in (0, 1)"));
        }
        if self.prompt_count == 0 {
            return Err(Error::invalid("mask.prompt_count", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda_ssim: f64,
    pub lambda_supp: f64,
    pub lambda_bg: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_ssim: 0.2,
            lambda_supp: 1.0,
            lambda_bg: 1.0,
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_c1: 0.01 * 0.01,
            ssim_c2: 0.03 * 0.03,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_ssim < 0.0 || self.lambda_supp < 0.0 || self.lambda_bg < 0.0 {
            return Err(Error::invalid("loss.lambdas", "must be >= 0"));
        }
        if self.ssim_window < 3 || self.ssim_window % 2 == 0 {
            return Err(Error::invalid("loss.ssim_window", "must be odd and >= 3"));
        }
        Ok(())
    }
}

/// Statistic taken over the ROI pixels of a panorama channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiStat {
    Mean,
    Max,
    Quantile(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiConfig {
    pub azimuth_halfwidth_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            azimuth_halfwidth_deg: 15.0,
            elevation_min_deg: -60.0,
            elevation_max_deg: -20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopomapConfig {
    pub tau_alpha: f64,
    pub tau_normal: f64,
    /// Step length between viewpoints, meters.
    pub tau_dist_m: f64,
    pub roi: RoiConfig,
    /// Candidate viewpoints within this radius of an existing node merge
    /// into it, meters. Must stay below tau_dist_m / 2.
    pub merge_radius_m: f64,
    pub pano_height_px: usize,
    pub max_nodes: usize,
    pub roi_stat: RoiStat,
}

impl Default for TopomapConfig {
    fn default() -> Self {
        TopomapConfig {
            tau_alpha: 0.95,
            tau_normal: 0.85,
            tau_dist_m: 2.5,
            roi: RoiConfig::default(),
            merge_radius_m: 0.25 * 2.5,
            pano_height_px: 256,
            max_nodes: 100_000,
            roi_stat: RoiStat::Mean,
        }
    }
}

impl TopomapConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("topomap.tau_alpha", self.tau_alpha),
            ("topomap.tau_normal", self.tau_normal),
        ] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::Invalid {
                    what: match name {
                        "topomap.tau_alpha" => "topomap.tau_alpha",
                        _ => "topomap.tau_normal",
                    },
                    why: "must be in (0, 1)".into(),
                });
            }
        }
        if self.tau_dist_m <= 0.0 {
            return Err(Error::invalid("topomap.tau_dist_m", "must be positive"));
        }
        if self.merge_radius_m >= self.tau_dist_m / 2.0 {
            return Err(Error::invalid(
                "topomap.merge_radius_m",
                "must be below tau_dist_m / 2",
            ));
        }
        if self.pano_height_px < 16 || self.pano_height_px % 2 != 0 {
            return Err(Error::invalid(
                "topomap.pano_height_px",
                "must be even and >= 16",
            ));
        }
        if self.max_nodes == 0 {
            return Err(Error::invalid("topomap.max_nodes", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    /// Success radius for SR/OSR, meters.
    pub success_radius_m: f64,
    /// Episodes end after this many moves.
    pub max_steps: usize,
    /// Moves taken by the random baseline.
    pub random_actions: usize,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            success_radius_m: 3.0,
            max_steps: 30,
            random_actions: 10,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<()> {
        if self.success_radius_m <= 0.0 {
            return Err(Error::invalid("nav.success_radius_m", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("nav.max_steps", "must be >= 1"));
        }
        Ok(())
    }
}
