//! Command-line surface over the pipeline: synthetic scene generation,
//! clustering, masking, rendering, loss reports, background fitting,
//! topological map growth, occupancy validation, and navigation
//! evaluation. Every run writes a manifest (inputs, config hash, outputs)
//! next to its artifacts; no timestamps, so reruns are byte-identical.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use splatnav_core::config::{Linkage, PipelineConfig};
use splatnav_core::error::Error as CoreError;
use splatnav_core::image::Image;
use splatnav_core::io::{
    load_scene_with_options, read_image_png, read_pfm, save_scene, write_image_png,
    write_mask_png, write_occupancy_pgm_yaml, write_pfm, Manifest, SceneFilePayload,
};
use splatnav_core::losses::total_loss;
use splatnav_core::mask::{
    filter_components, fuse_candidates, normal_to_floor_mask, sample_prompts,
    SegmentationProviders,
};
use splatnav_core::math::Vec3;
use splatnav_core::nav::{evaluate, generate_episodes, Agent, Episode};
use splatnav_core::occupancy::{load_occupancy, validity_report};
use splatnav_core::render::{render_equirect, render_perspective, RenderOutput};
use splatnav_core::rng::SplitMix64;
use splatnav_core::scene::{nearest_submap, SceneBundle};
use splatnav_core::synth::{
    build_scene, occupancy_from_world, ClusteringMeta, SynthFrameProviders, SynthSceneSpec,
    SynthWorld,
};
use splatnav_core::topomap::{build_topomap, SplatNormalProvider, TopoGraph, UpwardNormalProvider};

#[derive(Parser)]
#[command(
    name = "splatnav",
    version,
    about = "Floor-aware splat scenes, topological maps, and navigation evaluation",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene, its ground-truth occupancy map, and
    /// the analytic world description.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Declarative room spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Re-cluster the trajectory and regroup splats by submap.
    Cluster {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: PathBuf,
        /// Number of submaps C.
        #[arg(short = 'C', long)]
        num_clusters: Option<usize>,
        /// Overlap augmentation distance, meters.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_parser = parse_linkage)]
        linkage: Option<Linkage>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the hybrid floor-mask pipeline for one trajectory frame.
    Mask {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: PathBuf,
        /// Analytic world JSON backing the geometric providers.
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out_mask")]
        out_dir: PathBuf,
    },
    /// Render a perspective view or an equirectangular panorama.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: PathBuf,
        /// "perspective" or "equirect".
        #[arg(long, default_value = "perspective")]
        mode: String,
        /// Trajectory frame id (perspective mode).
        #[arg(long)]
        frame: Option<u64>,
        /// Panorama center "x,y,z" (equirect mode).
        #[arg(long, value_parser = parse_vec3)]
        center: Option<Vec3>,
        /// Panorama height in pixels (equirect mode).
        #[arg(long)]
        height: Option<usize>,
        #[arg(long, default_value = "out_render")]
        out_dir: PathBuf,
    },
    /// Evaluate the loss suite over rendered outputs and a target image.
    Loss {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        /// Background-only render.
        #[arg(long)]
        bg: PathBuf,
        /// Ground-truth image.
        #[arg(long)]
        gt: PathBuf,
        /// Floor mask PNG.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a submap's background and appearance models to floor samples.
    FitBg {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 0)]
        submap: u32,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Training rays sampled per member frame.
        #[arg(long, default_value_t = 64)]
        samples_per_frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow the topological map from a start viewpoint.
    Topomap {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: PathBuf,
        /// Analytic world JSON; without it the splat-normal provider runs.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Start viewpoint "x,y,z" (z is snapped to the trajectory).
        #[arg(long, value_parser = parse_vec3)]
        v0: Vec3,
        #[arg(long)]
        tau_alpha: Option<f64>,
        #[arg(long)]
        tau_normal: Option<f64>,
        #[arg(long)]
        tau_dist: Option<f64>,
        #[arg(long)]
        pano_height: Option<usize>,
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a graph against a PGM+YAML occupancy map.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        graph: PathBuf,
        /// Map metadata YAML (its image field locates the PGM).
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run episodic navigation with a baseline agent.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        graph: PathBuf,
        /// Episode file (JSON array); alternative to --gen-episodes.
        #[arg(long)]
        episodes: Option<PathBuf>,
        /// Generate this many episodes on the graph instead.
        #[arg(long)]
        gen_episodes: Option<usize>,
        #[arg(long, default_value_t = 99)]
        seed: u64,
        /// Minimum start-goal hop distance for generated episodes.
        #[arg(long, default_value_t = 8)]
        min_hops: usize,
        /// "shortest" or "random".
        #[arg(long, default_value = "shortest")]
        agent: String,
        #[arg(long, default_value_t = 5)]
        agent_seed: u64,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a scene file, graph, or occupancy map.
    Info {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Interpret the scene file's coordinates as +Y-up and convert.
        #[arg(long, default_value_t = false)]
        assume_y_up: bool,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| format!("bad component {p:?}"))?;
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_linkage(s: &str) -> Result<Linkage, String> {
    match s {
        "average" => Ok(Linkage::Average),
        "single" => Ok(Linkage::Single),
        "complete" => Ok(Linkage::Complete),
        _ => Err(format!("unknown linkage {s:?}")),
    }
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 validation/usage error, 2 I/O or parse error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help/version text.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::Corrupt(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<PipelineConfig> {
    let cfg = match &args.config {
        None => PipelineConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CoreError::io(path.display().to_string(), e))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &PipelineConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
    Ok(())
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    Ok(())
}

fn load_scene_file(path: &Path) -> anyhow::Result<SceneFilePayload> {
    Ok(load_scene_with_options(path, false)?)
}

fn load_world(path: &Path) -> anyhow::Result<SynthWorld> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(SynthWorld::from_json(&text)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}

fn install_pool<R>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> anyhow::Result<R>
where
    R: Send,
{
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| anyhow!("thread pool: {e}"))?;
            Ok(pool.install(f))
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Synth {
            config,
            spec,
            out_dir,
        } => cmd_synth(&config, &spec, &out_dir),
        Command::Cluster {
            config,
            scene,
            num_clusters,
            delta,
            linkage,
            out,
        } => cmd_cluster(&config, &scene, num_clusters, delta, linkage, &out),
        Command::Mask {
            config,
            scene,
            world,
            frame,
            seed,
            out_dir,
        } => cmd_mask(&config, &scene, &world, frame, seed, &out_dir),
        Command::Render {
            config,
            scene,
            mode,
            frame,
            center,
            height,
            out_dir,
        } => cmd_render(&config, &scene, &mode, frame, center, height, &out_dir),
        Command::Loss {
            config,
            rgb,
            alpha,
            bg,
            gt,
            mask,
            out,
        } => cmd_loss(&config, &rgb, &alpha, &bg, &gt, &mask, &out),
        Command::FitBg {
            config,
            scene,
            world,
            submap,
            steps,
            lr,
            seed,
            samples_per_frame,
            out,
        } => cmd_fit_bg(
            &config,
            &scene,
            &world,
            submap,
            steps,
            lr,
            seed,
            samples_per_frame,
            &out,
        ),
        Command::Topomap {
            config,
            scene,
            world,
            v0,
            tau_alpha,
            tau_normal,
            tau_dist,
            pano_height,
            max_nodes,
            threads,
            out,
        } => cmd_topomap(
            &config,
            &scene,
            world.as_deref(),
            v0,
            tau_alpha,
            tau_normal,
            tau_dist,
            pano_height,
            max_nodes,
            threads,
            &out,
        ),
        Command::Validate {
            config,
            graph,
            map,
            out,
        } => cmd_validate(&config, &graph, &map, &out),
        Command::Eval {
            config,
            graph,
            episodes,
            gen_episodes,
            seed,
            min_hops,
            agent,
            agent_seed,
            radius,
            threads,
            out,
        } => cmd_eval(
            &config,
            &graph,
            episodes.as_deref(),
            gen_episodes,
            seed,
            min_hops,
            &agent,
            agent_seed,
            radius,
            threads,
            &out,
        ),
        Command::Info {
            config,
            scene,
            assume_y_up,
            graph,
            map,
        } => cmd_info(
            &config,
            scene.as_deref(),
            assume_y_up,
            graph.as_deref(),
            map.as_deref(),
        ),
    }
}

fn cmd_synth(config: &ConfigArgs, spec_path: &Path, out_dir: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let spec_text = std::fs::read_to_string(spec_path)
        .map_err(|e| CoreError::io(spec_path.display().to_string(), e))?;
    let spec: SynthSceneSpec = serde_json::from_str(&spec_text).map_err(|e| CoreError::Parse {
        path: spec_path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    ensure_dir(out_dir)?;
    let (scene, world, clustering) = build_scene(&spec, &cfg)?;
    let splats: usize = scene.submaps.iter().map(|s| s.gaussians.len()).sum();
    let frames = scene.trajectory.len();
    let grid = occupancy_from_world(&world)?;

    let scene_path = out_dir.join("scene.bin");
    save_scene(
        &scene_path,
        &SceneFilePayload {
            scene,
            clustering: Some(clustering),
        },
    )?;
    let world_path = out_dir.join("world.json");
    std::fs::write(&world_path, world.to_json())
        .map_err(|e| CoreError::io(world_path.display().to_string(), e))?;
    let occ_stem = out_dir.join("occupancy");
    write_occupancy_pgm_yaml(&occ_stem, &grid)?;

    let mut manifest = Manifest::new("synth", &config_json(&cfg));
    manifest.add_input(spec_path)?;
    manifest.add_output(&scene_path);
    manifest.add_output(&world_path);
    manifest.add_output(&occ_stem.with_extension("pgm"));
    manifest.add_output(&occ_stem.with_extension("yaml"));
    manifest.params = serde_json::json!({ "spec_name": spec.name, "seed": spec.seed });
    manifest.write(&out_dir.join("manifest.json"))?;
    println!(
        "synth: {} -> {} ({splats} splats, {frames} frames)",
        spec.name,
        out_dir.display()
    );
    Ok(())
}

fn cmd_cluster(
    config: &ConfigArgs,
    scene_path: &Path,
    num_clusters: Option<usize>,
    delta: Option<f64>,
    linkage: Option<Linkage>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(c) = num_clusters {
        cfg.clustering.num_clusters = c;
    }
    if let Some(d) = delta {
        cfg.clustering.overlap_delta_m = d;
    }
    if let Some(l) = linkage {
        cfg.clustering.linkage = l;
    }
    cfg.clustering.validate()?;

    let payload = load_scene_file(scene_path)?;
    let mut scene = payload.scene;
    let positions: Vec<Vec3> = scene
        .trajectory
        .iter()
        .map(|f| f.pose.translation)
        .collect();
    let labels = splatnav_core::cluster::cluster_trajectory(&positions, &cfg.clustering)?;
    let augmented = splatnav_core::cluster::augment_overlap(
        &positions,
        &labels,
        cfg.clustering.overlap_delta_m,
    );

    // Rebuild submaps around the new clusters; splats regroup by nearest
    // centroid, background models follow from the nearest old submap.
    let n_clusters = labels.iter().copied().max().unwrap_or(0) + 1;
    let all_gaussians: Vec<_> = scene
        .submaps
        .iter()
        .flat_map(|s| s.gaussians.iter().cloned())
        .collect();
    let old_submaps = scene.submaps.clone();
    let mut new_submaps = Vec::new();
    for cluster in 0..n_clusters {
        let member_frames: Vec<u64> = scene
            .trajectory
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == cluster)
            .map(|(f, _)| f.frame_id)
            .collect();
        let centroid =
            splatnav_core::scene::SubmapModel::centroid_of(&member_frames, &scene.trajectory)?;
        let donor = old_submaps
            .iter()
            .min_by(|a, b| {
                (a.centroid - centroid)
                    .norm()
                    .partial_cmp(&(b.centroid - centroid).norm())
                    .unwrap()
            })
            .ok_or(CoreError::EmptyScene)?;
        new_submaps.push(splatnav_core::scene::SubmapModel {
            submap_id: cluster as u32,
            gaussians: Vec::new(),
            background: donor.background.clone(),
            appearance: donor.appearance.clone(),
            centroid,
            member_frames,
        });
    }
    for g in all_gaussians {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, s) in new_submaps.iter().enumerate() {
            let d = (s.centroid - g.position).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        new_submaps[best].gaussians.push(g);
    }
    scene.submaps = new_submaps;
    scene.config.clustering = cfg.clustering.clone();
    scene.validate()?;

    ensure_parent(out)?;
    save_scene(
        out,
        &SceneFilePayload {
            scene,
            clustering: Some(ClusteringMeta {
                labels: labels.iter().map(|&l| l as u32).collect(),
                augmented: augmented
                    .into_iter()
                    .map(|s| s.into_iter().map(|i| i as u64).collect())
                    .collect(),
            }),
        },
    )?;

    let mut manifest = Manifest::new("cluster", &config_json(&cfg));
    manifest.add_input(scene_path)?;
    manifest.add_output(out);
    manifest.params = serde_json::json!({
        "num_clusters": cfg.clustering.num_clusters,
        "overlap_delta_m": cfg.clustering.overlap_delta_m,
    });
    manifest.write(&out.with_extension("manifest.json"))?;
    println!("cluster: {} submaps -> {}", n_clusters, out.display());
    Ok(())
}

fn cmd_mask(
    config: &ConfigArgs,
    scene_path: &Path,
    world_path: &Path,
    frame_id: u64,
    seed: Option<u64>,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let payload = load_scene_file(scene_path)?;
    let world = load_world(world_path)?;
    let scene = payload.scene;
    let frame = scene
        .find_frame(frame_id)
        .ok_or_else(|| anyhow!("frame {frame_id} not in trajectory"))?;
    ensure_dir(out_dir)?;

    let providers = SynthFrameProviders {
        world: &world,
        pose: frame.pose.clone(),
        intrinsics: scene.intrinsics.clone(),
        region_grow_tol_deg: cfg.mask.region_grow_tol_deg,
    };
    // The geometric provider ignores image content; render the view for
    // the artifact dump anyway.
    let submap_id = nearest_submap(&scene, frame.pose.translation)?;
    let submap = scene.submap(submap_id).expect("id from lookup");
    let view = render_perspective(
        submap,
        &submap.background,
        &submap.appearance,
        &frame.pose,
        &scene.intrinsics,
        &cfg.render,
    );

    let m_sem = providers.semantic(&view.rgb, "floor")?;
    let normals = providers.normals()?;
    let m_norm = normal_to_floor_mask(&normals, cfg.mask.up_thresh);
    let m_cand = fuse_candidates(&m_sem, &m_norm)?;
    let min_area =
        (cfg.mask.min_area_fraction * (m_cand.width * m_cand.height) as f64).round() as usize;
    let filtered = filter_components(&m_cand, min_area);
    let prompts = sample_prompts(&filtered, cfg.mask.prompt_count, seed.unwrap_or(0))?;
    let m_final = providers.promptable(&normals, &prompts)?;

    let mut normal_img = Image::zeros(normals.width, normals.height, 3);
    for r in 0..normals.height {
        for c in 0..normals.width {
            let n = normals.get(r, c);
            normal_img.set(r, c, 0, n.x);
            normal_img.set(r, c, 1, n.y);
            normal_img.set(r, c, 2, n.z);
        }
    }

    write_image_png(&out_dir.join("view.png"), &view.rgb)?;
    let masks = [
        ("sem.png", &m_sem),
        ("norm_mask.png", &m_norm),
        ("cand.png", &m_cand),
        ("filtered.png", &filtered),
        ("final.png", &m_final),
    ];
    for (name, mask) in masks {
        write_mask_png(&out_dir.join(name), mask)?;
    }
    write_pfm(&out_dir.join("normals.pfm"), &normal_img)?;
    write_json(
        &out_dir.join("prompts.json"),
        &prompts.iter().map(|p| [p.row, p.col]).collect::<Vec<_>>(),
    )?;

    let mut manifest = Manifest::new("mask", &config_json(&cfg));
    manifest.add_input(scene_path)?;
    manifest.add_input(world_path)?;
    for name in [
        "view.png",
        "sem.png",
        "norm_mask.png",
        "cand.png",
        "filtered.png",
        "final.png",
        "normals.pfm",
        "prompts.json",
    ] {
        manifest.add_output(&out_dir.join(name));
    }
    manifest.params = serde_json::json!({ "frame": frame_id, "seed": seed.unwrap_or(0) });
    manifest.write(&out_dir.join("manifest.json"))?;
    println!(
        "mask: frame {frame_id}: candidates {} px, final {} px -> {}",
        filtered.count_true(),
        m_final.count_true(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_render(
    config: &ConfigArgs,
    scene_path: &Path,
    mode: &str,
    frame: Option<u64>,
    center: Option<Vec3>,
    height: Option<usize>,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let payload = load_scene_file(scene_path)?;
    let scene = payload.scene;
    ensure_dir(out_dir)?;

    let (rgb, alpha, depth, params) = match mode {
        "perspective" => {
            let frame_id = frame.ok_or_else(|| anyhow!("perspective mode needs --frame"))?;
            let f = scene
                .find_frame(frame_id)
                .ok_or_else(|| anyhow!("frame {frame_id} not in trajectory"))?;
            let submap_id = nearest_submap(&scene, f.pose.translation)?;
            let submap = scene.submap(submap_id).expect("id from lookup");
            let out = render_perspective(
                submap,
                &submap.background,
                &submap.appearance,
                &f.pose,
                &scene.intrinsics,
                &cfg.render,
            );
            (
                out.rgb,
                out.alpha,
                out.depth,
                serde_json::json!({ "mode": "perspective", "frame": frame_id, "submap": submap_id }),
            )
        }
        "equirect" => {
            let center = center.ok_or_else(|| anyhow!("equirect mode needs --center x,y,z"))?;
            let height = height.unwrap_or(cfg.topomap.pano_height_px);
            let submap_id = nearest_submap(&scene, center)?;
            let submap = scene.submap(submap_id).expect("id from lookup");
            let pano = render_equirect(
                submap,
                &submap.background,
                &submap.appearance,
                center,
                height,
                &cfg.render,
            )?;
            (
                pano.rgb,
                pano.alpha,
                pano.depth,
                serde_json::json!({
                    "mode": "equirect",
                    "center": [center.x, center.y, center.z],
                    "height": height,
                    "submap": submap_id,
                }),
            )
        }
        other => bail!("unknown render mode {other:?} (perspective|equirect)"),
    };

    write_image_png(&out_dir.join("rgb.png"), &rgb)?;
    write_pfm(&out_dir.join("alpha.pfm"), &alpha)?;
    write_pfm(&out_dir.join("depth.pfm"), &depth)?;

    let mut manifest = Manifest::new("render", &config_json(&cfg));
    manifest.add_input(scene_path)?;
    for name in ["rgb.png", "alpha.pfm", "depth.pfm"] {
        manifest.add_output(&out_dir.join(name));
    }
    manifest.params = params;
    manifest.write(&out_dir.join("manifest.json"))?;
    println!("render: {mode} -> {}", out_dir.display());
    Ok(())
}

fn cmd_loss(
    config: &ConfigArgs,
    rgb: &Path,
    alpha: &Path,
    bg: &Path,
    gt: &Path,
    mask: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let rgb_img = read_image_png(rgb)?;
    let alpha_img = read_pfm(alpha)?;
    let bg_img = read_image_png(bg)?;
    let gt_img = read_image_png(gt)?;
    let mask_bytes =
        std::fs::read(mask).map_err(|e| CoreError::io(mask.display().to_string(), e))?;
    let mask_img = splatnav_core::io::decode_mask_png(&mask_bytes)?;

    let render = RenderOutput {
        depth: Image::zeros(rgb_img.width, rgb_img.height, 1),
        rgb: rgb_img,
        alpha: alpha_img,
        skipped_gaussians: 0,
    };
    let breakdown = total_loss(&render, &bg_img, &gt_img, &mask_img, &cfg.loss)?;
    ensure_parent(out)?;
    write_json(out, &breakdown)?;

    let mut manifest = Manifest::new("loss", &config_json(&cfg));
    for input in [rgb, alpha, bg, gt, mask] {
        manifest.add_input(input)?;
    }
    manifest.add_output(out);
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "loss: total {:.6} (recon {:.6}, supp {:.6}, bg {:.6}) -> {}",
        breakdown.total,
        breakdown.recon,
        breakdown.weighted_supp,
        breakdown.weighted_bg,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit_bg(
    config: &ConfigArgs,
    scene_path: &Path,
    world_path: &Path,
    submap_id: u32,
    steps: Option<usize>,
    lr: Option<f64>,
    seed: u64,
    samples_per_frame: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let payload = load_scene_file(scene_path)?;
    let world = load_world(world_path)?;
    let mut scene = payload.scene;
    let steps = steps.unwrap_or(cfg.background.train_steps);
    let lr = lr.unwrap_or(cfg.background.learning_rate);

    let submap = scene
        .submaps
        .iter()
        .find(|s| s.submap_id == submap_id)
        .ok_or_else(|| anyhow!("submap {submap_id} not in scene"))?;

    // Training rays: random pixels of member frames; targets from the
    // analytic world; weight 1 on floor hits (the mask), 0 otherwise.
    let mut rng = SplitMix64::new(seed);
    let mut samples = Vec::new();
    let k = scene.intrinsics.clone();
    for fid in &submap.member_frames {
        let frame = scene
            .find_frame(*fid)
            .ok_or_else(|| anyhow!("frame {fid} missing"))?;
        for _ in 0..samples_per_frame {
            let col = rng.next_below(k.width);
            let row = rng.next_below(k.height);
            let dir_cam = Vec3::new(
                (col as f64 + 0.5 - k.cx) / k.fx,
                (row as f64 + 0.5 - k.cy) / k.fy,
                1.0,
            );
            let dir = (frame.pose.rotation * dir_cam).normalize();
            let origin = frame.pose.translation;
            let (target, weight) = match world.raycast(origin, dir) {
                Some(hit) if hit.surface == splatnav_core::synth::Surface::Floor => {
                    (world.spec.floor_color, 1.0)
                }
                Some(_) => (world.spec.wall_color, 0.0),
                None => ([0.0; 3], 0.0),
            };
            samples.push(splatnav_core::background::BackgroundSample {
                direction: dir,
                cam_position: origin,
                target_rgb: target,
                weight,
            });
        }
    }

    // Start from a random model: the shipped constant-color background
    // has zero hidden weights and cannot express direction dependence.
    let bg0 = splatnav_core::background::BackgroundModel::random(
        cfg.background.sh_degree,
        cfg.background.embed_dim,
        cfg.background.hidden_width,
        seed ^ 0x00b0_0b1e,
    );
    let mut app0 = submap.appearance.clone();
    if app0
        .mlp
        .layers
        .iter()
        .all(|l| l.weights.iter().all(|&w| w == 0.0))
    {
        let scale = app0.position_scale;
        app0 = splatnav_core::background::AppearanceMlp::random(
            cfg.background.hidden_width.min(16),
            cfg.background.embed_dim,
            seed ^ 0x0a11_ce00,
        );
        app0.position_scale = scale;
    }
    let (bg, app, history) =
        splatnav_core::background::train_background(&bg0, &app0, &samples, steps, lr, seed)?;

    let target = scene
        .submaps
        .iter_mut()
        .find(|s| s.submap_id == submap_id)
        .expect("checked above");
    target.background = bg;
    target.appearance = app;

    ensure_parent(out)?;
    save_scene(
        out,
        &SceneFilePayload {
            scene,
            clustering: payload.clustering,
        },
    )?;
    write_json(&out.with_extension("loss_history.json"), &history)?;

    let mut manifest = Manifest::new("fit-bg", &config_json(&cfg));
    manifest.add_input(scene_path)?;
    manifest.add_input(world_path)?;
    manifest.add_output(out);
    manifest.params = serde_json::json!({
        "submap": submap_id, "steps": steps, "lr": lr, "seed": seed,
        "samples": samples.len(),
    });
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "fit-bg: submap {submap_id}, {} samples, loss {:.6} -> {:.6} ({})",
        samples.len(),
        history.first().unwrap_or(&0.0),
        history.last().unwrap_or(&0.0),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_topomap(
    config: &ConfigArgs,
    scene_path: &Path,
    world_path: Option<&Path>,
    v0: Vec3,
    tau_alpha: Option<f64>,
    tau_normal: Option<f64>,
    tau_dist: Option<f64>,
    pano_height: Option<usize>,
    max_nodes: Option<usize>,
    threads: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(v) = tau_alpha {
        cfg.topomap.tau_alpha = v;
    }
    if let Some(v) = tau_normal {
        cfg.topomap.tau_normal = v;
    }
    if let Some(v) = tau_dist {
        cfg.topomap.tau_dist_m = v;
        cfg.topomap.merge_radius_m = 0.25 * v;
    }
    if let Some(v) = pano_height {
        cfg.topomap.pano_height_px = v;
    }
    if let Some(v) = max_nodes {
        cfg.topomap.max_nodes = v;
    }
    cfg.topomap.validate()?;

    let payload = load_scene_file(scene_path)?;
    let mut scene = payload.scene;
    scene.config.render = cfg.render.clone();

    let world = match world_path {
        Some(p) => Some(load_world(p)?),
        None => None,
    };
    let graph = install_pool(threads, || -> anyhow::Result<TopoGraph> {
        let provider: &dyn UpwardNormalProvider = match &world {
            Some(w) => w,
            None => &SplatNormalProvider,
        };
        Ok(build_topomap(&scene, v0, &cfg.topomap, provider)?)
    })??;

    ensure_parent(out)?;
    std::fs::write(out, graph.to_json())
        .map_err(|e| CoreError::io(out.display().to_string(), e))?;

    let mut manifest = Manifest::new("topomap", &config_json(&cfg));
    manifest.add_input(scene_path)?;
    if let Some(p) = world_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);
    manifest.params = serde_json::json!({
        "v0": [v0.x, v0.y, v0.z],
        "tau_alpha": cfg.topomap.tau_alpha,
        "tau_normal": cfg.topomap.tau_normal,
        "tau_dist_m": cfg.topomap.tau_dist_m,
        "pano_height_px": cfg.topomap.pano_height_px,
        "normal_provider": if world_path.is_some() { "analytic" } else { "splat" },
        "truncated": graph.truncated,
    });
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "topomap: {} nodes, {} edges{} -> {}",
        graph.nodes.len(),
        graph.edges.len(),
        if graph.truncated { " (truncated)" } else { "" },
        out.display()
    );
    Ok(())
}

fn cmd_validate(
    config: &ConfigArgs,
    graph_path: &Path,
    yaml_path: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let graph_text = std::fs::read_to_string(graph_path)
        .map_err(|e| CoreError::io(graph_path.display().to_string(), e))?;
    let graph = TopoGraph::from_json(&graph_text)?;

    // The YAML's image field locates the PGM relative to the YAML.
    let yaml_text = std::fs::read_to_string(yaml_path)
        .map_err(|e| CoreError::io(yaml_path.display().to_string(), e))?;
    let image_name = yaml_text
        .lines()
        .find_map(|l| l.trim().strip_prefix("image:"))
        .map(|v| v.trim().to_string())
        .ok_or_else(|| CoreError::Parse {
            path: yaml_path.display().to_string(),
            line: 0,
            msg: "missing image field".into(),
        })?;
    let pgm_path = yaml_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(image_name);
    let grid = load_occupancy(&pgm_path, yaml_path)?;
    let report = validity_report(&graph, &grid);

    ensure_parent(out)?;
    write_json(out, &report)?;

    let mut manifest = Manifest::new("validate", &config_json(&cfg));
    manifest.add_input(graph_path)?;
    manifest.add_input(yaml_path)?;
    manifest.add_input(&pgm_path)?;
    manifest.add_output(out);
    manifest.write(&out.with_extension("manifest.json"))?;
    println!(
        "validate: nodes {}/{} ({:.1}%), edges {}/{} ({:.1}%) -> {}",
        report.node_valid_count,
        report.node_total,
        100.0 * report.node_ratio,
        report.edge_valid_count,
        report.edge_total,
        100.0 * report.edge_ratio,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    config: &ConfigArgs,
    graph_path: &Path,
    episodes_path: Option<&Path>,
    gen_episodes: Option<usize>,
    seed: u64,
    min_hops: usize,
    agent_name: &str,
    agent_seed: u64,
    radius: Option<f64>,
    threads: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let radius = radius.unwrap_or(cfg.nav.success_radius_m);
    let graph_text = std::fs::read_to_string(graph_path)
        .map_err(|e| CoreError::io(graph_path.display().to_string(), e))?;
    let graph = TopoGraph::from_json(&graph_text)?;

    let mut generated = false;
    let episodes: Vec<Episode> = match (episodes_path, gen_episodes) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CoreError::io(path.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| CoreError::Parse {
                path: path.display().to_string(),
                line: e.line(),
                msg: e.to_string(),
            })?
        }
        (None, Some(n)) => {
            generated = true;
            generate_episodes(&graph, n, seed, min_hops)?
        }
        (None, None) => bail!("provide --episodes FILE or --gen-episodes N"),
    };

    let agent = match agent_name {
        "shortest" => Agent::Shortest,
        "random" => Agent::Random {
            seed: agent_seed,
            actions: cfg.nav.random_actions,
        },
        other => bail!("unknown agent {other:?} (shortest|random)"),
    };

    let summary = install_pool(threads, || evaluate(&graph, &episodes, &agent, radius))??;

    ensure_parent(out)?;
    write_json(out, &summary)?;
    if generated {
        write_json(&out.with_extension("episodes.json"), &episodes)?;
    }

    let mut manifest = Manifest::new("eval", &config_json(&cfg));
    manifest.add_input(graph_path)?;
    if let Some(p) = episodes_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);
    manifest.params = serde_json::json!({
        "agent": agent_name,
        "episodes": episodes.len(),
        "success_radius_m": radius,
        "seed": seed,
        "agent_seed": agent_seed,
    });
    manifest.write(&out.with_extension("manifest.json"))?;
    print!("{}", summary.table());
    Ok(())
}

fn cmd_info(
    config: &ConfigArgs,
    scene: Option<&Path>,
    assume_y_up: bool,
    graph: Option<&Path>,
    map: Option<&Path>,
) -> anyhow::Result<()> {
    let _ = load_config(config)?;
    let mut shown = false;
    if let Some(path) = scene {
        let payload = load_scene_with_options(path, assume_y_up)?;
        let s: &SceneBundle = &payload.scene;
        let splats: usize = s.submaps.iter().map(|m| m.gaussians.len()).sum();
        println!("scene: {}", path.display());
        println!("  frames: {}", s.trajectory.len());
        println!("  submaps: {} ({} splats)", s.submaps.len(), splats);
        for m in &s.submaps {
            println!(
                "    submap {}: {} splats, {} member frames, centroid ({:.2}, {:.2}, {:.2})",
                m.submap_id,
                m.gaussians.len(),
                m.member_frames.len(),
                m.centroid.x,
                m.centroid.y,
                m.centroid.z
            );
        }
        println!(
            "  intrinsics: {}x{} fx {:.1} fy {:.1}",
            s.intrinsics.width, s.intrinsics.height, s.intrinsics.fx, s.intrinsics.fy
        );
        if let Some(c) = &payload.clustering {
            println!("  clustering: {} labels stored", c.labels.len());
        }
        shown = true;
    }
    if let Some(path) = graph {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let g = TopoGraph::from_json(&text)?;
        println!("graph: {}", path.display());
        println!(
            "  {} nodes, {} edges, truncated: {}",
            g.nodes.len(),
            g.edges.len(),
            g.truncated
        );
        shown = true;
    }
    if let Some(path) = map {
        let yaml_text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let image_name = yaml_text
            .lines()
            .find_map(|l| l.trim().strip_prefix("image:"))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| anyhow!("missing image field in {}", path.display()))?;
        let pgm = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(image_name);
        let grid = load_occupancy(&pgm, path)?;
        let mut free = 0;
        let mut occ = 0;
        for c in &grid.cells {
            match c {
                splatnav_core::occupancy::Cell::Free => free += 1,
                splatnav_core::occupancy::Cell::Occupied => occ += 1,
                _ => {}
            }
        }
        println!("map: {}", path.display());
        println!(
            "  {}x{} at {} m/cell, origin ({}, {}), {} free / {} occupied cells",
            grid.width, grid.height, grid.resolution, grid.origin[0], grid.origin[1], free, occ
        );
        shown = true;
    }
    if !shown {
        bail!("nothing to describe: pass --scene, --graph, or --map");
    }
    Ok(())
}
