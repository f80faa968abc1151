//! End-to-end purification and the command implementations behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::camera::{load_views, save_views, ViewSet};
use crate::cluster::{
    build_features, cluster_mean_weights, hdbscan, rank_colored_cloud, ClusterAssignment, ClusterParams,
};
use crate::error::{Error, Result};
use crate::imageio::ImageRgb;
use crate::metrics;
use crate::ply::{load_ply, save_ply};
use crate::purify::{feature_scale, noise_inject, purify, random_prune_indices, PruneThresholds, PurificationReport};
use crate::render::{accumulate_weights, render_views, ContributionReport, RenderSettings};
use crate::splat::SplatCloud;
use crate::synth::{evaluate_pruned, make_scene_with, SceneLabels, SynthConfig, SyntheticScene};

/// Every intermediate of one purification run.
#[derive(Debug, Clone)]
pub struct PurificationRun {
    pub contribution: ContributionReport,
    pub assignment: ClusterAssignment,
    pub cluster_params: ClusterParams,
    pub purified: SplatCloud,
    pub report: PurificationReport,
}

/// Weights → features → HDBSCAN → cluster means → pruning.
pub fn run_purification(
    cloud: &SplatCloud,
    views: &ViewSet,
    cluster_params: Option<ClusterParams>,
    thresholds: &PruneThresholds,
    settings: &RenderSettings,
) -> Result<PurificationRun> {
    let contribution = accumulate_weights(cloud, views, settings, false)?;
    let cluster_params = cluster_params.unwrap_or_else(|| ClusterParams::for_cloud_size(cloud.len()));
    let assignment = cluster_contribution(cloud, &contribution, &cluster_params)?;
    let (purified, report) = purify(cloud, &assignment, &contribution, thresholds)?;
    Ok(PurificationRun {
        contribution,
        assignment,
        cluster_params,
        purified,
        report,
    })
}

fn cluster_contribution(
    cloud: &SplatCloud,
    contribution: &ContributionReport,
    params: &ClusterParams,
) -> Result<ClusterAssignment> {
    let features = build_features(cloud, contribution)?;
    cluster_mean_weights(hdbscan(&features, params)?, contribution)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Scale,
    Noise,
}

/// Settings shared by all subcommands. Loaded from a flat TOML file; command
/// line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub views: Option<PathBuf>,
    pub hidden_views: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub contribution: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub candidate: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Render width; height follows the views' aspect ratio.
    pub resolution: Option<u32>,
    pub tau_c: f64,
    pub tau_n: f64,
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
    pub baseline: BaselineKind,
    pub ratio: f64,
    pub sigma: f64,
    pub color_gain: f64,
    pub opacity_gain: f64,
    pub seed: u64,
    /// Worker threads, 0 = one per core.
    pub threads: usize,
    pub n_scene: usize,
    pub n_wm: usize,
    pub save_npy: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = PruneThresholds::default();
        PipelineConfig {
            input: None,
            views: None,
            hidden_views: None,
            labels: None,
            contribution: None,
            reference: None,
            candidate: None,
            out_dir: PathBuf::from("out"),
            resolution: None,
            tau_c: t.tau_c,
            tau_n: t.tau_n,
            min_cluster_size: None,
            min_samples: None,
            baseline: BaselineKind::Random,
            ratio: 0.25,
            sigma: 0.1,
            color_gain: 0.5,
            opacity_gain: 0.5,
            seed: 0,
            threads: 0,
            n_scene: 3000,
            n_wm: 300,
            save_npy: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn thresholds(&self) -> Result<PruneThresholds> {
        PruneThresholds::new(self.tau_c, self.tau_n)
    }

    /// Explicit clustering parameters, or `None` to size them from the cloud.
    pub fn cluster_params(&self, k: usize) -> Result<ClusterParams> {
        let auto = ClusterParams::for_cloud_size(k);
        ClusterParams::new(
            self.min_cluster_size.unwrap_or(auto.min_cluster_size),
            self.min_samples.unwrap_or(auto.min_samples),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.ratio) {
            return bad(format!("ratio must be in [0, 1), got {}", self.ratio));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.color_gain > 0.0 && self.opacity_gain > 0.0) {
            return bad("gains must be > 0".into());
        }
        if self.resolution == Some(0) {
            return bad("resolution must be > 0".into());
        }
        if matches!(self.min_cluster_size, Some(m) if m < 2) {
            return bad("min_cluster_size must be >= 2".into());
        }
        if self.min_samples == Some(0) {
            return bad("min_samples must be >= 1".into());
        }
        Ok(())
    }

    /// The config as embedded in reports. Thread count and output directory are
    /// left out so reports compare equal across machines and runs.
    pub fn provenance(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("threads");
            m.remove("out_dir");
        }
        v
    }

    fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a PathBuf> {
        field
            .as_ref()
            .ok_or_else(|| Error::Config(format!("missing required setting `{name}`")))
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type CommandResult = std::result::Result<(), StageError>;

/// SHA-256 over the named input files, in order.
pub fn hash_inputs(files: &[(&str, &Path)]) -> Result<String> {
    let mut h = Sha256::new();
    for (name, path) in files {
        let bytes = fs::read(path).map_err(|e| Error::io(*path, e))?;
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(format!("sha256:{}", hex::encode(h.finalize())))
}

fn input_files(cfg: &PipelineConfig) -> Vec<(&'static str, &Path)> {
    [
        ("input", &cfg.input),
        ("views", &cfg.views),
        ("hidden_views", &cfg.hidden_views),
        ("labels", &cfg.labels),
        ("contribution", &cfg.contribution),
    ]
    .into_iter()
    .filter_map(|(n, p)| p.as_deref().map(|p| (n, p)))
    .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_report(cfg: &PipelineConfig, command: &str, input_hash: &str, body: Value) -> Result<()> {
    let mut report = json!({
        "schema": 1,
        "command": command,
        "config": cfg.provenance(),
        "input_hash": input_hash,
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&cfg.out_dir.join("report.json"), &(text + "\n"))
}

fn prepare_out_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

struct LoadedCloud {
    cloud: SplatCloud,
    input_count: usize,
    rejected: Vec<usize>,
}

fn load_cloud(cfg: &PipelineConfig) -> Result<LoadedCloud> {
    let path = cfg.require(&cfg.input, "input")?;
    let raw = load_ply(path)?;
    let input_count = raw.len();
    let (cloud, warnings) = raw.reject_degenerate();
    for w in &warnings {
        log::warn!("skipping degenerate primitive {}: {}", w.index, w.reason);
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(LoadedCloud {
        cloud,
        input_count,
        rejected: warnings.iter().map(|w| w.index).collect(),
    })
}

fn load_view_file(cfg: &PipelineConfig, path: &Path) -> Result<ViewSet> {
    let views = load_views(path)?;
    match cfg.resolution {
        Some(w) if w != views.width() => {
            let h = ((w as f64 * views.height() as f64 / views.width() as f64).round() as u32).max(1);
            views.resized(w, h)
        }
        _ => Ok(views),
    }
}

fn load_train_views(cfg: &PipelineConfig) -> Result<ViewSet> {
    load_view_file(cfg, cfg.require(&cfg.views, "views")?)
}

/// The labelled scene when both labels and hidden views are configured.
fn load_scene(cfg: &PipelineConfig, loaded: &LoadedCloud, train: &ViewSet) -> Result<Option<SyntheticScene>> {
    let Some(labels_path) = &cfg.labels else {
        return Ok(None);
    };
    let hidden_path = cfg.require(&cfg.hidden_views, "hidden_views")?;
    if !loaded.rejected.is_empty() {
        return Err(Error::Config(
            "labels cannot be used with a cloud that has degenerate primitives".into(),
        ));
    }
    let text = fs::read_to_string(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let labels = SceneLabels::from_json(&text)?;
    let hidden = load_view_file(cfg, hidden_path)?;
    SyntheticScene::from_parts(loaded.cloud.clone(), labels, train.clone(), hidden).map(Some)
}

fn evaluation_json(
    scene: Option<&SyntheticScene>,
    result: &SplatCloud,
    pruned: &[usize],
    settings: &RenderSettings,
) -> Result<Value> {
    Ok(match scene {
        Some(s) => serde_json::to_value(evaluate_pruned(s, result, pruned, settings)?).expect("summary serializes"),
        None => Value::Null,
    })
}

pub fn cmd_synth(cfg: &PipelineConfig) -> CommandResult {
    prepare_out_dir(cfg).stage("output")?;
    let synth = SynthConfig {
        resolution: cfg.resolution.unwrap_or(SynthConfig::default().resolution),
        ..SynthConfig::default()
    };
    let scene = make_scene_with(&synth, cfg.seed, cfg.n_scene, cfg.n_wm).stage("synth")?;
    let (train_w, hidden_w) = scene.watermark_weights(&RenderSettings::default()).stage("synth")?;
    let out = &cfg.out_dir;
    save_ply(&scene.cloud, out.join("scene.ply")).stage("output")?;
    save_views(&scene.train_views, out.join("views_train.json")).stage("output")?;
    save_views(&scene.hidden_views, out.join("views_hidden.json")).stage("output")?;
    write_text(&out.join("labels.json"), &(scene.labels.to_json() + "\n")).stage("output")?;
    let body = json!({
        "primitives": scene.cloud.len(),
        "scene_primitives": scene.scene_indices().len(),
        "watermark_primitives": scene.watermark_indices().len(),
        "blobs": scene.labels.blobs.iter().map(|b| json!({
            "mode": b.mode, "center": b.center, "count": b.indices.len()
        })).collect::<Vec<_>>(),
        "watermark_weight_train": train_w,
        "watermark_weight_hidden": hidden_w,
    });
    write_report(cfg, "synth", "", body).stage("output")
}

pub fn cmd_render(cfg: &PipelineConfig) -> CommandResult {
    let hash = hash_inputs(&input_files(cfg)).stage("load")?;
    let loaded = load_cloud(cfg).stage("load")?;
    let views = load_train_views(cfg).stage("load")?;
    prepare_out_dir(cfg).stage("output")?;
    let outputs = render_views(&loaded.cloud, &views, &RenderSettings::default());
    let mut names = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let name = format!("render_{i:03}");
        out.image.save_png(cfg.out_dir.join(format!("{name}.png"))).stage("output")?;
        if cfg.save_npy {
            out.image.save_npy(cfg.out_dir.join(format!("{name}.npy"))).stage("output")?;
        }
        names.push(name + ".png");
    }
    let body = json!({
        "primitives": loaded.cloud.len(),
        "degenerate_rejected": loaded.rejected,
        "width": views.width(),
        "height": views.height(),
        "images": names,
    });
    write_report(cfg, "render", &hash, body).stage("output")
}

fn weight_stats(report: &ContributionReport) -> Value {
    let min = report.omega.iter().copied().fold(f64::INFINITY, f64::min);
    let max = report.omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zero = report.omega.iter().filter(|&&w| w == 0.0).count();
    json!({ "global_mean": report.global_mean, "min": min, "max": max, "zero_count": zero })
}

pub fn cmd_analyze(cfg: &PipelineConfig) -> CommandResult {
    let hash = hash_inputs(&input_files(cfg)).stage("load")?;
    let loaded = load_cloud(cfg).stage("load")?;
    let views = load_train_views(cfg).stage("load")?;
    prepare_out_dir(cfg).stage("output")?;
    let report = accumulate_weights(&loaded.cloud, &views, &RenderSettings::default(), false).stage("weights")?;
    write_text(&cfg.out_dir.join("contribution.json"), &(report.to_json() + "\n")).stage("output")?;
    let body = json!({
        "primitives": loaded.cloud.len(),
        "degenerate_rejected": loaded.rejected,
        "views": views.len(),
        "weights": weight_stats(&report),
    });
    write_report(cfg, "analyze", &hash, body).stage("output")
}

pub fn cmd_cluster(cfg: &PipelineConfig) -> CommandResult {
    let hash = hash_inputs(&input_files(cfg)).stage("load")?;
    let loaded = load_cloud(cfg).stage("load")?;
    let contribution = match &cfg.contribution {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e)).stage("load")?;
            ContributionReport::from_json(&text).stage("load")?
        }
        None => {
            let views = load_train_views(cfg).stage("load")?;
            accumulate_weights(&loaded.cloud, &views, &RenderSettings::default(), false).stage("weights")?
        }
    };
    prepare_out_dir(cfg).stage("output")?;
    let params = cfg.cluster_params(loaded.cloud.len()).stage("cluster")?;
    let assignment = cluster_contribution(&loaded.cloud, &contribution, &params).stage("cluster")?;
    write_text(&cfg.out_dir.join("clusters.json"), &(assignment.to_json(&params) + "\n")).stage("output")?;
    save_ply(&rank_colored_cloud(&loaded.cloud, &assignment), cfg.out_dir.join("clusters_ranked.ply"))
        .stage("output")?;
    let body = json!({
        "primitives": loaded.cloud.len(),
        "degenerate_rejected": loaded.rejected,
        "cluster_count": assignment.cluster_count(),
        "noise_count": assignment.noise_count(),
        "cluster_sizes": assignment.cluster_sizes,
        "cluster_mean_weight": assignment.cluster_mean_weight,
    });
    write_report(cfg, "cluster", &hash, body).stage("output")
}

pub fn cmd_purify(cfg: &PipelineConfig) -> CommandResult {
    let hash = hash_inputs(&input_files(cfg)).stage("load")?;
    let loaded = load_cloud(cfg).stage("load")?;
    let views = load_train_views(cfg).stage("load")?;
    let scene = load_scene(cfg, &loaded, &views).stage("load")?;
    let thresholds = cfg.thresholds().stage("config")?;
    let params = cfg.cluster_params(loaded.cloud.len()).stage("config")?;
    prepare_out_dir(cfg).stage("output")?;

    let settings = RenderSettings::default();
    let contribution = accumulate_weights(&loaded.cloud, &views, &settings, false).stage("weights")?;
    let assignment = cluster_contribution(&loaded.cloud, &contribution, &params).stage("cluster")?;
    let (purified, report) = purify(&loaded.cloud, &assignment, &contribution, &thresholds).stage("prune")?;
    let evaluation = evaluation_json(scene.as_ref(), &purified, &report.pruned_indices, &settings).stage("evaluate")?;

    let out = &cfg.out_dir;
    save_ply(&purified, out.join("purified.ply")).stage("output")?;
    write_text(&out.join("contribution.json"), &(contribution.to_json() + "\n")).stage("output")?;
    write_text(&out.join("clusters.json"), &(assignment.to_json(&params) + "\n")).stage("output")?;
    let body = json!({
        "primitives": loaded.input_count,
        "degenerate_rejected": loaded.rejected,
        "views": views.len(),
        "cluster_params": params,
        "cluster_count": assignment.cluster_count(),
        "noise_count": assignment.noise_count(),
        "weights": weight_stats(&contribution),
        "purification": report,
        "evaluation": evaluation,
    });
    write_report(cfg, "purify", &hash, body).stage("output")
}

pub fn cmd_baseline(cfg: &PipelineConfig) -> CommandResult {
    let hash = hash_inputs(&input_files(cfg)).stage("load")?;
    let loaded = load_cloud(cfg).stage("load")?;
    let scene = match &cfg.labels {
        Some(_) => {
            let views = load_train_views(cfg).stage("load")?;
            load_scene(cfg, &loaded, &views).stage("load")?
        }
        None => None,
    };
    prepare_out_dir(cfg).stage("output")?;
    let cloud = &loaded.cloud;
    let (result, removed, params) = match cfg.baseline {
        BaselineKind::Random => {
            let removed = random_prune_indices(cloud.len(), cfg.ratio, cfg.seed).stage("baseline")?;
            let mut keep = vec![true; cloud.len()];
            removed.iter().for_each(|&i| keep[i] = false);
            (cloud.filter(&keep), removed, json!({ "ratio": cfg.ratio, "seed": cfg.seed }))
        }
        BaselineKind::Scale => (
            feature_scale(cloud, cfg.color_gain, cfg.opacity_gain).stage("baseline")?,
            Vec::new(),
            json!({ "color_gain": cfg.color_gain, "opacity_gain": cfg.opacity_gain }),
        ),
        BaselineKind::Noise => (
            noise_inject(cloud, cfg.sigma, cfg.seed).stage("baseline")?,
            Vec::new(),
            json!({ "sigma": cfg.sigma, "seed": cfg.seed }),
        ),
    };
    if result.is_empty() {
        return Err(Error::EmptyCloud).stage("baseline");
    }
    let evaluation =
        evaluation_json(scene.as_ref(), &result, &removed, &RenderSettings::default()).stage("evaluate")?;
    save_ply(&result, cfg.out_dir.join("baseline.ply")).stage("output")?;
    let body = json!({
        "primitives": loaded.input_count,
        "degenerate_rejected": loaded.rejected,
        "baseline": cfg.baseline,
        "params": params,
        "removed_count": removed.len(),
        "kept_count": result.len(),
        "evaluation": evaluation,
    });
    write_report(cfg, "baseline", &hash, body).stage("output")
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if matches!(ext, "png" | "npy") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn cmd_metrics(cfg: &PipelineConfig) -> CommandResult {
    let reference = cfg.require(&cfg.reference, "reference").stage("config")?;
    let candidate = cfg.require(&cfg.candidate, "candidate").stage("config")?;
    let refs = image_files(reference).stage("load")?;
    if refs.is_empty() {
        return Err(Error::Config(format!("no png or npy images in {}", reference.display()))).stage("load");
    }
    let mut hashed = Vec::new();
    let mut rows = Vec::new();
    let (mut psnr_sum, mut ssim_sum, mut ssim_n) = (0.0, 0.0, 0usize);
    for r in &refs {
        let name = r.file_name().expect("listed file has a name");
        let c = candidate.join(name);
        let a = ImageRgb::load(r).stage("load")?;
        let b = ImageRgb::load(&c).stage("load")?;
        let psnr = metrics::psnr(&a, &b).stage("metrics")?;
        let ssim = match metrics::ssim(&a, &b) {
            Ok(s) => Some(s),
            Err(Error::ImageTooSmall { .. }) => None,
            Err(e) => return Err(e).stage("metrics"),
        };
        psnr_sum += psnr;
        if let Some(s) = ssim {
            ssim_sum += s;
            ssim_n += 1;
        }
        rows.push(json!({ "name": name.to_string_lossy(), "psnr": psnr, "ssim": ssim }));
        hashed.push(r.clone());
        hashed.push(c);
    }
    let files: Vec<(&str, &Path)> = hashed.iter().map(|p| ("image", p.as_path())).collect();
    let hash = hash_inputs(&files).stage("load")?;
    prepare_out_dir(cfg).stage("output")?;
    let body = json!({
        "schema": 1,
        "per_view": rows,
        "mean_psnr": psnr_sum / refs.len() as f64,
        "mean_ssim": (ssim_n > 0).then(|| ssim_sum / ssim_n as f64),
    });
    let text = serde_json::to_string_pretty(&body).expect("metrics serialize");
    write_text(&cfg.out_dir.join("metrics.json"), &(text + "\n")).stage("output")?;
    write_report(cfg, "metrics", &hash, body).stage("output")
}

#[derive(Debug, Parser)]
#[command(name = "splat-purify", version, about = "Contribution analysis and adaptive pruning for Gaussian splat scenes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a watermarked synthetic scene with labels and views.
    Synth,
    /// Render the input cloud from every view to PNG.
    Render,
    /// Compute per-primitive contribution weights.
    Analyze,
    /// Cluster primitives on position, opacity and weight.
    Cluster,
    /// Full purification: weights, clustering and pruning.
    Purify,
    /// Apply a random-pruning, feature-scaling or noise baseline.
    Baseline,
    /// PSNR and SSIM between two directories of images.
    Metrics,
}

/// Flags that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub views: Option<PathBuf>,
    #[arg(long, global = true)]
    pub hidden_views: Option<PathBuf>,
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    #[arg(long, global = true)]
    pub contribution: Option<PathBuf>,
    #[arg(long, global = true)]
    pub reference: Option<PathBuf>,
    #[arg(long, global = true)]
    pub candidate: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub resolution: Option<u32>,
    #[arg(long, global = true)]
    pub tau_c: Option<f64>,
    #[arg(long, global = true)]
    pub tau_n: Option<f64>,
    #[arg(long, global = true)]
    pub min_cluster_size: Option<usize>,
    #[arg(long, global = true)]
    pub min_samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub baseline: Option<BaselineKind>,
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub color_gain: Option<f64>,
    #[arg(long, global = true)]
    pub opacity_gain: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub n_scene: Option<usize>,
    #[arg(long, global = true)]
    pub n_wm: Option<usize>,
    #[arg(long, global = true)]
    pub save_npy: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { cfg.$f = v.clone().into(); } )* };
        }
        set!(input, views, hidden_views, labels, contribution, reference, candidate, resolution, min_cluster_size, min_samples);
        set!(out_dir, tau_c, tau_n, baseline, ratio, sigma, color_gain, opacity_gain, seed, threads, n_scene, n_wm);
        if self.save_npy {
            cfg.save_npy = true;
        }
    }

    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run_command(command: Command, cfg: &PipelineConfig) -> CommandResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
        .stage("config")?;
    pool.install(|| match command {
        Command::Synth => cmd_synth(cfg),
        Command::Render => cmd_render(cfg),
        Command::Analyze => cmd_analyze(cfg),
        Command::Cluster => cmd_cluster(cfg),
        Command::Purify => cmd_purify(cfg),
        Command::Baseline => cmd_baseline(cfg),
        Command::Metrics => cmd_metrics(cfg),
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cli.overrides.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: [config] {e}");
            return e.exit_code();
        }
    };
    match run_command(cli.command, &cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
