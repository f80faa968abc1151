//! Synthetic watermarked scenes with ground-truth labels.
//!
//! The scene is a closed room tiled with flat, nearly opaque discs and viewed
//! from two camera rings inside it. Watermarks are compact blobs that the
//! interior cameras barely see: either hidden behind a wall or faint enough to
//! be almost transparent. Each blob gets a close-range hidden camera.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraView, Orbit, ViewSet};
use crate::error::{Error, Result};
use crate::imageio::ImageRgb;
use crate::metrics::{self, ScoreInputs, PSNR_CAP_DB};
use crate::purify::PurificationReport;
use crate::render::{accumulate_weights, render_views, RenderSettings};
use crate::sh;
use crate::splat::{logit, GaussianPrimitive, SplatCloud};

pub const MAX_ATTEMPTS: usize = 100;
/// Upper bound on the watermark's summed weight over the train views.
pub const TRAIN_WEIGHT_LIMIT: f64 = 0.01;
/// Lower bound on the watermark's summed weight over the hidden views.
pub const HIDDEN_WEIGHT_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub resolution: u32,
    pub room_half_extent: f64,
    pub views_per_ring: usize,
    pub ring_elevation_deg: f64,
    pub ring_radius: f64,
    pub train_focal_scale: f64,
    pub hidden_focal_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            resolution: 64,
            room_half_extent: 2.0,
            views_per_ring: 8,
            ring_elevation_deg: 40.0,
            ring_radius: 0.9,
            train_focal_scale: 0.5,
            hidden_focal_scale: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobMode {
    /// Outside the room, behind a wall from every train camera.
    Occluded,
    /// Inside the room with activated opacity in `[0.01, 0.05]`.
    Faint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkBlob {
    pub mode: BlobMode,
    pub center: [f64; 3],
    /// Face the blob sits against, `2·axis + (0 for +, 1 for −)`.
    pub face: usize,
    pub indices: Vec<usize>,
}

/// Procedural wall texture: a two-color checker plus a per-face degree-1 SH term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomTexture {
    pub half_extent: f64,
    pub checker_cell: f64,
    pub face_colors: Vec<[[f64; 3]; 2]>,
    pub face_gradients: Vec<[[f64; 3]; 3]>,
}

fn face_axes(face: usize) -> (usize, f64, usize, usize) {
    let axis = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    (axis, sign, a1, a2)
}

fn face_normal(face: usize) -> Vector3<f64> {
    let (axis, sign, _, _) = face_axes(face);
    let mut n = Vector3::zeros();
    n[axis] = sign;
    n
}

impl RoomTexture {
    fn random(rng: &mut ChaCha8Rng, half_extent: f64, checker_cell: f64) -> Self {
        let mut face_colors = Vec::with_capacity(6);
        let mut face_gradients = Vec::with_capacity(6);
        for _ in 0..6 {
            let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.15..0.85));
            let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.15..0.85));
            face_colors.push([a, b]);
            face_gradients.push(std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-0.15..0.15))));
        }
        RoomTexture {
            half_extent,
            checker_cell,
            face_colors,
            face_gradients,
        }
    }

    fn cell_color(&self, face: usize, u: f64, v: f64) -> [f64; 3] {
        let l = self.half_extent;
        let iu = ((u + l) / self.checker_cell).floor() as i64;
        let iv = ((v + l) / self.checker_cell).floor() as i64;
        self.face_colors[face][(iu + iv).rem_euclid(2) as usize]
    }

    /// SH rows (degree 1) for a wall point at in-plane coordinates `(u, v)`.
    pub fn sh_rows(&self, face: usize, u: f64, v: f64) -> Vec<[f32; 3]> {
        let c = self.cell_color(face, u, v);
        let mut rows = vec![c.map(|x| sh::rgb_to_dc(x) as f32)];
        rows.extend(self.face_gradients[face].iter().map(|g| g.map(|x| x as f32)));
        rows
    }

    /// Color seen along a ray that starts inside the room.
    pub fn shade_ray(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> [f64; 3] {
        let l = self.half_extent;
        let mut best = (f64::INFINITY, 0usize);
        for axis in 0..3 {
            if dir[axis].abs() < 1e-15 {
                continue;
            }
            let (wall, face) = if dir[axis] > 0.0 { (l, 2 * axis) } else { (-l, 2 * axis + 1) };
            let t = (wall - origin[axis]) / dir[axis];
            if t > 0.0 && t < best.0 {
                best = (t, face);
            }
        }
        let (t, face) = best;
        if !t.is_finite() {
            return [0.0; 3];
        }
        let hit = origin + dir * t;
        let (_, _, a1, a2) = face_axes(face);
        let rows = self.sh_rows(face, hit[a1], hit[a2]);
        sh::eval_color(1, &rows, dir)
    }

    /// Ray-cast render of the bare room (no splats); the camera must be inside.
    pub fn render(&self, view: &CameraView) -> Result<ImageRgb> {
        let mut img = ImageRgb::new(view.width, view.height);
        for y in 0..view.height {
            for x in 0..view.width {
                let (o, d) = view.pixel_center_ray(x, y)?;
                img.set(x, y, self.shade_ray(&o, &d));
            }
        }
        Ok(img)
    }
}

/// Ground-truth labels and everything needed to score a purification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLabels {
    pub schema: u32,
    pub seed: u64,
    pub scene_indices: Vec<usize>,
    pub watermark_indices: Vec<usize>,
    pub blobs: Vec<WatermarkBlob>,
    pub texture: RoomTexture,
}

impl SceneLabels {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("labels serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("labels", e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: SplatCloud,
    pub labels: SceneLabels,
    pub train_views: ViewSet,
    pub hidden_views: ViewSet,
}

impl SyntheticScene {
    pub fn scene_indices(&self) -> &[usize] {
        &self.labels.scene_indices
    }

    pub fn watermark_indices(&self) -> &[usize] {
        &self.labels.watermark_indices
    }

    pub fn texture(&self) -> &RoomTexture {
        &self.labels.texture
    }

    /// Reassembles a scene from its saved parts, checking that the labels
    /// partition the cloud.
    pub fn from_parts(cloud: SplatCloud, labels: SceneLabels, train_views: ViewSet, hidden_views: ViewSet) -> Result<Self> {
        let k = cloud.len();
        let mut seen = vec![false; k];
        for &i in labels.scene_indices.iter().chain(&labels.watermark_indices) {
            if i >= k || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "labels do not partition the {k} primitives (index {i})"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter(format!("labels do not cover all {k} primitives")));
        }
        Ok(SyntheticScene {
            cloud,
            labels,
            train_views,
            hidden_views,
        })
    }

    /// Summed `ω` of the watermark primitives over the train and hidden views.
    pub fn watermark_weights(&self, settings: &RenderSettings) -> Result<(f64, f64)> {
        let sum = |views: &ViewSet| -> Result<f64> {
            let r = accumulate_weights(&self.cloud, views, settings, false)?;
            Ok(self.labels.watermark_indices.iter().map(|&i| r.omega[i]).sum())
        };
        Ok((sum(&self.train_views)?, sum(&self.hidden_views)?))
    }
}

/// Scene with the default configuration.
pub fn make_scene(seed: u64, n_scene: usize, n_wm: usize) -> Result<SyntheticScene> {
    make_scene_with(&SynthConfig::default(), seed, n_scene, n_wm)
}

pub fn make_scene_with(config: &SynthConfig, seed: u64, n_scene: usize, n_wm: usize) -> Result<SyntheticScene> {
    if n_scene < 500 {
        return Err(Error::InvalidParameter(format!("n_scene must be >= 500, got {n_scene}")));
    }
    if n_wm != 0 && n_wm < 50 {
        return Err(Error::InvalidParameter(format!("n_wm must be 0 or >= 50, got {n_wm}")));
    }
    let settings = RenderSettings::default();
    let train_views = train_views(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let scene = sample_scene(config, &mut rng, seed, n_scene, n_wm, train_views.clone())?;
        if n_wm == 0 {
            return Ok(scene);
        }
        let (train, hidden) = scene.watermark_weights(&settings)?;
        if train < TRAIN_WEIGHT_LIMIT && hidden > HIDDEN_WEIGHT_FLOOR {
            return Ok(scene);
        }
        last_reason = format!("watermark weight train {train:.4}, hidden {hidden:.4}");
        log::debug!("seed {seed} attempt {attempt} rejected: {last_reason}");
    }
    Err(Error::SceneRejected {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

/// Two rings inside the room, above and below its center.
pub fn train_views(config: &SynthConfig) -> Result<ViewSet> {
    let half_step = 180.0 / config.views_per_ring as f64;
    let mut views = Vec::with_capacity(2 * config.views_per_ring);
    for (el, offset) in [(config.ring_elevation_deg, 0.0), (-config.ring_elevation_deg, half_step)] {
        views.extend(
            Orbit::new(Vector3::zeros(), config.ring_radius, config.views_per_ring, config.resolution)
                .elevation(el)
                .azimuth_offset(offset)
                .focal_scale(config.train_focal_scale)
                .cameras()?,
        );
    }
    ViewSet::new(views)
}

fn quat_for_face(face: usize) -> [f32; 4] {
    let h = std::f32::consts::FRAC_1_SQRT_2;
    match face / 2 {
        0 => [h, 0.0, h, 0.0],
        1 => [h, -h, 0.0, 0.0],
        _ => [1.0, 0.0, 0.0, 0.0],
    }
}

fn wall_disc(texture: &RoomTexture, face: usize, u: f64, v: f64, scale: f64, opacity: f64) -> GaussianPrimitive {
    let (axis, sign, a1, a2) = face_axes(face);
    let mut pos = [0.0f32; 3];
    pos[axis] = (sign * texture.half_extent) as f32;
    pos[a1] = u as f32;
    pos[a2] = v as f32;
    let ls = scale.ln() as f32;
    GaussianPrimitive {
        position: pos,
        rotation: quat_for_face(face),
        log_scale: [ls, ls, (scale * 0.05).ln() as f32],
        opacity_logit: logit(opacity) as f32,
        sh_coeffs: texture.sh_rows(face, u, v),
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = (h.rem_euclid(1.0)) * 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn sample_scene(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    seed: u64,
    n_scene: usize,
    n_wm: usize,
    train_views: ViewSet,
) -> Result<SyntheticScene> {
    let l = config.room_half_extent;
    let grid = ((n_scene / 6) as f64).sqrt().floor() as usize;
    let spacing = 2.0 * l / grid as f64;
    let texture = RoomTexture::random(rng, l, 4.0 * spacing);
    let disc_scale = 0.6 * spacing;

    let mut prims = Vec::with_capacity(n_scene + n_wm);
    for face in 0..6 {
        for i in 0..grid {
            for j in 0..grid {
                let u = -l + (i as f64 + 0.5) * spacing;
                let v = -l + (j as f64 + 0.5) * spacing;
                prims.push(wall_disc(&texture, face, u, v, disc_scale, 0.97));
            }
        }
    }
    while prims.len() < n_scene {
        let face = rng.random_range(0..6);
        let u = rng.random_range(-l + spacing..l - spacing);
        let v = rng.random_range(-l + spacing..l - spacing);
        prims.push(wall_disc(&texture, face, u, v, 0.5 * spacing, 0.9));
    }
    let scene_indices: Vec<usize> = (0..prims.len()).collect();

    let mut blobs = Vec::new();
    let mut hidden = Vec::new();
    if n_wm > 0 {
        let n_blobs = rng.random_range(2..=4usize).min((n_wm / 25).max(2));
        let spread = Normal::new(0.0, 0.07).expect("valid std");
        for b in 0..n_blobs {
            let count = n_wm / n_blobs + usize::from(b < n_wm % n_blobs);
            let mode = if rng.random_bool(0.5) { BlobMode::Occluded } else { BlobMode::Faint };
            let face = rng.random_range(0..6);
            let (axis, sign, a1, a2) = face_axes(face);
            let normal = face_normal(face);
            let mut center = Vector3::zeros();
            center[a1] = rng.random_range(-0.5 * l..0.5 * l);
            center[a2] = rng.random_range(-0.5 * l..0.5 * l);
            let (offset, scale) = match mode {
                BlobMode::Occluded => (0.35, 0.035),
                BlobMode::Faint => (-0.45, 0.06),
            };
            center[axis] = sign * (l + offset);
            let hue = rng.random_range(0.0..1.0);
            let mut indices = Vec::with_capacity(count);
            for _ in 0..count {
                let p = center + Vector3::from_fn(|_, _| spread.sample(rng));
                let opacity = match mode {
                    BlobMode::Occluded => rng.random_range(0.6..0.9),
                    BlobMode::Faint => rng.random_range(0.01..0.05),
                };
                let rgb = hsv_to_rgb(hue + rng.random_range(-0.08..0.08), 0.9, rng.random_range(0.7..1.0));
                let mut prim = GaussianPrimitive::isotropic([p.x, p.y, p.z], scale, opacity, rgb);
                prim.sh_coeffs.extend([[0.0f32; 3]; 3]);
                indices.push(prims.len());
                prims.push(prim);
            }
            // Outside blobs are watched from further out, inside blobs from the room.
            let eye = match mode {
                BlobMode::Occluded => center + normal * 0.55,
                BlobMode::Faint => center - normal * 0.55,
            };
            let up = if axis == 2 { Vector3::y() } else { Vector3::z() };
            hidden.push(CameraView::look_at(
                eye,
                center,
                up,
                config.resolution,
                config.resolution,
                config.hidden_focal_scale * config.resolution as f64,
            )?);
            blobs.push(WatermarkBlob {
                mode,
                center: [center.x, center.y, center.z],
                face,
                indices,
            });
        }
    } else {
        // Placeholder hidden views of two walls so the set is never empty.
        for face in [0usize, 3] {
            let n = face_normal(face);
            hidden.push(CameraView::look_at(
                n * 0.5 * l,
                n * l,
                if face / 2 == 2 { Vector3::y() } else { Vector3::z() },
                config.resolution,
                config.resolution,
                config.hidden_focal_scale * config.resolution as f64,
            )?);
        }
    }
    let watermark_indices: Vec<usize> = blobs.iter().flat_map(|b| b.indices.iter().copied()).collect();
    let cloud = SplatCloud::new(prims, 1)?;
    Ok(SyntheticScene {
        cloud,
        labels: SceneLabels {
            schema: 1,
            seed,
            scene_indices,
            watermark_indices,
            blobs,
            texture,
        },
        train_views,
        hidden_views: ViewSet::new(hidden)?,
    })
}

/// Outcome of a purification on a labelled scene. PSNR values are in dB and
/// averaged over views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationSummary {
    /// Fraction of watermark primitives pruned; absent for a clean scene.
    pub watermark_recall: Option<f64>,
    /// Fraction of scene primitives kept.
    pub scene_retention: f64,
    /// Train views, purified render against the original render.
    pub scene_psnr_vs_original: f64,
    /// Train views, original render against the ray-cast room.
    pub scene_psnr_baseline: f64,
    /// Train views, purified render against the ray-cast room.
    pub scene_psnr_purified: f64,
    pub scene_psnr_drop: f64,
    pub scene_ssim_baseline: f64,
    pub scene_ssim_purified: f64,
    /// Hidden views: the original render is the reference, so the baseline is the cap.
    pub watermark_psnr_baseline: f64,
    pub watermark_psnr_purified: f64,
    pub watermark_psnr_drop: f64,
    pub score: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn evaluate_purification(
    scene: &SyntheticScene,
    purified: &SplatCloud,
    report: &PurificationReport,
) -> Result<PurificationSummary> {
    evaluate_pruned(scene, purified, &report.pruned_indices, &RenderSettings::default())
}

/// Scores any edited cloud; `pruned_indices` lists the primitives it dropped.
pub fn evaluate_pruned(
    scene: &SyntheticScene,
    purified: &SplatCloud,
    pruned_indices: &[usize],
    settings: &RenderSettings,
) -> Result<PurificationSummary> {
    let k = scene.cloud.len();
    let mut pruned = vec![false; k];
    for &i in pruned_indices {
        if i >= k {
            return Err(Error::InvalidParameter(format!("pruned index {i} out of range for {k} primitives")));
        }
        pruned[i] = true;
    }
    let wm = scene.watermark_indices();
    let watermark_recall =
        (!wm.is_empty()).then(|| wm.iter().filter(|&&i| pruned[i]).count() as f64 / wm.len() as f64);
    let sc = scene.scene_indices();
    let scene_retention = sc.iter().filter(|&&i| !pruned[i]).count() as f64 / sc.len() as f64;

    let per_view = |views: &ViewSet| -> Result<Vec<(ImageRgb, ImageRgb)>> {
        let orig = render_views(&scene.cloud, views, settings);
        let pur = if purified.is_empty() {
            views.iter().map(|v| ImageRgb::new(v.width, v.height)).collect()
        } else {
            render_views(purified, views, settings).into_iter().map(|r| r.image).collect::<Vec<_>>()
        };
        Ok(orig.into_iter().map(|r| r.image).zip(pur).collect())
    };
    let train = per_view(&scene.train_views)?;
    let mut vs_orig = Vec::new();
    let mut base = Vec::new();
    let mut pur = Vec::new();
    let mut ssim_base = Vec::new();
    let mut ssim_pur = Vec::new();
    for ((o, p), view) in train.iter().zip(scene.train_views.iter()) {
        let gt = scene.texture().render(view)?;
        vs_orig.push(metrics::psnr(o, p)?);
        base.push(metrics::psnr(&gt, o)?);
        pur.push(metrics::psnr(&gt, p)?);
        ssim_base.push(metrics::ssim(&gt, o)?);
        ssim_pur.push(metrics::ssim(&gt, p)?);
    }
    let hidden = per_view(&scene.hidden_views)?;
    let wm_psnr: Vec<f64> = hidden
        .iter()
        .map(|(o, p)| metrics::psnr(o, p))
        .collect::<Result<_>>()?;

    let inputs = ScoreInputs {
        baseline_scene: mean(&base),
        baseline_message: PSNR_CAP_DB,
        purified_scene: mean(&pur),
        purified_message: mean(&wm_psnr),
    };
    Ok(PurificationSummary {
        watermark_recall,
        scene_retention,
        scene_psnr_vs_original: mean(&vs_orig),
        scene_psnr_baseline: inputs.baseline_scene,
        scene_psnr_purified: inputs.purified_scene,
        scene_psnr_drop: inputs.baseline_scene - inputs.purified_scene,
        scene_ssim_baseline: mean(&ssim_base),
        scene_ssim_purified: mean(&ssim_pur),
        watermark_psnr_baseline: inputs.baseline_message,
        watermark_psnr_purified: inputs.purified_message,
        watermark_psnr_drop: inputs.baseline_message - inputs.purified_message,
        score: metrics::score(&inputs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_partitioned() {
        let a = make_scene(3, 600, 60).unwrap();
        let b = make_scene(3, 600, 60).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scene_indices().len(), 600);
        assert_eq!(a.watermark_indices().len(), 60);
        assert_eq!(a.cloud.len(), 660);
        assert!(SyntheticScene::from_parts(a.cloud.clone(), a.labels.clone(), a.train_views.clone(), a.hidden_views.clone()).is_ok());
    }

    #[test]
    fn rejects_small_inputs() {
        assert!(make_scene(0, 499, 60).is_err());
        assert!(make_scene(0, 600, 49).is_err());
    }

    #[test]
    fn ray_cast_hits_expected_face() {
        let tex = RoomTexture {
            half_extent: 2.0,
            checker_cell: 1.0,
            face_colors: (0..6).map(|f| [[f as f64 / 10.0; 3], [0.9; 3]]).collect(),
            face_gradients: vec![[[0.0; 3]; 3]; 6],
        };
        // +x wall, point (2, 0.5, 0.5): cell (2, 2) → color index 0.
        let c = tex.shade_ray(&Vector3::zeros(), &Vector3::new(4.0, 1.0, 1.0).normalize());
        assert!((c[0] - 0.0).abs() < 1e-6);
        // -z wall, point (0.5, 1.5, -2): cell (2, 3) → color index 1.
        let c = tex.shade_ray(&Vector3::zeros(), &Vector3::new(0.5, 1.5, -2.0).normalize());
        assert!((c[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn labels_json_round_trip() {
        let s = make_scene(1, 600, 0).unwrap();
        let back = SceneLabels::from_json(&s.labels.to_json()).unwrap();
        assert_eq!(back, s.labels);
        assert!(s.labels.blobs.is_empty());
    }
}
