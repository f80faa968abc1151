//! Screen-space projection, tiled alpha compositing and per-primitive
//! contribution weights.

mod energy;
mod oracle;
mod project;
mod raster;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use energy::intersection_energy;
pub use oracle::render_oracle;
pub use project::{
    guard_clamped, perspective_jacobian, project, screen_covariance, Splat2D, FRUSTUM_GUARD,
    LOW_PASS_PX2, NEAR_PLANE,
    SIGMA_EXTENT,
};
pub use raster::{project_sorted, rasterize, ViewRaster};

use crate::camera::{CameraView, ViewSet};
use crate::error::{Error, Result};
use crate::imageio::ImageRgb;
use crate::splat::SplatCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub tile_size: u32,
    /// Upper clamp on a single sample's alpha.
    pub alpha_max: f64,
    /// Compositing stops once transmittance drops below this; 0 disables early exit.
    pub transmittance_cutoff: f64,
    pub background: [f64; 3],
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            tile_size: 16,
            alpha_max: 0.99,
            transmittance_cutoff: 1e-4,
            background: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub image: ImageRgb,
    /// Residual transmittance per pixel.
    pub transmittance: Vec<f64>,
    /// Sum of the compositing weights blended at each pixel.
    pub accumulated_alpha: Vec<f64>,
}

pub fn render(cloud: &SplatCloud, view: &CameraView) -> RenderOutput {
    render_with(cloud, view, &RenderSettings::default())
}

pub fn render_with(cloud: &SplatCloud, view: &CameraView, settings: &RenderSettings) -> RenderOutput {
    rasterize(cloud, view, settings).output
}

/// Renders every view of the set, in order.
pub fn render_views(cloud: &SplatCloud, views: &ViewSet, settings: &RenderSettings) -> Vec<RenderOutput> {
    views
        .views()
        .par_iter()
        .map(|v| render_with(cloud, v, settings))
        .collect()
}

/// View-accumulated contribution of every primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    /// `ω_k`: mean over views of the primitive's per-pixel-normalized compositing weight.
    pub omega: Vec<f64>,
    /// `ω̄ = (1/K) Σ ω_k`.
    pub global_mean: f64,
    /// `ω_{k,v}`, one row per view, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_view: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct ContributionJson {
    schema: u32,
    omega: Vec<f64>,
    global_mean: f64,
}

impl ContributionReport {
    pub fn from_omega(omega: Vec<f64>) -> Self {
        let global_mean = mean(&omega);
        ContributionReport {
            omega,
            global_mean,
            per_view: None,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ContributionJson {
            schema: 1,
            omega: self.omega.clone(),
            global_mean: self.global_mean,
        })
        .expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ContributionJson =
            serde_json::from_str(text).map_err(|e| Error::json("contribution.json", e))?;
        Ok(ContributionReport {
            omega: raw.omega,
            global_mean: raw.global_mean,
            per_view: None,
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Computes `ω_k` for every primitive over `views`.
///
/// `ω_{k,v}` is the primitive's summed compositing weight `α̂·T` over all pixels
/// of view `v` divided by the pixel count; views where it is culled add zero,
/// and the average always divides by the full view count.
pub fn accumulate_weights(
    cloud: &SplatCloud,
    views: &ViewSet,
    settings: &RenderSettings,
    keep_per_view: bool,
) -> Result<ContributionReport> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let per_view: Vec<Vec<f64>> = views
        .views()
        .par_iter()
        .map(|v| {
            let pixels = v.pixel_count() as f64;
            let mut w = rasterize(cloud, v, settings).weight_sums;
            w.iter_mut().for_each(|x| *x /= pixels);
            w
        })
        .collect();
    Ok(report_from_per_view(per_view, keep_per_view))
}

/// Averages per-view weights (one row per view) into a report.
pub fn report_from_per_view(per_view: Vec<Vec<f64>>, keep_per_view: bool) -> ContributionReport {
    let n = per_view.len() as f64;
    let k = per_view.first().map_or(0, Vec::len);
    let mut omega = vec![0.0; k];
    for row in &per_view {
        for (o, w) in omega.iter_mut().zip(row) {
            *o += w;
        }
    }
    omega.iter_mut().for_each(|o| *o /= n);
    let mut report = ContributionReport::from_omega(omega);
    if keep_per_view {
        report.per_view = Some(per_view);
    }
    report
}
