//! Brute-force reference rasterizer: every splat at every pixel, global depth
//! order, no tiling and no early termination.

use super::project::project;
use super::raster::ViewRaster;
use super::{RenderOutput, RenderSettings};
use crate::camera::CameraView;
use crate::imageio::ImageRgb;
use crate::splat::SplatCloud;

pub fn render_oracle(cloud: &SplatCloud, view: &CameraView, settings: &RenderSettings) -> ViewRaster {
    let mut splats: Vec<_> = cloud
        .primitives
        .iter()
        .enumerate()
        .filter_map(|(i, p)| project(p, i, view))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));

    let (w, h) = (view.width, view.height);
    let mut image = ImageRgb::new(w, h);
    let mut transmittance = vec![1.0; (w * h) as usize];
    let mut alpha = vec![0.0; (w * h) as usize];
    let mut weight_sums = vec![0.0; cloud.len()];
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut rgb = [0.0; 3];
            let mut acc = 0.0;
            for s in &splats {
                let a = s.footprint(px, py).min(settings.alpha_max);
                if a <= 0.0 {
                    continue;
                }
                let wgt = a * t;
                for c in 0..3 {
                    rgb[c] += wgt * s.color[c];
                }
                acc += wgt;
                weight_sums[s.index] += wgt;
                t *= 1.0 - a;
            }
            let p = (y * w + x) as usize;
            image.set(x, y, [0, 1, 2].map(|c| rgb[c] + t * settings.background[c]));
            transmittance[p] = t;
            alpha[p] = acc;
        }
    }
    ViewRaster {
        output: RenderOutput {
            image,
            transmittance,
            accumulated_alpha: alpha,
        },
        weight_sums,
    }
}
