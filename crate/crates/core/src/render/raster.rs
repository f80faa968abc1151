//! Tiled front-to-back rasterizer with per-primitive compositing weights.

use rayon::prelude::*;

use super::project::{project, Splat2D};
use super::{RenderOutput, RenderSettings};
use crate::camera::CameraView;
use crate::imageio::ImageRgb;
use crate::splat::SplatCloud;

/// Everything one view produces: the image plus each primitive's summed
/// compositing weight `Σ_pixels α̂·T` (not yet normalized by pixel count).
#[derive(Debug, Clone)]
pub struct ViewRaster {
    pub output: RenderOutput,
    pub weight_sums: Vec<f64>,
}

/// Projects every primitive and returns the visible splats in compositing order:
/// ascending camera depth, ties broken by primitive index.
pub fn project_sorted(cloud: &SplatCloud, view: &CameraView) -> Vec<Splat2D> {
    let mut splats: Vec<Splat2D> = cloud
        .primitives
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| project(p, i, view))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    splats
}

struct Tile {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    /// Positions into the depth-sorted splat list, ascending.
    splats: Vec<u32>,
}

struct TileResult {
    color: Vec<f64>,
    transmittance: Vec<f64>,
    alpha: Vec<f64>,
    weights: Vec<f64>,
}

fn bin_tiles(splats: &[Splat2D], view: &CameraView, tile: u32) -> (Vec<Tile>, u32) {
    let tiles_x = view.width.div_ceil(tile);
    let tiles_y = view.height.div_ceil(tile);
    let mut tiles: Vec<Tile> = (0..tiles_y)
        .flat_map(|ty| (0..tiles_x).map(move |tx| (tx, ty)))
        .map(|(tx, ty)| {
            let x0 = tx * tile;
            let y0 = ty * tile;
            Tile {
                x0,
                y0,
                w: tile.min(view.width - x0),
                h: tile.min(view.height - y0),
                splats: Vec::new(),
            }
        })
        .collect();
    for (pos, s) in splats.iter().enumerate() {
        let [x0, x1, y0, y1] = s.pixel_bounds;
        for ty in y0 / tile..=y1 / tile {
            for tx in x0 / tile..=x1 / tile {
                tiles[(ty * tiles_x + tx) as usize].splats.push(pos as u32);
            }
        }
    }
    (tiles, tiles_x)
}

fn shade_tile(tile: &Tile, splats: &[Splat2D], settings: &RenderSettings) -> TileResult {
    let n = (tile.w * tile.h) as usize;
    let mut out = TileResult {
        color: vec![0.0; n * 3],
        transmittance: vec![1.0; n],
        alpha: vec![0.0; n],
        weights: vec![0.0; tile.splats.len()],
    };
    for ly in 0..tile.h {
        let py = (tile.y0 + ly) as f64 + 0.5;
        for lx in 0..tile.w {
            let px = (tile.x0 + lx) as f64 + 0.5;
            let p = (ly * tile.w + lx) as usize;
            let mut t = 1.0f64;
            let mut rgb = [0.0f64; 3];
            let mut acc = 0.0;
            for (slot, &pos) in tile.splats.iter().enumerate() {
                let s = &splats[pos as usize];
                let a = s.footprint(px, py).min(settings.alpha_max);
                if a <= 0.0 {
                    continue;
                }
                let w = a * t;
                rgb[0] += w * s.color[0];
                rgb[1] += w * s.color[1];
                rgb[2] += w * s.color[2];
                acc += w;
                out.weights[slot] += w;
                t *= 1.0 - a;
                if t < settings.transmittance_cutoff {
                    break;
                }
            }
            for c in 0..3 {
                out.color[p * 3 + c] = rgb[c] + t * settings.background[c];
            }
            out.transmittance[p] = t;
            out.alpha[p] = acc;
        }
    }
    out
}

/// Renders one view and gathers per-primitive compositing weights.
///
/// Tiles are shaded in parallel; their results are merged in tile order so the
/// output does not depend on the thread count.
pub fn rasterize(cloud: &SplatCloud, view: &CameraView, settings: &RenderSettings) -> ViewRaster {
    let splats = project_sorted(cloud, view);
    let (tiles, _) = bin_tiles(&splats, view, settings.tile_size);
    let results: Vec<TileResult> = tiles
        .par_iter()
        .map(|t| shade_tile(t, &splats, settings))
        .collect();

    let (w, h) = (view.width, view.height);
    let mut image = ImageRgb::new(w, h);
    let mut transmittance = vec![1.0; (w * h) as usize];
    let mut alpha = vec![0.0; (w * h) as usize];
    let mut weight_sums = vec![0.0; cloud.len()];
    for (tile, res) in tiles.iter().zip(&results) {
        for ly in 0..tile.h {
            for lx in 0..tile.w {
                let lp = (ly * tile.w + lx) as usize;
                let gp = ((tile.y0 + ly) * w + tile.x0 + lx) as usize;
                image.data[gp * 3..gp * 3 + 3].copy_from_slice(&res.color[lp * 3..lp * 3 + 3]);
                transmittance[gp] = res.transmittance[lp];
                alpha[gp] = res.alpha[lp];
            }
        }
        for (slot, &pos) in tile.splats.iter().enumerate() {
            weight_sums[splats[pos as usize].index] += res.weights[slot];
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
