//! View-accumulated contribution weights of scene and watermark primitives.
//!
//! cargo run --release --example contribution_weights -- [seed]

use splat_purify::render::accumulate_weights;
use splat_purify::synth::make_scene;
use splat_purify::RenderSettings;

fn main() -> splat_purify::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let scene = make_scene(seed, 3000, 300)?;
    let settings = RenderSettings::default();

    let train = accumulate_weights(&scene.cloud, &scene.train_views, &settings, true)?;
    let hidden = accumulate_weights(&scene.cloud, &scene.hidden_views, &settings, false)?;
    let mean = |w: &[f64], ix: &[usize]| ix.iter().map(|&i| w[i]).sum::<f64>() / ix.len() as f64;

    println!("global mean weight (train views): {:.3e}", train.global_mean);
    println!("{:>10} {:>14} {:>14}", "", "train views", "hidden views");
    for (label, ix) in [("scene", scene.scene_indices()), ("watermark", scene.watermark_indices())] {
        println!("{label:>10} {:14.3e} {:14.3e}", mean(&train.omega, ix), mean(&hidden.omega, ix));
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&a, &b| train.omega[a].total_cmp(&train.omega[b]));
    let wm: std::collections::HashSet<usize> = scene.watermark_indices().iter().copied().collect();
    let lowest = order.iter().take(scene.watermark_indices().len());
    let hits = lowest.filter(|i| wm.contains(i)).count();
    println!("watermark members among the {} lowest weights: {hits}", wm.len());

    if let Some(per_view) = &train.per_view {
        let busiest = per_view
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.iter().sum::<f64>().total_cmp(&b.1.iter().sum::<f64>()))
            .map(|(v, _)| v)
            .unwrap_or(0);
        println!("view with the largest total weight: {busiest}");
    }
    Ok(())
}
