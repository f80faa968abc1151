//! Random pruning, feature scaling and noise injection next to adaptive pruning.
//!
//! cargo run --release --example baselines -- [seed]

use splat_purify::pipeline::run_purification;
use splat_purify::purify::{feature_scale, noise_inject, random_prune_indices};
use splat_purify::synth::{evaluate_pruned, make_scene, PurificationSummary};
use splat_purify::{PruneThresholds, RenderSettings};

fn row(name: &str, s: &PurificationSummary) {
    println!(
        "{name:>16} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
        s.scene_psnr_purified, s.watermark_psnr_purified, s.watermark_psnr_drop, s.score
    );
}

fn main() -> splat_purify::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let scene = make_scene(seed, 3000, 300)?;
    let settings = RenderSettings::default();
    println!("{:>16} {:>8} {:>8} {:>8} {:>8}", "method", "scene", "message", "msg drop", "score");

    let removed = random_prune_indices(scene.cloud.len(), 0.25, seed)?;
    let mut keep = vec![true; scene.cloud.len()];
    removed.iter().for_each(|&i| keep[i] = false);
    row("random 25%", &evaluate_pruned(&scene, &scene.cloud.filter(&keep), &removed, &settings)?);

    let scaled = feature_scale(&scene.cloud, 0.5, 0.5)?;
    row("scale 0.5/0.5", &evaluate_pruned(&scene, &scaled, &[], &settings)?);

    let noisy = noise_inject(&scene.cloud, 0.1, seed)?;
    row("noise 0.1", &evaluate_pruned(&scene, &noisy, &[], &settings)?);

    let run = run_purification(&scene.cloud, &scene.train_views, None, &PruneThresholds::default(), &settings)?;
    row("adaptive 4/4", &evaluate_pruned(&scene, &run.purified, &run.report.pruned_indices, &settings)?);
    Ok(())
}
