//! Sweeps the cluster threshold at a fixed noise threshold on a synthetic scene.
//!
//! cargo run --release --example threshold_sweep -- [seed] [tau_n]

use splat_purify::cluster::{build_features, cluster_mean_weights, hdbscan, ClusterParams};
use splat_purify::purify::{purify, PruneThresholds};
use splat_purify::render::accumulate_weights;
use splat_purify::synth::{evaluate_purification, make_scene};
use splat_purify::RenderSettings;

fn main() -> splat_purify::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let tau_n: f64 = args.next().map_or(4.0, |a| a.parse().expect("tau_n"));

    let scene = make_scene(seed, 3000, 300)?;
    let settings = RenderSettings::default();
    let weights = accumulate_weights(&scene.cloud, &scene.train_views, &settings, false)?;
    let features = build_features(&scene.cloud, &weights)?;
    let params = ClusterParams::for_cloud_size(scene.cloud.len());
    let assignment = cluster_mean_weights(hdbscan(&features, &params)?, &weights)?;

    println!("tau_c  pruned  recall  retention  psnr_vs_orig  psnr_vs_gt");
    for step in 0..7 {
        let tau_c = 1.0 + 0.5 * step as f64;
        let t = PruneThresholds::new(tau_c, tau_n)?;
        let (purified, report) = purify(&scene.cloud, &assignment, &weights, &t)?;
        let s = evaluate_purification(&scene, &purified, &report)?;
        println!(
            "{tau_c:5.1}  {:6}  {:6.3}  {:9.4}  {:12.2}  {:10.2}",
            report.pruned_count,
            s.watermark_recall.unwrap_or(0.0),
            s.scene_retention,
            s.scene_psnr_vs_original,
            s.scene_psnr_purified
        );
    }
    Ok(())
}
