//! Standardized position/opacity/weight features and their HDBSCAN clusters.
//!
//! cargo run --release --example cluster_features -- [seed] [min_cluster_size] [min_samples]

use splat_purify::cluster::{build_features, cluster_mean_weights, hdbscan, ClusterParams};
use splat_purify::render::accumulate_weights;
use splat_purify::synth::make_scene;
use splat_purify::RenderSettings;

fn main() -> splat_purify::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let scene = make_scene(seed, 3000, 300)?;
    let defaults = ClusterParams::for_cloud_size(scene.cloud.len());
    let mcs = args.next().map_or(defaults.min_cluster_size, |a| a.parse().expect("min_cluster_size"));
    let ms = args.next().map_or(defaults.min_samples, |a| a.parse().expect("min_samples"));
    let params = ClusterParams::new(mcs, ms)?;

    let weights = accumulate_weights(&scene.cloud, &scene.train_views, &RenderSettings::default(), false)?;
    let features = build_features(&scene.cloud, &weights)?;
    println!("feature means {:?}", features.means.map(|v| (v * 1e4).round() / 1e4));
    println!("feature stds  {:?}", features.stds.map(|v| (v * 1e4).round() / 1e4));

    let assignment = cluster_mean_weights(hdbscan(&features, &params)?, &weights)?;
    let wm: std::collections::HashSet<usize> = scene.watermark_indices().iter().copied().collect();
    println!("min_cluster_size {mcs}, min_samples {ms}: {} clusters, {} noise", assignment.cluster_count(), assignment.noise_count());
    println!("{:>8} {:>6} {:>12} {:>10}", "cluster", "size", "mean weight", "watermark");
    for c in 0..assignment.cluster_count() {
        let members = (0..assignment.labels.len()).filter(|&i| assignment.labels[i] == c as i32);
        let marked = members.filter(|i| wm.contains(i)).count();
        println!(
            "{c:>8} {:>6} {:>12.3e} {marked:>10}",
            assignment.cluster_sizes[c], assignment.cluster_mean_weight[c]
        );
    }
    let noise_marked = (0..assignment.labels.len()).filter(|&i| assignment.labels[i] < 0 && wm.contains(&i)).count();
    println!("{:>8} {:>6} {:>12} {noise_marked:>10}", "noise", assignment.noise_count(), "-");
    Ok(())
}
