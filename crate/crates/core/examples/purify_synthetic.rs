//! Plants watermarks in a synthetic room, purifies it and scores the result.
//!
//! cargo run --release --example purify_synthetic -- [seed] [n_scene] [n_wm]

use splat_purify::pipeline::run_purification;
use splat_purify::synth::{evaluate_purification, make_scene};
use splat_purify::{PruneThresholds, RenderSettings};

fn main() -> splat_purify::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seed = args.first().copied().unwrap_or(0);
    let n_scene = args.get(1).copied().unwrap_or(3000) as usize;
    let n_wm = args.get(2).copied().unwrap_or(300) as usize;

    let scene = make_scene(seed, n_scene, n_wm)?;
    println!("seed {seed}: {} primitives, {} blobs", scene.cloud.len(), scene.labels.blobs.len());
    for b in &scene.labels.blobs {
        println!("  {:?} blob of {} at {:.2?}", b.mode, b.indices.len(), b.center);
    }

    let run = run_purification(
        &scene.cloud,
        &scene.train_views,
        None,
        &PruneThresholds::default(),
        &RenderSettings::default(),
    )?;
    let omega = &run.contribution.omega;
    let mean_of = |idx: &[usize]| idx.iter().map(|&i| omega[i]).sum::<f64>() / idx.len().max(1) as f64;
    println!(
        "mean weight: scene {:.3e}, watermark {:.3e}, global {:.3e}",
        mean_of(scene.scene_indices()),
        mean_of(scene.watermark_indices()),
        run.contribution.global_mean
    );
    println!(
        "{} clusters, {} noise points",
        run.assignment.cluster_count(),
        run.assignment.noise_count()
    );
    for d in &run.report.cluster_decisions {
        println!(
            "  cluster {:>2}: size {:>5}, mean weight {:.3e} {}",
            d.cluster,
            d.size,
            d.mean_weight,
            if d.pruned { "pruned" } else { "kept" }
        );
    }
    println!("noise pruned {}/{}", run.report.noise_pruned, run.report.noise_total);

    let s = evaluate_purification(&scene, &run.purified, &run.report)?;
    println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
    Ok(())
}
