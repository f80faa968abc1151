//! Renders a synthetic room from its training orbit and writes PNGs.
//!
//! cargo run --release --example render_scene -- [out_dir] [seed]

use splat_purify::render::render_views;
use splat_purify::synth::make_scene;
use splat_purify::RenderSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "renders".into()));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    std::fs::create_dir_all(&out)?;

    let scene = make_scene(seed, 3000, 300)?;
    let settings = RenderSettings::default();
    for (name, views) in [("train", &scene.train_views), ("hidden", &scene.hidden_views)] {
        for (i, r) in render_views(&scene.cloud, views, &settings).iter().enumerate() {
            let path = out.join(format!("{name}_{i:02}.png"));
            r.image.save_png(&path)?;
            let covered = r.transmittance.iter().filter(|&&t| t < 0.5).count();
            println!("{}: {covered}/{} pixels mostly covered", path.display(), r.transmittance.len());
        }
    }
    Ok(())
}
