//! Loads a 3DGS PLY (or a synthetic scene), reports its contents and writes it back.
//!
//! cargo run --release --example ply_roundtrip -- [input.ply] [output.ply]

use splat_purify::ply::{encode_ply, load_ply, parse_ply, save_ply};
use splat_purify::synth::make_scene;

fn main() -> splat_purify::Result<()> {
    let mut args = std::env::args().skip(1);
    let cloud = match args.next() {
        Some(path) => load_ply(path)?,
        None => make_scene(0, 1000, 100)?.cloud,
    };
    let degenerate = cloud.degenerate_primitives();
    println!("{} primitives, SH degree {}, {} degenerate", cloud.len(), cloud.sh_degree, degenerate.len());
    let opacities: Vec<f64> = cloud.primitives.iter().map(|p| p.opacity()).collect();
    let mean_opacity = opacities.iter().sum::<f64>() / opacities.len().max(1) as f64;
    println!("mean opacity {mean_opacity:.3}");

    let bytes = encode_ply(&cloud)?;
    let again = parse_ply(&bytes)?;
    println!("{} bytes, round trip exact: {}", bytes.len(), again == cloud);
    if let Some(out) = args.next() {
        save_ply(&cloud, &out)?;
        println!("wrote {out}");
    }
    Ok(())
}
