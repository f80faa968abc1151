//! Peak density of a Gaussian along a camera ray and where it occurs.
//!
//! cargo run --release --example ray_energy

use nalgebra::Vector3;
use splat_purify::camera::CameraView;
use splat_purify::render::intersection_energy;
use splat_purify::GaussianPrimitive;

fn main() -> splat_purify::Result<()> {
    let mut prim = GaussianPrimitive::isotropic([0.2, -0.1, 0.0], 0.3, 0.9, [0.7, 0.3, 0.3]);
    prim.log_scale = [0.6f32.ln(), 0.1f32.ln(), 0.2f32.ln()];
    prim.rotation = [0.92, 0.2, 0.3, 0.1];
    let view = CameraView::look_at(Vector3::new(0.0, 0.0, -3.0), Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0), 16, 16, 12.0)?;

    for y in (0..16).step_by(3) {
        let row: Vec<String> = (0..16)
            .step_by(2)
            .map(|x| {
                let (o, d) = view.pixel_center_ray(x, y)?;
                let (e, _) = intersection_energy(&prim, &o, &d)?;
                Ok(format!("{e:5.2}"))
            })
            .collect::<splat_purify::Result<_>>()?;
        println!("{}", row.join(" "));
    }
    let (o, d) = view.pixel_center_ray(8, 8)?;
    let (e, t) = intersection_energy(&prim, &o, &d)?;
    println!("center ray: energy {e:.4} at t = {t:.4}");
    Ok(())
}
