//! PSNR and SSIM between two images, plus the purification score.
//!
//! cargo run --release --example image_metrics -- reference.png candidate.png
//! Without arguments a degraded test pattern is compared with the original.

use splat_purify::imageio::ImageRgb;
use splat_purify::metrics::{psnr, score, ssim, ScoreInputs};

fn main() -> splat_purify::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b) = if let [r, c] = args.as_slice() {
        (ImageRgb::load(r)?, ImageRgb::load(c)?)
    } else {
        let pattern = ImageRgb::from_fn(64, 64, |x, y| {
            let u = x as f64 / 63.0;
            let v = y as f64 / 63.0;
            [u, v, if (x / 8 + y / 8) % 2 == 0 { 0.8 } else { 0.2 }]
        });
        let blurred = ImageRgb::from_fn(64, 64, |x, y| {
            let l = pattern.pixel(x.saturating_sub(1), y);
            let r = pattern.pixel((x + 1).min(63), y);
            let c = pattern.pixel(x, y);
            [0, 1, 2].map(|i| 0.25 * l[i] + 0.5 * c[i] + 0.25 * r[i])
        });
        (pattern, blurred)
    };
    println!("PSNR {:.3} dB", psnr(&a, &b)?);
    println!("SSIM {:.4}", ssim(&a, &b)?);

    let row = ScoreInputs {
        baseline_scene: 24.43,
        baseline_message: 28.99,
        purified_scene: 23.20,
        purified_message: 8.27,
    };
    println!("score for {row:?}: {:.2}", score(&row));
    Ok(())
}
