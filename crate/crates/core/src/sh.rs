//! Real spherical-harmonic color evaluation in the 3DGS basis (degrees 0 to 3).

use nalgebra::Vector3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_SH_DEGREE: u32 = 3;

/// Number of coefficients per color channel for a given degree.
pub const fn coeff_count(degree: u32) -> usize {
    ((degree + 1) * (degree + 1)) as usize
}

/// Inverse of [`coeff_count`]; `None` when `count` is not a supported square.
pub fn degree_for_coeff_count(count: usize) -> Option<u32> {
    (0..=MAX_SH_DEGREE).find(|&d| coeff_count(d) == count)
}

/// Basis values for a unit direction, in the coefficient order used by 3DGS files.
pub fn basis(degree: u32, dir: &Vector3<f64>) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (dir.x, dir.y, dir.z);
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// RGB color seen along `dir` (unit, pointing from the camera toward the primitive).
///
/// The 3DGS +0.5 offset is applied and the result is clamped to `[0, 1]`.
pub fn eval_color(degree: u32, coeffs: &[[f32; 3]], dir: &Vector3<f64>) -> [f64; 3] {
    let b = basis(degree, dir);
    let mut rgb = [0.5; 3];
    for (coeff, w) in coeffs.iter().zip(b.iter()) {
        for c in 0..3 {
            rgb[c] += w * coeff[c] as f64;
        }
    }
    rgb.map(|v| v.clamp(0.0, 1.0))
}

/// DC coefficient that reproduces `rgb` for a degree-0 primitive.
pub fn rgb_to_dc(rgb: f64) -> f64 {
    (rgb - 0.5) / SH_C0
}
