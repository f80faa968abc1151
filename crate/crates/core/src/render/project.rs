//! EWA projection of 3D Gaussians to screen-space splats.

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};

use crate::camera::CameraView;
use crate::sh;
use crate::splat::GaussianPrimitive;

/// Screen-space low-pass added to both diagonal entries, px².
pub const LOW_PASS_PX2: f64 = 0.3;
/// Primitives at or in front of this camera depth are culled.
pub const NEAR_PLANE: f64 = 0.01;
/// Footprint support, in standard deviations.
pub const SIGMA_EXTENT: f64 = 3.0;
/// The Jacobian is evaluated with `x/z`, `y/z` clamped to this multiple of the
/// image half-extent, so splats near the camera plane cannot blow up.
pub const FRUSTUM_GUARD: f64 = 1.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub mean: Vector2<f64>,
    /// Screen covariance after dilation.
    pub cov: Matrix2<f64>,
    /// Inverse of `cov`.
    pub conic: Matrix2<f64>,
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Index of the source primitive in its cloud.
    pub index: usize,
    /// Inclusive pixel range `[x0, x1] × [y0, y1]` whose centers can fall inside the footprint.
    pub pixel_bounds: [u32; 4],
}

impl Splat2D {
    /// Undamped footprint `opacity · exp(-½ Δᵀ Σ′⁻¹ Δ)` at a pixel center, zero outside the
    /// 3σ ellipse.
    #[inline]
    pub fn footprint(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.mean.x;
        let dy = py - self.mean.y;
        let power = self.conic[(0, 0)] * dx * dx
            + 2.0 * self.conic[(0, 1)] * dx * dy
            + self.conic[(1, 1)] * dy * dy;
        if power > SIGMA_EXTENT * SIGMA_EXTENT {
            return 0.0;
        }
        self.opacity * (-0.5 * power).exp()
    }
}

/// Jacobian of `(x, y, z) ↦ (fx·x/z + cx, fy·y/z + cy)` at a camera-frame point.
pub fn perspective_jacobian(view: &CameraView, t: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        view.fx * iz,
        0.0,
        -view.fx * t.x * iz2,
        0.0,
        view.fy * iz,
        -view.fy * t.y * iz2,
    )
}

/// Camera-frame point moved laterally onto the guard band when it lies outside it.
pub fn guard_clamped(view: &CameraView, t: &Vector3<f64>) -> Vector3<f64> {
    let lim = |c: f64, extent: f64, f: f64| (-FRUSTUM_GUARD * c / f, FRUSTUM_GUARD * (extent - c) / f);
    let (xl, xh) = lim(view.cx, view.width as f64, view.fx);
    let (yl, yh) = lim(view.cy, view.height as f64, view.fy);
    Vector3::new(
        (t.x / t.z).clamp(xl, xh) * t.z,
        (t.y / t.z).clamp(yl, yh) * t.z,
        t.z,
    )
}

/// `J W Σ Wᵀ Jᵀ` before the low-pass dilation.
pub fn screen_covariance(prim: &GaussianPrimitive, view: &CameraView) -> Matrix2<f64> {
    let t = view.to_camera(&prim.mean());
    let jw = perspective_jacobian(view, &guard_clamped(view, &t)) * view.rotation;
    let cov = prim.covariance();
    jw * cov.matrix() * jw.transpose()
}

/// Projects `prim` into `view`; `None` when it is culled.
pub fn project(prim: &GaussianPrimitive, index: usize, view: &CameraView) -> Option<Splat2D> {
    let mean3 = prim.mean();
    let t = view.to_camera(&mean3);
    if !(t.z > NEAR_PLANE) {
        return None;
    }
    let mean = Vector2::new(view.fx * t.x / t.z + view.cx, view.fy * t.y / t.z + view.cy);

    let jw = perspective_jacobian(view, &guard_clamped(view, &t)) * view.rotation;
    let mut cov = jw * prim.covariance().matrix() * jw.transpose();
    cov[(0, 0)] += LOW_PASS_PX2;
    cov[(1, 1)] += LOW_PASS_PX2;
    // symmetrize against rounding before inverting
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    let det = cov[(0, 0)] * cov[(1, 1)] - off * off;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let conic = Matrix2::new(cov[(1, 1)] / det, -off / det, -off / det, cov[(0, 0)] / det);

    // Axis-aligned box of the 3σ ellipse, then the pixel centers (i + 0.5) inside it.
    let hx = SIGMA_EXTENT * cov[(0, 0)].sqrt();
    let hy = SIGMA_EXTENT * cov[(1, 1)].sqrt();
    let x0 = (mean.x - hx - 0.5).ceil().max(0.0);
    let x1 = (mean.x + hx - 0.5).floor().min(view.width as f64 - 1.0);
    let y0 = (mean.y - hy - 0.5).ceil().max(0.0);
    let y1 = (mean.y + hy - 0.5).floor().min(view.height as f64 - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return None;
    }

    let dir = (mean3 - view.center()).normalize();
    let color = sh::eval_color(
        sh::degree_for_coeff_count(prim.sh_coeffs.len()).unwrap_or(0),
        &prim.sh_coeffs,
        &dir,
    );

    Some(Splat2D {
        mean,
        cov,
        conic,
        depth: t.z,
        color,
        opacity: prim.opacity(),
        index,
        pixel_bounds: [x0 as u32, x1 as u32, y0 as u32, y1 as u32],
    })
}
