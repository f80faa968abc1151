//! Peak value of a 3D Gaussian along a ray.

use nalgebra::Vector3;

use crate::error::Result;
use crate::splat::GaussianPrimitive;

/// Returns `(E, t*)` where `t*` maximizes the Gaussian along `origin + t·direction`
/// and `E` is the Gaussian's value there.
///
/// With `o' = origin − μ`: `t* = −(dᵀΣ⁻¹o') / (dᵀΣ⁻¹d)` and
/// `E = exp(−½ (o' + t*d)ᵀ Σ⁻¹ (o' + t*d))`.
pub fn intersection_energy(
    prim: &GaussianPrimitive,
    origin: &Vector3<f64>,
    direction: &Vector3<f64>,
) -> Result<(f64, f64)> {
    let inv = prim.inverse_covariance()?;
    let o = origin - prim.mean();
    let inv_d = inv * direction;
    let t_star = -inv_d.dot(&o) / inv_d.dot(direction);
    Ok((energy_at(&inv, &o, direction, t_star), t_star))
}

/// Gaussian value at `o' + t·d` given a precomputed inverse covariance.
pub(crate) fn energy_at(
    inv: &nalgebra::Matrix3<f64>,
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    t: f64,
) -> f64 {
    let x = o + d * t;
    (-0.5 * x.dot(&(inv * x))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ray_through_center() {
        let p = GaussianPrimitive::isotropic([1.0, 2.0, 3.0], 0.5, 0.5, [1.0; 3]);
        let origin = Vector3::new(1.0, 2.0, -1.0);
        let (e, t) = intersection_energy(&p, &origin, &Vector3::z()).unwrap();
        assert_relative_eq!(e, 1.0, epsilon = 1e-15);
        assert_relative_eq!(t, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn perpendicular_miss() {
        let p = GaussianPrimitive::isotropic([0.0; 3], 1.0, 0.5, [1.0; 3]);
        let (e, t) =
            intersection_energy(&p, &Vector3::new(0.0, 0.0, -5.0), &Vector3::y()).unwrap();
        assert_relative_eq!(e, (-12.5f64).exp(), max_relative = 1e-12);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn peak_is_maximal() {
        let mut p = GaussianPrimitive::isotropic([0.2, -0.1, 0.4], 1.0, 0.5, [1.0; 3]);
        p.log_scale = [-0.5, 0.3, -1.0];
        p.rotation = [0.7, 0.2, -0.4, 0.1];
        let origin = Vector3::new(-2.0, 1.0, -3.0);
        let dir = Vector3::new(0.5, -0.2, 1.0).normalize();
        let (e, t) = intersection_energy(&p, &origin, &dir).unwrap();
        let inv = p.inverse_covariance().unwrap();
        let o = origin - p.mean();
        for delta in [1e-3, 1e-2, -1e-3, -1e-2] {
            assert!(energy_at(&inv, &o, &dir, t + delta) <= e);
        }
    }
}
