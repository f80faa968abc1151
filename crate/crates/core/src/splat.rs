//! Gaussian primitives and splat clouds.
//!
//! Fields are kept in the storage parameterization used by 3DGS files
//! (quaternion as stored, log-scales, opacity logit) at `f32` precision so a
//! cloud survives a PLY round trip bit-exactly. All math runs on the activated
//! values in `f64`.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sh;

/// Largest accepted ratio between the biggest and smallest activated scale.
pub const MAX_SCALE_RATIO: f64 = 1e6;
/// Largest accepted covariance condition number.
pub const MAX_CONDITION: f64 = 1e12;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrimitive {
    pub position: [f32; 3],
    /// Quaternion `(w, x, y, z)`, not necessarily normalized.
    pub rotation: [f32; 4],
    pub log_scale: [f32; 3],
    pub opacity_logit: f32,
    /// One row of RGB coefficients per SH basis function.
    pub sh_coeffs: Vec<[f32; 3]>,
}

impl GaussianPrimitive {
    /// An axis-aligned primitive with a flat color and degree-0 SH.
    pub fn isotropic(position: [f64; 3], scale: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        let ls = scale.ln() as f32;
        GaussianPrimitive {
            position: position.map(|v| v as f32),
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [ls; 3],
            opacity_logit: logit(opacity) as f32,
            sh_coeffs: vec![rgb.map(|c| sh::rgb_to_dc(c) as f32)],
        }
    }

    pub fn mean(&self) -> Vector3<f64> {
        Vector3::new(
            self.position[0] as f64,
            self.position[1] as f64,
            self.position[2] as f64,
        )
    }

    pub fn scale(&self) -> Vector3<f64> {
        Vector3::new(
            (self.log_scale[0] as f64).exp(),
            (self.log_scale[1] as f64).exp(),
            (self.log_scale[2] as f64).exp(),
        )
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit as f64)
    }

    /// Normalized rotation. A zero quaternion maps to the identity.
    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation.map(|v| v as f64);
        let q = nalgebra::Quaternion::new(w, x, y, z);
        if q.norm() == 0.0 {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_quaternion(q)
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.unit_rotation().to_rotation_matrix().into_inner()
    }

    pub fn sh_degree(&self) -> Option<u32> {
        sh::degree_for_coeff_count(self.sh_coeffs.len())
    }

    /// `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))`.
    pub fn covariance(&self) -> Covariance3 {
        let r = self.rotation_matrix();
        let s2 = self.scale().map(|s| s * s);
        Covariance3(r * Matrix3::from_diagonal(&s2) * r.transpose())
    }

    /// `Σ⁻¹ = R S⁻² Rᵀ`, rejecting near-singular shapes.
    pub fn inverse_covariance(&self) -> Result<Matrix3<f64>> {
        self.check_conditioning()?;
        let r = self.rotation_matrix();
        let inv_s2 = self.scale().map(|s| 1.0 / (s * s));
        Ok(r * Matrix3::from_diagonal(&inv_s2) * r.transpose())
    }

    /// Reason the primitive is numerically degenerate, if it is.
    pub fn degeneracy(&self) -> Option<String> {
        let s = self.scale();
        if !s.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Some(format!("non-positive or non-finite scale {s:?}"));
        }
        let ratio = s.max() / s.min();
        if ratio > MAX_SCALE_RATIO {
            return Some(format!("scale ratio {ratio:.3e} exceeds {MAX_SCALE_RATIO:e}"));
        }
        let cond = ratio * ratio;
        if cond > MAX_CONDITION {
            return Some(format!("condition number {cond:.3e} exceeds {MAX_CONDITION:e}"));
        }
        None
    }

    fn check_conditioning(&self) -> Result<()> {
        match self.degeneracy() {
            Some(reason) => Err(Error::Degenerate(reason)),
            None => Ok(()),
        }
    }

    /// Unnormalized Gaussian density `exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))`.
    pub fn evaluate(&self, x: &Vector3<f64>) -> Result<f64> {
        let inv = self.inverse_covariance()?;
        let d = x - self.mean();
        Ok((-0.5 * d.dot(&(inv * d))).exp())
    }
}

/// Symmetric positive semi-definite 3×3 covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance3(pub Matrix3<f64>);

impl Covariance3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vector3<f64> {
        self.0.symmetric_eigenvalues()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// A primitive dropped from a cloud because its covariance is unusable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateWarning {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplatCloud {
    pub primitives: Vec<GaussianPrimitive>,
    pub sh_degree: u32,
}

impl SplatCloud {
    /// Builds a cloud, checking that every primitive carries `(deg+1)²` SH rows.
    pub fn new(primitives: Vec<GaussianPrimitive>, sh_degree: u32) -> Result<Self> {
        if sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "sh degree {sh_degree} unsupported (max {})",
                sh::MAX_SH_DEGREE
            )));
        }
        let expected = sh::coeff_count(sh_degree);
        if let Some((i, p)) = primitives
            .iter()
            .enumerate()
            .find(|(_, p)| p.sh_coeffs.len() != expected)
        {
            return Err(Error::InvalidParameter(format!(
                "primitive {i} has {} sh rows, cloud degree {sh_degree} needs {expected}",
                p.sh_coeffs.len()
            )));
        }
        Ok(SplatCloud {
            primitives,
            sh_degree,
        })
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Primitives at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SplatCloud {
        SplatCloud {
            primitives: indices.iter().map(|&i| self.primitives[i].clone()).collect(),
            sh_degree: self.sh_degree,
        }
    }

    /// Primitives whose `keep` flag is set, preserving relative order.
    pub fn filter(&self, keep: &[bool]) -> SplatCloud {
        SplatCloud {
            primitives: self
                .primitives
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(p, _)| p.clone())
                .collect(),
            sh_degree: self.sh_degree,
        }
    }

    pub fn degenerate_primitives(&self) -> Vec<DegenerateWarning> {
        self.primitives
            .iter()
            .enumerate()
            .filter_map(|(index, p)| p.degeneracy().map(|reason| DegenerateWarning { index, reason }))
            .collect()
    }

    /// Splits off degenerate primitives, returning the usable cloud and what was removed.
    pub fn reject_degenerate(self) -> (SplatCloud, Vec<DegenerateWarning>) {
        let warnings = self.degenerate_primitives();
        if warnings.is_empty() {
            return (self, warnings);
        }
        for w in &warnings {
            log::warn!("rejecting primitive {}: {}", w.index, w.reason);
        }
        let mut keep = vec![true; self.len()];
        for w in &warnings {
            keep[w.index] = false;
        }
        (self.filter(&keep), warnings)
    }
}
