use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::ContributionReport;
use crate::splat::SplatCloud;

/// Standard deviations below this are replaced by 1, zeroing the column.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-primitive `[x, y, z, opacity, ω]`, each column z-scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<[f64; 5]>,
    /// Column means before standardization.
    pub means: [f64; 5],
    /// Column population standard deviations after the floor rule.
    pub stds: [f64; 5],
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Z-scores raw rows column by column.
    pub fn standardize(raw: Vec<[f64; 5]>) -> Self {
        let n = raw.len() as f64;
        let mut means = [0.0; 5];
        for r in &raw {
            for c in 0..5 {
                means[c] += r[c];
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = [0.0; 5];
        for r in &raw {
            for c in 0..5 {
                stds[c] += (r[c] - means[c]).powi(2);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if !(*s >= STD_FLOOR) {
                *s = 1.0;
            }
        }
        let rows = raw
            .into_iter()
            .map(|r| std::array::from_fn(|c| (r[c] - means[c]) / stds[c]))
            .collect();
        FeatureMatrix { rows, means, stds }
    }
}

/// Builds standardized position/opacity/weight features for clustering.
pub fn build_features(cloud: &SplatCloud, report: &ContributionReport) -> Result<FeatureMatrix> {
    if report.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "contribution report",
            got: report.len(),
            expected: cloud.len(),
        });
    }
    if cloud.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 primitives to build features, got {}",
            cloud.len()
        )));
    }
    let raw = cloud
        .primitives
        .iter()
        .zip(&report.omega)
        .map(|(p, &w)| {
            let m = p.mean();
            [m.x, m.y, m.z, p.opacity(), w]
        })
        .collect();
    Ok(FeatureMatrix::standardize(raw))
}
