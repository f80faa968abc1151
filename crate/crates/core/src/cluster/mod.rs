//! Feature construction and density-based hierarchical clustering.

mod features;
pub mod hdbscan;
pub mod kdtree;

use serde::{Deserialize, Serialize};

pub use features::{build_features, FeatureMatrix, STD_FLOOR};
pub use hdbscan::{MstAlgorithm, NOISE};

use crate::error::{Error, Result};
use crate::render::ContributionReport;
use crate::splat::SplatCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Above this many points the MST is built on a k-NN graph.
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default = "default_knn")]
    pub knn: usize,
}

fn default_dense_limit() -> usize {
    20_000
}

fn default_knn() -> usize {
    32
}

impl ClusterParams {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Result<Self> {
        let p = ClusterParams {
            min_cluster_size,
            min_samples,
            dense_limit: default_dense_limit(),
            knn: default_knn(),
        };
        p.validate()?;
        Ok(p)
    }

    /// `min_cluster_size = max(50, ⌈0.001·K⌉)`, `min_samples = 10`.
    pub fn for_cloud_size(k: usize) -> Self {
        ClusterParams {
            min_cluster_size: 50.max((k as f64 * 0.001).ceil() as usize),
            min_samples: 10,
            dense_limit: default_dense_limit(),
            knn: default_knn(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 || self.min_samples < 1 || self.knn < 1 {
            return Err(Error::InvalidParameter(format!(
                "cluster params need min_cluster_size >= 2, min_samples >= 1, knn >= 1 (got {}, {}, {})",
                self.min_cluster_size, self.min_samples, self.knn
            )));
        }
        Ok(())
    }

    pub fn algorithm(&self) -> MstAlgorithm {
        MstAlgorithm::Auto {
            dense_limit: self.dense_limit,
            knn: self.knn,
        }
    }
}

/// Cluster labels (`-1` for noise) with per-cluster sizes and mean weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub cluster_sizes: Vec<usize>,
    /// `Ω̃(C_i)`, the mean `ω` over each cluster's members.
    pub cluster_mean_weight: Vec<f64>,
}

impl ClusterAssignment {
    pub fn from_labels(labels: Vec<i32>) -> Self {
        let m = labels.iter().copied().max().map_or(0, |l| (l + 1).max(0) as usize);
        let mut cluster_sizes = vec![0; m];
        for &l in &labels {
            if l >= 0 {
                cluster_sizes[l as usize] += 1;
            }
        }
        ClusterAssignment {
            labels,
            cluster_sizes,
            cluster_mean_weight: Vec::new(),
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn to_json(&self, params: &ClusterParams) -> String {
        let v = serde_json::json!({
            "schema": 1,
            "labels": self.labels,
            "cluster_sizes": self.cluster_sizes,
            "cluster_mean_weight": self.cluster_mean_weight,
            "params": {
                "min_cluster_size": params.min_cluster_size,
                "min_samples": params.min_samples,
                "selection": "eom",
            },
        });
        serde_json::to_string_pretty(&v).expect("assignment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            labels: Vec<i32>,
            #[serde(default)]
            cluster_mean_weight: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::json("clusters.json", e))?;
        let mut a = ClusterAssignment::from_labels(raw.labels);
        a.cluster_mean_weight = raw.cluster_mean_weight;
        Ok(a)
    }
}

/// Clusters the feature rows; `cluster_mean_weight` is left empty.
pub fn hdbscan(features: &FeatureMatrix, params: &ClusterParams) -> Result<ClusterAssignment> {
    params.validate()?;
    let labels = hdbscan::cluster_points(
        &features.rows,
        params.min_cluster_size,
        params.min_samples,
        params.algorithm(),
    );
    Ok(ClusterAssignment::from_labels(labels))
}

/// Fills in `Ω̃(C_i) = (1/|C_i|) Σ_{k∈C_i} ω_k`; noise is excluded.
pub fn cluster_mean_weights(
    mut assignment: ClusterAssignment,
    report: &ContributionReport,
) -> Result<ClusterAssignment> {
    if assignment.labels.len() != report.len() {
        return Err(Error::LengthMismatch {
            what: "cluster labels",
            got: assignment.labels.len(),
            expected: report.len(),
        });
    }
    let mut sums = vec![0.0; assignment.cluster_count()];
    for (&l, &w) in assignment.labels.iter().zip(&report.omega) {
        if l >= 0 {
            sums[l as usize] += w;
        }
    }
    assignment.cluster_mean_weight = sums
        .iter()
        .zip(&assignment.cluster_sizes)
        .map(|(s, &n)| s / n as f64)
        .collect();
    Ok(assignment)
}

/// Copy of the cloud recolored by cluster rank: rank 0 (lowest `Ω̃`) red through
/// blue for the highest; noise is gray. SH beyond DC is zeroed.
pub fn rank_colored_cloud(cloud: &SplatCloud, assignment: &ClusterAssignment) -> SplatCloud {
    let m = assignment.cluster_count();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        assignment.cluster_mean_weight[a]
            .total_cmp(&assignment.cluster_mean_weight[b])
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; m];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let mut out = cloud.clone();
    for (p, &l) in out.primitives.iter_mut().zip(&assignment.labels) {
        let rgb = if l < 0 {
            [0.5, 0.5, 0.5]
        } else {
            let t = if m > 1 { rank[l as usize] as f64 / (m - 1) as f64 } else { 1.0 };
            [1.0 - t, 0.2, t]
        };
        for row in p.sh_coeffs.iter_mut() {
            *row = [0.0; 3];
        }
        p.sh_coeffs[0] = rgb.map(|c| crate::sh::rgb_to_dc(c) as f32);
    }
    out
}
