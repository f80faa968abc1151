//! Adaptive cluster/noise pruning and the simple baselines it is compared with.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};
use crate::render::ContributionReport;
use crate::splat::{logit, SplatCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneThresholds {
    /// Cluster pruning factor `τ_c`.
    pub tau_c: f64,
    /// Noise pruning factor `τ_n`.
    pub tau_n: f64,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        PruneThresholds {
            tau_c: 4.0,
            tau_n: 4.0,
        }
    }
}

impl PruneThresholds {
    pub fn new(tau_c: f64, tau_n: f64) -> Result<Self> {
        let t = PruneThresholds { tau_c, tau_n };
        t.validate()?;
        Ok(t)
    }

    /// Both factors must be positive; `+∞` is allowed and disables that rule.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_c", self.tau_c), ("tau_n", self.tau_n)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecision {
    pub cluster: usize,
    pub size: usize,
    pub mean_weight: f64,
    pub threshold: f64,
    pub pruned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationReport {
    pub pruned_indices: Vec<usize>,
    pub kept_count: usize,
    pub pruned_count: usize,
    pub global_mean: f64,
    pub thresholds: PruneThresholds,
    pub cluster_decisions: Vec<ClusterDecision>,
    pub noise_total: usize,
    pub noise_pruned: usize,
}

/// Keep/prune mask: a cluster member goes when `Ω̃(C) < ω̄/τ_c`, a noise point
/// when `ω_k < ω̄/τ_n`. Both comparisons are strict.
pub fn prune_mask(
    assignment: &ClusterAssignment,
    report: &ContributionReport,
    thresholds: &PruneThresholds,
) -> Vec<bool> {
    let cluster_cut = report.global_mean / thresholds.tau_c;
    let noise_cut = report.global_mean / thresholds.tau_n;
    assignment
        .labels
        .iter()
        .zip(&report.omega)
        .map(|(&l, &w)| {
            if l == NOISE {
                w < noise_cut
            } else {
                assignment.cluster_mean_weight[l as usize] < cluster_cut
            }
        })
        .collect()
}

pub fn purify(
    cloud: &SplatCloud,
    assignment: &ClusterAssignment,
    report: &ContributionReport,
    thresholds: &PruneThresholds,
) -> Result<(SplatCloud, PurificationReport)> {
    thresholds.validate()?;
    let k = cloud.len();
    for (what, got) in [("contribution report", report.len()), ("cluster labels", assignment.labels.len())] {
        if got != k {
            return Err(Error::LengthMismatch {
                what,
                got,
                expected: k,
            });
        }
    }
    if assignment.cluster_mean_weight.len() != assignment.cluster_count() {
        return Err(Error::LengthMismatch {
            what: "cluster mean weights",
            got: assignment.cluster_mean_weight.len(),
            expected: assignment.cluster_count(),
        });
    }

    let pruned = prune_mask(assignment, report, thresholds);
    let pruned_indices: Vec<usize> = (0..k).filter(|&i| pruned[i]).collect();
    if pruned_indices.len() == k {
        return Err(Error::EverythingPruned {
            tau_c: thresholds.tau_c,
            tau_n: thresholds.tau_n,
        });
    }
    let cluster_cut = report.global_mean / thresholds.tau_c;
    let cluster_decisions = assignment
        .cluster_mean_weight
        .iter()
        .zip(&assignment.cluster_sizes)
        .enumerate()
        .map(|(cluster, (&mean_weight, &size))| ClusterDecision {
            cluster,
            size,
            mean_weight,
            threshold: cluster_cut,
            pruned: mean_weight < cluster_cut,
        })
        .collect();
    let noise_total = assignment.noise_count();
    let noise_pruned = (0..k)
        .filter(|&i| pruned[i] && assignment.labels[i] == NOISE)
        .count();
    let keep: Vec<bool> = pruned.iter().map(|p| !p).collect();
    let purified = cloud.filter(&keep);
    let report = PurificationReport {
        kept_count: purified.len(),
        pruned_count: pruned_indices.len(),
        pruned_indices,
        global_mean: report.global_mean,
        thresholds: *thresholds,
        cluster_decisions,
        noise_total,
        noise_pruned,
    };
    Ok((purified, report))
}

/// Removes `⌊ratio·K⌋` primitives chosen uniformly without replacement.
pub fn random_prune(cloud: &SplatCloud, ratio: f64, seed: u64) -> Result<SplatCloud> {
    let mut keep = vec![true; cloud.len()];
    for i in random_prune_indices(cloud.len(), ratio, seed)? {
        keep[i] = false;
    }
    Ok(cloud.filter(&keep))
}

/// The sorted indices [`random_prune`] removes.
pub fn random_prune_indices(k: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("prune ratio must be in [0, 1), got {ratio}")));
    }
    let remove = (ratio * k as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sample(&mut rng, k, remove).into_vec();
    out.sort_unstable();
    Ok(out)
}

/// Multiplies SH coefficients by `color_gain` and activated opacity by
/// `opacity_gain` (clamped to `(1e-6, 1 − 1e-6)` and re-encoded as a logit).
pub fn feature_scale(cloud: &SplatCloud, color_gain: f64, opacity_gain: f64) -> Result<SplatCloud> {
    if !(color_gain > 0.0 && opacity_gain > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gains must be positive, got color {color_gain}, opacity {opacity_gain}"
        )));
    }
    let mut out = cloud.clone();
    for p in &mut out.primitives {
        for row in &mut p.sh_coeffs {
            for v in row.iter_mut() {
                *v = (*v as f64 * color_gain) as f32;
            }
        }
        if opacity_gain != 1.0 {
            let o = (p.opacity() * opacity_gain).clamp(1e-6, 1.0 - 1e-6);
            p.opacity_logit = logit(o) as f32;
        }
    }
    Ok(out)
}

/// Adds i.i.d. `N(0, sigma²)` noise to every SH coefficient.
pub fn noise_inject(cloud: &SplatCloud, sigma: f64, seed: u64) -> Result<SplatCloud> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = cloud.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut out.primitives {
        for row in &mut p.sh_coeffs {
            for v in row.iter_mut() {
                *v = (*v as f64 + normal.sample(&mut rng)) as f32;
            }
        }
    }
    Ok(out)
}
