#![allow(dead_code)]

use std::io::Write;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use splat_purify::imageio::ImageRgb;
use splat_purify::splat::logit;
use splat_purify::{GaussianPrimitive, SplatCloud};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Writes straight to the process stdout so the line survives output capture.
pub fn report_line(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

pub fn random_quaternion(rng: &mut ChaCha8Rng) -> [f32; 4] {
    let n = Normal::new(0.0, 1.0).unwrap();
    let q: [f64; 4] = std::array::from_fn(|_| n.sample(rng));
    q.map(|v| v as f32)
}

pub fn random_primitive(rng: &mut ChaCha8Rng, degree: u32, extent: f64, scale: (f64, f64), opacity: (f64, f64)) -> GaussianPrimitive {
    let rows = ((degree + 1) * (degree + 1)) as usize;
    GaussianPrimitive {
        position: std::array::from_fn(|_| rng.random_range(-extent..extent) as f32),
        rotation: random_quaternion(rng),
        log_scale: std::array::from_fn(|_| rng.random_range(scale.0.ln()..scale.1.ln()) as f32),
        opacity_logit: logit(rng.random_range(opacity.0..opacity.1)) as f32,
        sh_coeffs: (0..rows)
            .map(|r| {
                let amp = if r == 0 { 1.5 } else { 0.3 };
                std::array::from_fn(|_| rng.random_range(-amp..amp) as f32)
            })
            .collect(),
    }
}

pub fn random_cloud(rng: &mut ChaCha8Rng, k: usize, extent: f64) -> SplatCloud {
    let degree = rng.random_range(0..=3u32);
    let prims = (0..k)
        .map(|_| random_primitive(rng, degree, extent, (0.02, 0.25), (0.05, 0.95)))
        .collect();
    SplatCloud::new(prims, degree).unwrap()
}

/// Σ rebuilt directly from storage fields.
pub fn covariance_of(p: &GaussianPrimitive) -> Matrix3<f64> {
    let q = p.rotation.map(|v| v as f64);
    let r = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix();
    let s = Matrix3::from_diagonal(&Vector3::from_fn(|i, _| (2.0 * p.log_scale[i] as f64).exp()));
    r.matrix() * s * r.matrix().transpose()
}

pub fn gaussian_value(p: &GaussianPrimitive, x: &Vector3<f64>) -> f64 {
    let inv = covariance_of(p).try_inverse().unwrap();
    let mu = Vector3::from_fn(|i, _| p.position[i] as f64);
    let d = x - mu;
    (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp()
}

/// Adjusted Rand index between two labelings (every distinct value is a class).
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> f64 {
    use std::collections::BTreeMap;
    let mut table: BTreeMap<(i32, i32), u64> = BTreeMap::new();
    let mut ra: BTreeMap<i32, u64> = BTreeMap::new();
    let mut rb: BTreeMap<i32, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let expected = sa * sb / c2(a.len() as u64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

pub const BLOB_SEPARATION: f64 = 12.0;

/// Three tight blobs `BLOB_SEPARATION` apart plus 60 uniform background points
/// over the blob bounding box grown by `pad` on every side; labels 0..2 for
/// blobs and 3 for background.
pub fn three_blobs(seed: u64, pad: f64) -> (Vec<[f64; 5]>, Vec<i32>) {
    let mut r = rng(seed);
    let l = BLOB_SEPARATION;
    let centers = [[0.0, 0.0, 0.0], [l, 0.0, 0.0], [0.0, l, 3.0]];
    let n = Normal::new(0.0, 0.05).unwrap();
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..200 {
            pts.push([
                center[0] + n.sample(&mut r),
                center[1] + n.sample(&mut r),
                center[2] + n.sample(&mut r),
                0.0,
                0.0,
            ]);
            truth.push(c as i32);
        }
    }
    for _ in 0..60 {
        pts.push([
            r.random_range(-pad..l + pad),
            r.random_range(-pad..l + pad),
            r.random_range(-pad..3.0 + pad),
            0.0,
            0.0,
        ]);
        truth.push(3);
    }
    (pts, truth)
}

fn euclid<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Core distances by sorting all distances (self included at rank 1).
pub fn brute_core_distances<const D: usize>(pts: &[[f64; D]], min_samples: usize) -> Vec<f64> {
    pts.iter()
        .map(|p| {
            let mut d: Vec<f64> = pts.iter().map(|q| euclid(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d[min_samples.min(d.len()) - 1]
        })
        .collect()
}

/// Total weight of the mutual-reachability MST by textbook O(n²) Prim.
pub fn prim_mst_weight<const D: usize>(pts: &[[f64; D]], min_samples: usize) -> f64 {
    let core = brute_core_distances(pts, min_samples);
    let n = pts.len();
    let mreach = |i: usize, j: usize| euclid(&pts[i], &pts[j]).max(core[i]).max(core[j]);
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] {
                let w = mreach(u, v);
                if w < best[v] {
                    best[v] = w;
                }
            }
        }
    }
    total
}

/// SSIM by explicit window sums at every valid position, one channel at a time.
pub fn brute_ssim(a: &ImageRgb, b: &ImageRgb) -> f64 {
    let (w, h) = (a.width as usize, a.height as usize);
    let win = 11usize;
    let sigma = 1.5f64;
    let mut k = vec![0.0; win * win];
    for y in 0..win {
        for x in 0..win {
            let dx = x as f64 - 5.0;
            let dy = y as f64 - 5.0;
            k[y * win + x] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (1e-4, 9e-4);
    let mut sum = 0.0;
    for c in 0..3 {
        let pa = a.channel(c);
        let pb = b.channel(c);
        let mut acc = 0.0;
        for y0 in 0..=h - win {
            for x0 in 0..=w - win {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in 0..win {
                    for x in 0..win {
                        let g = k[y * win + x];
                        let va = pa[(y0 + y) * w + x0 + x];
                        let vb = pb[(y0 + y) * w + x0 + x];
                        ma += g * va;
                        mb += g * vb;
                        aa += g * va * va;
                        bb += g * vb * vb;
                        ab += g * va * vb;
                    }
                }
                let va = aa - ma * ma;
                let vb = bb - mb * mb;
                let cov = ab - ma * mb;
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        sum += acc / ((w - win + 1) * (h - win + 1)) as f64;
    }
    sum / 3.0
}

/// Applies the cluster/noise pruning rule to serialized artifacts, independently
/// of the library: labels and ω from JSON, cluster means recomputed here.
pub fn prune_from_artifacts(contribution: &str, clusters: &str, tau_c: f64, tau_n: f64) -> Vec<usize> {
    let c: serde_json::Value = serde_json::from_str(contribution).unwrap();
    let l: serde_json::Value = serde_json::from_str(clusters).unwrap();
    let omega: Vec<f64> = c["omega"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let global_mean = c["global_mean"].as_f64().unwrap();
    let labels: Vec<i64> = l["labels"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    let m = labels.iter().copied().max().unwrap_or(-1) + 1;
    let mut sums = vec![0.0; m as usize];
    let mut counts = vec![0usize; m as usize];
    for (&lab, &w) in labels.iter().zip(&omega) {
        if lab >= 0 {
            sums[lab as usize] += w;
            counts[lab as usize] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect();
    let mut pruned = Vec::new();
    for k in 0..omega.len() {
        let cut = if labels[k] < 0 {
            omega[k] < global_mean / tau_n
        } else {
            means[labels[k] as usize] < global_mean / tau_c
        };
        if cut {
            pruned.push(k);
        }
    }
    pruned
}
