//! Hierarchical density-based clustering.
//!
//! Stages: core distances, minimum spanning tree of the mutual-reachability
//! graph, single-linkage dendrogram, condensed tree, excess-of-mass selection.

use rayon::prelude::*;

use super::kdtree::{dist2, KdTree};

/// Distances below this are treated as equal to it when converting to `λ = 1/d`.
const MIN_DISTANCE: f64 = 1e-12;

/// Label given to points outside every selected cluster.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MstAlgorithm {
    /// Dense Prim for small inputs, k-NN Borůvka above `dense_limit`.
    Auto { dense_limit: usize, knn: usize },
    DensePrim,
    KnnBoruvka { knn: usize },
}

impl Default for MstAlgorithm {
    fn default() -> Self {
        MstAlgorithm::Auto {
            dense_limit: 20_000,
            knn: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

fn edge_order(x: &MstEdge, y: &MstEdge) -> std::cmp::Ordering {
    x.weight
        .total_cmp(&y.weight)
        .then(x.a.min(x.b).cmp(&y.a.min(y.b)))
        .then(x.a.max(x.b).cmp(&y.a.max(y.b)))
}

/// Distance from each point to its `min_samples`-th nearest neighbour, the point
/// itself counting as the first.
pub fn core_distances<const D: usize>(points: &[[f64; D]], min_samples: usize, dense_limit: usize) -> Vec<f64> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = min_samples.clamp(1, n);
    if n <= dense_limit {
        points
            .par_iter()
            .map(|p| {
                let mut d: Vec<f64> = points.iter().map(|q| dist2(p, q)).collect();
                let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
                kth.sqrt()
            })
            .collect()
    } else {
        let tree = KdTree::build(points);
        points
            .par_iter()
            .map(|p| tree.nearest(p, k).last().map_or(0.0, |x| x.1))
            .collect()
    }
}

#[inline]
fn mreach<const D: usize>(points: &[[f64; D]], core: &[f64], a: usize, b: usize) -> f64 {
    dist2(&points[a], &points[b]).sqrt().max(core[a]).max(core[b])
}

/// Minimum spanning tree of the mutual-reachability graph.
pub fn mutual_reachability_mst<const D: usize>(
    points: &[[f64; D]],
    core: &[f64],
    algorithm: MstAlgorithm,
) -> Vec<MstEdge> {
    let n = points.len();
    match algorithm {
        MstAlgorithm::Auto { dense_limit, knn } => {
            if n <= dense_limit {
                prim_dense(points, core)
            } else {
                boruvka_knn(points, core, knn)
            }
        }
        MstAlgorithm::DensePrim => prim_dense(points, core),
        MstAlgorithm::KnnBoruvka { knn } => boruvka_knn(points, core, knn),
    }
}

/// O(n²) Prim without materializing the distance matrix.
fn prim_dense<const D: usize>(points: &[[f64; D]], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n < 2 {
        return edges;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut current = 0;
    in_tree[0] = true;
    const CHUNK: usize = 2048;
    for _ in 1..n {
        let c = current;
        // relax and find the argmin in one pass; chunks reduce in index order
        let (w, next) = best
            .par_chunks_mut(CHUNK)
            .zip(from.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(ci, (bchunk, fchunk))| {
                let mut local = (f64::INFINITY, usize::MAX);
                for (j, (b, f)) in bchunk.iter_mut().zip(fchunk.iter_mut()).enumerate() {
                    let idx = ci * CHUNK + j;
                    if in_tree[idx] {
                        continue;
                    }
                    let d = mreach(points, core, c, idx);
                    if d < *b {
                        *b = d;
                        *f = c;
                    }
                    if *b < local.0 || (*b == local.0 && idx < local.1) {
                        local = (*b, idx);
                    }
                }
                local
            })
            .reduce(
                || (f64::INFINITY, usize::MAX),
                |x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
            );
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next],
            b: next,
            weight: w,
        });
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        ra
    }
}

/// Borůvka over the symmetric k-NN graph, completed by dense Borůvka between
/// components when the graph is disconnected.
fn boruvka_knn<const D: usize>(points: &[[f64; D]], core: &[f64], knn: usize) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let tree = KdTree::build(points);
    let k = (knn + 1).min(n);
    let neighbours: Vec<Vec<usize>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            tree.nearest(p, k)
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != i)
                .collect()
        })
        .collect();
    let mut graph: Vec<MstEdge> = Vec::with_capacity(n * knn);
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            let (a, b) = (i.min(j), i.max(j));
            graph.push(MstEdge {
                a,
                b,
                weight: mreach(points, core, a, b),
            });
        }
    }
    graph.sort_by(edge_order);
    graph.dedup_by(|x, y| x.a == y.a && x.b == y.b);

    let mut uf = UnionFind::new(n);
    let mut mst = Vec::with_capacity(n - 1);
    loop {
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let mut cheapest: Vec<Option<usize>> = vec![None; n];
        for (ei, e) in graph.iter().enumerate() {
            let (ra, rb) = (roots[e.a], roots[e.b]);
            if ra == rb {
                continue;
            }
            for r in [ra, rb] {
                // graph is sorted, so the first hit per component is its cheapest edge
                if cheapest[r].is_none() {
                    cheapest[r] = Some(ei);
                }
            }
        }
        let mut picked: Vec<usize> = cheapest.into_iter().flatten().collect();
        if picked.is_empty() {
            break;
        }
        picked.sort_unstable();
        picked.dedup();
        for ei in picked {
            let e = graph[ei];
            if uf.find(e.a) != uf.find(e.b) {
                uf.union(e.a, e.b);
                mst.push(e);
            }
        }
    }
    if mst.len() + 1 < n {
        connect_components_dense(points, core, &mut uf, &mut mst);
    }
    mst
}

fn connect_components_dense<const D: usize>(
    points: &[[f64; D]],
    core: &[f64],
    uf: &mut UnionFind,
    mst: &mut Vec<MstEdge>,
) {
    let n = points.len();
    while mst.len() + 1 < n {
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        // cheapest edge leaving each point's component, per point
        let best: Vec<Option<MstEdge>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out: Option<MstEdge> = None;
                for j in 0..n {
                    if roots[j] == roots[i] {
                        continue;
                    }
                    let e = MstEdge {
                        a: i.min(j),
                        b: i.max(j),
                        weight: mreach(points, core, i, j),
                    };
                    if out.is_none_or(|o| edge_order(&e, &o).is_lt()) {
                        out = Some(e);
                    }
                }
                out
            })
            .collect();
        let mut per_root: Vec<Option<MstEdge>> = vec![None; n];
        for (i, e) in best.into_iter().enumerate() {
            if let Some(e) = e {
                let r = roots[i];
                if per_root[r].is_none_or(|o| edge_order(&e, &o).is_lt()) {
                    per_root[r] = Some(e);
                }
            }
        }
        let mut picked: Vec<MstEdge> = per_root.into_iter().flatten().collect();
        picked.sort_by(edge_order);
        for e in picked {
            if uf.find(e.a) != uf.find(e.b) {
                uf.union(e.a, e.b);
                mst.push(e);
            }
        }
    }
}

/// One merge of the single-linkage dendrogram; nodes `>= n` are earlier merges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

pub fn single_linkage(mst: &[MstEdge], n: usize) -> Vec<Merge> {
    let mut edges = mst.to_vec();
    edges.sort_by(edge_order);
    let mut uf = UnionFind::new(n);
    // dendrogram node currently representing each union-find root
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let (na, nb) = (node_of[ra], node_of[rb]);
        let size = uf.size[ra] + uf.size[rb];
        let r = uf.union(ra, rb);
        node_of[r] = n + merges.len();
        merges.push(Merge {
            left: na.min(nb),
            right: na.max(nb),
            distance: e.weight,
            size,
        });
    }
    merges
}

/// Row of the condensed tree: `child` is a point (`< n`) or a cluster id (`>= n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(MIN_DISTANCE)
}

/// Condenses a full dendrogram (`n - 1` merges) given the minimum cluster size.
/// The root cluster gets id `n`.
pub fn condense_tree(merges: &[Merge], n: usize, min_cluster_size: usize) -> Vec<CondensedEdge> {
    assert_eq!(merges.len() + 1, n, "dendrogram must span all points");
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let root = 2 * n - 2;
    let mut relabel = vec![0usize; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut ignore = vec![false; 2 * n - 1];

    // every point beneath `node`
    let leaves = |node: usize| {
        let mut stack = vec![node];
        let mut pts = Vec::new();
        while let Some(x) = stack.pop() {
            if x < n {
                pts.push(x);
            } else {
                let m = merges[x - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        pts
    };

    // Internal nodes top-down: a node's id exceeds its children's, so descending order works.
    for node in (n..=root).rev() {
        if ignore[node] {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let parent = relabel[node];
        let (l, r) = (m.left, m.right);
        let (ls, rs) = (size_of(l), size_of(r));
        let big_l = ls >= min_cluster_size;
        let big_r = rs >= min_cluster_size;
        let fall_out = |child: usize, out: &mut Vec<CondensedEdge>, ignore: &mut Vec<bool>| {
            for p in leaves(child) {
                out.push(CondensedEdge {
                    parent,
                    child: p,
                    lambda,
                    child_size: 1,
                });
            }
            if child >= n {
                let mut stack = vec![child];
                while let Some(x) = stack.pop() {
                    if x >= n {
                        ignore[x] = true;
                        stack.push(merges[x - n].left);
                        stack.push(merges[x - n].right);
                    }
                }
            }
        };
        match (big_l, big_r) {
            (true, true) => {
                for (child, size) in [(l, ls), (r, rs)] {
                    relabel[child] = next_label;
                    out.push(CondensedEdge {
                        parent,
                        child: next_label,
                        lambda,
                        child_size: size,
                    });
                    next_label += 1;
                }
            }
            (false, false) => {
                fall_out(l, &mut out, &mut ignore);
                fall_out(r, &mut out, &mut ignore);
            }
            (true, false) => {
                relabel[l] = parent;
                fall_out(r, &mut out, &mut ignore);
            }
            (false, true) => {
                relabel[r] = parent;
                fall_out(l, &mut out, &mut ignore);
            }
        }
    }
    out
}

/// Excess-of-mass selection; returns per-point labels (`NOISE` or `0..m`).
///
/// The root is only selectable when it is the sole cluster in the tree; then,
/// as in the reference HDBSCAN labelling, only the points that persist to the
/// root's largest λ are assigned to it.
pub fn extract_clusters(tree: &[CondensedEdge], n: usize) -> Vec<i32> {
    let mut labels = vec![NOISE; n];
    if n == 0 {
        return labels;
    }
    if tree.is_empty() {
        // a single point: nothing was condensed
        return labels;
    }
    let root = n;
    let max_cluster = tree.iter().map(|e| e.parent.max(e.child)).max().unwrap().max(root);
    let count = max_cluster - root + 1;
    let idx = |c: usize| c - root;

    let mut birth = vec![0.0f64; count];
    let mut parent_of = vec![usize::MAX; count];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[idx(e.child)] = e.lambda;
        parent_of[idx(e.child)] = e.parent;
        children[idx(e.parent)].push(e.child);
    }
    let mut stability = vec![0.0f64; count];
    for e in tree {
        stability[idx(e.parent)] += (e.lambda - birth[idx(e.parent)]) * e.child_size as f64;
    }

    let mut selected = vec![false; count];
    if count == 1 {
        selected[0] = true;
    } else {
        // children carry larger ids than their parents
        let mut subtree = stability.clone();
        for c in (root + 1..=max_cluster).rev() {
            selected[idx(c)] = true;
            let child_sum: f64 = children[idx(c)].iter().map(|&ch| subtree[idx(ch)]).sum();
            if !children[idx(c)].is_empty() && child_sum > stability[idx(c)] {
                selected[idx(c)] = false;
                subtree[idx(c)] = child_sum;
            } else {
                subtree[idx(c)] = stability[idx(c)];
                let mut stack = children[idx(c)].clone();
                while let Some(x) = stack.pop() {
                    selected[idx(x)] = false;
                    stack.extend(children[idx(x)].iter().copied());
                }
            }
        }
    }

    let selected_ids: Vec<usize> = (root..=max_cluster).filter(|&c| selected[idx(c)]).collect();
    let mut label_of = vec![NOISE; count];
    for (l, &c) in selected_ids.iter().enumerate() {
        label_of[idx(c)] = l as i32;
    }
    // top-down: each cluster inherits its nearest selected ancestor
    let mut owner = vec![NOISE; count];
    for c in root..=max_cluster {
        owner[idx(c)] = if label_of[idx(c)] != NOISE {
            label_of[idx(c)]
        } else if c == root {
            NOISE
        } else {
            owner[idx(parent_of[idx(c)])]
        };
    }

    if count == 1 {
        let max_lambda = tree
            .iter()
            .filter(|e| e.parent == root)
            .map(|e| e.lambda)
            .fold(f64::NEG_INFINITY, f64::max);
        for e in tree.iter().filter(|e| e.child < n) {
            if e.lambda >= max_lambda {
                labels[e.child] = 0;
            }
        }
        return labels;
    }
    for e in tree.iter().filter(|e| e.child < n) {
        labels[e.child] = owner[idx(e.parent)];
    }
    labels
}

/// Runs the full pipeline on raw points.
pub fn cluster_points<const D: usize>(
    points: &[[f64; D]],
    min_cluster_size: usize,
    min_samples: usize,
    algorithm: MstAlgorithm,
) -> Vec<i32> {
    let n = points.len();
    if n < min_cluster_size.max(2) {
        if n > 0 {
            log::warn!("{n} points is fewer than min_cluster_size {min_cluster_size}; all noise");
        }
        return vec![NOISE; n];
    }
    let dense_limit = match algorithm {
        MstAlgorithm::Auto { dense_limit, .. } => dense_limit,
        MstAlgorithm::DensePrim => usize::MAX,
        MstAlgorithm::KnnBoruvka { .. } => 0,
    };
    let core = core_distances(points, min_samples, dense_limit);
    let mst = mutual_reachability_mst(points, &core, algorithm);
    let merges = single_linkage(&mst, n);
    let tree = condense_tree(&merges, n, min_cluster_size);
    extract_clusters(&tree, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![[0.5, -1.0, 2.0]; 80];
        let labels = cluster_points(&pts, 10, 5, MstAlgorithm::default());
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn too_few_points_are_noise() {
        let pts: Vec<[f64; 2]> = (0..8).map(|i| [i as f64 * 0.01, 0.0]).collect();
        let labels = cluster_points(&pts, 10, 3, MstAlgorithm::default());
        assert!(labels.iter().all(|&l| l == NOISE));
    }

    #[test]
    fn two_lines_split() {
        let mut pts: Vec<[f64; 2]> = (0..30).map(|i| [i as f64 * 0.1, 0.0]).collect();
        pts.extend((0..30).map(|i| [i as f64 * 0.1, 50.0]));
        let labels = cluster_points(&pts, 5, 3, MstAlgorithm::default());
        assert!(labels[..30].iter().all(|&l| l == labels[0]));
        assert!(labels[30..].iter().all(|&l| l == labels[30]));
        assert_ne!(labels[0], labels[30]);
        assert!(labels[0] >= 0 && labels[30] >= 0);
    }

    #[test]
    fn knn_and_dense_mst_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // two far-apart groups so the k-NN graph is disconnected
        let pts: Vec<[f64; 3]> = (0..300)
            .map(|i| {
                let off = if i < 150 { 0.0 } else { 100.0 };
                [rng.random::<f64>() + off, rng.random(), rng.random()]
            })
            .collect();
        let core = core_distances(&pts, 5, usize::MAX);
        let total = |e: &[MstEdge]| e.iter().map(|x| x.weight).sum::<f64>();
        let dense = mutual_reachability_mst(&pts, &core, MstAlgorithm::DensePrim);
        let knn = mutual_reachability_mst(&pts, &core, MstAlgorithm::KnnBoruvka { knn: 8 });
        assert_eq!(dense.len(), 299);
        assert_eq!(knn.len(), 299);
        assert!((total(&dense) - total(&knn)).abs() < 1e-9);
    }

    #[test]
    fn core_distance_counts_self() {
        let pts = [[0.0], [1.0], [3.0]];
        assert_eq!(core_distances(&pts, 1, 10), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(&pts, 2, 10), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(&pts, 2, 0), vec![1.0, 1.0, 2.0]);
    }
}
