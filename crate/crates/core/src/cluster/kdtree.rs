//! Static k-d tree for exact k-nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug)]
pub struct KdTree<'a, const D: usize> {
    points: &'a [[f64; D]],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a, const D: usize> KdTree<'a, D> {
    pub fn build(points: &'a [[f64; D]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the widest dimension
        let mut lo = [f64::INFINITY; D];
        let mut hi = [f64::NEG_INFINITY; D];
        for &i in &self.order[start..end] {
            for d in 0..D {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        let dim = (0..D)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[dim] - lo[dim] <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][dim].total_cmp(&pts[b][dim]).then(a.cmp(&b))
        });
        let value = pts[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` (including any point equal to it), nearest first,
    /// as `(index, distance)`. Ties are broken by index.
    pub fn nearest(&self, query: &[f64; D], k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    fn search(&self, node: usize, q: &[f64; D], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}
