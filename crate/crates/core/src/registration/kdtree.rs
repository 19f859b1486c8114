//! 3-d spatial binary partition tree for nearest-neighbor queries.
//!
//! Median split on the widest axis; ties in distance break toward the lowest
//! point index so queries are deterministic regardless of build order.

use nalgebra::Point3;

struct Node {
    // Index into `order` for leaves; split info for interior nodes.
    axis: usize,
    split: f64,
    left: usize,
    right: usize,
    start: usize,
    len: usize,
}

pub struct KdTree {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

const LEAF_SIZE: usize = 16;
const NONE: usize = usize::MAX;

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            root: NONE,
        };
        if !points.is_empty() {
            let n = points.len();
            tree.root = tree.split(0, n);
        }
        tree
    }

    fn split(&mut self, start: usize, len: usize) -> usize {
        if len <= LEAF_SIZE {
            self.nodes.push(Node {
                axis: 0,
                split: 0.0,
                left: NONE,
                right: NONE,
                start,
                len,
            });
            return self.nodes.len() - 1;
        }
        let slice = &mut self.order[start..start + len];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &idx in slice.iter() {
            let p = &self.points[idx];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
            .unwrap();
        let mid = len / 2;
        let points = &self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            (points[a][axis], a)
                .partial_cmp(&(points[b][axis], b))
                .unwrap()
        });
        let split = self.points[slice[mid]][axis];
        let node_idx = self.nodes.len();
        self.nodes.push(Node {
            axis,
            split,
            left: NONE,
            right: NONE,
            start,
            len,
        });
        let left = self.split(start, mid);
        let right = self.split(start + mid, len - mid);
        self.nodes[node_idx].left = left;
        self.nodes[node_idx].right = right;
        node_idx
    }

    /// Nearest point within `max_dist` of `query`, as `(index, distance)`.
    pub fn nearest_within(&self, query: &Point3<f64>, max_dist: f64) -> Option<(usize, f64)> {
        if self.root == NONE {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut bound = max_dist * max_dist;
        self.search(self.root, query, &mut best, &mut bound);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn search(
        &self,
        node_idx: usize,
        query: &Point3<f64>,
        best: &mut Option<(usize, f64)>,
        bound: &mut f64,
    ) {
        let node = &self.nodes[node_idx];
        if node.left == NONE {
            for &idx in &self.order[node.start..node.start + node.len] {
                let d2 = (self.points[idx] - query).norm_squared();
                let better = match *best {
                    None => d2 <= *bound,
                    Some((bi, bd2)) => d2 < bd2 || (d2 == bd2 && idx < bi),
                };
                if better && d2 <= *bound {
                    *best = Some((idx, d2));
                    *bound = d2.min(*bound);
                }
            }
            return;
        }
        let delta = query[node.axis] - node.split;
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, query, best, bound);
        if delta * delta <= *bound {
            self.search(far, query, best, bound);
        }
    }

    /// Indices of the `k` nearest points, closest first.
    pub fn k_nearest(&self, query: &Point3<f64>, k: usize) -> Vec<usize> {
        if self.root == NONE || k == 0 {
            return Vec::new();
        }
        // Max-heap of (distance², index) keeping the k best seen so far.
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_search(self.root, query, k, &mut heap);
        heap.sort_by(|a, b| a.partial_cmp(b).unwrap());
        heap.into_iter().map(|(_, i)| i).collect()
    }

    fn knn_search(&self, node_idx: usize, query: &Point3<f64>, k: usize, heap: &mut Vec<(f64, usize)>) {
        let node = &self.nodes[node_idx];
        let worst = |heap: &Vec<(f64, usize)>| -> f64 {
            if heap.len() < k {
                f64::INFINITY
            } else {
                heap.iter().fold(0.0f64, |m, &(d, _)| m.max(d))
            }
        };
        if node.left == NONE {
            for &idx in &self.order[node.start..node.start + node.len] {
                let d2 = (self.points[idx] - query).norm_squared();
                if heap.len() < k {
                    heap.push((d2, idx));
                } else {
                    let (wi, _) = heap
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap();
                    if d2 < heap[wi].0 || (d2 == heap[wi].0 && idx < heap[wi].1) {
                        heap[wi] = (d2, idx);
                    }
                }
            }
            return;
        }
        let delta = query[node.axis] - node.split;
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.knn_search(near, query, k, heap);
        if delta * delta <= worst(heap) {
            self.knn_search(far, query, k, heap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                )
            })
            .collect()
    }

    fn brute_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm()))
            .min_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap())
            .unwrap()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let points = random_points(500, 42);
        let tree = KdTree::build(&points);
        let queries = random_points(200, 7);
        for q in &queries {
            let (bi, bd) = brute_nearest(&points, q);
            let (ti, td) = tree.nearest_within(q, f64::INFINITY).unwrap();
            assert_eq!(ti, bi);
            assert!((td - bd).abs() < 1e-12);
        }
    }

    #[test]
    fn radius_limit_is_respected() {
        let points = random_points(100, 3);
        let tree = KdTree::build(&points);
        let q = Point3::new(10.0, 10.0, 10.0);
        assert!(tree.nearest_within(&q, 0.5).is_none());
    }

    #[test]
    fn k_nearest_matches_brute_force() {
        let points = random_points(300, 11);
        let tree = KdTree::build(&points);
        let q = Point3::new(0.1, -0.2, 0.3);
        let got = tree.k_nearest(&q, 10);
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want: Vec<usize> = all.iter().take(10).map(|&(_, i)| i).collect();
        assert_eq!(got, want);
    }
}
