use std::cmp::Ordering;

use crate::scalar::{squared_distance, Scalar};

#[derive(Debug, Clone)]
struct Node {
    item: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Exact k-d tree over a fixed point set. Ties between equally distant
/// points resolve to the lowest item index, matching a linear scan.
#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdTree {
    pub(crate) fn build<T: Scalar>(points: &[&[T]]) -> Self {
        let mut tree = Self {
            nodes: Vec::with_capacity(points.len()),
            root: None,
        };
        let mut items: Vec<usize> = (0..points.len()).collect();
        tree.root = tree.build_rec(points, &mut items, 0);
        tree
    }

    fn build_rec<T: Scalar>(&mut self, points: &[&[T]], items: &mut [usize], depth: usize) -> Option<usize> {
        if items.is_empty() {
            return None;
        }
        let dim = points[items[0]].len();
        let axis = if dim == 0 { 0 } else { depth % dim };
        if dim > 0 {
            items.sort_by(|&a, &b| {
                points[a][axis]
                    .partial_cmp(&points[b][axis])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
        }
        let mid = items.len() / 2;
        let item = items[mid];
        let id = self.nodes.len();
        self.nodes.push(Node {
            item,
            axis,
            left: None,
            right: None,
        });
        let (lo, rest) = items.split_at_mut(mid);
        let left = self.build_rec(points, lo, depth + 1);
        let right = self.build_rec(points, &mut rest[1..], depth + 1);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        Some(id)
    }

    /// Nearest item (by squared distance, then index), skipping `exclude`.
    pub(crate) fn nearest<T: Scalar>(
        &self,
        points: &[&[T]],
        query: &[T],
        exclude: Option<usize>,
    ) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        if let Some(root) = self.root {
            self.search(root, points, query, exclude, &mut best);
        }
        best
    }

    fn search<T: Scalar>(
        &self,
        node: usize,
        points: &[&[T]],
        query: &[T],
        exclude: Option<usize>,
        best: &mut Option<(usize, T)>,
    ) {
        let n = &self.nodes[node];
        if Some(n.item) != exclude {
            let d = squared_distance(query, points[n.item]);
            let better = match *best {
                None => true,
                Some((bi, bd)) => d < bd || (d == bd && n.item < bi),
            };
            if better {
                *best = Some((n.item, d));
            }
        }
        if points[n.item].is_empty() {
            for child in [n.left, n.right].into_iter().flatten() {
                self.search(child, points, query, exclude, best);
            }
            return;
        }
        let diff = query[n.axis] - points[n.item][n.axis];
        let (near, far) = if diff < T::zero() {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.search(c, points, query, exclude, best);
        }
        if let Some(c) = far {
            // `<=` keeps equal-distance candidates with lower indices reachable
            if best.is_none_or(|(_, bd)| diff * diff <= bd) {
                self.search(c, points, query, exclude, best);
            }
        }
    }
}
