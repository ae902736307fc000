//! Exact k-nearest-neighbor graphs, connectivity and graph shortest paths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index))
}

/// Directed k-NN lists plus their symmetric closure.
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    pub k: usize,
    nearest: Vec<Vec<Neighbor>>,
    adjacency: Vec<Vec<Neighbor>>,
}

pub fn euclidean(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sorted (distance, index) list of the `k` nearest other points to `query`.
pub(crate) fn k_nearest(points: &[DVector<f64>], query: &DVector<f64>, k: usize, skip: Option<usize>) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(j, p)| Neighbor {
            index: j,
            distance: euclidean(query, p),
        })
        .collect();
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, by_distance_then_index);
        all.truncate(k + 1);
    }
    all.sort_by(by_distance_then_index);
    all.truncate(k);
    all
}

/// Exact k-NN graph under Euclidean distance, ties broken by lower index, followed by
/// symmetric closure.
pub fn knn_graph(points: &[DVector<f64>], k: usize) -> Result<NeighborGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 0 < k < n = {n}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points differ in dimension"));
    }
    let nearest: Vec<Vec<Neighbor>> = (0..n)
        .into_par_iter()
        .map(|i| k_nearest(points, &points[i], k, Some(i)))
        .collect();
    let mut adjacency = nearest.clone();
    for (i, list) in nearest.iter().enumerate() {
        for nb in list {
            let back = &mut adjacency[nb.index];
            if !back.iter().any(|b| b.index == i) {
                back.push(Neighbor {
                    index: i,
                    distance: nb.distance,
                });
            }
        }
    }
    for list in &mut adjacency {
        list.sort_by(by_distance_then_index);
    }
    Ok(NeighborGraph {
        k,
        nearest,
        adjacency,
    })
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    /// The `k` nearest neighbors of node `i` (before closure).
    pub fn nearest(&self, i: usize) -> &[Neighbor] {
        &self.nearest[i]
    }

    /// Neighbors of node `i` after symmetric closure.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.adjacency[i]
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for nb in &self.adjacency[u] {
                    if !seen[nb.index] {
                        seen[nb.index] = true;
                        comp.push(nb.index);
                        queue.push_back(nb.index);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::Disconnected {
                sizes: comps.iter().map(Vec::len).collect(),
            });
        }
        Ok(())
    }

    /// Breadth-first spanning tree from `root`: `parent[i]` for every reached node,
    /// and the visiting order.
    pub fn bfs_tree(&self, root: usize) -> (Vec<Option<usize>>, Vec<usize>) {
        let n = self.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for nb in &self.adjacency[u] {
                if !seen[nb.index] {
                    seen[nb.index] = true;
                    parent[nb.index] = Some(u);
                    order.push(nb.index);
                }
            }
        }
        (parent, order)
    }

    /// Dijkstra shortest-path lengths from `source` over the closed graph.
    pub fn shortest_paths(&self, source: usize) -> Vec<f64> {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem(0.0, source));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for nb in &self.adjacency[u] {
                let cand = d + nb.distance;
                if cand < dist[nb.index] {
                    dist[nb.index] = cand;
                    heap.push(HeapItem(cand, nb.index));
                }
            }
        }
        dist
    }
}

/// Median over points of the distance to their nearest other point.
pub fn median_nearest_distance(points: &[DVector<f64>]) -> f64 {
    let d: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            k_nearest(points, &points[i], 1, Some(i))
                .first()
                .map_or(0.0, |n| n.distance)
        })
        .collect();
    median(&d)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts1(xs: &[f64]) -> Vec<DVector<f64>> {
        xs.iter().map(|&x| DVector::from_vec(vec![x])).collect()
    }

    #[test]
    fn collinear_middle_links_to_nearer() {
        let g = knn_graph(&pts1(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(g.nearest(1)[0].index, 0);
        assert_eq!(g.nearest(2)[0].index, 1);
        // closure adds 2 to node 1's adjacency
        let idx: Vec<usize> = g.neighbors(1).iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![0, 2]);
    }

    #[test]
    fn k_equal_n_minus_one_is_complete() {
        let g = knn_graph(&pts1(&[0.0, 0.3, 1.7, 2.0, 5.0]), 4).unwrap();
        for i in 0..5 {
            assert_eq!(g.neighbors(i).len(), 4);
            assert!(g.neighbors(i).iter().all(|n| n.index != i));
        }
    }

    #[test]
    fn k_must_be_below_n() {
        assert!(knn_graph(&pts1(&[0.0, 1.0]), 2).is_err());
        assert!(knn_graph(&pts1(&[0.0, 1.0]), 0).is_err());
    }

    #[test]
    fn ties_break_by_lower_index() {
        let g = knn_graph(&pts1(&[0.0, -1.0, 1.0]), 1).unwrap();
        assert_eq!(g.nearest(0)[0].index, 1);
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<DVector<f64>> = (0..100)
            .map(|_| DVector::from_fn(4, |_, _| rng.random_range(0.0..1.0)))
            .collect();
        let g = knn_graph(&pts, 6).unwrap();
        for i in 0..pts.len() {
            let mut all: Vec<(f64, usize)> = (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| ((&pts[i] - &pts[j]).norm(), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..6].iter().map(|x| x.1).collect();
            let got: Vec<usize> = g.nearest(i).iter().map(|n| n.index).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn components_and_shortest_paths() {
        let g = knn_graph(&pts1(&[0.0, 1.0, 2.0, 10.0, 11.0]), 1).unwrap();
        let comps = g.components();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4]]);
        assert!(matches!(g.ensure_connected(), Err(Error::Disconnected { .. })));
        let d = g.shortest_paths(0);
        assert_eq!(d[2], 2.0);
        assert!(d[3].is_infinite());
    }
}
