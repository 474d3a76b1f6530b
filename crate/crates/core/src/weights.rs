//! Pairwise fusion weights over observed contexts.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::partition::PartitionLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    L2,
    L1,
    Linf,
}

impl Distance {
    pub fn between(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        let diffs = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs());
        match self {
            Distance::L2 => diffs.map(|v| v * v).sum::<f64>().sqrt(),
            Distance::L1 => diffs.sum(),
            Distance::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::L2 => "l2",
            Distance::L1 => "l1",
            Distance::Linf => "linf",
        })
    }
}

impl FromStr for Distance {
    type Err = SmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Distance::L2),
            "l1" => Ok(Distance::L1),
            "linf" | "inf" | "max" => Ok(Distance::Linf),
            other => Err(SmmError::InvalidConfig(format!("unknown distance {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-phi * dist^2)`
    Gaussian,
    /// `exp(-phi * dist)`
    Exponential,
}

impl Kernel {
    pub fn eval(self, phi: f64, dist: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-phi * dist * dist).exp(),
            Kernel::Exponential => (-phi * dist).exp(),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Exponential => "exponential",
        })
    }
}

impl FromStr for Kernel {
    type Err = SmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(Kernel::Gaussian),
            "exponential" | "exp" => Ok(Kernel::Exponential),
            other => Err(SmmError::InvalidConfig(format!("unknown kernel {other:?}"))),
        }
    }
}

/// How fusion weights are derived from the empirical transition rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Every pair gets weight 1.
    Uniform,
    /// Kernel weight on the union k-nearest-neighbour graph. The same
    /// distance drives both the neighbour search and the kernel.
    KnnKernel {
        distance: Distance,
        kernel: Kernel,
        phi: f64,
        k: usize,
    },
}

impl WeightScheme {
    pub fn knn(distance: Distance, kernel: Kernel, phi: f64, k: usize) -> Self {
        WeightScheme::KnnKernel {
            distance,
            kernel,
            phi,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightScheme::KnnKernel { phi, k, .. } = *self {
            if !(phi > 0.0 && phi.is_finite()) {
                return Err(SmmError::InvalidConfig(format!("phi must be positive, got {phi}")));
            }
            if k == 0 {
                return Err(SmmError::InvalidConfig("k must be at least 1".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Uniform => f.write_str("uniform"),
            WeightScheme::KnnKernel {
                distance,
                kernel,
                phi,
                k,
            } => write!(f, "knn{k}-{distance}-{kernel}-phi{phi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected weighted graph; each edge has `i < j` and `w > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGraph {
    pub node_count: usize,
    pub edges: Vec<Edge>,
}

impl WeightGraph {
    /// Build from `(i, j, w)` triples, normalizing orientation and dropping
    /// non-positive weights. Duplicate pairs are rejected.
    pub fn from_edges(node_count: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut edges = Vec::new();
        for (a, b, w) in triples {
            if a == b || a >= node_count || b >= node_count {
                return Err(SmmError::InvalidConfig(format!("bad edge ({a}, {b})")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(SmmError::InvalidConfig(format!("duplicate edge ({i}, {j})")));
            }
            if w > 0.0 {
                edges.push(Edge { i, j, w });
            }
        }
        Ok(Self { node_count, edges })
    }

    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count)
            .flat_map(|i| (i + 1..node_count).map(move |j| Edge { i, j, w: 1.0 }))
            .collect();
        Self { node_count, edges }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Symmetric dense weight matrix with zero diagonal.
    pub fn dense(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.node_count, self.node_count));
        for e in &self.edges {
            w[[e.i, e.j]] = e.w;
            w[[e.j, e.i]] = e.w;
        }
        w
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    /// Connected components as a canonical partition.
    pub fn components(&self) -> PartitionLabels {
        let mut parent: Vec<usize> = (0..self.node_count).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..self.node_count).map(|x| find(&mut parent, x)).collect();
        PartitionLabels::from_labels(&roots)
    }

    /// Same graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (perm[e.i], perm[e.j]);
                Edge {
                    i: a.min(b),
                    j: a.max(b),
                    w: e.w,
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.i, e.j));
        Self {
            node_count: self.node_count,
            edges,
        }
    }
}

/// Symmetric matrix of row-pairwise distances.
pub fn pairwise_distances(points: ArrayView2<f64>, metric: Distance) -> Array2<f64> {
    let n = points.nrows();
    let mut dist = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = metric.between(points.row(i), points.row(j));
            dist[[i, j]] = v;
            dist[[j, i]] = v;
        }
    }
    dist
}

/// The `k` nearest other nodes of `i`, ordered by `(distance, index)`.
pub fn nearest_neighbors(dist: ArrayView2<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..dist.nrows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]).then(a.cmp(&b)));
    others.truncate(k);
    others
}

/// Union k-nearest-neighbour edges: `(i, j)` is present when either endpoint
/// is among the other's `k` nearest. Sorted by `(i, j)`.
pub fn knn_edges(dist: ArrayView2<f64>, k: usize) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for i in 0..dist.nrows() {
        for j in nearest_neighbors(dist, i, k) {
            set.insert((i.min(j), i.max(j)));
        }
    }
    set.into_iter().collect()
}

/// Weight graph over the rows of `points` (the observed transition vectors).
///
/// A neighbour count larger than `node_count - 1` is clamped, giving the
/// complete graph.
pub fn compute_weights(points: ArrayView2<f64>, scheme: &WeightScheme) -> Result<WeightGraph> {
    scheme.validate()?;
    let n = points.nrows();
    if n < 2 {
        return Err(SmmError::DegenerateInput(format!(
            "need at least 2 observed contexts, got {n}"
        )));
    }
    match *scheme {
        WeightScheme::Uniform => Ok(WeightGraph::complete(n)),
        WeightScheme::KnnKernel {
            distance,
            kernel,
            phi,
            k,
        } => {
            let dist = pairwise_distances(points, distance);
            let pairs = knn_edges(dist.view(), k.min(n - 1));
            WeightGraph::from_edges(
                n,
                pairs
                    .into_iter()
                    .map(|(i, j)| (i, j, kernel.eval(phi, dist[[i, j]]))),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn distance_examples() {
        let p = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((Distance::L2.between(p.row(0), p.row(1)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Distance::L1.between(p.row(0), p.row(1)), 2.0);
        assert_eq!(Distance::Linf.between(p.row(0), p.row(1)), 1.0);
        for m in [Distance::L2, Distance::L1, Distance::Linf] {
            assert_eq!(m.between(p.row(0), p.row(0)), 0.0);
        }
        let q = array![[0.7, 0.1, 0.1, 0.1], [0.1, 0.7, 0.1, 0.1]];
        let d = pairwise_distances(q.view(), Distance::L2);
        assert!((d[[0, 1]] - 0.72f64.sqrt()).abs() < 1e-12);
        assert_eq!(d[[0, 0]], 0.0);
    }

    #[test]
    fn collinear_knn() {
        let p = array![[0.0], [1.0], [3.0]];
        let d = pairwise_distances(p.view(), Distance::L2);
        assert_eq!(knn_edges(d.view(), 1), vec![(0, 1), (1, 2)]);
        assert_eq!(knn_edges(d.view(), 2), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let p = array![[0.0], [0.0], [0.0], [0.0]];
        let d = pairwise_distances(p.view(), Distance::L2);
        assert_eq!(nearest_neighbors(d.view(), 3, 2), vec![0, 1]);
        assert_eq!(knn_edges(d.view(), 1), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(Kernel::Gaussian.eval(100.0, 0.0), 1.0);
        assert_eq!(Kernel::Exponential.eval(3.0, 0.0), 1.0);
        assert!((Kernel::Gaussian.eval(100.0, 0.1) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn uniform_complete_graph() {
        let p = Array2::from_shape_fn((16, 3), |(i, j)| ((i + j) % 3) as f64 / 3.0);
        let g = compute_weights(p.view(), &WeightScheme::Uniform).unwrap();
        assert_eq!(g.edge_count(), 120);
        assert!(g.edges.iter().all(|e| e.w == 1.0));
    }

    #[test]
    fn identical_rows_get_unit_weight() {
        let p = array![[0.3, 0.7], [0.3, 0.7]];
        for kernel in [Kernel::Gaussian, Kernel::Exponential] {
            let g = compute_weights(p.view(), &WeightScheme::knn(Distance::L2, kernel, 42.0, 1)).unwrap();
            assert_eq!(g.edges, vec![Edge { i: 0, j: 1, w: 1.0 }]);
        }
    }

    #[test]
    fn degenerate_input() {
        let p = array![[0.3, 0.7]];
        assert!(matches!(
            compute_weights(p.view(), &WeightScheme::Uniform),
            Err(SmmError::DegenerateInput(_))
        ));
    }

    #[test]
    fn rejects_bad_scheme() {
        let p = array![[0.3, 0.7], [0.5, 0.5]];
        let bad = WeightScheme::knn(Distance::L2, Kernel::Gaussian, 0.0, 1);
        assert!(compute_weights(p.view(), &bad).is_err());
        let bad = WeightScheme::knn(Distance::L2, Kernel::Gaussian, 1.0, 0);
        assert!(compute_weights(p.view(), &bad).is_err());
    }

    #[test]
    fn components_of_disjoint_pairs() {
        let g = WeightGraph::from_edges(5, [(0, 1, 1.0), (3, 2, 0.5)]).unwrap();
        assert_eq!(g.components().labels(), &[0, 0, 1, 1, 2]);
        assert_eq!(g.edges[1], Edge { i: 2, j: 3, w: 0.5 });
        assert!(WeightGraph::from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
    }
}
