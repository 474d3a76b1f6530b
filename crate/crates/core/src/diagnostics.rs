//! Exact-recovery diagnostics for a (data, weights, reference partition)
//! triple.
//!
//! With `w_i^(b) = sum_{j in C_b} w_ij` and
//! `mu_ij^(a) = sum_{b != a} |w_i^(b) - w_j^(b)|`, exact recovery holds for
//! every penalty in `(lambda_min, lambda_max)` where
//!
//! ```text
//! lambda_min = max_a max_{i,j in C_a} ||pihat_i - pihat_j|| / (p_a w_ij - mu_ij^(a))
//! lambda_max = min_{a<b} ||mean_a - mean_b|| / (W_a / p_a + W_b / p_b)
//! ```
//!
//! and `W_a` is the total weight leaving cluster `a`. The first bound needs
//! `p_a w_ij > mu_ij^(a)` for every within-cluster pair.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::partition::PartitionLabels;
use crate::weights::WeightGraph;

/// Serialize non-finite floats as the strings `"inf"`, `"-inf"` or `"nan"`.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super")] f64);

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

fn l2(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let diff = &a - &b;
    diff.dot(&diff).sqrt()
}

fn check_cover(graph: &WeightGraph, partition: &PartitionLabels) -> Result<()> {
    if graph.node_count != partition.len() {
        return Err(SmmError::MismatchedElements {
            left: graph.node_count,
            right: partition.len(),
        });
    }
    Ok(())
}

/// Weight lookups grouped by cluster.
struct ClusterWeights {
    pair: HashMap<(usize, usize), f64>,
    /// `w_i^(b)`, shape `p' x k0`.
    to_cluster: Array2<f64>,
}

impl ClusterWeights {
    fn new(graph: &WeightGraph, partition: &PartitionLabels) -> Self {
        let labels = partition.labels();
        let mut pair = HashMap::with_capacity(graph.edge_count());
        let mut to_cluster = Array2::zeros((graph.node_count, partition.k()));
        for e in &graph.edges {
            pair.insert((e.i, e.j), e.w);
            to_cluster[[e.i, labels[e.j]]] += e.w;
            to_cluster[[e.j, labels[e.i]]] += e.w;
        }
        Self { pair, to_cluster }
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.pair.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    fn mu(&self, i: usize, j: usize, cluster: usize) -> f64 {
        (0..self.to_cluster.ncols())
            .filter(|&b| b != cluster)
            .map(|b| (self.to_cluster[[i, b]] - self.to_cluster[[j, b]]).abs())
            .sum()
    }

    /// `(1/p_a) sum_{l != a} w^(a,l)`.
    fn outgoing_per_member(&self, members: &[usize], cluster: usize) -> f64 {
        let total: f64 = members
            .iter()
            .map(|&i| {
                self.to_cluster
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != cluster)
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum();
        total / members.len() as f64
    }
}

/// One within-cluster pair and its (A2) margin `p_a w_ij - mu_ij^(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCondition {
    pub cluster: usize,
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub mu: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// Every within-cluster pair has positive weight.
    pub a1: bool,
    /// `p_a w_ij > mu_ij^(a)` for every within-cluster pair.
    pub a2: bool,
    pub pairs: Vec<PairCondition>,
}

pub fn check_conditions(graph: &WeightGraph, partition: &PartitionLabels) -> Result<ConditionCheck> {
    check_cover(graph, partition)?;
    let cw = ClusterWeights::new(graph, partition);
    let mut pairs = Vec::new();
    for (cluster, members) in partition.groups().iter().enumerate() {
        let size = members.len() as f64;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let weight = cw.weight(i, j);
                let mu = cw.mu(i, j, cluster);
                pairs.push(PairCondition {
                    cluster,
                    i,
                    j,
                    weight,
                    mu,
                    margin: size * weight - mu,
                });
            }
        }
    }
    Ok(ConditionCheck {
        a1: pairs.iter().all(|p| p.weight > 0.0),
        a2: pairs.iter().all(|p| p.margin > 0.0),
        pairs,
    })
}

/// `(lambda_min, lambda_max)` with the reference `partition` taken as truth.
/// `lambda_max` is `+inf` for a single cluster.
pub fn lambda_bounds(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    partition: &PartitionLabels,
) -> Result<(f64, f64)> {
    Ok((lambda_min(points, graph, partition)?, lambda_max(points, graph, partition)?))
}

pub fn lambda_min(points: ArrayView2<f64>, graph: &WeightGraph, partition: &PartitionLabels) -> Result<f64> {
    let check = check_conditions(graph, partition)?;
    let mut best = 0.0f64;
    for pc in &check.pairs {
        if pc.margin <= 0.0 {
            return Err(SmmError::UndefinedBound {
                cluster: pc.cluster,
                i: pc.i,
                j: pc.j,
            });
        }
        best = best.max(l2(points.row(pc.i), points.row(pc.j)) / pc.margin);
    }
    Ok(best)
}

pub fn lambda_max(points: ArrayView2<f64>, graph: &WeightGraph, partition: &PartitionLabels) -> Result<f64> {
    check_cover(graph, partition)?;
    let groups = partition.groups();
    let means = cluster_means(points, partition);
    let cw = ClusterWeights::new(graph, partition);
    let outgoing: Vec<f64> = groups
        .iter()
        .enumerate()
        .map(|(a, m)| cw.outgoing_per_member(m, a))
        .collect();
    let mut best = f64::INFINITY;
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let denom = outgoing[a] + outgoing[b];
            let ratio = l2(means.row(a), means.row(b)) / denom;
            if denom > 0.0 {
                best = best.min(ratio);
            }
        }
    }
    Ok(best)
}

/// Row means of `points` per cluster, shape `k0 x d`.
pub fn cluster_means(points: ArrayView2<f64>, partition: &PartitionLabels) -> Array2<f64> {
    let mut means = Array2::zeros((partition.k(), points.ncols()));
    for (a, members) in partition.groups().iter().enumerate() {
        for &i in members {
            let mut row = means.row_mut(a);
            row += &points.row(i);
        }
        means.row_mut(a).mapv_inplace(|v| v / members.len() as f64);
    }
    means
}

/// Separation of the group vectors and the weight margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    /// Smallest distance between two group vectors.
    pub delta: f64,
    /// Smallest within-cluster margin `p_a w_ij - mu_ij^(a)`; `+inf` when no
    /// cluster has two members.
    #[serde(with = "float_or_inf")]
    pub delta1: f64,
    /// Largest `W_a / p_a + W_b / p_b` over cluster pairs.
    pub delta2: f64,
}

/// `group_vectors` has one row per cluster of `partition`.
pub fn separation_stats(
    group_vectors: ArrayView2<f64>,
    graph: &WeightGraph,
    partition: &PartitionLabels,
) -> Result<SeparationStats> {
    check_cover(graph, partition)?;
    let k0 = partition.k();
    if k0 < 2 {
        return Err(SmmError::SingleCluster);
    }
    if group_vectors.nrows() != k0 {
        return Err(SmmError::MismatchedElements {
            left: group_vectors.nrows(),
            right: k0,
        });
    }
    let mut delta = f64::INFINITY;
    for a in 0..k0 {
        for b in a + 1..k0 {
            delta = delta.min(l2(group_vectors.row(a), group_vectors.row(b)));
        }
    }
    let check = check_conditions(graph, partition)?;
    let delta1 = check.pairs.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let cw = ClusterWeights::new(graph, partition);
    let groups = partition.groups();
    let outgoing: Vec<f64> = groups
        .iter()
        .enumerate()
        .map(|(a, m)| cw.outgoing_per_member(m, a))
        .collect();
    let mut delta2 = 0.0f64;
    for a in 0..k0 {
        for b in a + 1..k0 {
            delta2 = delta2.max(outgoing[a] + outgoing[b]);
        }
    }
    Ok(SeparationStats { delta, delta1, delta2 })
}

/// Bounds that hold for Gaussian-kernel k-nearest-neighbour weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    /// Largest admissible half-width of the estimation error ball.
    #[serde(with = "float_or_inf")]
    pub eps_max: f64,
    /// Lower bound on `delta1`.
    pub delta1_min: f64,
    /// Upper bound on `delta2`.
    pub delta2_max: f64,
    /// Balanced design with `k = p / k0 - 1`, so `delta2_max = 0` and every
    /// penalty above `lambda_min` recovers the partition.
    pub balanced_optimal_k: bool,
}

/// ```text
/// eps_max    = delta/2 - log(2((k+1)/p_min - 1)) / (2 phi delta)
/// delta2_max = 2 (k + 1 - p_min) exp(-phi (delta - eps_max)^2)
/// delta1_min = p_min exp(-phi eps_max^2) - delta2_max
/// ```
///
/// Requires `k >= p_max - 1`. When `k + 1 = p_min` the logarithm is `-inf`
/// and `eps_max` is `+inf`.
pub fn kernel_bounds(phi: f64, k: usize, sizes: &[usize], delta: f64) -> Result<KernelBounds> {
    if !(phi > 0.0) || !(delta > 0.0) {
        return Err(SmmError::PreconditionViolated(format!(
            "phi and delta must be positive (phi = {phi}, delta = {delta})"
        )));
    }
    let p_min = *sizes.iter().min().ok_or(SmmError::SingleCluster)?;
    let p_max = *sizes.iter().max().ok_or(SmmError::SingleCluster)?;
    if k + 1 < p_max {
        return Err(SmmError::PreconditionViolated(format!(
            "k = {k} is below p_max - 1 = {}",
            p_max - 1
        )));
    }
    let arg = 2.0 * ((k + 1) as f64 / p_min as f64 - 1.0);
    let eps_max = delta / 2.0 - arg.ln() / (2.0 * phi * delta);
    let spill = 2.0 * (k + 1 - p_min) as f64;
    let delta2_max = if spill == 0.0 {
        0.0
    } else {
        spill * (-phi * (delta - eps_max).powi(2)).exp()
    };
    let delta1_min = p_min as f64 * (-phi * eps_max * eps_max).exp() - delta2_max;
    let p: usize = sizes.iter().sum();
    let balanced = p_min == p_max;
    Ok(KernelBounds {
        eps_max,
        delta1_min,
        delta2_max,
        balanced_optimal_k: balanced && k + 1 == p / sizes.len(),
    })
}

/// `(eps / delta1_min, (delta - eps) / delta2_max)`: an upper bound on
/// `lambda_min` and a lower bound on `lambda_max` once the kernel-weight
/// assumptions hold with error `eps`.
pub fn kernel_lambda_bounds(eps: f64, delta: f64, kb: &KernelBounds) -> (f64, f64) {
    let upper_min = eps / kb.delta1_min;
    let lower_max = if kb.delta2_max == 0.0 {
        f64::INFINITY
    } else {
        (delta - eps) / kb.delta2_max
    };
    (upper_min, lower_max)
}

/// Largest `||pihat_j - R_a||` over all nodes, `a` being `j`'s cluster.
pub fn max_deviation(points: ArrayView2<f64>, partition: &PartitionLabels, group_vectors: ArrayView2<f64>) -> f64 {
    partition
        .labels()
        .iter()
        .enumerate()
        .map(|(j, &a)| l2(points.row(j), group_vectors.row(a)))
        .fold(0.0, f64::max)
}

/// Everything above in one serializable document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub k0: usize,
    pub cluster_sizes: Vec<usize>,
    /// `w_i^(b)` per node and cluster.
    pub cross_weights: Vec<Vec<f64>>,
    /// `w^(a,b)` between clusters.
    pub cluster_weights: Vec<Vec<f64>>,
    pub cluster_means: Vec<Vec<f64>>,
    pub pairs: Vec<PairCondition>,
    pub a1_satisfied: bool,
    pub a2_satisfied: bool,
    /// `None` when (A2) fails.
    #[serde(with = "float_or_inf::option")]
    pub lambda_min: Option<f64>,
    #[serde(with = "float_or_inf")]
    pub lambda_max: f64,
    pub separation: Option<SeparationStats>,
    pub kernel: Option<KernelBounds>,
}

impl RecoveryReport {
    /// `lambda_min < lambda_max`, i.e. some penalty recovers the partition.
    pub fn recoverable(&self) -> bool {
        self.lambda_min.is_some_and(|lo| lo < self.lambda_max)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lambda_min.is_some_and(|lo| lo < lambda && lambda < self.lambda_max)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SmmError::Model(e.to_string()))
    }
}

/// Build a report. `group_vectors` (one row per cluster) defaults to the
/// cluster means; `knn` = `(phi, k)` adds the kernel-weight bounds when
/// their preconditions hold.
pub fn recovery_report(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    partition: &PartitionLabels,
    group_vectors: Option<ArrayView2<f64>>,
    knn: Option<(f64, usize)>,
) -> Result<RecoveryReport> {
    check_cover(graph, partition)?;
    let check = check_conditions(graph, partition)?;
    let cw = ClusterWeights::new(graph, partition);
    let k0 = partition.k();
    let labels = partition.labels();
    let mut cluster_weights = vec![vec![0.0; k0]; k0];
    for (i, &a) in labels.iter().enumerate() {
        for b in 0..k0 {
            if b != a {
                cluster_weights[a][b] += cw.to_cluster[[i, b]];
            }
        }
    }
    let means = cluster_means(points, partition);
    let vectors = group_vectors.map(|g| g.to_owned()).unwrap_or_else(|| means.clone());
    let separation = separation_stats(vectors.view(), graph, partition).ok();
    let kernel = match (knn, separation) {
        (Some((phi, k)), Some(sep)) => kernel_bounds(phi, k, &partition.sizes(), sep.delta).ok(),
        _ => None,
    };
    Ok(RecoveryReport {
        k0,
        cluster_sizes: partition.sizes(),
        cross_weights: cw.to_cluster.outer_iter().map(|r| r.to_vec()).collect(),
        cluster_weights,
        cluster_means: means.outer_iter().map(|r| r.to_vec()).collect(),
        a1_satisfied: check.a1,
        a2_satisfied: check.a2,
        pairs: check.pairs,
        lambda_min: lambda_min(points, graph, partition).ok(),
        lambda_max: lambda_max(points, graph, partition)?,
        separation,
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_weights_have_zero_mu() {
        let g = WeightGraph::complete(6);
        let part = PartitionLabels::from_labels(&[0, 0, 1, 1, 1, 2]);
        let c = check_conditions(&g, &part).unwrap();
        assert!(c.a1 && c.a2);
        assert!(c.pairs.iter().all(|p| p.mu == 0.0));
    }

    #[test]
    fn missing_edge_breaks_a1() {
        let g = WeightGraph::from_edges(3, [(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let part = PartitionLabels::from_labels(&[0, 0, 1]);
        assert!(!check_conditions(&g, &part).unwrap().a1);
    }

    #[test]
    fn crafted_a2_violation() {
        // Clusters {0,1} and {2,3}; node 0 has cross weight 1, node 1 none.
        let g = WeightGraph::from_edges(4, [(0, 1, 0.2), (2, 3, 1.0), (0, 2, 1.0)]).unwrap();
        let part = PartitionLabels::from_labels(&[0, 0, 1, 1]);
        let c = check_conditions(&g, &part).unwrap();
        let pair = c.pairs.iter().find(|p| (p.i, p.j) == (0, 1)).unwrap();
        assert_eq!(pair.mu, 1.0);
        assert!((pair.margin - (0.4 - 1.0)).abs() < 1e-15);
        assert!(!c.a2);
        let pts = array![[0.1, 0.9], [0.2, 0.8], [0.9, 0.1], [0.8, 0.2]];
        assert!(matches!(
            lambda_bounds(pts.view(), &g, &part),
            Err(SmmError::UndefinedBound { cluster: 0, i: 0, j: 1 })
        ));
    }

    #[test]
    fn constant_clusters_have_zero_lambda_min() {
        let pts = array![[0.1, 0.9], [0.1, 0.9], [0.7, 0.3], [0.7, 0.3]];
        let g = WeightGraph::complete(4);
        let part = PartitionLabels::from_labels(&[0, 0, 1, 1]);
        let (lo, hi) = lambda_bounds(pts.view(), &g, &part).unwrap();
        assert_eq!(lo, 0.0);
        // ||(0.6,-0.6)|| / (2 + 2)
        assert!((hi - 0.72f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_has_infinite_lambda_max() {
        let pts = array![[0.1, 0.9], [0.2, 0.8]];
        let g = WeightGraph::complete(2);
        let part = PartitionLabels::single_cluster(2);
        let (_, hi) = lambda_bounds(pts.view(), &g, &part).unwrap();
        assert_eq!(hi, f64::INFINITY);
        assert_eq!(
            separation_stats(pts.view(), &g, &part),
            Err(SmmError::SingleCluster)
        );
    }

    #[test]
    fn uniform_balanced_separation() {
        let s = 4;
        let g = WeightGraph::complete(16);
        let part = PartitionLabels::from_labels(&(0..16).map(|i| i / s).collect::<Vec<_>>());
        let r = Array2::from_shape_fn((4, 4), |(a, b)| if a == b { 0.7 } else { 0.1 });
        let st = separation_stats(r.view(), &g, &part).unwrap();
        assert!((st.delta - 0.72f64.sqrt()).abs() < 1e-12);
        assert_eq!(st.delta1, s as f64);
        assert_eq!(st.delta2, 2.0 * (16 - s) as f64);

        let same = Array2::from_elem((4, 4), 0.25);
        assert_eq!(separation_stats(same.view(), &g, &part).unwrap().delta, 0.0);
    }

    #[test]
    fn balanced_optimal_neighbour_count() {
        let kb = kernel_bounds(100.0, 3, &[4, 4, 4, 4], 0.5).unwrap();
        assert!(kb.balanced_optimal_k);
        assert_eq!(kb.delta2_max, 0.0);
        assert_eq!(kb.eps_max, f64::INFINITY);
        let json = serde_json::to_string(&kb).unwrap();
        assert!(json.contains("\"eps_max\":\"inf\""), "{json}");
        let back: KernelBounds = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kb);
    }

    #[test]
    fn unbalanced_kernel_bounds() {
        // Values from direct evaluation of the three formulas.
        let kb = kernel_bounds(100.0, 17, &[18, 18, 15, 13], 0.72f64.sqrt()).unwrap();
        assert!((kb.eps_max - 0.4258100649664784).abs() < 1e-12);
        assert!((kb.delta2_max / 1.7360698745486917e-07 - 1.0).abs() < 1e-9);
        assert!(kb.delta1_min.abs() < 1e-12);
        assert!(!kb.balanced_optimal_k);
        assert!(matches!(
            kernel_bounds(100.0, 10, &[18, 18, 15, 13], 0.8),
            Err(SmmError::PreconditionViolated(_))
        ));
    }
}
