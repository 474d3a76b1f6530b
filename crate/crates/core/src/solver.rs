//! Convex clustering of transition vectors with a sum-of-norms fusion
//! penalty, solved by the alternating minimization algorithm (AMA).
//!
//! The problem is
//!
//! ```text
//! minimize  1/2 sum_j ||pihat_j - b_j||^2 + lambda sum_{l=(i,j)} w_l ||b_i - b_j||_2
//! ```
//!
//! AMA runs projected gradient ascent on the dual. Each dual variable
//! `gamma_l` lives in the ball of radius `lambda * w_l`, and the primal
//! iterate is recovered in closed form as `b_j = pihat_j + Delta_j` with
//! `Delta_j = sum_{l: l1 = j} gamma_l - sum_{l: l2 = j} gamma_l`.
//! Starting from `Gamma = 0` every `gamma_l` stays orthogonal to the ones
//! vector, so every `b_j` keeps summing to one.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::partition::PartitionLabels;
use crate::weights::WeightGraph;

/// Absolute floor added to the relative stopping test so that problems with
/// a zero optimum (e.g. `lambda = 0`) terminate.
const GAP_FLOOR: f64 = 1e-14;

/// Tolerance for the post-solve simplex check.
pub const SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Dual step size. `None` means `1 / p'`.
    pub step: Option<f64>,
    /// Stop when `gap <= dual_gap_tol * |primal|`.
    pub dual_gap_tol: f64,
    pub max_iter: usize,
    /// Relative fusion tolerance used when reading clusters off the solution.
    pub fusion_tol: f64,
    /// Keep the dual objective of every iteration.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: None,
            dual_gap_tol: 1e-6,
            max_iter: 20_000,
            fusion_tol: 1e-4,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn step_for(&self, nodes: usize) -> f64 {
        self.step.unwrap_or(1.0 / nodes.max(1) as f64)
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        let nu = self.step_for(nodes);
        let upper = 2.0 / nodes.max(1) as f64;
        if !(nu > 0.0 && nu < upper) {
            return Err(SmmError::InvalidConfig(format!(
                "step {nu} outside (0, {upper}) for {nodes} nodes"
            )));
        }
        if !(self.dual_gap_tol > 0.0) || !(self.fusion_tol > 0.0) || self.max_iter == 0 {
            return Err(SmmError::InvalidConfig(
                "tolerances must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub lambda: f64,
    /// Primal solution, one row per node.
    pub centroids: Array2<f64>,
    /// Dual variables, one row per edge (same order as the graph).
    pub duals: Array2<f64>,
    pub iterations: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub converged: bool,
    /// Whether a warm start was discarded in favour of a cold restart.
    pub cold_restart: bool,
    /// Dual objective per iteration, when requested.
    pub dual_trace: Option<Vec<f64>>,
}

impl SolverResult {
    /// `gap / |primal|`, or the raw gap when the primal is zero.
    pub fn relative_gap(&self) -> f64 {
        if self.primal_obj.abs() > 0.0 {
            self.gap / self.primal_obj.abs()
        } else {
            self.gap
        }
    }

    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(SmmError::NotConverged {
                iterations: self.iterations,
                gap: self.relative_gap(),
            })
        }
    }

    /// Largest deviation from the simplex over all rows: the worst of
    /// `|sum - 1|` and the most negative entry.
    pub fn simplex_violation(&self) -> f64 {
        simplex_violation(self.centroids.view())
    }
}

pub fn simplex_violation(rows: ArrayView2<f64>) -> f64 {
    rows.axis_iter(Axis(0))
        .map(|r| {
            let sum_err = (r.sum() - 1.0).abs();
            let neg = r.iter().fold(0.0f64, |m, &v| m.max(-v));
            sum_err.max(neg)
        })
        .fold(0.0, f64::max)
}

fn check_dims(points: ArrayView2<f64>, graph: &WeightGraph) -> Result<()> {
    if points.nrows() != graph.node_count {
        return Err(SmmError::InvalidConfig(format!(
            "{} points but graph has {} nodes",
            points.nrows(),
            graph.node_count
        )));
    }
    Ok(())
}

/// Value of the penalized criterion at `centroids`.
pub fn evaluate_objective(
    points: ArrayView2<f64>,
    centroids: ArrayView2<f64>,
    graph: &WeightGraph,
    lambda: f64,
) -> f64 {
    let data: f64 = points
        .iter()
        .zip(centroids.iter())
        .map(|(p, b)| (p - b) * (p - b))
        .sum();
    let penalty: f64 = graph
        .edges
        .iter()
        .map(|e| e.w * l2_diff(centroids.row(e.i), centroids.row(e.j)))
        .sum();
    0.5 * data + lambda * penalty
}

fn l2_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean projection onto the ball of radius `radius` centred at 0.
pub fn project_ball(x: &[f64], radius: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

fn project_ball_in_place(x: &mut [f64], radius: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let scale = if norm > 0.0 { radius / norm } else { 0.0 };
        x.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `Delta_j = sum_{l1 = j} gamma_l - sum_{l2 = j} gamma_l`.
fn dual_offsets(duals: ArrayView2<f64>, graph: &WeightGraph) -> Array2<f64> {
    let mut delta = Array2::zeros((graph.node_count, duals.ncols()));
    for (l, e) in graph.edges.iter().enumerate() {
        let g = duals.row(l);
        delta.row_mut(e.i).scaled_add(1.0, &g);
        delta.row_mut(e.j).scaled_add(-1.0, &g);
    }
    delta
}

/// Primal value at `B`, dual value at `Gamma`, and their difference.
///
/// The dual of the constrained problem is
/// `-1/2 sum_j ||Delta_j||^2 - sum_l <gamma_l, pihat_{l1} - pihat_{l2}>`
/// over `||gamma_l|| <= lambda w_l`.
pub fn dual_gap(
    points: ArrayView2<f64>,
    centroids: ArrayView2<f64>,
    duals: ArrayView2<f64>,
    graph: &WeightGraph,
    lambda: f64,
) -> (f64, f64, f64) {
    let primal = evaluate_objective(points, centroids, graph, lambda);
    let dual = dual_objective(points, duals, graph);
    (primal, dual, primal - dual)
}

pub fn dual_objective(points: ArrayView2<f64>, duals: ArrayView2<f64>, graph: &WeightGraph) -> f64 {
    let delta = dual_offsets(duals, graph);
    let quad: f64 = delta.iter().map(|v| v * v).sum();
    let linear: f64 = graph
        .edges
        .iter()
        .enumerate()
        .map(|(l, e)| {
            duals
                .row(l)
                .iter()
                .zip(points.row(e.i).iter().zip(points.row(e.j).iter()))
                .map(|(g, (a, b))| g * (a - b))
                .sum::<f64>()
        })
        .sum();
    -0.5 * quad - linear
}

/// Solve from `Gamma = 0`.
pub fn ama_solve(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolverResult> {
    ama_solve_warm(points, graph, lambda, config, None)
}

/// Solve starting from the dual variables `init` (projected onto the
/// feasible balls for this `lambda`). If the warm-started solution leaves
/// the simplex, the solve is repeated from `Gamma = 0`.
pub fn ama_solve_warm(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    lambda: f64,
    config: &SolverConfig,
    init: Option<ArrayView2<f64>>,
) -> Result<SolverResult> {
    check_dims(points, graph)?;
    config.validate(points.nrows())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SmmError::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let d = points.ncols();
    let warm = match init {
        Some(g) if g.dim() == (graph.edge_count(), d) => {
            let mut g = g.to_owned();
            for (l, e) in graph.edges.iter().enumerate() {
                let mut row = g.row_mut(l);
                project_ball_in_place(row.as_slice_mut().expect("owned rows are contiguous"), lambda * e.w);
            }
            Some(g)
        }
        _ => None,
    };
    match warm {
        Some(g) => {
            let res = run_ama(points, graph, lambda, config, g);
            if res.simplex_violation() <= SIMPLEX_TOL {
                return Ok(res);
            }
            let mut cold = run_ama(points, graph, lambda, config, Array2::zeros((graph.edge_count(), d)));
            cold.cold_restart = true;
            Ok(cold)
        }
        None => Ok(run_ama(
            points,
            graph,
            lambda,
            config,
            Array2::zeros((graph.edge_count(), d)),
        )),
    }
}

fn run_ama(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    lambda: f64,
    config: &SolverConfig,
    duals: Array2<f64>,
) -> SolverResult {
    let nu = config.step_for(points.nrows());
    let (p, d) = points.dim();
    let m = graph.edge_count();
    let pts = points.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut gamma = duals.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut next = gamma.clone();
    let mut delta = vec![0.0; p * d];
    let mut trace = config.record_trace.then(Vec::new);
    let mut g = vec![0.0; d];
    let mut iterations = 0;
    loop {
        iterations += 1;
        delta.iter_mut().for_each(|v| *v = 0.0);
        for (l, e) in graph.edges.iter().enumerate() {
            let gl = &gamma[l * d..(l + 1) * d];
            for a in 0..d {
                delta[e.i * d + a] += gl[a];
                delta[e.j * d + a] -= gl[a];
            }
        }

        // One pass over the edges: objectives at the current pair
        // (B^(t), Gamma^(t-1)), then the projected dual step.
        let quad: f64 = delta.iter().map(|v| v * v).sum();
        let mut penalty = 0.0;
        let mut linear = 0.0;
        for (l, e) in graph.edges.iter().enumerate() {
            let (oi, oj) = (e.i * d, e.j * d);
            let gl = &gamma[l * d..(l + 1) * d];
            let mut norm2 = 0.0;
            for a in 0..d {
                let dp = pts[oi + a] - pts[oj + a];
                g[a] = dp + delta[oi + a] - delta[oj + a];
                norm2 += g[a] * g[a];
                linear += gl[a] * dp;
            }
            penalty += e.w * norm2.sqrt();
            let slot = &mut next[l * d..(l + 1) * d];
            for a in 0..d {
                slot[a] = gl[a] - nu * g[a];
            }
            project_ball_in_place(slot, lambda * e.w);
        }
        let primal = 0.5 * quad + lambda * penalty;
        let dual = -0.5 * quad - linear;
        let gap = primal - dual;
        if let Some(t) = trace.as_mut() {
            t.push(dual);
        }
        let converged = gap <= config.dual_gap_tol * primal.abs() + GAP_FLOOR;
        if converged || iterations >= config.max_iter {
            let centroids = Array2::from_shape_fn((p, d), |(j, a)| pts[j * d + a] + delta[j * d + a]);
            return SolverResult {
                lambda,
                centroids,
                duals: Array2::from_shape_vec((m, d), gamma).expect("one row per edge"),
                iterations,
                primal_obj: primal,
                dual_obj: dual,
                gap,
                converged,
                cold_restart: false,
                dual_trace: trace,
            };
        }
        std::mem::swap(&mut gamma, &mut next);
    }
}

/// Largest row norm of `points`, used to scale the fusion tolerance.
fn row_norm_max(points: ArrayView2<f64>) -> f64 {
    points
        .axis_iter(Axis(0))
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max)
}

/// Read clusters off a solution.
///
/// Sweeping `j1` in increasing order, every not-yet-assigned `j2 > j1` whose
/// centroid lies within `tau * (1 + max_j ||pihat_j||)` of `b_{j1}` joins
/// `j1`'s cluster. Unmatched nodes stay singletons.
pub fn extract_clusters(centroids: ArrayView2<f64>, points: ArrayView2<f64>, tau: f64) -> PartitionLabels {
    let threshold = tau * (1.0 + row_norm_max(points));
    let n = centroids.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for j1 in 0..n {
        if label[j1] != usize::MAX {
            continue;
        }
        label[j1] = next;
        for j2 in j1 + 1..n {
            if label[j2] == usize::MAX && l2_diff(centroids.row(j1), centroids.row(j2)) <= threshold {
                label[j2] = next;
            }
        }
        next += 1;
    }
    PartitionLabels::from_labels(&label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightGraph;
    use ndarray::array;

    #[test]
    fn objective_examples() {
        let p = array![[1.0, 0.0], [0.0, 1.0]];
        let g = WeightGraph::complete(2);
        assert_eq!(evaluate_objective(p.view(), p.view(), &g, 0.0), 0.0);
        let expected = 3.0 * 2f64.sqrt();
        assert!((evaluate_objective(p.view(), p.view(), &g, 3.0) - expected).abs() < 1e-12);
        let b = array![[0.5, 0.5], [0.5, 0.5]];
        assert!((evaluate_objective(p.view(), b.view(), &g, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ball_projection() {
        assert_eq!(project_ball(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let p = project_ball(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(project_ball(&[0.0, 0.0], 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn lambda_zero_is_exact() {
        let p = array![[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]];
        let g = WeightGraph::complete(3);
        let r = ama_solve(p.view(), &g, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(r.centroids, p);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!((r.primal_obj, r.dual_obj), (0.0, 0.0));
    }

    #[test]
    fn three_point_closed_form() {
        // Points on the line x + y = 1; at lambda = 0.05 nothing fuses and
        // the optimum is b1 = pi1 - 2 lambda e, b2 = pi2, b3 = pi3 + 2 lambda e
        // with e = (1, -1)/sqrt(2), giving 0.1 sqrt(2) - 0.01.
        let p = array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]];
        let g = WeightGraph::complete(3);
        let cfg = SolverConfig {
            dual_gap_tol: 1e-10,
            max_iter: 200_000,
            ..Default::default()
        };
        let r = ama_solve(p.view(), &g, 0.05, &cfg).unwrap();
        assert!(r.converged);
        let optimum = 0.1 * 2f64.sqrt() - 0.01;
        assert!((r.primal_obj - optimum).abs() < 1e-8, "{}", r.primal_obj);
        let s = 0.1 / 2f64.sqrt();
        assert!((r.centroids[[0, 0]] - (1.0 - s)).abs() < 1e-4);
        assert!((r.centroids[[1, 0]] - 0.9).abs() < 1e-4);
        assert!((r.centroids[[2, 1]] - (1.0 - s)).abs() < 1e-4);
        assert_eq!(extract_clusters(r.centroids.view(), p.view(), 1e-4).k(), 3);
    }

    #[test]
    fn large_lambda_fuses_to_mean() {
        let p = array![[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.3, 0.3, 0.4], [0.25, 0.5, 0.25]];
        let g = WeightGraph::complete(4);
        let r = ama_solve(p.view(), &g, 10.0, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let mean = p.mean_axis(Axis(0)).unwrap();
        for row in r.centroids.axis_iter(Axis(0)) {
            assert!(l2_diff(row, mean.view()) < 1e-4);
        }
        assert_eq!(extract_clusters(r.centroids.view(), p.view(), 1e-4).k(), 1);
    }

    #[test]
    fn extraction_examples() {
        let p = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let labels = extract_clusters(p.view(), p.view(), 1e-4);
        assert_eq!(labels.labels(), &[0, 0, 1]);
        let same = array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]];
        assert_eq!(extract_clusters(same.view(), p.view(), 1e-4).k(), 1);
        let apart = array![[0.1, 0.9], [0.5, 0.5], [0.9, 0.1]];
        assert_eq!(extract_clusters(apart.view(), apart.view(), 1e-4).k(), 3);
    }

    #[test]
    fn rejects_bad_step() {
        let p = array![[0.2, 0.8], [0.6, 0.4]];
        let g = WeightGraph::complete(2);
        let cfg = SolverConfig {
            step: Some(1.0),
            ..Default::default()
        };
        assert!(ama_solve(p.view(), &g, 0.1, &cfg).is_err());
    }

    #[test]
    fn not_converged_is_reported() {
        let p = array![[0.2, 0.8], [0.6, 0.4], [0.3, 0.7]];
        let g = WeightGraph::complete(3);
        let cfg = SolverConfig {
            max_iter: 2,
            ..Default::default()
        };
        let r = ama_solve(p.view(), &g, 0.05, &cfg).unwrap();
        assert!(!r.converged);
        assert!(matches!(r.ensure_converged(), Err(SmmError::NotConverged { .. })));
    }

    #[test]
    fn warm_start_matches_cold() {
        let p = array![[0.7, 0.2, 0.1], [0.65, 0.25, 0.1], [0.1, 0.1, 0.8], [0.15, 0.05, 0.8]];
        let g = WeightGraph::complete(4);
        let cfg = SolverConfig {
            dual_gap_tol: 1e-10,
            max_iter: 100_000,
            ..Default::default()
        };
        let first = ama_solve(p.view(), &g, 0.01, &cfg).unwrap();
        let warm = ama_solve_warm(p.view(), &g, 0.03, &cfg, Some(first.duals.view())).unwrap();
        let cold = ama_solve(p.view(), &g, 0.03, &cfg).unwrap();
        assert!((warm.primal_obj - cold.primal_obj).abs() < 1e-9);
        assert!(warm.iterations <= cold.iterations);
    }
}
