//! Penalty-path fitting and BIC model selection.
//!
//! For every penalty on a grid the clustering is solved, clusters are read
//! off, the group transition probabilities are re-estimated by pooling raw
//! counts, and the partition is scored by BIC. The partition with the lowest
//! BIC becomes the fitted model. The solver's centroids are only used to
//! define the partition, never as probability estimates.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::markov::{empirical_transitions, Alphabet, ContextCounts};
use crate::partition::PartitionLabels;
use crate::solver::{ama_solve, ama_solve_warm, extract_clusters, SolverConfig, SolverResult};
use crate::weights::{compute_weights, WeightGraph, WeightScheme};

/// Current `model.json` schema version.
pub const MODEL_VERSION: u32 = 1;

/// Pooled counts and maximum-likelihood transition vectors per group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEstimate {
    /// `N_{C_alpha, a}`, shape `k x d`.
    pub counts: Array2<u64>,
    /// `N_{C_alpha}`.
    pub totals: Vec<u64>,
    /// `R_{alpha, a} = N_{C_alpha, a} / N_{C_alpha}`.
    pub probs: Array2<f64>,
}

/// Pool the counts of `contexts[i]` into group `partition[i]`.
pub fn group_mle(
    counts: &ContextCounts,
    contexts: &[usize],
    partition: &PartitionLabels,
) -> Result<GroupEstimate> {
    if contexts.len() != partition.len() {
        return Err(SmmError::MismatchedElements {
            left: contexts.len(),
            right: partition.len(),
        });
    }
    let d = counts.alphabet_size;
    let k = partition.k();
    let mut pooled = Array2::<u64>::zeros((k, d));
    let mut totals = vec![0u64; k];
    for (&ctx, &g) in contexts.iter().zip(partition.labels()) {
        totals[g] += counts.context_total[ctx];
        let mut row = pooled.row_mut(g);
        row += &counts.transition.row(ctx);
    }
    if let Some(g) = totals.iter().position(|&t| t == 0) {
        return Err(SmmError::EmptyGroup(g));
    }
    let probs = Array2::from_shape_fn((k, d), |(g, a)| pooled[[g, a]] as f64 / totals[g] as f64);
    Ok(GroupEstimate {
        counts: pooled,
        totals,
        probs,
    })
}

/// `sum_alpha sum_a N_{C_alpha,a} log R_{alpha,a}` with `0 log 0 = 0`.
pub fn log_likelihood(counts: &ContextCounts, contexts: &[usize], partition: &PartitionLabels) -> Result<f64> {
    let est = group_mle(counts, contexts, partition)?;
    Ok(estimate_log_likelihood(&est))
}

fn estimate_log_likelihood(est: &GroupEstimate) -> f64 {
    est.counts
        .iter()
        .zip(est.probs.iter())
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &r)| n as f64 * r.ln())
        .sum()
}

/// `-2 loglik + k (d - 1) ln n`.
pub fn bic_from_parts(loglik: f64, k: usize, n: usize, d: usize) -> f64 {
    -2.0 * loglik + (k * (d - 1)) as f64 * (n as f64).ln()
}

/// BIC of a partition, with `n` the raw number of observations.
pub fn bic_score(counts: &ContextCounts, contexts: &[usize], partition: &PartitionLabels) -> Result<f64> {
    let ll = log_likelihood(counts, contexts, partition)?;
    Ok(bic_from_parts(
        ll,
        partition.k(),
        counts.n_observations,
        counts.alphabet_size,
    ))
}

/// Maximum number of doublings when searching for the fully fused penalty.
pub const MAX_DOUBLINGS: usize = 40;

/// Ratio between the smallest positive and the largest grid penalty.
pub const GRID_SPAN: f64 = 1e-4;

/// Upper end of the penalty grid and how it was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTop {
    pub lambda: f64,
    /// Whether the coarsest reachable partition was hit before the cap.
    pub reached: bool,
    pub doublings: usize,
}

/// Smallest probed penalty at which the solution is as coarse as the graph
/// allows, i.e. one cluster per connected component.
///
/// Probing starts at `sum_l ||pihat_l1 - pihat_l2|| / (2 sum_l w_l)` and
/// doubles up to [`MAX_DOUBLINGS`] times.
pub fn find_grid_top(points: ArrayView2<f64>, graph: &WeightGraph, config: &SolverConfig) -> Result<GridTop> {
    let target = graph.components().k();
    if extract_clusters(points, points, config.fusion_tol).k() <= target {
        return Ok(GridTop {
            lambda: start_lambda(points, graph),
            reached: true,
            doublings: 0,
        });
    }
    let mut lambda = start_lambda(points, graph);
    let mut warm: Option<Array2<f64>> = None;
    for doublings in 0..=MAX_DOUBLINGS {
        let res = ama_solve_warm(points, graph, lambda, config, warm.as_ref().map(|w| w.view()))?;
        if extract_clusters(res.centroids.view(), points, config.fusion_tol).k() <= target {
            return Ok(GridTop {
                lambda,
                reached: true,
                doublings,
            });
        }
        warm = Some(res.duals);
        if doublings < MAX_DOUBLINGS {
            lambda *= 2.0;
        }
    }
    Ok(GridTop {
        lambda,
        reached: false,
        doublings: MAX_DOUBLINGS,
    })
}

fn start_lambda(points: ArrayView2<f64>, graph: &WeightGraph) -> f64 {
    let spread: f64 = graph
        .edges
        .iter()
        .map(|e| {
            let diff = &points.row(e.i) - &points.row(e.j);
            diff.dot(&diff).sqrt()
        })
        .sum();
    let total = graph.total_weight();
    let lambda = if total > 0.0 { spread / (2.0 * total) } else { 0.0 };
    if lambda > 0.0 {
        lambda
    } else {
        1e-6
    }
}

/// `[0, top * GRID_SPAN, ..., top]` with the positive part geometric.
pub fn grid_from_top(top: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(SmmError::InvalidConfig(format!("grid size must be >= 2, got {size}")));
    }
    let mut grid = vec![0.0];
    if size == 2 {
        grid.push(top);
        return Ok(grid);
    }
    let steps = (size - 2) as f64;
    let lo = top * GRID_SPAN;
    let ratio = (top / lo).ln();
    grid.extend((0..size - 1).map(|i| {
        if i == size - 2 {
            top
        } else {
            lo * (ratio * i as f64 / steps).exp()
        }
    }));
    Ok(grid)
}

pub fn lambda_grid(
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    size: usize,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let top = find_grid_top(points, graph, config)?;
    grid_from_top(top.lambda, size)
}

/// One point of the penalty path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub partition: PartitionLabels,
    pub k: usize,
    pub group_probs: Vec<Vec<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFit {
    pub solutions: Vec<LambdaSolution>,
    /// Index into `solutions` of the BIC-selected point.
    pub selected: usize,
    /// Consecutive grid points whose partitions are not nested.
    pub nesting_violations: usize,
    pub not_converged: usize,
}

impl PathFit {
    pub fn best(&self) -> &LambdaSolution {
        &self.solutions[self.selected]
    }
}

/// Lowest BIC, ties broken by fewer clusters and then smaller penalty.
/// Solutions repeating an earlier partition are skipped.
pub fn select_by_bic(solutions: &[LambdaSolution]) -> Option<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut best: Option<usize> = None;
    for (i, s) in solutions.iter().enumerate() {
        if !seen.insert(&s.partition) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let o = &solutions[b];
                s.bic
                    .total_cmp(&o.bic)
                    .then(s.k.cmp(&o.k))
                    .then(s.lambda.total_cmp(&o.lambda))
                    .is_lt()
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn score(
    counts: &ContextCounts,
    contexts: &[usize],
    points: ArrayView2<f64>,
    res: &SolverResult,
    fusion_tol: f64,
) -> Result<LambdaSolution> {
    let partition = extract_clusters(res.centroids.view(), points, fusion_tol);
    let est = group_mle(counts, contexts, &partition)?;
    let loglik = estimate_log_likelihood(&est);
    let k = partition.k();
    Ok(LambdaSolution {
        lambda: res.lambda,
        k,
        bic: bic_from_parts(loglik, k, counts.n_observations, counts.alphabet_size),
        group_probs: est.probs.outer_iter().map(|r| r.to_vec()).collect(),
        partition,
        loglik,
        converged: res.converged,
        iterations: res.iterations,
        relative_gap: res.relative_gap(),
    })
}

/// Solve along `grid` (ascending) and pick the BIC-optimal partition.
///
/// `contexts[i]` is the context index of row `i` of `points`. With
/// `warm_start` each solve starts from the previous duals; otherwise every
/// solve is independent and may run in parallel.
pub fn fit_path(
    counts: &ContextCounts,
    contexts: &[usize],
    points: ArrayView2<f64>,
    graph: &WeightGraph,
    grid: &[f64],
    config: &SolverConfig,
    warm_start: bool,
) -> Result<PathFit> {
    if grid.is_empty() {
        return Err(SmmError::InvalidConfig("empty penalty grid".into()));
    }
    let solutions: Vec<LambdaSolution> = if warm_start {
        let mut out = Vec::with_capacity(grid.len());
        let mut warm: Option<Array2<f64>> = None;
        for &lambda in grid {
            let res = ama_solve_warm(points, graph, lambda, config, warm.as_ref().map(|w| w.view()))?;
            out.push(score(counts, contexts, points, &res, config.fusion_tol)?);
            warm = Some(res.duals);
        }
        out
    } else {
        let solve = |&lambda: &f64| {
            let res = ama_solve(points, graph, lambda, config)?;
            score(counts, contexts, points, &res, config.fusion_tol)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            grid.par_iter().map(solve).collect::<Result<_>>()?
        }
        #[cfg(not(feature = "parallel"))]
        {
            grid.iter().map(solve).collect::<Result<_>>()?
        }
    };
    let nesting_violations = solutions
        .windows(2)
        .filter(|w| !w[0].partition.refines(&w[1].partition))
        .count();
    let not_converged = solutions.iter().filter(|s| !s.converged).count();
    let selected = select_by_bic(&solutions).expect("grid is non-empty");
    Ok(PathFit {
        solutions,
        selected,
        nesting_violations,
        not_converged,
    })
}

/// Fitted sparse Markov model: a partition of all `d^m` contexts plus one
/// transition vector per group. This is the `model.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmmModel {
    pub version: u32,
    pub alphabet: Alphabet,
    pub m: usize,
    /// Group of every context, length `d^m`.
    pub labels: Vec<usize>,
    /// Group holding the contexts never seen in training, if any. Its
    /// probability vector is uniform and its counts are zero.
    pub unseen_label: Option<usize>,
    pub group_probs: Vec<Vec<f64>>,
    pub group_counts: Vec<Vec<u64>>,
    pub lambda: f64,
    pub bic: f64,
    /// Number of groups among observed contexts.
    pub k: usize,
    /// Observations the model was fitted on.
    pub n: usize,
    /// Additive smoothing used when scoring new sequences.
    pub smoothing: f64,
    pub seed: Option<u64>,
}

/// Default pseudo-count for scoring sequences.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

impl SmmModel {
    /// Assemble a model from a partition of the observed contexts.
    pub fn from_partition(
        alphabet: Alphabet,
        counts: &ContextCounts,
        contexts: &[usize],
        partition: &PartitionLabels,
        lambda: f64,
    ) -> Result<Self> {
        let d = counts.alphabet_size;
        if alphabet.size() != d {
            return Err(SmmError::Model(format!(
                "alphabet has {} symbols, counts have {d}",
                alphabet.size()
            )));
        }
        let est = group_mle(counts, contexts, partition)?;
        let k = partition.k();
        let p = counts.context_count();
        let mut labels = vec![usize::MAX; p];
        for (&ctx, &g) in contexts.iter().zip(partition.labels()) {
            labels[ctx] = g;
        }
        let mut group_probs: Vec<Vec<f64>> = est.probs.outer_iter().map(|r| r.to_vec()).collect();
        let mut group_counts: Vec<Vec<u64>> = est.counts.outer_iter().map(|r| r.to_vec()).collect();
        let unseen_label = labels.contains(&usize::MAX).then_some(k);
        if let Some(u) = unseen_label {
            labels.iter_mut().filter(|l| **l == usize::MAX).for_each(|l| *l = u);
            group_probs.push(vec![1.0 / d as f64; d]);
            group_counts.push(vec![0; d]);
        }
        let loglik = estimate_log_likelihood(&est);
        Ok(Self {
            version: MODEL_VERSION,
            alphabet,
            m: counts.order,
            labels,
            unseen_label,
            group_probs,
            group_counts,
            lambda,
            bic: bic_from_parts(loglik, k, counts.n_observations, d),
            k,
            n: counts.n_observations,
            smoothing: DEFAULT_SMOOTHING,
            seed: None,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn context_count(&self) -> usize {
        self.labels.len()
    }

    /// Smoothed `p(a | context)`: `(N_{g,a} + alpha) / (N_g + d alpha)` for
    /// the context's group `g`. With `alpha = 0` the group MLE is returned.
    pub fn transition_prob(&self, context: usize, symbol: usize, alpha: f64) -> f64 {
        let g = self.labels[context];
        if alpha == 0.0 {
            return self.group_probs[g][symbol];
        }
        let counts = &self.group_counts[g];
        let total: u64 = counts.iter().sum();
        (counts[symbol] as f64 + alpha) / (total as f64 + self.alphabet_size() as f64 * alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SmmError::Model(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s).map_err(|e| SmmError::Model(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.alphabet_size();
        if self.version != MODEL_VERSION {
            return Err(SmmError::Model(format!("unsupported model version {}", self.version)));
        }
        if self.labels.len() != d.pow(self.m as u32) {
            return Err(SmmError::Model(format!(
                "{} labels for {} contexts",
                self.labels.len(),
                d.pow(self.m as u32)
            )));
        }
        let groups = self.group_probs.len();
        if self.group_counts.len() != groups || self.labels.iter().any(|&l| l >= groups) {
            return Err(SmmError::Model("labels and groups disagree".into()));
        }
        for row in &self.group_probs {
            if row.len() != d || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(SmmError::Model("group probabilities are not on the simplex".into()));
            }
        }
        Ok(())
    }
}

/// Everything needed to fit one model from counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub scheme: WeightScheme,
    pub solver: SolverConfig,
    pub grid_size: usize,
    pub warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            scheme: WeightScheme::Uniform,
            solver: SolverConfig::default(),
            grid_size: 100,
            warm_start: true,
        }
    }
}

/// Output of the full fitting pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub model: SmmModel,
    pub path: PathFit,
    /// Context index of each observed row.
    pub contexts: Vec<usize>,
    /// Observed empirical transition rows.
    pub points: Array2<f64>,
    pub graph: WeightGraph,
    pub grid_top: GridTop,
}

/// Counts -> empirical rows -> weights -> penalty path -> BIC-selected model.
pub fn fit_counts(alphabet: Alphabet, counts: &ContextCounts, config: &FitConfig) -> Result<FitOutput> {
    let emp = empirical_transitions(counts);
    let contexts = emp.observed_indices();
    let points = emp.observed_rows();
    let graph = compute_weights(points.view(), &config.scheme)?;
    let grid_top = find_grid_top(points.view(), &graph, &config.solver)?;
    let grid = grid_from_top(grid_top.lambda, config.grid_size)?;
    let path = fit_path(
        counts,
        &contexts,
        points.view(),
        &graph,
        &grid,
        &config.solver,
        config.warm_start,
    )?;
    let best = path.best();
    let model = SmmModel::from_partition(alphabet, counts, &contexts, &best.partition, best.lambda)?;
    Ok(FitOutput {
        model,
        path,
        contexts,
        points,
        graph,
        grid_top,
    })
}
