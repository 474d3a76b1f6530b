//! Ground-truth sparse Markov models, sequence generation and the recovery
//! experiment harness.
//!
//! Randomness comes from `ChaCha8Rng`. Replicate `r` of an experiment seeded
//! with `s` uses `ChaCha8Rng::seed_from_u64(s + r)` for both the model draw
//! and the sequence, so results are reproducible on any platform and
//! independent of scheduling.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{lambda_bounds, float_or_inf};
use crate::error::{Result, SmmError};
use crate::markov::{context_count, count_transitions, empirical_transitions, Alphabet, EncodedSequence};
use crate::metrics::{adjusted_rand_index, rand_index};
use crate::partition::PartitionLabels;
use crate::selection::{fit_counts, FitConfig};
use crate::solver::SolverConfig;
use crate::weights::WeightScheme;

/// Steps discarded before the first emitted symbol.
pub const BURN_IN: usize = 1000;

/// A sparse Markov model with known partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSmm {
    pub m: usize,
    pub d: usize,
    /// Group of every context, length `d^m`.
    pub labels: Vec<usize>,
    /// One transition vector per group, `k0 x d`.
    pub group_vectors: Vec<Vec<f64>>,
    pub seed: Option<u64>,
}

impl GroundTruthSmm {
    pub fn new(m: usize, d: usize, labels: Vec<usize>, group_vectors: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != context_count(d, m) {
            return Err(SmmError::InvalidConfig(format!(
                "{} labels for {} contexts",
                labels.len(),
                context_count(d, m)
            )));
        }
        if labels.iter().any(|&l| l >= group_vectors.len()) {
            return Err(SmmError::InvalidConfig("label without group vector".into()));
        }
        for row in &group_vectors {
            if row.len() != d || row.iter().any(|&v| v < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(SmmError::InvalidConfig("group vector is not a distribution".into()));
            }
        }
        Ok(Self {
            m,
            d,
            labels,
            group_vectors,
            seed: None,
        })
    }

    pub fn k0(&self) -> usize {
        self.group_vectors.len()
    }

    pub fn partition(&self) -> PartitionLabels {
        PartitionLabels::from_labels(&self.labels)
    }

    /// Group vectors ordered to match the canonical labels of
    /// [`Self::partition`].
    pub fn canonical_vectors(&self) -> Array2<f64> {
        let mut order = Vec::new();
        for &l in &self.labels {
            if !order.contains(&l) {
                order.push(l);
            }
        }
        Array2::from_shape_fn((order.len(), self.d), |(a, b)| self.group_vectors[order[a]][b])
    }

    pub fn transition(&self, context: usize) -> &[f64] {
        &self.group_vectors[self.labels[context]]
    }
}

/// Normalized independent `Gamma(alpha_i, 1)` draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = params
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map(|g| g.sample(rng))
                .map_err(|e| SmmError::InvalidConfig(format!("Dirichlet parameter {a}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|v| *v /= total);
    } else {
        // every gamma draw underflowed; put the mass on the largest parameter
        let top = params
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        draws.iter_mut().enumerate().for_each(|(i, v)| *v = f64::from(u8::from(i == top)));
    }
    Ok(draws)
}

/// Contiguous blocks of the canonical context order with the given sizes.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect()
}

/// Four nucleotides, order 2 or 3, `d^m / 4` resp. `d^m / 8` equal blocks.
/// Each group vector is `Dirichlet(exp(Z_1), ..., exp(Z_4))` with
/// `Z_i ~ Uniform(0, 1)`.
pub fn build_setup1<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<GroundTruthSmm> {
    let k0 = match m {
        2 => 4,
        3 => 8,
        _ => return Err(SmmError::InvalidConfig(format!("setup 1 is defined for m = 2 or 3, got {m}"))),
    };
    let d = 4;
    let p = context_count(d, m);
    let vectors = (0..k0)
        .map(|_| {
            let params: Vec<f64> = (0..d).map(|_| rng.random::<f64>().exp()).collect();
            sample_dirichlet(&params, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    GroundTruthSmm::new(m, d, block_labels(&vec![p / k0; k0]), vectors)
}

/// Sizes of the four groups in setup 2.
pub const SETUP2_SIZES: [usize; 4] = [18, 18, 15, 13];

/// Four nucleotides, order 3, groups of 18/18/15/13 contexts; group `a`
/// puts 0.7 on symbol `a` and 0.1 on each other symbol.
pub fn build_setup2() -> GroundTruthSmm {
    let vectors = (0..4)
        .map(|a| (0..4).map(|b| if a == b { 0.7 } else { 0.1 }).collect())
        .collect();
    GroundTruthSmm::new(3, 4, block_labels(&SETUP2_SIZES), vectors).expect("static model is valid")
}

fn draw_symbol<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Uniform initial context, [`BURN_IN`] discarded steps, then `n` symbols.
pub fn generate_sequence<R: Rng + ?Sized>(model: &GroundTruthSmm, n: usize, rng: &mut R) -> Result<EncodedSequence> {
    if n < model.m + 1 {
        return Err(SmmError::SequenceTooShort {
            len: n,
            order: model.m,
            needed: model.m + 1,
        });
    }
    let p = context_count(model.d, model.m);
    let modulus = p / model.d;
    let mut ctx = rng.random_range(0..p);
    let mut codes = Vec::with_capacity(n);
    for step in 0..BURN_IN + n {
        let next = draw_symbol(model.transition(ctx), rng);
        ctx = (ctx % modulus) * model.d + next;
        if step >= BURN_IN {
            codes.push(next);
        }
    }
    EncodedSequence::from_codes(codes, model.d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setup", rename_all = "snake_case")]
pub enum Setup {
    /// Random Dirichlet groups, order 2 or 3; a fresh model per replicate.
    Setup1 { m: usize },
    /// The fixed four-group order-3 model.
    Setup2,
    Custom { model: GroundTruthSmm },
}

impl Setup {
    pub fn order(&self) -> usize {
        match self {
            Setup::Setup1 { m } => *m,
            Setup::Setup2 => 3,
            Setup::Custom { model } => model.m,
        }
    }

    fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroundTruthSmm> {
        match self {
            Setup::Setup1 { m } => build_setup1(*m, rng),
            Setup::Setup2 => Ok(build_setup2()),
            Setup::Custom { model } => Ok(model.clone()),
        }
    }
}

/// Default replicate count for desk-scale runs.
pub const DESK_REPLICATES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub schemes: Vec<WeightScheme>,
    pub solver: SolverConfig,
    pub grid_size: usize,
    pub seed: u64,
    /// Also compute the exact-recovery interval against the truth.
    pub diagnostics: bool,
}

impl ExperimentConfig {
    pub fn new(setup: Setup, n_values: Vec<usize>, schemes: Vec<WeightScheme>) -> Self {
        Self {
            setup,
            n_values,
            replicates: DESK_REPLICATES,
            schemes,
            solver: SolverConfig::default(),
            grid_size: 100,
            seed: 0,
            diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(SmmError::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.schemes.is_empty() {
            return Err(SmmError::InvalidConfig("need at least one n and one weight scheme".into()));
        }
        for s in &self.schemes {
            s.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one replicate for one `(n, scheme)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub n: usize,
    pub scheme: String,
    pub ri: f64,
    pub ari: f64,
    pub k_hat: usize,
    pub lambda: f64,
    pub recovered: bool,
    pub observed_contexts: usize,
    pub not_converged: usize,
    #[serde(with = "float_or_inf::option")]
    pub lambda_min: Option<f64>,
    #[serde(with = "float_or_inf::option")]
    pub lambda_max: Option<f64>,
}

/// Aggregate over replicates of one `(n, scheme)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub scheme: String,
    pub replicates: usize,
    pub mean_ri: f64,
    pub se_ri: f64,
    pub mean_ari: f64,
    pub se_ari: f64,
    pub recovery: f64,
    pub mean_k: f64,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    /// Sorted by `(n, scheme index, replicate)`.
    pub records: Vec<ReplicateRecord>,
    pub elapsed_secs: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fit one sequence with one scheme and compare against the truth on the
/// observed contexts.
pub fn evaluate_fit(
    truth: &GroundTruthSmm,
    seq: &EncodedSequence,
    scheme: &WeightScheme,
    solver: &SolverConfig,
    grid_size: usize,
    diagnostics: bool,
) -> Result<(ReplicateRecord, PartitionLabels)> {
    let counts = count_transitions(seq, truth.m)?;
    let alphabet = Alphabet::letters(truth.d)?;
    let config = FitConfig {
        scheme: *scheme,
        solver: solver.clone(),
        grid_size,
        warm_start: true,
    };
    let fit = fit_counts(alphabet, &counts, &config)?;
    let best = fit.path.best();
    let truth_obs: Vec<usize> = fit.contexts.iter().map(|&c| truth.labels[c]).collect();
    let truth_part = PartitionLabels::from_labels(&truth_obs);
    let ri = rand_index(best.partition.labels(), truth_part.labels())?;
    let ari = adjusted_rand_index(best.partition.labels(), truth_part.labels())?;
    let (lambda_min, lambda_max) = if diagnostics {
        let emp = empirical_transitions(&counts);
        debug_assert_eq!(emp.observed_indices(), fit.contexts);
        match lambda_bounds(fit.points.view(), &fit.graph, &truth_part) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, lambda_bounds_max_only(&fit, &truth_part)),
        }
    } else {
        (None, None)
    };
    Ok((
        ReplicateRecord {
            replicate: 0,
            n: seq.len(),
            scheme: scheme.to_string(),
            ri,
            ari,
            k_hat: best.k,
            lambda: best.lambda,
            recovered: best.partition == truth_part,
            observed_contexts: fit.contexts.len(),
            not_converged: fit.path.not_converged,
            lambda_min,
            lambda_max,
        },
        best.partition.clone(),
    ))
}

fn lambda_bounds_max_only(fit: &crate::selection::FitOutput, truth: &PartitionLabels) -> Option<f64> {
    crate::diagnostics::lambda_max(fit.points.view(), &fit.graph, truth).ok()
}

fn run_replicate(config: &ExperimentConfig, replicate: usize) -> Result<Vec<(usize, ReplicateRecord)>> {
    let mut out = Vec::new();
    for &n in &config.n_values {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(replicate as u64));
        let truth = config.setup.build(&mut rng)?;
        let seq = generate_sequence(&truth, n, &mut rng)?;
        for (s, scheme) in config.schemes.iter().enumerate() {
            let (mut rec, _) = evaluate_fit(&truth, &seq, scheme, &config.solver, config.grid_size, config.diagnostics)?;
            rec.replicate = replicate;
            out.push((s, rec));
        }
    }
    Ok(out)
}

/// Generate, fit, select and score every replicate, then aggregate per
/// `(n, scheme)`. For a given replicate all `n` share the model draw and
/// the shorter sequences are prefixes of the longer ones.
pub fn run_recovery_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let start = Instant::now();
    let reps: Vec<usize> = (0..config.replicates).collect();
    #[cfg(feature = "parallel")]
    let per_rep: Vec<Vec<(usize, ReplicateRecord)>> = {
        use rayon::prelude::*;
        reps.par_iter().map(|&r| run_replicate(config, r)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_rep: Vec<Vec<(usize, ReplicateRecord)>> =
        reps.iter().map(|&r| run_replicate(config, r)).collect::<Result<_>>()?;

    let mut keyed: Vec<(usize, usize, ReplicateRecord)> = per_rep
        .into_iter()
        .flatten()
        .map(|(s, rec)| (rec.n, s, rec))
        .collect();
    keyed.sort_by_key(|(n, s, rec)| (*n, *s, rec.replicate));

    let mut rows = Vec::new();
    for &n in &config.n_values {
        for (s, scheme) in config.schemes.iter().enumerate() {
            let cell: Vec<&ReplicateRecord> = keyed
                .iter()
                .filter(|(kn, ks, _)| *kn == n && *ks == s)
                .map(|(_, _, r)| r)
                .collect();
            let ri: Vec<f64> = cell.iter().map(|r| r.ri).collect();
            let ari: Vec<f64> = cell.iter().map(|r| r.ari).collect();
            let (mean_ri, se_ri) = mean_se(&ri);
            let (mean_ari, se_ari) = mean_se(&ari);
            rows.push(SummaryRow {
                n,
                scheme: scheme.to_string(),
                replicates: cell.len(),
                mean_ri,
                se_ri,
                mean_ari,
                se_ari,
                recovery: cell.iter().filter(|r| r.recovered).count() as f64 / cell.len() as f64,
                mean_k: cell.iter().map(|r| r.k_hat as f64).sum::<f64>() / cell.len() as f64,
                not_converged: cell.iter().map(|r| r.not_converged).sum(),
            });
        }
    }
    Ok(ExperimentSummary {
        rows,
        records: keyed.into_iter().map(|(_, _, r)| r).collect(),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
