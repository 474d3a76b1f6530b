//! Per-class reference models and maximum-likelihood classification of
//! sequence segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::markov::{context_index, count_transitions, Alphabet, EncodedSequence};
use crate::selection::{fit_counts, FitConfig, SmmModel};
use crate::simulate::{block_labels, generate_sequence, GroundTruthSmm};

/// Full pipeline on one sequence: counts, weights, path, BIC selection.
pub fn fit_reference(alphabet: Alphabet, seq: &EncodedSequence, m: usize, config: &FitConfig) -> Result<SmmModel> {
    let counts = count_transitions(seq, m)?;
    Ok(fit_counts(alphabet, &counts, config)?.model)
}

/// Named reference models sharing one alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    classes: Vec<(String, SmmModel)>,
}

impl ReferenceSet {
    pub fn new(classes: Vec<(String, SmmModel)>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(SmmError::InvalidConfig("need at least two reference classes".into()));
        }
        let alphabet = &classes[0].1.alphabet;
        if let Some((name, _)) = classes.iter().find(|(_, m)| &m.alphabet != alphabet) {
            return Err(SmmError::InvalidAlphabet(format!("reference {name} uses a different alphabet")));
        }
        Ok(Self { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.classes.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn models(&self) -> impl Iterator<Item = &SmmModel> {
        self.classes.iter().map(|(_, m)| m)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.classes[0].1.alphabet
    }

    /// Longest order among the references.
    pub fn max_order(&self) -> usize {
        self.models().map(|m| m.m).max().unwrap_or(0)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|(n, _)| n == name)
    }
}

/// `sum_t log p(x_{t+1} | x_{t-m+1..t})` with additive smoothing `alpha`.
/// The first `m` symbols only condition.
pub fn segment_log_likelihood(model: &SmmModel, segment: &[usize], alpha: f64) -> Result<f64> {
    let m = model.m;
    if segment.len() <= m {
        return Err(SmmError::SegmentTooShort { len: segment.len(), order: m });
    }
    let d = model.alphabet_size();
    let modulus = model.context_count() / d;
    let mut ctx = context_index(&segment[..m], d);
    let mut ll = 0.0;
    for &a in &segment[m..] {
        ll += model.transition_prob(ctx, a, alpha).ln();
        ctx = if m == 0 { 0 } else { (ctx % modulus) * d + a };
    }
    Ok(ll)
}

/// Index of the best-scoring class (first on ties) and all scores.
pub fn classify(refs: &ReferenceSet, segment: &[usize], alpha: f64) -> Result<(usize, Vec<f64>)> {
    let scores = refs
        .models()
        .map(|m| segment_log_likelihood(m, segment, alpha))
        .collect::<Result<Vec<f64>>>()?;
    Ok((argmax_first(&scores), scores))
}

/// Position of the largest value; the earliest wins ties.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rows are the true class, columns the assigned class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn record(&mut self, truth: usize, assigned: usize) {
        self.counts[truth][assigned] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn misclassification_rate(&self) -> f64 {
        1.0 - self.accuracy()
    }

    pub fn is_diagonal(&self) -> bool {
        self.correct() == self.total()
    }
}

/// A sequence with its true class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub name: String,
    pub class: usize,
    pub codes: Vec<usize>,
}

/// Per-sample result of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample: String,
    pub truth: String,
    pub assigned: Option<String>,
    pub start: usize,
    pub length: usize,
    pub scores: Vec<f64>,
    /// Set when the segment was too short to score.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRun {
    pub confusion: ConfusionMatrix,
    pub samples: Vec<SampleScore>,
    pub skipped: usize,
}

/// Number of symbols kept from a sample of length `len`.
pub fn segment_length(len: usize, eps: f64) -> usize {
    ((eps * len as f64).ceil() as usize).min(len)
}

/// Score one random contiguous segment of length `ceil(eps * len)` per
/// sample. Segments shorter than `m + 2` are skipped and reported.
pub fn run_classification_experiment<R: Rng + ?Sized>(
    refs: &ReferenceSet,
    samples: &[LabeledSequence],
    eps: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<ClassificationRun> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(SmmError::InvalidConfig(format!("segment fraction must lie in (0, 1], got {eps}")));
    }
    if !(alpha >= 0.0) {
        return Err(SmmError::InvalidConfig(format!("smoothing must be non-negative, got {alpha}")));
    }
    let names: Vec<String> = refs.names().into_iter().map(String::from).collect();
    let min_len = refs.max_order() + 2;
    let segments: Vec<(usize, usize)> = samples
        .iter()
        .map(|s| {
            let len = segment_length(s.codes.len(), eps);
            let start = if len < s.codes.len() {
                rng.random_range(0..=s.codes.len() - len)
            } else {
                0
            };
            (start, len)
        })
        .collect();

    let score = |(sample, &(start, len)): (&LabeledSequence, &(usize, usize))| -> Result<SampleScore> {
        let mut out = SampleScore {
            sample: sample.name.clone(),
            truth: names[sample.class].clone(),
            assigned: None,
            start,
            length: len,
            scores: Vec::new(),
            skipped: true,
        };
        if len >= min_len {
            let (best, scores) = classify(refs, &sample.codes[start..start + len], alpha)?;
            out.assigned = Some(names[best].clone());
            out.scores = scores;
            out.skipped = false;
        }
        Ok(out)
    };
    #[cfg(feature = "parallel")]
    let scored: Vec<SampleScore> = {
        use rayon::prelude::*;
        samples.par_iter().zip(segments.par_iter()).map(score).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let scored: Vec<SampleScore> = samples.iter().zip(segments.iter()).map(score).collect::<Result<_>>()?;

    let mut confusion = ConfusionMatrix::new(names.clone());
    let mut skipped = 0;
    for (sample, s) in samples.iter().zip(&scored) {
        match &s.assigned {
            Some(a) => confusion.record(sample.class, names.iter().position(|n| n == a).unwrap_or(0)),
            None => skipped += 1,
        }
    }
    Ok(ClassificationRun {
        confusion,
        samples: scored,
        skipped,
    })
}

/// Synthetic classes for exercising the classifier: order 2 over four
/// symbols, four contiguous groups of four contexts. In class `c`, group
/// `g` puts `peak` on symbol `(g + c) mod 4` and spreads the rest evenly.
pub fn synthetic_class_models(classes: usize, peak: f64) -> Result<Vec<GroundTruthSmm>> {
    if !(0.25..=1.0).contains(&peak) {
        return Err(SmmError::InvalidConfig(format!("peak must lie in [0.25, 1], got {peak}")));
    }
    let rest = (1.0 - peak) / 3.0;
    (0..classes)
        .map(|c| {
            let vectors = (0..4)
                .map(|g| (0..4).map(|a| if a == (g + c) % 4 { peak } else { rest }).collect())
                .collect();
            GroundTruthSmm::new(2, 4, block_labels(&[4, 4, 4, 4]), vectors)
        })
        .collect()
}

/// Settings for [`synthetic_harness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub classes: usize,
    pub peak: f64,
    pub reference_length: usize,
    pub samples_per_class: usize,
    pub sample_length: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            peak: 0.7,
            reference_length: 5000,
            samples_per_class: 25,
            sample_length: 400,
            seed: 0,
        }
    }
}

/// Output of [`synthetic_harness`].
#[derive(Debug, Clone, PartialEq)]
pub struct Harness {
    pub refs: ReferenceSet,
    /// The sequences the references were fitted on.
    pub training: Vec<LabeledSequence>,
    /// Held-out sequences drawn from the same generators.
    pub samples: Vec<LabeledSequence>,
}

/// Fit one reference per synthetic class and draw held-out samples.
pub fn synthetic_harness(config: &HarnessConfig, fit: &FitConfig) -> Result<Harness> {
    let models = synthetic_class_models(config.classes, config.peak)?;
    let alphabet = Alphabet::dna();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut refs = Vec::new();
    let mut training = Vec::new();
    let mut samples = Vec::new();
    for (c, model) in models.iter().enumerate() {
        let seq = generate_sequence(model, config.reference_length, &mut rng)?;
        refs.push((format!("class{c}"), fit_reference(alphabet.clone(), &seq, model.m, fit)?));
        training.push(LabeledSequence {
            name: format!("class{c}_reference"),
            class: c,
            codes: seq.codes().to_vec(),
        });
        for s in 0..config.samples_per_class {
            let seq = generate_sequence(model, config.sample_length, &mut rng)?;
            samples.push(LabeledSequence {
                name: format!("class{c}_{s}"),
                class: c,
                codes: seq.codes().to_vec(),
            });
        }
    }
    Ok(Harness {
        refs: ReferenceSet::new(refs)?,
        training,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{empirical_transitions, ContextCounts};
    use crate::partition::PartitionLabels;

    fn toy_model() -> SmmModel {
        let seq = EncodedSequence::from_codes(vec![0, 0, 1, 0, 1], 2).unwrap();
        let counts = count_transitions(&seq, 1).unwrap();
        let contexts = empirical_transitions(&counts).observed_indices();
        SmmModel::from_partition(
            Alphabet::letters(2).unwrap(),
            &counts,
            &contexts,
            &PartitionLabels::singletons(contexts.len()),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn single_transition() {
        let model = toy_model();
        // context 0 followed by 1: counts from 0 are (1, 2)
        let ll = segment_log_likelihood(&model, &[0, 1], 0.5).unwrap();
        assert!((ll - (2.5f64 / 4.0).ln()).abs() < 1e-15);
        assert!(segment_log_likelihood(&model, &[0], 0.5).is_err());
    }

    #[test]
    fn unsmoothed_matches_training_likelihood() {
        let model = toy_model();
        let ll = segment_log_likelihood(&model, &[0, 0, 1, 0, 1], 0.0).unwrap();
        let expected = (1.0f64 / 3.0).ln() + 2.0 * (2.0f64 / 3.0).ln();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn smoothing_keeps_scores_finite() {
        let model = toy_model();
        // 1 -> 1 never observed
        assert_eq!(segment_log_likelihood(&model, &[1, 1], 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(segment_log_likelihood(&model, &[1, 1, 1, 1], 0.5).unwrap().is_finite());
    }

    #[test]
    fn ties_go_to_first_class() {
        let model = toy_model();
        let refs = ReferenceSet::new(vec![("a".into(), model.clone()), ("b".into(), model)]).unwrap();
        assert_eq!(classify(&refs, &[0, 1, 0, 0, 1], 0.5).unwrap().0, 0);
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn reference_set_checks() {
        let model = toy_model();
        assert!(ReferenceSet::new(vec![("a".into(), model.clone())]).is_err());
        let mut other = model.clone();
        other.alphabet = Alphabet::new(vec!['x', 'y']).unwrap();
        assert!(ReferenceSet::new(vec![("a".into(), model), ("b".into(), other)]).is_err());
    }

    #[test]
    fn confusion_rate() {
        let mut c = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        c.record(0, 0);
        c.record(0, 1);
        c.record(1, 1);
        c.record(1, 1);
        assert_eq!(c.total(), 4);
        assert!((c.misclassification_rate() - 0.25).abs() < 1e-15);
        assert!(!c.is_diagonal());
    }

    #[test]
    fn segment_lengths() {
        assert_eq!(segment_length(100, 0.05), 5);
        assert_eq!(segment_length(101, 0.05), 6);
        assert_eq!(segment_length(10, 1.0), 10);
    }

    #[test]
    fn synthetic_models_are_distinct() {
        let models = synthetic_class_models(4, 0.7).unwrap();
        for a in 0..4 {
            for b in 0..a {
                for ctx in 0..16 {
                    let d: f64 = models[a]
                        .transition(ctx)
                        .iter()
                        .zip(models[b].transition(ctx))
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    assert!(d >= 0.8);
                }
            }
        }
        let _: Option<ContextCounts> = None;
    }
}
