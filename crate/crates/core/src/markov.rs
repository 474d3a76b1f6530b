//! Alphabets, integer-coded sequences, order-m context indexing and
//! transition counting.
//!
//! Contexts are enumerated as base-`d` numbers with the oldest symbol most
//! significant: the window `(x[t-m+1], ..., x[t])` maps to
//! `sum_i x[t-m+1+i] * d^(m-1-i)`.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};

/// Ordered symbol table. Codes are positions in `symbols`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<char>,
    #[serde(skip)]
    codes: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(SmmError::InvalidAlphabet(format!(
                "need at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        let mut codes = HashMap::with_capacity(symbols.len());
        for (i, &s) in symbols.iter().enumerate() {
            if codes.insert(s, i).is_some() {
                return Err(SmmError::InvalidAlphabet(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Self { symbols, codes })
    }

    /// The four nucleotides `A C G T`.
    pub fn dna() -> Self {
        Self::new(vec!['A', 'C', 'G', 'T']).expect("static alphabet is valid")
    }

    /// `d` consecutive uppercase letters starting at `A`.
    pub fn letters(d: usize) -> Result<Self> {
        if d > 26 {
            return Err(SmmError::InvalidAlphabet(format!("{d} letters requested")));
        }
        Self::new((0..d as u8).map(|i| (b'A' + i) as char).collect())
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn code(&self, symbol: char) -> Option<usize> {
        self.codes.get(&symbol).copied()
    }

    pub fn symbol(&self, code: usize) -> char {
        self.symbols[code]
    }

    pub fn decode(&self, codes: &[usize]) -> String {
        codes.iter().map(|&c| self.symbols[c]).collect()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = SmmError;

    fn try_from(symbols: String) -> Result<Self> {
        Self::new(symbols.chars().collect())
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> Self {
        a.symbols.into_iter().collect()
    }
}

impl std::str::FromStr for Alphabet {
    type Err = SmmError;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.chars().collect())
    }
}

/// What to do with tokens that are not in the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownTokenPolicy {
    #[default]
    Reject,
    /// Drop the token and start a new run after it; no transition is
    /// counted across the gap.
    DropAndSplit,
}

/// Integer-coded observations, stored as one or more contiguous runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    codes: Vec<usize>,
    alphabet_size: usize,
    /// Half-open `[start, end)` ranges into `codes`; never empty.
    runs: Vec<(usize, usize)>,
}

impl EncodedSequence {
    /// A single contiguous run. Fails if any code is `>= alphabet_size`.
    pub fn from_codes(codes: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        Self::from_runs(vec![codes], alphabet_size)
    }

    /// Several independent runs, e.g. multiple FASTA records. Transitions are
    /// never counted across run boundaries.
    pub fn from_runs(runs: Vec<Vec<usize>>, alphabet_size: usize) -> Result<Self> {
        let mut codes = Vec::with_capacity(runs.iter().map(Vec::len).sum());
        let mut bounds = Vec::with_capacity(runs.len());
        for run in runs {
            if let Some(pos) = run.iter().position(|&c| c >= alphabet_size) {
                return Err(SmmError::InvalidAlphabet(format!(
                    "code {} at position {} exceeds alphabet size {alphabet_size}",
                    run[pos],
                    codes.len() + pos
                )));
            }
            if run.is_empty() {
                continue;
            }
            let start = codes.len();
            codes.extend(run);
            bounds.push((start, codes.len()));
        }
        Ok(Self {
            codes,
            alphabet_size,
            runs: bounds,
        })
    }

    /// All observations, runs concatenated.
    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn runs(&self) -> impl Iterator<Item = &[usize]> {
        self.runs.iter().map(move |&(s, e)| &self.codes[s..e])
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}

/// Map raw tokens onto alphabet codes.
pub fn encode_sequence(
    raw: &str,
    alphabet: &Alphabet,
    policy: UnknownTokenPolicy,
) -> Result<EncodedSequence> {
    let mut runs = vec![Vec::new()];
    for (position, token) in raw.chars().enumerate() {
        match alphabet.code(token) {
            Some(c) => runs.last_mut().expect("runs is never empty").push(c),
            None => match policy {
                UnknownTokenPolicy::Reject => {
                    return Err(SmmError::UnknownToken { position, token })
                }
                UnknownTokenPolicy::DropAndSplit => {
                    if !runs.last().expect("runs is never empty").is_empty() {
                        runs.push(Vec::new());
                    }
                }
            },
        }
    }
    EncodedSequence::from_runs(runs, alphabet.size())
}

/// `d^m`, the number of order-`m` contexts.
pub fn context_count(alphabet_size: usize, order: usize) -> usize {
    alphabet_size.pow(order as u32)
}

/// Position of an m-tuple (oldest symbol first) in the canonical enumeration.
pub fn context_index(tuple: &[usize], alphabet_size: usize) -> usize {
    tuple.iter().fold(0, |acc, &c| acc * alphabet_size + c)
}

/// Inverse of [`context_index`].
pub fn context_tuple(index: usize, order: usize, alphabet_size: usize) -> Vec<usize> {
    let mut tuple = vec![0; order];
    let mut rest = index;
    for slot in tuple.iter_mut().rev() {
        *slot = rest % alphabet_size;
        rest /= alphabet_size;
    }
    tuple
}

/// Context and transition counts for one order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCounts {
    pub order: usize,
    pub alphabet_size: usize,
    /// Number of observations the counts were taken from.
    pub n_observations: usize,
    /// Number of complete length-`m` windows, `n - m + 1` for a single run.
    pub window_count: usize,
    /// `N_{sigma_j}`: times context `j` was followed by a symbol.
    pub context_total: Vec<u64>,
    /// `N_{sigma_j, a}`, shape `p x d`.
    pub transition: Array2<u64>,
}

impl ContextCounts {
    pub fn context_count(&self) -> usize {
        self.context_total.len()
    }

    pub fn total_transitions(&self) -> u64 {
        self.context_total.iter().sum()
    }

    pub fn row(&self, context: usize) -> ArrayView1<'_, u64> {
        self.transition.row(context)
    }
}

/// Count order-`m` transitions within every run of `seq`.
///
/// For each run `x_1..x_L` the context ending at `t` (for `t = m..L-1`,
/// 1-based) is paired with its successor `x_{t+1}`, so a run contributes
/// `L - m` transitions.
pub fn count_transitions(seq: &EncodedSequence, order: usize) -> Result<ContextCounts> {
    if order == 0 {
        return Err(SmmError::InvalidConfig("order must be at least 1".into()));
    }
    let d = seq.alphabet_size();
    let p = context_count(d, order);
    let modulus = p / d;
    let mut context_total = vec![0u64; p];
    let mut transition = Array2::<u64>::zeros((p, d));
    let mut window_count = 0;
    for run in seq.runs() {
        if run.len() >= order {
            window_count += run.len() - order + 1;
        }
        if run.len() < order + 1 {
            continue;
        }
        let mut ctx = context_index(&run[..order], d);
        for &next in &run[order..] {
            context_total[ctx] += 1;
            transition[[ctx, next]] += 1;
            ctx = (ctx % modulus) * d + next;
        }
    }
    if context_total.iter().all(|&c| c == 0) {
        return Err(SmmError::SequenceTooShort {
            len: seq.len(),
            order,
            needed: order + 1,
        });
    }
    Ok(ContextCounts {
        order,
        alphabet_size: d,
        n_observations: seq.len(),
        window_count,
        context_total,
        transition,
    })
}

/// Row-normalized transition estimates with a mask of observed contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTransitions {
    /// `pihat[j, a] = N_{j,a} / N_j`; rows of unobserved contexts are NaN.
    pub pihat: Array2<f64>,
    pub observed: Vec<bool>,
}

impl EmpiricalTransitions {
    pub fn observed_indices(&self) -> Vec<usize> {
        self.observed
            .iter()
            .enumerate()
            .filter_map(|(j, &o)| o.then_some(j))
            .collect()
    }

    /// The observed rows stacked in context order, shape `p' x d`.
    pub fn observed_rows(&self) -> Array2<f64> {
        let idx = self.observed_indices();
        self.pihat.select(ndarray::Axis(0), &idx)
    }
}

pub fn empirical_transitions(counts: &ContextCounts) -> EmpiricalTransitions {
    let (p, d) = counts.transition.dim();
    let mut pihat = Array2::from_elem((p, d), f64::NAN);
    let mut observed = vec![false; p];
    for j in 0..p {
        let total = counts.context_total[j];
        if total == 0 {
            continue;
        }
        observed[j] = true;
        for a in 0..d {
            pihat[[j, a]] = counts.transition[[j, a]] as f64 / total as f64;
        }
    }
    EmpiricalTransitions { pihat, observed }
}
