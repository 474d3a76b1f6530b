//! Rand Index and Adjusted Rand Index from a contingency table.

use std::collections::HashMap;

use crate::error::{Result, SmmError};

/// Overlap counts `n_ij = |X_i ∩ Y_j|` between two labelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub cells: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new<A, B>(left: &[A], right: &[B]) -> Result<Self>
    where
        A: Eq + std::hash::Hash + Clone,
        B: Eq + std::hash::Hash + Clone,
    {
        if left.len() != right.len() {
            return Err(SmmError::MismatchedElements {
                left: left.len(),
                right: right.len(),
            });
        }
        let rows = index_labels(left);
        let cols = index_labels(right);
        let nrows = rows.iter().max().map_or(0, |m| m + 1);
        let ncols = cols.iter().max().map_or(0, |m| m + 1);
        let mut cells = vec![vec![0u64; ncols]; nrows];
        for (&r, &c) in rows.iter().zip(&cols) {
            cells[r][c] += 1;
        }
        let row_sums = cells.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..ncols).map(|c| cells.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            cells,
            row_sums,
            col_sums,
            total: left.len() as u64,
        })
    }

    /// Pairs placed together in both labelings.
    fn together_both(&self) -> u64 {
        self.cells.iter().flatten().map(|&n| choose2(n)).sum()
    }

    fn together_rows(&self) -> u64 {
        self.row_sums.iter().map(|&n| choose2(n)).sum()
    }

    fn together_cols(&self) -> u64 {
        self.col_sums.iter().map(|&n| choose2(n)).sum()
    }
}

fn index_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.clone()).or_insert(next)
        })
        .collect()
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(SmmError::DegenerateInput(format!(
            "need at least 2 elements to compare partitions, got {n}"
        )));
    }
    Ok(())
}

/// Fraction of element pairs on which the two labelings agree (together in
/// both, or apart in both).
pub fn rand_index<A, B>(left: &[A], right: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash + Clone,
    B: Eq + std::hash::Hash + Clone,
{
    let t = ContingencyTable::new(left, right)?;
    check_size(left.len())?;
    let pairs = choose2(t.total);
    let same_both = t.together_both();
    // apart in both = all - together in left - together in right + together in both
    let apart_both = pairs + same_both - t.together_rows() - t.together_cols();
    Ok((same_both + apart_both) as f64 / pairs as f64)
}

/// Chance-corrected Rand index. When the expected and maximum index
/// coincide (both labelings all-singletons, or both one cluster) the value
/// is 1 for identical labelings and 0 otherwise.
pub fn adjusted_rand_index<A, B>(left: &[A], right: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash + Clone,
    B: Eq + std::hash::Hash + Clone,
{
    let t = ContingencyTable::new(left, right)?;
    check_size(left.len())?;
    let pairs = choose2(t.total) as f64;
    let index = t.together_both() as f64;
    let rows = t.together_rows() as f64;
    let cols = t.together_cols() as f64;
    let expected = rows * cols / pairs;
    let max_index = 0.5 * (rows + cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        let identical = index_labels(left) == index_labels(right);
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions() {
        let p = [0, 0, 1, 2, 2];
        assert_eq!(rand_index(&p, &p).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        // relabeling does not matter
        assert_eq!(adjusted_rand_index(&p, &[5, 5, 3, 9, 9]).unwrap(), 1.0);
    }

    #[test]
    fn rand_two_thirds() {
        let p = [0, 0, 1];
        let q = [0, 1, 2];
        assert!((rand_index(&p, &q).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singletons_vs_one_cluster() {
        let p = [0, 1, 2, 3];
        let q = [0, 0, 0, 0];
        assert_eq!(rand_index(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn crossed_pairs_ari() {
        let p = [0, 0, 1, 1];
        let q = [0, 1, 0, 1];
        assert!((adjusted_rand_index(&p, &q).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_denominator() {
        let s = [0, 1, 2];
        let one = [0, 0, 0];
        assert_eq!(adjusted_rand_index(&s, &s).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            rand_index(&[0, 1], &[0, 1, 2]),
            Err(SmmError::MismatchedElements { left: 2, right: 3 })
        ));
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
    }
}
