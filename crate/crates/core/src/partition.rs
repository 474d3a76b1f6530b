use serde::{Deserialize, Serialize};

/// Cluster labels in canonical form: ids are `0..k` and assigned in order of
/// first appearance, so two equal partitions have equal label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionLabels {
    labels: Vec<usize>,
    k: usize,
}

impl PartitionLabels {
    /// Canonicalize arbitrary labels.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: seen.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            k: n,
        }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of each cluster, in label order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Labels restricted to `indices`, re-canonicalized.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let sub: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_labels(&sub)
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &PartitionLabels) -> bool {
        if self.len() != coarser.len() {
            return false;
        }
        let mut image = vec![None; self.k];
        self.labels
            .iter()
            .zip(&coarser.labels)
            .all(|(&a, &b)| *image[a].get_or_insert(b) == b)
    }

    pub fn is_balanced(&self) -> bool {
        let sizes = self.sizes();
        sizes.windows(2).all(|w| w[0] == w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_first_seen_order() {
        let p = PartitionLabels::from_labels(&[7, 7, 2, 9, 2]);
        assert_eq!(p.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.k(), 3);
        assert_eq!(p.groups(), vec![vec![0, 1], vec![2, 4], vec![3]]);
    }

    #[test]
    fn refinement() {
        let fine = PartitionLabels::from_labels(&[0, 0, 1, 2]);
        let coarse = PartitionLabels::from_labels(&[0, 0, 1, 1]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
        assert!(PartitionLabels::singletons(4).refines(&coarse));
        assert!(coarse.refines(&PartitionLabels::single_cluster(4)));
    }
}
