use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("particles {0} and {1} already share a cluster")]
    AlreadyMerged(usize, usize),
    #[error("particle index {index} out of range for {n} particles")]
    OutOfRange { index: usize, n: usize },
}

/// One coarsening step of the partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub t: f64,
    /// Representatives of the two clusters before the union.
    pub a: usize,
    pub b: usize,
}

/// Disjoint sets over particle indices; clusters of particles that have stuck.
///
/// Unions are never undone. Union is by size, ties going to the smaller root
/// index, so the resulting representatives depend only on the merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    parent: Vec<usize>,
    rank: Vec<u32>,
    size: Vec<usize>,
    merge_log: Vec<MergeRecord>,
}

impl ClusterPartition {
    pub fn singletons(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            merge_log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn compress(&mut self, i: usize) -> usize {
        let root = self.find(i);
        let mut j = i;
        while self.parent[j] != root {
            let next = self.parent[j];
            self.parent[j] = root;
            j = next;
        }
        root
    }

    pub fn same(&self, i: usize, j: usize) -> bool {
        self.find(i) == self.find(j)
    }

    /// Member count of the cluster containing `i`.
    pub fn size_of(&self, i: usize) -> usize {
        self.size[self.find(i)]
    }

    /// Merges the clusters of `i` and `j` at time `t`; returns the new root.
    pub fn union(&mut self, i: usize, j: usize, t: f64) -> Result<usize, PartitionError> {
        let n = self.len();
        for index in [i, j] {
            if index >= n {
                return Err(PartitionError::OutOfRange { index, n });
            }
        }
        let ri = self.compress(i);
        let rj = self.compress(j);
        if ri == rj {
            return Err(PartitionError::AlreadyMerged(i, j));
        }
        let (a, b) = (ri.min(rj), ri.max(rj));
        let (root, child) = match self.size[a].cmp(&self.size[b]) {
            std::cmp::Ordering::Less => (b, a),
            _ => (a, b),
        };
        self.parent[child] = root;
        self.size[root] += self.size[child];
        self.rank[root] = self.rank[root].max(self.rank[child] + 1);
        self.merge_log.push(MergeRecord { t, a, b });
        Ok(root)
    }

    /// Cluster representatives in increasing index order.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parent[i] == i).collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.roots().len()
    }

    /// Members of each cluster, indexed like [`roots`](Self::roots).
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let roots = self.roots();
        let mut slot = vec![usize::MAX; self.len()];
        for (k, &r) in roots.iter().enumerate() {
            slot[r] = k;
        }
        let mut out = vec![Vec::new(); roots.len()];
        for i in 0..self.len() {
            out[slot[self.find(i)]].push(i);
        }
        out
    }

    pub fn merge_log(&self) -> &[MergeRecord] {
        &self.merge_log
    }

    pub fn merge_count(&self) -> usize {
        self.merge_log.len()
    }

    /// True when every cluster of `self` lies inside a cluster of `coarser`,
    /// i.e. `coarser` was obtained from `self` by merges only.
    pub fn is_refinement_of(&self, coarser: &ClusterPartition) -> bool {
        self.len() == coarser.len()
            && (0..self.len()).all(|i| coarser.same(i, self.find(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn union_and_sizes() {
        let mut p = ClusterPartition::singletons(4);
        assert_eq!(p.cluster_count(), 4);
        p.union(0, 2, 1.0).unwrap();
        assert!(p.same(0, 2));
        assert_eq!(p.size_of(2), 2);
        assert_eq!(p.union(2, 0, 1.5), Err(PartitionError::AlreadyMerged(2, 0)));
        p.union(3, 2, 2.0).unwrap();
        assert_eq!(p.size_of(3), 3);
        assert_eq!(p.clusters(), vec![vec![0, 2, 3], vec![1]]);
        assert_eq!(p.merge_count(), 2);
        assert!(matches!(p.union(0, 9, 3.0), Err(PartitionError::OutOfRange { .. })));
    }

    #[test]
    fn refinement_relation() {
        let fine = ClusterPartition::singletons(3);
        let mut coarse = fine.clone();
        coarse.union(0, 1, 0.5).unwrap();
        assert!(fine.is_refinement_of(&coarse));
        assert!(!coarse.is_refinement_of(&fine));
    }

    proptest! {
        #[test]
        fn sizes_sum_and_coarsening(n in 1usize..30, ops in proptest::collection::vec((0usize..30, 0usize..30), 0..60)) {
            let mut p = ClusterPartition::singletons(n);
            let mut t = 0.0;
            for (i, j) in ops {
                let (i, j) = (i % n, j % n);
                let before = p.clone();
                t += 1.0;
                if p.union(i, j, t).is_ok() {
                    prop_assert!(before.is_refinement_of(&p));
                    prop_assert_eq!(p.cluster_count() + 1, before.cluster_count());
                }
                let total: usize = p.roots().iter().map(|&r| p.size_of(r)).sum();
                prop_assert_eq!(total, n);
            }
            prop_assert!(p.merge_count() < n.max(1));
        }
    }
}
