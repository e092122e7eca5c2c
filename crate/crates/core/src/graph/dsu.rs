//! Union-find over dense vertex ids with reusable storage.

const NONE: u32 = u32::MAX;

/// Disjoint sets with union by size and path halving.
///
/// The buffers survive [`DisjointSets::reset`], so a sampler can keep one
/// instance and avoid allocating on every step.
#[derive(Debug, Clone, Default)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
    root_label: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        let mut sets = DisjointSets::default();
        sets.reset(n);
        sets
    }

    /// Makes every element in `0..n` a singleton again.
    pub fn reset(&mut self, n: usize) {
        assert!(n < NONE as usize, "too many elements for u32 ids");
        self.parent.clear();
        self.parent.extend(0..n as u32);
        self.size.clear();
        self.size.resize(n, 1);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    /// Writes, for every element, the smallest element of its set.
    pub fn canonical_labels(&mut self, labels: &mut Vec<u32>) {
        let n = self.parent.len();
        self.root_label.clear();
        self.root_label.resize(n, NONE);
        labels.clear();
        labels.reserve(n);
        for v in 0..n as u32 {
            let r = self.find(v) as usize;
            if self.root_label[r] == NONE {
                self.root_label[r] = v;
            }
            labels.push(self.root_label[r]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_and_labels() {
        let mut d = DisjointSets::new(6);
        assert!(d.union(4, 2));
        assert!(d.union(5, 4));
        assert!(!d.union(2, 5));
        assert!(d.union(1, 0));
        let mut labels = Vec::new();
        d.canonical_labels(&mut labels);
        assert_eq!(labels, vec![0, 0, 2, 3, 2, 2]);

        d.reset(3);
        d.canonical_labels(&mut labels);
        assert_eq!(labels, vec![0, 1, 2]);
    }
}
