//! Fixed-size Fenwick tree over non-negative weights, used for O(log n)
//! weighted index sampling.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub struct FenwickTree {
    // 1-based; tree[0] unused
    tree: Vec<f64>,
}

#[inline(always)]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl FenwickTree {
    pub fn with_len(len: usize) -> Self {
        Self { tree: vec![0.0; len + 1] }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += lsb(i);
        }
    }

    /// Sum of weights `0..=idx`.
    pub fn prefix_sum(&self, idx: usize) -> f64 {
        let mut i = idx + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= lsb(i);
        }
        s
    }

    /// Smallest `idx` with `prefix_sum(idx) > target`, clamped to `limit - 1`
    /// when rounding pushes the target past the stored mass of `0..limit`.
    pub fn find(&self, mut target: f64, limit: usize) -> usize {
        let n = self.len();
        let mut pos = 0usize;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(limit - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_and_search() {
        let w = [3.0, 0.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let mut f = FenwickTree::with_len(w.len());
        for (i, &x) in w.iter().enumerate() {
            f.add(i, x);
        }
        let mut cum = 0.0;
        for (i, &x) in w.iter().enumerate() {
            cum += x;
            assert_eq!(f.prefix_sum(i), cum);
        }
        assert_eq!(f.find(0.0, 7), 0);
        assert_eq!(f.find(2.999, 7), 0);
        assert_eq!(f.find(3.0, 7), 2); // index 1 has zero weight
        assert_eq!(f.find(22.9, 7), 6);
        assert_eq!(f.find(1e9, 7), 6);
        assert_eq!(f.find(1e9, 4), 3);
    }
}
