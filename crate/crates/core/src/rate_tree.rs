//! Fenwick tree over non-negative integer weights.
//!
//! Weights in the particle simulator are particle counts and products of
//! counts, so selection is done on exact integers: draw `u` uniformly in
//! `0..total` and find the slot whose cumulative range contains it.

#[derive(Debug, Clone, Default)]
pub(crate) struct RateTree {
    /// 1-based Fenwick array; `tree.len() - 1` is the capacity.
    tree: Vec<u64>,
    values: Vec<u64>,
    total: u64,
}

impl RateTree {
    pub fn with_len(len: usize) -> Self {
        RateTree {
            tree: vec![0; len.next_power_of_two().max(1) + 1],
            values: vec![0; len],
            total: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, slot: usize) -> u64 {
        self.values[slot]
    }

    /// Append a zero-weight slot, growing the backing tree as needed.
    pub fn push_slot(&mut self) -> usize {
        let slot = self.values.len();
        self.values.push(0);
        if self.values.len() > self.capacity() {
            self.rebuild(self.capacity() * 2);
        }
        slot
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn rebuild(&mut self, capacity: usize) {
        self.tree = vec![0; capacity + 1];
        for i in 1..=capacity {
            if let Some(&v) = self.values.get(i - 1) {
                self.tree[i] += v;
            }
            let parent = i + (i & i.wrapping_neg());
            if parent <= capacity {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn set(&mut self, slot: usize, value: u64) {
        let old = self.values[slot];
        if old == value {
            return;
        }
        self.values[slot] = value;
        self.total = self.total - old + value;
        let cap = self.capacity();
        let mut i = slot + 1;
        if value > old {
            let delta = value - old;
            while i <= cap {
                self.tree[i] += delta;
                i += i & i.wrapping_neg();
            }
        } else {
            let delta = old - value;
            while i <= cap {
                self.tree[i] -= delta;
                i += i & i.wrapping_neg();
            }
        }
    }

    /// The slot `s` with `prefix(s) <= target < prefix(s) + value(s)`.
    ///
    /// `target` must be below [`total`](Self::total).
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let cap = self.capacity();
        let mut pos = 0;
        let mut step = cap;
        while step > 0 {
            let next = pos + step;
            if next <= cap && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn find_walks_cumulative_ranges() {
        let mut t = RateTree::with_len(5);
        for (i, w) in [3, 0, 2, 0, 1].iter().enumerate() {
            t.set(i, *w);
        }
        assert_eq!(t.total(), 6);
        let picks: Vec<usize> = (0..6).map(|u| t.find(u)).collect();
        assert_eq!(picks, vec![0, 0, 0, 2, 2, 4]);
    }

    #[test]
    fn growth_keeps_weights() {
        let mut t = RateTree::with_len(1);
        t.set(0, 4);
        for k in 1..40 {
            let s = t.push_slot();
            t.set(s, k);
        }
        assert_eq!(t.total(), 4 + (1..40).sum::<u64>());
        assert_eq!(t.find(0), 0);
        assert_eq!(t.find(4), 1);
        assert_eq!(t.find(t.total() - 1), 39);
    }

    proptest! {
        #[test]
        fn find_matches_linear_scan(weights in proptest::collection::vec(0u64..5, 1..60), updates in proptest::collection::vec((0usize..60, 0u64..7), 0..30)) {
            let mut t = RateTree::with_len(weights.len());
            let mut w = weights.clone();
            for (i, v) in weights.iter().enumerate() { t.set(i, *v); }
            for (i, v) in updates { let i = i % w.len(); w[i] = v; t.set(i, v); }
            let total: u64 = w.iter().sum();
            prop_assert_eq!(t.total(), total);
            let mut acc = 0;
            for (i, &wi) in w.iter().enumerate() {
                for u in acc..acc + wi { prop_assert_eq!(t.find(u), i); }
                acc += wi;
            }
        }
    }
}
