//! Small index structures for O(1)/O(log n) event selection.

/// Fenwick tree over nonnegative weights with prefix search.
#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
    positive: usize,
    updates: u32,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Self {
            tree: vec![0.0; n + 1],
            values: vec![0.0; n],
            positive: 0,
            updates: 0,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.values[i];
        if delta == 0.0 {
            return;
        }
        match (self.values[i] > 0.0, value > 0.0) {
            (false, true) => self.positive += 1,
            (true, false) => self.positive -= 1,
            _ => {}
        }
        self.values[i] = value;
        self.updates += 1;
        if self.updates >= 1 << 20 {
            self.rebuild();
            return;
        }
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn rebuild(&mut self) {
        self.updates = 0;
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.values.len() {
            let mut j = i + 1;
            while j < self.tree.len() {
                self.tree[j] += self.values[i];
                j += j & j.wrapping_neg();
            }
        }
    }

    pub fn total(&self) -> f64 {
        if self.positive == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        let mut j = self.values.len();
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s.max(0.0)
    }

    /// Index `i` with `prefix(i) <= target < prefix(i+1)`, skipping zero weights.
    pub fn find(&self, target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        let mut i = pos.min(n - 1);
        // Round-off may land on an empty slot; move to the nearest positive one.
        if self.values[i] <= 0.0 {
            if let Some(j) = (i..n).find(|&j| self.values[j] > 0.0) {
                i = j;
            } else if let Some(j) = (0..i).rev().find(|&j| self.values[j] > 0.0) {
                i = j;
            }
        }
        i
    }
}

/// Exact integer Fenwick tree for uniform particle selection by count.
#[derive(Debug, Clone)]
pub(crate) struct CountTree {
    tree: Vec<u64>,
    n: usize,
}

impl CountTree {
    pub fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
            n,
        }
    }

    pub fn add(&mut self, i: usize, delta: i64) {
        let mut j = i + 1;
        while j <= self.n {
            self.tree[j] = (self.tree[j] as i64 + delta) as u64;
            j += j & j.wrapping_neg();
        }
    }

    /// Site holding the `rank`-th particle (0-based) in site order.
    pub fn find(&self, rank: u64) -> usize {
        let mut pos = 0;
        let mut rem = rank;
        let mut step = self.n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= self.n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Set of sites with O(1) insert, remove and uniform indexing.
#[derive(Debug, Clone)]
pub(crate) struct SiteSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SiteSet {
    pub fn new(n: usize) -> Self {
        Self {
            items: Vec::new(),
            slot: vec![ABSENT; n],
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.slot[s] != ABSENT
    }

    pub fn position(&self, s: usize) -> Option<usize> {
        let p = self.slot[s];
        (p != ABSENT).then_some(p as usize)
    }

    pub fn insert(&mut self, s: usize) {
        if self.slot[s] == ABSENT {
            self.slot[s] = self.items.len() as u32;
            self.items.push(s as u32);
        }
    }

    pub fn remove(&mut self, s: usize) {
        let p = self.slot[s];
        if p == ABSENT {
            return;
        }
        let last = self.items.pop().unwrap();
        if last as usize != s {
            self.items[p as usize] = last;
            self.slot[last as usize] = p;
        }
        self.slot[s] = ABSENT;
    }

    pub fn get(&self, i: usize) -> usize {
        self.items[i] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|&s| s as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn count_tree_matches_linear_scan(counts in proptest::collection::vec(0u64..4, 1..40)) {
            let mut t = CountTree::new(counts.len());
            for (i, &c) in counts.iter().enumerate() {
                t.add(i, c as i64);
            }
            let total: u64 = counts.iter().sum();
            for rank in 0..total {
                let mut acc = 0;
                let want = counts.iter().position(|&c| { acc += c; rank < acc }).unwrap();
                prop_assert_eq!(t.find(rank), want);
            }
        }

        #[test]
        fn fenwick_finds_positive_slot(weights in proptest::collection::vec(0u8..3, 1..40), u in 0.0f64..1.0) {
            let mut f = Fenwick::new(weights.len());
            for (i, &w) in weights.iter().enumerate() {
                f.set(i, w as f64 * 0.5);
            }
            let total = f.total();
            prop_assume!(total > 0.0);
            let i = f.find(u * total);
            prop_assert!(f.get(i) > 0.0);
            let before: f64 = (0..i).map(|j| f.get(j)).sum();
            prop_assert!(before <= u * total + 1e-12);
            prop_assert!(u * total < before + f.get(i) + 1e-12);
        }
    }

    #[test]
    fn site_set_ops() {
        let mut s = SiteSet::new(10);
        s.insert(3);
        s.insert(7);
        s.insert(3);
        assert_eq!(s.len(), 2);
        s.remove(3);
        assert!(!s.contains(3));
        assert!(s.contains(7));
        assert_eq!(s.get(0), 7);
        s.remove(9);
        assert_eq!(s.len(), 1);
    }
}
