//! Fixed-width variable sets backed by `u64` words.

use crate::cnf::Var;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct VarSet {
    words: Vec<u64>,
}

#[inline]
pub(crate) fn words_for(num_vars: u32) -> usize {
    (num_vars as usize).div_ceil(64)
}

impl VarSet {
    pub fn new(num_vars: u32) -> Self {
        VarSet {
            words: vec![0; words_for(num_vars)],
        }
    }

    pub fn full(num_vars: u32) -> Self {
        let mut s = Self::new(num_vars);
        for slot in 0..num_vars as usize {
            s.words[slot / 64] |= 1 << (slot % 64);
        }
        s
    }

    pub fn insert(&mut self, var: Var) {
        let slot = var.slot();
        self.words[slot / 64] |= 1 << (slot % 64);
    }

    pub fn contains(&self, var: Var) -> bool {
        let slot = var.slot();
        self.words
            .get(slot / 64)
            .is_some_and(|w| (w >> (slot % 64)) & 1 == 1)
    }

    pub fn union_with(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_disjoint(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &VarSet) -> VarSet {
        VarSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Variables in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(Var::from_slot(wi * 64 + tz))
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let v = |i| Var::new(i).unwrap();
        let mut a = VarSet::new(70);
        a.insert(v(1));
        a.insert(v(66));
        let mut b = VarSet::new(70);
        b.insert(v(2));
        assert!(a.is_disjoint(&b));
        b.union_with(&a);
        assert_eq!(b.iter().map(Var::index).collect::<Vec<_>>(), vec![1, 2, 66]);
        assert_eq!(b.difference(&a).iter().collect::<Vec<_>>(), vec![v(2)]);
        assert!(!a.is_disjoint(&b));
        assert_eq!(VarSet::full(70).len(), 70);
        assert!(VarSet::new(0).is_empty());
    }
}
