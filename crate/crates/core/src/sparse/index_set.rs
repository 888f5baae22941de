use crate::{Error, Result};

/// Sorted, duplicate-free set of indices below a fixed bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexSet {
    /// Builds a set from arbitrary indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::IndexOutOfRange { index: last, bound });
            }
        }
        Ok(Self { indices, bound })
    }

    pub fn empty(bound: usize) -> Self {
        Self { indices: Vec::new(), bound }
    }

    /// `{0, .., bound-1}`
    pub fn full(bound: usize) -> Self {
        Self { indices: (0..bound).collect(), bound }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Position of `index` within the set.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    /// Inserts an index, returning `true` if it was not already present.
    pub fn insert(&mut self, index: usize) -> Result<bool> {
        if index >= self.bound {
            return Err(Error::IndexOutOfRange { index, bound: self.bound });
        }
        match self.indices.binary_search(&index) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.indices.insert(pos, index);
                Ok(true)
            }
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        let (x, y) = (&self.indices, &other.indices);
        while a < x.len() && b < y.len() {
            match x[a].cmp(&y[b]) {
                std::cmp::Ordering::Less => {
                    out.push(x[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(y[b]);
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(x[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        out.extend_from_slice(&x[a..]);
        out.extend_from_slice(&y[b..]);
        IndexSet { indices: out, bound: self.bound.max(other.bound) }
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_dedups() {
        let s = IndexSet::new(vec![5, 1, 3, 1], 6).unwrap();
        assert_eq!(s.as_slice(), &[1, 3, 5]);
        assert!(s.contains(3));
        assert_eq!(s.position(5), Some(2));
    }

    #[test]
    fn rejects_out_of_bounds() {
        assert!(matches!(IndexSet::new(vec![0, 6], 6), Err(Error::IndexOutOfRange { index: 6, bound: 6 })));
        let mut s = IndexSet::empty(3);
        assert!(s.insert(3).is_err());
        assert!(s.insert(2).unwrap());
        assert!(!s.insert(2).unwrap());
    }

    #[test]
    fn union_merges() {
        let a = IndexSet::new(vec![0, 2, 4], 8).unwrap();
        let b = IndexSet::new(vec![1, 2, 7], 8).unwrap();
        assert_eq!(a.union(&b).as_slice(), &[0, 1, 2, 4, 7]);
        assert!(a.is_subset(&a.union(&b)));
    }
}
