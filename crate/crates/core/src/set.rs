//! Dense vertex sets keyed by stable vertex index.

use std::fmt;

use fixedbitset::FixedBitSet;

use crate::game::VertexId;

/// A set of vertices backed by a bitset. Capacity grows on insert.
#[derive(Clone, Default)]
pub struct VertexSet(FixedBitSet);

impl VertexSet {
    pub fn empty(capacity: usize) -> Self {
        VertexSet(FixedBitSet::with_capacity(capacity))
    }

    pub fn full(capacity: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(capacity);
        bits.insert_range(..);
        VertexSet(bits)
    }

    pub fn from_ids<I: IntoIterator<Item = VertexId>>(capacity: usize, ids: I) -> Self {
        let mut set = VertexSet::empty(capacity);
        for v in ids {
            set.insert(v);
        }
        set
    }

    pub fn capacity(&self) -> usize {
        self.0.len()
    }

    pub fn grow(&mut self, capacity: usize) {
        if capacity > self.0.len() {
            self.0.grow(capacity);
        }
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.0.contains(v.index())
    }

    #[inline]
    pub fn insert(&mut self, v: VertexId) -> bool {
        let i = v.index();
        if i >= self.0.len() {
            self.0.grow(i + 1);
        }
        !self.0.put(i)
    }

    #[inline]
    pub fn remove(&mut self, v: VertexId) -> bool {
        let i = v.index();
        if i >= self.0.len() {
            return false;
        }
        let was = self.0.contains(i);
        self.0.set(i, false);
        was
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.ones().next().is_none()
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.ones().map(|i| VertexId(i as u32))
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        self.0.union_with(&other.0);
    }

    pub fn intersect_with(&mut self, other: &VertexSet) {
        self.0.intersect_with(&other.0);
    }

    pub fn difference_with(&mut self, other: &VertexSet) {
        self.0.difference_with(&other.0);
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mut out = self.clone();
        out.intersect_with(other);
        out
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mut out = self.clone();
        out.difference_with(other);
        out
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.ones().all(|i| other.0.contains(i))
    }

    pub fn to_vec(&self) -> Vec<VertexId> {
        self.iter().collect()
    }
}

impl PartialEq for VertexSet {
    fn eq(&self, other: &Self) -> bool {
        self.0.symmetric_difference(&other.0).next().is_none()
    }
}

impl Eq for VertexSet {}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet::from_ids(0, iter)
    }
}
