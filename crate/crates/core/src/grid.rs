//! Uniform grid partition of a box-shaped state domain.
//!
//! Cells are half-open `[lo, hi)` in every dimension except on the domain's
//! upper face, which belongs to the last cell. Points outside the domain map
//! to the sink cell, whose index is `cell_count()`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::HyperBox;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs a nonempty domain with matching cell counts")]
    BadGrid,
    #[error("box lies entirely outside the gridded domain")]
    OutOfDomain,
    #[error("malformed grid description {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPartition {
    domain: HyperBox,
    cells_per_dim: Vec<usize>,
}

impl GridPartition {
    pub fn new(domain: HyperBox, cells_per_dim: Vec<usize>) -> Result<Self, GridError> {
        let ok = !domain.is_empty()
            && domain.dim() == cells_per_dim.len()
            && domain.dim() > 0
            && cells_per_dim.iter().all(|n| *n > 0)
            && (0..domain.dim()).all(|d| domain.hi[d] > domain.lo[d]);
        if !ok {
            return Err(GridError::BadGrid);
        }
        Ok(GridPartition { domain, cells_per_dim })
    }

    /// Parses `lo:hi:n,lo:hi:n,…`, one triple per dimension.
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let bad = || GridError::Parse(text.to_string());
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut n = Vec::new();
        for part in text.split(',') {
            let f: Vec<&str> = part.trim().split(':').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            lo.push(f[0].parse::<f64>().map_err(|_| bad())?);
            hi.push(f[1].parse::<f64>().map_err(|_| bad())?);
            n.push(f[2].parse::<usize>().map_err(|_| bad())?);
        }
        GridPartition::new(HyperBox::new(lo, hi), n)
    }

    pub fn domain(&self) -> &HyperBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.cells_per_dim.len()
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    pub fn sink(&self) -> CellId {
        CellId(self.cell_count() as u32)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.cell_count() as u32).map(CellId)
    }

    /// Coordinate of the `j`-th cell boundary along dimension `d`.
    #[inline]
    pub fn edge(&self, d: usize, j: usize) -> f64 {
        let n = self.cells_per_dim[d];
        if j >= n {
            return self.domain.hi[d];
        }
        let (lo, hi) = (self.domain.lo[d], self.domain.hi[d]);
        lo + (hi - lo) * j as f64 / n as f64
    }

    /// Per-dimension coordinates; dimension 0 varies fastest.
    pub fn coords(&self, s: CellId) -> Vec<usize> {
        let mut rest = s.index();
        self.cells_per_dim
            .iter()
            .map(|n| {
                let c = rest % n;
                rest /= n;
                c
            })
            .collect()
    }

    pub fn from_coords(&self, coords: &[usize]) -> CellId {
        let mut id = 0usize;
        for (d, c) in coords.iter().enumerate().rev() {
            id = id * self.cells_per_dim[d] + c;
        }
        CellId(id as u32)
    }

    pub fn cell_box(&self, s: CellId) -> HyperBox {
        let c = self.coords(s);
        let lo = (0..self.dim()).map(|d| self.edge(d, c[d])).collect();
        let hi = (0..self.dim()).map(|d| self.edge(d, c[d] + 1)).collect();
        HyperBox::new(lo, hi)
    }

    fn index_along(&self, d: usize, x: f64) -> Option<usize> {
        let (lo, hi) = (self.domain.lo[d], self.domain.hi[d]);
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let n = self.cells_per_dim[d];
        let mut j = (((x - lo) / (hi - lo)) * n as f64).floor() as usize;
        j = j.min(n - 1);
        while j > 0 && x < self.edge(d, j) {
            j -= 1;
        }
        while j + 1 < n && x >= self.edge(d, j + 1) {
            j += 1;
        }
        Some(j)
    }

    /// The cell containing `x`, or the sink if `x` is outside the domain.
    pub fn translate(&self, x: &[f64]) -> CellId {
        if x.len() != self.dim() {
            return self.sink();
        }
        let mut coords = Vec::with_capacity(self.dim());
        for (d, xd) in x.iter().enumerate() {
            match self.index_along(d, *xd) {
                Some(j) => coords.push(j),
                None => return self.sink(),
            }
        }
        self.from_coords(&coords)
    }

    /// Inclusive index range of cells whose closed extent meets `[a, b]` along `d`.
    fn meeting(&self, d: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let n = self.cells_per_dim[d];
        let first = (0..n).find(|j| self.edge(d, j + 1) >= a)?;
        let last = (0..n).rev().find(|j| self.edge(d, *j) <= b)?;
        (first <= last).then_some((first, last))
    }

    /// Inclusive index range of cells whose closed extent lies inside `[a, b]` along `d`.
    fn inside(&self, d: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let n = self.cells_per_dim[d];
        let first = (0..n).find(|j| self.edge(d, *j) >= a)?;
        let last = (0..n).rev().find(|j| self.edge(d, j + 1) <= b)?;
        (first <= last).then_some((first, last))
    }

    fn product(&self, ranges: &[(usize, usize)]) -> Vec<CellId> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.from_coords(&cur));
            let mut d = 0;
            loop {
                if d == ranges.len() {
                    out.sort();
                    return out;
                }
                if cur[d] < ranges[d].1 {
                    cur[d] += 1;
                    break;
                }
                cur[d] = ranges[d].0;
                d += 1;
            }
        }
    }

    /// Cells whose closed region intersects the closed box, sorted.
    pub fn cells_meeting(&self, b: &HyperBox) -> Vec<CellId> {
        if b.is_empty() {
            return Vec::new();
        }
        let mut ranges = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            match self.meeting(d, b.lo[d], b.hi[d]) {
                Some(r) => ranges.push(r),
                None => return Vec::new(),
            }
        }
        self.product(&ranges)
    }

    /// Cells whose closed region is contained in the closed box, sorted.
    pub fn cells_within(&self, b: &HyperBox) -> Vec<CellId> {
        if b.is_empty() {
            return Vec::new();
        }
        let mut ranges = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            match self.inside(d, b.lo[d], b.hi[d]) {
                Some(r) => ranges.push(r),
                None => return Vec::new(),
            }
        }
        self.product(&ranges)
    }

    /// True if some point of the box lies outside the domain.
    pub fn leaves_domain(&self, b: &HyperBox) -> bool {
        !b.is_empty()
            && (0..self.dim()).any(|d| b.lo[d] < self.domain.lo[d] || b.hi[d] > self.domain.hi[d])
    }
}
