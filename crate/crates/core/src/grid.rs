//! Regular sampling lattices and scalar fields on them.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::io::{header, write_row};
use crate::{is_inf, INF};

/// Axis-aligned lattice with `counts[i]` nodes on axis `i`, both ends included.
/// Nodes are enumerated row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::InvalidInput("grid lo, hi and counts must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("grid needs lo < hi on every axis".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidInput("grid needs at least 2 nodes per axis".into()));
        }
        Ok(Self { lo, hi, counts })
    }

    /// One-dimensional grid on `[lo, hi]` with `n` nodes.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn cell_diag(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the nearest node (coordinates clamped into the grid).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|axis| {
                let r = ((x[axis] - self.lo[axis]) / self.spacing(axis)).round();
                r.clamp(0.0, (self.counts[axis] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&idx)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Flat indices of the `2·dim` axis neighbors that exist.
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let idx = self.multi_index(flat);
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            if idx[axis] > 0 {
                let mut j = idx.clone();
                j[axis] -= 1;
                out.push(self.flat_index(&j));
            }
            if idx[axis] + 1 < self.counts[axis] {
                let mut j = idx.clone();
                j[axis] += 1;
                out.push(self.flat_index(&j));
            }
        }
        out
    }
}

/// Per-node scalar values; `in_domain[k]` is false for nodes outside the set
/// the field was computed on. Values use the [`INF`] sentinel for `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub in_domain: Vec<bool>,
}

/// Exit, hitting and margin times live on grids.
pub type TimeField = GridField;

impl GridField {
    pub fn new(grid: GridSpec, values: Vec<f64>, in_domain: Vec<bool>) -> Self {
        assert_eq!(grid.len(), values.len());
        assert_eq!(grid.len(), in_domain.len());
        Self { grid, values, in_domain }
    }

    /// Tabulates `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.node(k))).collect();
        let in_domain = vec![true; grid.len()];
        Self::new(grid, values, in_domain)
    }

    pub fn value_at_node(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Nodes in the domain whose value passes `pred`.
    pub fn select(&self, pred: impl Fn(f64) -> bool) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&k| self.in_domain[k] && pred(self.values[k]))
            .collect()
    }

    /// Multilinear interpolation; `None` outside the grid or when a corner
    /// with positive weight lies outside the domain. Returns [`INF`] if such
    /// a corner carries the sentinel.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let d = g.dim();
        if x.len() != d || !g.contains(x) {
            return None;
        }
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for axis in 0..d {
            let r = (x[axis] - g.lo[axis]) / g.spacing(axis);
            let top = (g.counts[axis] - 1) as f64;
            let i = r.floor().clamp(0.0, top - 1.0);
            base[axis] = i as usize;
            frac[axis] = (r - i).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        let mut infinite = false;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for axis in 0..d {
                if corner >> axis & 1 == 1 {
                    w *= frac[axis];
                    idx[axis] += 1;
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            if w == 0.0 {
                continue;
            }
            let k = g.flat_index(&idx);
            if !self.in_domain[k] {
                return None;
            }
            let v = self.values[k];
            if is_inf(v) {
                infinite = true;
            } else {
                acc += w * v;
            }
        }
        Some(if infinite { INF } else { acc })
    }

    /// CSV `x1,...,xn,value` in row-major node order; out-of-domain nodes
    /// are skipped.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", header(&[], "x", self.grid.dim(), &["value"]))?;
        for k in 0..self.values.len() {
            if !self.in_domain[k] {
                continue;
            }
            let mut row = self.grid.node(k);
            row.push(self.values[k]);
            write_row(&mut w, row)?;
        }
        Ok(())
    }
}
