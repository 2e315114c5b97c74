//! Spatial rough paths on dyadic grids.
//!
//! A [`RoughSlice`] stores the prefix lifts `A_{0, x_j}` of a path over the
//! nodes `x_j = j / 2^K`; every increment is rebuilt as
//! `A_{x_i, x_j} = A_{0, x_i}⁻¹ ⊗ A_{0, x_j}`, so Chen's identity holds by
//! construction. A [`RoughSheet`] is a time-indexed family of slices together
//! with the initial-value path `t ↦ a(t, 0)`.

mod codec;
mod norms;

pub use codec::{read_sheet_binary, write_sheet_binary, SheetRecord};
pub use norms::{
    besov_distance, besov_norm, embedding_ratio, holder_distance, holder_norm,
    spacetime_besov_distance, spacetime_besov_norm, EmbeddingReport, Level, SpacetimeBesov,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupElement};

/// Values of an `R^d`-valued path at the dyadic nodes `j / 2^K`, `j = 0..=2^K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSlice {
    dim: usize,
    grid_level: u32,
    values: Vec<f64>,
}

impl PathSlice {
    /// `values` is node-major: entry `j * dim + c` is component `c` at node `j`.
    pub fn new(dim: usize, grid_level: u32, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let nodes = node_count(grid_level)?;
        if values.len() != nodes * dim {
            return Err(Error::GridMismatch(format!(
                "slice at level {grid_level} with d={dim} needs {} values, got {}",
                nodes * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "slice value at node {}, component {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(PathSlice {
            dim,
            grid_level,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }
}

pub(crate) fn node_count(grid_level: u32) -> Result<usize> {
    if grid_level > 24 {
        return Err(Error::ResourceLimit(format!(
            "spatial grid level {grid_level} exceeds the supported maximum of 24"
        )));
    }
    Ok((1usize << grid_level) + 1)
}

/// Prefix lifts `A_{0, x_j}` of a path over a dyadic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughSlice {
    dim: usize,
    grid_level: u32,
    /// `nodes * dim`
    level1: Vec<f64>,
    /// `nodes * dim * dim`, each block row-major.
    level2: Vec<f64>,
    initial_value: Vec<f64>,
}

impl RoughSlice {
    /// The constant path at `initial_value`: every prefix is the unit.
    pub fn constant(initial_value: Vec<f64>, grid_level: u32) -> Result<Self> {
        let dim = initial_value.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let nodes = node_count(grid_level)?;
        Ok(RoughSlice {
            dim,
            grid_level,
            level1: vec![0.0; nodes * dim],
            level2: vec![0.0; nodes * dim * dim],
            initial_value,
        })
    }

    /// Assembles a slice from raw prefix arrays, checking shape, `prefix[0] =
    /// unit` and geometricity of every prefix.
    pub fn from_prefixes(
        dim: usize,
        grid_level: u32,
        level1: Vec<f64>,
        level2: Vec<f64>,
        initial_value: Vec<f64>,
    ) -> Result<Self> {
        let nodes = node_count(grid_level)?;
        if dim == 0 || initial_value.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: initial_value.len(),
            });
        }
        if level1.len() != nodes * dim || level2.len() != nodes * dim * dim {
            return Err(Error::GridMismatch(format!(
                "prefix arrays of length {} / {} do not match {nodes} nodes with d={dim}",
                level1.len(),
                level2.len()
            )));
        }
        if level1
            .iter()
            .chain(&level2)
            .chain(&initial_value)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("rough slice prefixes".into()));
        }
        if level1[..dim]
            .iter()
            .chain(&level2[..dim * dim])
            .any(|&v| v != 0.0)
        {
            return Err(Error::Format(
                "first prefix must be the unit element".into(),
            ));
        }
        let slice = RoughSlice {
            dim,
            grid_level,
            level1,
            level2,
            initial_value,
        };
        for j in 0..nodes {
            let (a1, a2) = slice.prefix_parts(j);
            let defect = group::symmetric_defect(dim, a1, a2);
            if defect > group::geometric_tolerance(a1) {
                return Err(Error::NonGeometric { violation: defect });
            }
        }
        Ok(slice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn nodes(&self) -> usize {
        self.level1.len() / self.dim
    }

    pub fn mesh(&self) -> f64 {
        1.0 / (1u64 << self.grid_level) as f64
    }

    pub fn initial_value(&self) -> &[f64] {
        &self.initial_value
    }

    pub fn level1_prefixes(&self) -> &[f64] {
        &self.level1
    }

    pub fn level2_prefixes(&self) -> &[f64] {
        &self.level2
    }

    pub(crate) fn prefix_parts(&self, j: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        (
            &self.level1[j * d..(j + 1) * d],
            &self.level2[j * d * d..(j + 1) * d * d],
        )
    }

    pub fn prefix(&self, j: usize) -> Result<GroupElement> {
        self.check_index(j)?;
        let (a1, a2) = self.prefix_parts(j);
        Ok(GroupElement::from_raw(self.dim, a1.to_vec(), a2.to_vec()))
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.nodes() {
            return Err(Error::IndexOutOfRange(format!(
                "node {j} on a grid with {} nodes",
                self.nodes()
            )));
        }
        Ok(())
    }

    /// `A_{x_i, x_j} = prefix[i]⁻¹ ⊗ prefix[j]` for `i ≤ j`.
    pub fn increment(&self, i: usize, j: usize) -> Result<GroupElement> {
        self.check_index(j)?;
        if i > j {
            return Err(Error::IndexOutOfRange(format!(
                "increment needs i <= j, got ({i}, {j})"
            )));
        }
        let d = self.dim;
        let mut l1 = vec![0.0; d];
        let mut l2 = vec![0.0; d * d];
        self.increment_into(i, j, &mut l1, &mut l2);
        Ok(GroupElement::from_raw(d, l1, l2))
    }

    /// Writes the increment between nodes `i` and `j` into the buffers,
    /// without bounds or order checks.
    #[inline]
    pub(crate) fn increment_into(&self, i: usize, j: usize, l1: &mut [f64], l2: &mut [f64]) {
        let d = self.dim;
        let (a1, a2) = self.prefix_parts(i);
        let (b1, b2) = self.prefix_parts(j);
        for p in 0..d {
            l1[p] = b1[p] - a1[p];
        }
        // (a⁻¹ b)_2 = b2 - a2 - a1 ⊗ (b1 - a1)
        for p in 0..d {
            for q in 0..d {
                let k = p * d + q;
                l2[k] = b2[k] - a2[k] - a1[p] * l1[q];
            }
        }
    }

    /// Value of the first-level path `v + A¹_{0,x_j}`.
    pub fn path_value(&self, j: usize) -> Vec<f64> {
        let (a1, _) = self.prefix_parts(j);
        a1.iter()
            .zip(&self.initial_value)
            .map(|(a, v)| a + v)
            .collect()
    }

    /// Slice-wise dilation, including the initial value.
    pub fn dilate(&self, lambda: f64) -> RoughSlice {
        let l2 = lambda * lambda;
        RoughSlice {
            dim: self.dim,
            grid_level: self.grid_level,
            level1: self.level1.iter().map(|v| lambda * v).collect(),
            level2: self.level2.iter().map(|v| l2 * v).collect(),
            initial_value: self.initial_value.iter().map(|v| lambda * v).collect(),
        }
    }

    fn same_shape(&self, other: &RoughSlice) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.grid_level != other.grid_level {
            return Err(Error::GridMismatch(format!(
                "grid levels {} and {}",
                self.grid_level, other.grid_level
            )));
        }
        Ok(())
    }

    /// `sup_j d(A_{0,x_j}, B_{0,x_j}) + |v_A - v_B|`.
    pub fn uniform_distance(&self, other: &RoughSlice) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.group_sup_distance(other) + euclid_diff(&self.initial_value, &other.initial_value))
    }

    pub(crate) fn group_sup_distance(&self, other: &RoughSlice) -> f64 {
        let d = self.dim;
        let mut l1 = vec![0.0; d];
        let mut l2 = vec![0.0; d * d];
        let mut sup = 0.0f64;
        for j in 0..self.nodes() {
            let (a1, a2) = self.prefix_parts(j);
            let (b1, b2) = other.prefix_parts(j);
            for p in 0..d {
                l1[p] = b1[p] - a1[p];
            }
            for p in 0..d {
                for q in 0..d {
                    let k = p * d + q;
                    l2[k] = b2[k] - a2[k] - a1[p] * l1[q];
                }
            }
            sup = sup.max(group::hom_norm_unchecked(d, &l1, &l2));
        }
        sup
    }
}

pub(crate) fn euclid_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact lift of the piecewise-linear interpolant of `slice`.
///
/// Each cell contributes `(Δ, ½ Δ⊗Δ)`; prefixes are the left-to-right
/// products. The first level is taken directly as `a(x_j) - a(0)` so it
/// carries no accumulated round-off.
pub fn lift_piecewise_linear(slice: &PathSlice) -> RoughSlice {
    let d = slice.dim;
    let nodes = slice.nodes();
    let origin = slice.point(0);
    let mut level1 = vec![0.0; nodes * d];
    let mut level2 = vec![0.0; nodes * d * d];
    let mut delta = vec![0.0; d];
    for j in 1..nodes {
        let (prev, cur) = slice.values.split_at(j * d);
        let prev_pt = &prev[(j - 1) * d..];
        let cur_pt = &cur[..d];
        for c in 0..d {
            delta[c] = cur_pt[c] - prev_pt[c];
            level1[j * d + c] = cur_pt[c] - origin[c];
        }
        let (done, rest) = level2.split_at_mut(j * d * d);
        let prev2 = &done[(j - 1) * d * d..];
        let next2 = &mut rest[..d * d];
        let prev1 = &level1[(j - 1) * d..j * d];
        for p in 0..d {
            for q in 0..d {
                let k = p * d + q;
                next2[k] = prev2[k] + 0.5 * delta[p] * delta[q] + prev1[p] * delta[q];
            }
        }
    }
    RoughSlice {
        dim: d,
        grid_level: slice.grid_level,
        level1,
        level2,
        initial_value: origin.to_vec(),
    }
}

/// A family of rough slices on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughSheet {
    times: Vec<f64>,
    slices: Vec<RoughSlice>,
}

impl RoughSheet {
    pub fn new(times: Vec<f64>, slices: Vec<RoughSlice>) -> Result<Self> {
        if times.len() != slices.len() || times.is_empty() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParameter(
                "times must be finite and nonnegative".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be increasing".into()));
        }
        let first = &slices[0];
        for s in &slices[1..] {
            first.same_shape(s)?;
        }
        Ok(RoughSheet { times, slices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[RoughSlice] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &RoughSlice {
        &self.slices[i]
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim
    }

    pub fn grid_level(&self) -> u32 {
        self.slices[0].grid_level
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The initial-value path `t ↦ v_t`.
    pub fn initial_values(&self) -> impl Iterator<Item = &[f64]> {
        self.slices.iter().map(|s| s.initial_value())
    }

    pub fn dilate(&self, lambda: f64) -> RoughSheet {
        RoughSheet {
            times: self.times.clone(),
            slices: self.slices.iter().map(|s| s.dilate(lambda)).collect(),
        }
    }

    /// Keeps every `stride`-th time, starting from the first.
    pub fn subsample_times(&self, stride: usize) -> Result<RoughSheet> {
        if stride == 0 {
            return Err(Error::InvalidParameter("stride must be positive".into()));
        }
        Ok(RoughSheet {
            times: self.times.iter().step_by(stride).copied().collect(),
            slices: self.slices.iter().step_by(stride).cloned().collect(),
        })
    }

    pub(crate) fn same_grid(&self, other: &RoughSheet) -> Result<()> {
        if self.times != other.times {
            return Err(Error::GridMismatch("time grids differ".into()));
        }
        self.slices[0].same_shape(&other.slices[0])
    }

    /// Uniform distance: the supremum over times and nodes of the group
    /// distance between prefixes, plus the supremum over times of the gap
    /// between initial values.
    pub fn dist_infty(&self, other: &RoughSheet) -> Result<f64> {
        self.same_grid(other)?;
        let mut group_sup = 0.0f64;
        let mut init_sup = 0.0f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            group_sup = group_sup.max(a.group_sup_distance(b));
            init_sup = init_sup.max(euclid_diff(&a.initial_value, &b.initial_value));
        }
        Ok(group_sup + init_sup)
    }
}

/// Free-function form of [`RoughSheet::dist_infty`].
pub fn dist_infty(a: &RoughSheet, b: &RoughSheet) -> Result<f64> {
    a.dist_infty(b)
}
