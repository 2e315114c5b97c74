//! Dyadic polygonal approximations of a sampled field and their lifts.

use crate::error::{Error, Result};
use crate::rough::{lift_piecewise_linear, RoughSheet};
use crate::sampler::FieldSample;

fn check_level(sample: &FieldSample, k: u32) -> Result<()> {
    if k > sample.grid_level() {
        return Err(Error::InvalidParameter(format!(
            "approximation level {k} exceeds the grid level {}",
            sample.grid_level()
        )));
    }
    Ok(())
}

/// Linear interpolation of every time slice between the nodes `i / 2^k`,
/// evaluated back on the full grid.
pub fn polygonal_restrict(sample: &FieldSample, k: u32) -> Result<FieldSample> {
    check_level(sample, k)?;
    let step = 1usize << (sample.grid_level() - k);
    let d = sample.dim();
    let mut out = sample.clone();
    if step == 1 {
        return Ok(out);
    }
    for t in 0..sample.n_times() {
        let src = sample.time_slice(t);
        let dst = out.time_slice_mut(t);
        for j in 0..sample.nodes() {
            let r = j % step;
            if r == 0 {
                continue;
            }
            let left = j - r;
            let right = left + step;
            let w = r as f64 / step as f64;
            for i in 0..d {
                dst[j * d + i] = (1.0 - w) * src[left * d + i] + w * src[right * d + i];
            }
        }
    }
    Ok(out)
}

/// The sheet of natural lifts of the level-`k` polygonal field, with
/// initial values `ψ(t, 0)`.
pub fn lift_level(sample: &FieldSample, k: u32) -> Result<RoughSheet> {
    let restricted = polygonal_restrict(sample, k)?;
    let slices = (0..restricted.n_times())
        .map(|t| lift_piecewise_linear(&restricted.path(t)))
        .collect();
    RoughSheet::new(sample.times(), slices)
}

/// Increments `ψ(t, m/2^{k+1}) - ψ(t, (m-1)/2^{k+1})` for `m = 1..=2^{k+1}`,
/// flattened `m`-major.
pub(crate) fn fine_increments(sample: &FieldSample, k: u32, t: usize) -> Vec<f64> {
    let step = 1usize << (sample.grid_level() - k - 1);
    let d = sample.dim();
    let slice = sample.time_slice(t);
    let count = 1usize << (k + 1);
    let mut out = Vec::with_capacity(count * d);
    for m in 1..=count {
        for i in 0..d {
            out.push(slice[m * step * d + i] - slice[(m - 1) * step * d + i]);
        }
    }
    out
}

/// Closed form of the level-2 difference `Ψ(k+1)² - Ψ(k)²` over the
/// level-`k` nodes `I/2^k ≤ J/2^k`:
/// `½ Σ_{l=I+1}^{J} (Δ_{2l-1} ⊗ Δ_{2l} - Δ_{2l} ⊗ Δ_{2l-1})` with level-`(k+1)`
/// increments `Δ`. Returned row-major, `d × d`.
pub fn level2_telescope(
    sample: &FieldSample,
    k: u32,
    t: usize,
    big_i: usize,
    big_j: usize,
) -> Result<Vec<f64>> {
    if k + 1 > sample.grid_level() {
        return Err(Error::InvalidParameter(format!(
            "level {} needs a grid of level at least {}",
            k,
            k + 1
        )));
    }
    if t >= sample.n_times() {
        return Err(Error::IndexOutOfRange(format!("time index {t}")));
    }
    if big_i > big_j || big_j > (1usize << k) {
        return Err(Error::IndexOutOfRange(format!(
            "dyadic pair ({big_i}, {big_j}) at level {k}"
        )));
    }
    let d = sample.dim();
    let inc = fine_increments(sample, k, t);
    let mut out = vec![0.0; d * d];
    for l in (big_i + 1)..=big_j {
        let a = &inc[(2 * l - 2) * d..(2 * l - 1) * d];
        let b = &inc[(2 * l - 1) * d..(2 * l) * d];
        for p in 0..d {
            for q in 0..d {
                out[p * d + q] += 0.5 * (a[p] * b[q] - b[p] * a[q]);
            }
        }
    }
    Ok(out)
}
