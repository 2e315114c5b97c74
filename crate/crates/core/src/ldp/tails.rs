//! Monte Carlo tails of `dist_∞(εΨ, εΨ(k))`.
//!
//! Dilation is exactly homogeneous for `dist_∞`, so the event
//! `dist_∞(εΨ, εΨ(k)) > δ` is evaluated as `dist_∞(Ψ, Ψ(k)) > δ/ε` on the
//! undilated distances. The full-grid lift stands in for `Ψ`.

use serde::{Deserialize, Serialize};

use crate::dyadic::lift_level;
use crate::error::{Error, Result};
use crate::sampler::{sample_field, SpectralConfig};
use crate::stats::{par_map, wilson_interval};

pub const WILSON_Z: f64 = 1.96;

/// `dist_∞(Ψ_K, Ψ(k))` for replicas `0..replicas`.
pub fn approximation_distances(
    config: &SpectralConfig,
    k: u32,
    replicas: usize,
) -> Result<Vec<f64>> {
    config.validate()?;
    if k > config.grid_level {
        return Err(Error::InvalidParameter(format!(
            "level {k} exceeds the grid level {}",
            config.grid_level
        )));
    }
    par_map(replicas, |r| {
        let f = sample_field(config, r as u64)?;
        lift_level(&f, config.grid_level)?.dist_infty(&lift_level(&f, k)?)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub epsilon: f64,
    /// `δ` for Monte Carlo rows, the threshold `a` for analytic rows.
    pub delta: f64,
    pub k: Option<u32>,
    pub probability: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub hits: Option<usize>,
    pub replicas: Option<usize>,
    /// `ε² log p`, or `ε² log(ci_high)` when no replica exceeded the threshold.
    pub eps2_log_p: f64,
    pub upper_bound_only: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub rows: Vec<TailRow>,
}

impl TailCurve {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema: heatlift.tail.v1")?;
        writeln!(
            w,
            "epsilon,delta,k,probability,ci_low,ci_high,hits,replicas,eps2_log_p,upper_bound_only"
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{},{},{},{},{:e},{}",
                r.epsilon,
                r.delta,
                r.k.map_or(String::new(), |k| k.to_string()),
                r.probability,
                opt(r.ci_low),
                opt(r.ci_high),
                r.hits.map_or(String::new(), |h| h.to_string()),
                r.replicas.map_or(String::new(), |h| h.to_string()),
                r.eps2_log_p,
                r.upper_bound_only
            )?;
        }
        Ok(())
    }
}

/// Estimate of `P(dist_∞(εΨ, εΨ(k)) > δ)` from undilated distances.
pub fn tail_probability(distances: &[f64], delta: f64, epsilon: f64, k: u32) -> Result<TailRow> {
    if distances.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one replica is required".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need ε > 0 and δ ≥ 0, got ε={epsilon}, δ={delta}"
        )));
    }
    let threshold = delta / epsilon;
    let n = distances.len();
    let hits = distances.iter().filter(|d| **d > threshold).count();
    let probability = hits as f64 / n as f64;
    let (lo, hi) = wilson_interval(hits, n, WILSON_Z);
    let (eps2_log_p, upper_bound_only) = if hits > 0 {
        (epsilon * epsilon * probability.ln(), false)
    } else {
        (epsilon * epsilon * hi.ln(), true)
    };
    Ok(TailRow {
        epsilon,
        delta,
        k: Some(k),
        probability,
        ci_low: Some(lo),
        ci_high: Some(hi),
        hits: Some(hits),
        replicas: Some(n),
        eps2_log_p,
        upper_bound_only,
    })
}

/// Rows for every `ε`, ordered by decreasing `ε`.
pub fn tail_curve(distances: &[f64], delta: f64, eps_list: &[f64], k: u32) -> Result<TailCurve> {
    let mut eps = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let rows = eps
        .iter()
        .map(|&e| tail_probability(distances, delta, e, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(TailCurve { rows })
}
