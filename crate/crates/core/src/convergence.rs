//! Monte Carlo estimates of how fast successive dyadic approximations and
//! their lifts approach each other.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::{fine_increments, lift_level};
use crate::error::{Error, Result};
use crate::rough::spacetime_besov_distance;
use crate::sampler::{sample_field, FieldSample, SpectralConfig};
use crate::stats::{fit_line, mean_se, par_map};

/// Exponents of the space-time Besov topology plus the variance exponent `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesovParams {
    pub beta: f64,
    pub alpha: f64,
    pub m: f64,
    pub kappa: f64,
}

impl Default for BesovParams {
    fn default() -> Self {
        BesovParams {
            beta: 0.04,
            alpha: 0.4,
            m: 30.0,
            kappa: 0.18,
        }
    }
}

impl BesovParams {
    /// Checks, in order, `1/3 < α < 1/2`, `4β < 1 − 2α`, `β > 1/m`,
    /// `α − 1/m > 1/3`, `0 < κ < 1`, `4β < κ` and `2α < 1 − κ`.
    pub fn check_feasible(&self) -> Result<()> {
        let BesovParams {
            beta,
            alpha,
            m,
            kappa,
        } = *self;
        let fail = |c: &str, d: String| Err(Error::constraint(c, d));
        if !(alpha > 1.0 / 3.0 && alpha < 0.5) {
            return fail("1/3 < α < 1/2", format!("α={alpha}"));
        }
        if !(4.0 * beta < 1.0 - 2.0 * alpha) {
            return fail("4β < 1 − 2α", format!("β={beta}, α={alpha}"));
        }
        if !(m > 2.0 && beta > 1.0 / m) {
            return fail("β > 1/m", format!("β={beta}, m={m}"));
        }
        if !(alpha - 1.0 / m > 1.0 / 3.0) {
            return fail("α − 1/m > 1/3", format!("α={alpha}, m={m}"));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return fail("0 < κ < 1", format!("κ={kappa}"));
        }
        if !(4.0 * beta < kappa) {
            return fail("4β < κ", format!("β={beta}, κ={kappa}"));
        }
        if !(2.0 * alpha < 1.0 - kappa) {
            return fail("2α < 1 − κ", format!("α={alpha}, κ={kappa}"));
        }
        Ok(())
    }

    /// Per-level decay bases `(2^{-(1-κ-2α)/2}, 2^{-(1-2α-κ/2)})`.
    pub fn decay_bases(&self) -> (f64, f64) {
        let BesovParams { alpha, kappa, .. } = *self;
        (
            2f64.powf(-(1.0 - kappa - 2.0 * alpha) / 2.0),
            2f64.powf(-(1.0 - 2.0 * alpha - kappa / 2.0)),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `E[sup |·|²]` over the time grid and all spatial nodes.
    SupSquared,
    /// `E[sup |·|]` over the time grid and level-`k` dyadic pairs.
    Sup,
    /// `E[‖·‖^p]^{1/p}` of the space-time Besov distance.
    Besov,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::SupSquared => "sup_sq",
            NormKind::Sup => "sup",
            NormKind::Besov => "besov",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub level: u32,
    pub norm_kind: NormKind,
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub level: u32,
    pub norm_kind: NormKind,
    pub slope: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `2^slope`, the fitted factor per level.
    pub decay_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStatus {
    Ok,
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub status: StudyStatus,
    pub params: BesovParams,
    pub eta1: f64,
    pub eta2: f64,
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<SlopeFit>,
}

impl ConvergenceTable {
    pub fn fit(&self, level: u32, kind: NormKind) -> Option<&SlopeFit> {
        self.fits
            .iter()
            .find(|f| f.level == level && f.norm_kind == kind)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema: heatlift.convergence.v1")?;
        writeln!(w, "k,level,norm_kind,estimate,stderr,replicas")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{}",
                r.k, r.level, r.norm_kind, r.estimate, r.stderr, r.replicas
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSettings {
    pub k_min: u32,
    pub k_max: u32,
    pub replicas: usize,
    pub params: BesovParams,
    /// Skip the feasibility chain and the Besov rows; only sup rows.
    pub relaxed: bool,
    pub besov_replicas: usize,
    pub besov_grid_level: u32,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        ConvergenceSettings {
            k_min: 3,
            k_max: 8,
            replicas: 2000,
            params: BesovParams::default(),
            relaxed: false,
            besov_replicas: 40,
            besov_grid_level: 6,
        }
    }
}

/// `sup_{t, x} |ψ(k+1) − ψ(k)|²`: the difference is piecewise linear and
/// vanishes at the level-`k` nodes, so the odd level-`(k+1)` nodes suffice.
pub fn level1_sup_sq(sample: &FieldSample, k: u32) -> f64 {
    let step = 1usize << (sample.grid_level() - k - 1);
    let d = sample.dim();
    let mut best = 0.0f64;
    for t in 0..sample.n_times() {
        let s = sample.time_slice(t);
        for mid in (1..(1usize << (k + 1))).step_by(2) {
            let (l, c, r) = ((mid - 1) * step, mid * step, (mid + 1) * step);
            let mut sq = 0.0;
            for i in 0..d {
                let v = s[c * d + i] - 0.5 * (s[l * d + i] + s[r * d + i]);
                sq += v * v;
            }
            best = best.max(sq);
        }
    }
    best
}

/// `sup` over times, pairs of components and level-`k` dyadic pairs of
/// `|(Ψ(k+1)² − Ψ(k)²)^{ij}|`. Along the level-`k` nodes this difference is
/// a cumulative sum, so its supremum over pairs is the range of that sum.
pub fn level2_sup(sample: &FieldSample, k: u32) -> f64 {
    let d = sample.dim();
    let count = 1usize << k;
    let mut best = 0.0f64;
    for t in 0..sample.n_times() {
        let inc = fine_increments(sample, k, t);
        for p in 0..d {
            for q in (p + 1)..d {
                let (mut acc, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
                for l in 1..=count {
                    let a = &inc[(2 * l - 2) * d..(2 * l - 1) * d];
                    let b = &inc[(2 * l - 1) * d..(2 * l) * d];
                    acc += 0.5 * (a[p] * b[q] - b[p] * a[q]);
                    lo = lo.min(acc);
                    hi = hi.max(acc);
                }
                best = best.max(hi - lo);
            }
        }
    }
    best
}

fn check_range(config: &SpectralConfig, s: &ConvergenceSettings, grid_level: u32) -> Result<()> {
    if s.k_min > s.k_max {
        return Err(Error::InvalidParameter(format!(
            "k range {}..={} is empty",
            s.k_min, s.k_max
        )));
    }
    if s.k_max + 1 > grid_level {
        return Err(Error::InvalidParameter(format!(
            "k_max + 1 = {} exceeds the grid level {grid_level}",
            s.k_max + 1
        )));
    }
    config.validate()
}

fn fit_rows(rows: &[ConvergenceRow], level: u32, kind: NormKind) -> Option<SlopeFit> {
    let pts: Vec<&ConvergenceRow> = rows
        .iter()
        .filter(|r| r.level == level && r.norm_kind == kind && r.estimate > 0.0)
        .collect();
    let xs: Vec<f64> = pts.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.estimate.log2()).collect();
    let se: Vec<f64> = pts
        .iter()
        .map(|r| r.stderr / (r.estimate * std::f64::consts::LN_2))
        .collect();
    let fit = fit_line(&xs, &ys, Some(&se))?;
    Some(SlopeFit {
        level,
        norm_kind: kind,
        slope: fit.slope,
        slope_se: fit.slope_se,
        ci_low: fit.slope - 1.96 * fit.slope_se,
        ci_high: fit.slope + 1.96 * fit.slope_se,
        decay_ratio: fit.slope.exp2(),
    })
}

/// Estimates, for each `k` in range, the size of `ψ(k+1) − ψ(k)` and of the
/// level-2 lift difference over `replicas` independent fields.
pub fn convergence_study(
    config: &SpectralConfig,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceTable> {
    let params = settings.params;
    if !settings.relaxed {
        params.check_feasible()?;
    }
    check_range(config, settings, config.grid_level)?;
    let (eta1, eta2) = params.decay_bases();
    let mut table = ConvergenceTable {
        status: StudyStatus::Empty,
        params,
        eta1,
        eta2,
        rows: Vec::new(),
        fits: Vec::new(),
    };
    if settings.replicas == 0 {
        return Ok(table);
    }
    let ks: Vec<u32> = (settings.k_min..=settings.k_max).collect();

    let per_replica: Vec<Result<Vec<(f64, f64)>>> = par_map(settings.replicas, |r| {
        let f = sample_field(config, r as u64)?;
        Ok(ks
            .iter()
            .map(|&k| (level1_sup_sq(&f, k), level2_sup(&f, k)))
            .collect())
    });
    let per_replica = per_replica.into_iter().collect::<Result<Vec<_>>>()?;
    for (idx, &k) in ks.iter().enumerate() {
        let l1: Vec<f64> = per_replica.iter().map(|v| v[idx].0).collect();
        let l2: Vec<f64> = per_replica.iter().map(|v| v[idx].1).collect();
        for (level, kind, xs) in [(1, NormKind::SupSquared, l1), (2, NormKind::Sup, l2)] {
            let m = mean_se(&xs);
            table.rows.push(ConvergenceRow {
                k,
                level,
                norm_kind: kind,
                estimate: m.mean,
                stderr: m.se,
                replicas: m.n,
            });
        }
    }

    if !settings.relaxed && settings.besov_replicas > 0 {
        table.rows.extend(besov_rows(config, settings)?);
    }

    table
        .rows
        .sort_by_key(|r| (r.norm_kind as u8, r.level, r.k));
    let kinds = [
        (1, NormKind::SupSquared),
        (2, NormKind::Sup),
        (1, NormKind::Besov),
        (2, NormKind::Besov),
    ];
    table.fits = kinds
        .iter()
        .filter_map(|&(level, kind)| fit_rows(&table.rows, level, kind))
        .collect();
    table.status = StudyStatus::Ok;
    Ok(table)
}

/// Besov rows on a coarser grid: level 1 reports `E[‖·‖^m]^{1/m}`, level 2
/// `E[‖·‖^{m/2}]^{2/m}`, with delta-method errors.
fn besov_rows(
    config: &SpectralConfig,
    settings: &ConvergenceSettings,
) -> Result<Vec<ConvergenceRow>> {
    let level = settings.besov_grid_level.min(config.grid_level);
    let cfg = SpectralConfig {
        grid_level: level,
        ..config.clone()
    };
    cfg.validate()?;
    let k_hi = settings.k_max.min(level.saturating_sub(1));
    if settings.k_min > k_hi {
        return Ok(Vec::new());
    }
    let ks: Vec<u32> = (settings.k_min..=k_hi).collect();
    let p = settings.params;
    let per_replica: Vec<Result<Vec<(f64, f64)>>> = par_map(settings.besov_replicas, |r| {
        let f = sample_field(&cfg, r as u64)?;
        let mut lifts = Vec::with_capacity(ks.len() + 1);
        for &k in ks.iter().chain(std::iter::once(&(k_hi + 1))) {
            lifts.push(lift_level(&f, k)?);
        }
        ks.iter()
            .enumerate()
            .map(|(i, _)| {
                let b = spacetime_besov_distance(&lifts[i + 1], &lifts[i], p.beta, p.alpha, p.m)?;
                Ok((b.level1.powf(p.m), b.level2.powf(p.m / 2.0)))
            })
            .collect()
    });
    let per_replica = per_replica.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (idx, &k) in ks.iter().enumerate() {
        for (level, power) in [(1u32, p.m), (2, p.m / 2.0)] {
            let xs: Vec<f64> = per_replica
                .iter()
                .map(|v| if level == 1 { v[idx].0 } else { v[idx].1 })
                .collect();
            let m = mean_se(&xs);
            let est = m.mean.powf(1.0 / power);
            let se = if m.mean > 0.0 {
                est / (power * m.mean) * m.se
            } else {
                0.0
            };
            rows.push(ConvergenceRow {
                k,
                level,
                norm_kind: NormKind::Besov,
                estimate: est,
                stderr: se,
                replicas: m.n,
            });
        }
    }
    Ok(rows)
}
