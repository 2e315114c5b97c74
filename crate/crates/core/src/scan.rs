//! Grid scans of the ratio between each moment bound's left-hand side and
//! its right-hand side without the constant.
//!
//! Every scan places the first spatial point at `x = 0`; the covariance
//! depends on positions only through `x - y`, so nothing is lost.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{
    dist_s1, increment_cov, rect_var, second_diff_cov, space_increment_var, time_increment_var,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "estD2")]
    EstD2,
    #[serde(rename = "cq1")]
    Cq1,
    #[serde(rename = "cq2")]
    Cq2,
    #[serde(rename = "kolm_t")]
    KolmT,
    #[serde(rename = "kolm_x")]
    KolmX,
}

impl BoundId {
    pub const ALL: [BoundId; 5] = [
        BoundId::EstD2,
        BoundId::Cq1,
        BoundId::Cq2,
        BoundId::KolmT,
        BoundId::KolmX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::EstD2 => "estD2",
            BoundId::Cq1 => "cq1",
            BoundId::Cq2 => "cq2",
            BoundId::KolmT => "kolm_t",
            BoundId::KolmX => "kolm_x",
        }
    }

    fn uses_kappa(self) -> bool {
        matches!(self, BoundId::EstD2 | BoundId::Cq2)
    }
}

impl std::str::FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown bound id {s:?}")))
    }
}

/// Times `i·T/n_time` for `i = 0..=n_time` and positions `j/n_space`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub horizon: f64,
    pub n_time: usize,
    pub n_space: usize,
}

impl ScanGrid {
    pub fn refined(&self) -> ScanGrid {
        ScanGrid {
            horizon: self.horizon,
            n_time: 2 * self.n_time,
            n_space: 2 * self.n_space,
        }
    }

    fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n_time as f64
    }

    fn space(&self, j: usize) -> f64 {
        j as f64 / self.n_space as f64
    }
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid {
            horizon: 1.0,
            n_time: 16,
            n_space: 32,
        }
    }
}

/// Where a ratio was evaluated; `h` is zero for bounds without a width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub s: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMax {
    pub max_ratio: f64,
    pub argmax: Option<ScanPoint>,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundScanReport {
    pub bound_id: BoundId,
    pub kappa: Option<f64>,
    pub grid: ScanGrid,
    pub max_ratio: f64,
    pub argmax: Option<ScanPoint>,
    pub evaluated: usize,
    pub refined_max_ratio: f64,
    /// `refined_max_ratio / max_ratio`; `None` for an empty scan.
    pub refinement_ratio: Option<f64>,
    pub empty: bool,
    pub stable: bool,
    pub diverged: bool,
}

pub const STABILITY_TOLERANCE: f64 = 0.1;
pub const DIVERGENCE_FACTOR: f64 = 2.0;

/// A candidate keeps the running maximum only if strictly larger, so ties
/// resolve to the first point in lexicographic grid order.
fn better(best: &Option<(f64, ScanPoint)>, ratio: f64) -> bool {
    match best {
        None => true,
        Some((r, _)) => ratio > *r,
    }
}

type Cell = Result<(Option<(f64, ScanPoint)>, usize)>;

fn evaluate_row(bound: BoundId, kappa: f64, grid: &ScanGrid, i: usize) -> Cell {
    let mut best: Option<(f64, ScanPoint)> = None;
    let mut count = 0usize;
    let mut offer = |ratio: f64, p: ScanPoint| {
        count += 1;
        if better(&best, ratio) {
            best = Some((ratio, p));
        }
    };
    let s = grid.time(i);
    match bound {
        BoundId::EstD2 => {
            for it in (i + 1)..=grid.n_time {
                let t = grid.time(it);
                for j in 1..grid.n_space {
                    let y = grid.space(j);
                    let dist = dist_s1(0.0, y);
                    let rhs = (t - s).powf(kappa / 2.0) * dist.powf(1.0 - kappa);
                    let lhs = rect_var(s, 0.0, t, y)?;
                    offer(
                        lhs / rhs,
                        ScanPoint {
                            s,
                            t,
                            x: 0.0,
                            y,
                            h: 0.0,
                        },
                    );
                }
            }
        }
        BoundId::Cq1 => {
            if i == 0 {
                return Ok((None, 0));
            }
            for it in 1..=grid.n_time {
                let t = grid.time(it);
                for j in 2..=grid.n_space / 2 {
                    let y = grid.space(j);
                    for k in 1..=j / 2 {
                        let h = grid.space(k);
                        let lhs = increment_cov(t, 0.0, s, y, h)?.abs();
                        offer(lhs * y / (h * h), ScanPoint { s, t, x: 0.0, y, h });
                    }
                }
            }
        }
        BoundId::Cq2 => {
            for it in (i + 1)..=grid.n_time {
                let t = grid.time(it);
                for j in 2..=grid.n_space / 2 {
                    let y = grid.space(j);
                    for k in 1..=j / 2 {
                        let h = grid.space(k);
                        let lhs = second_diff_cov(s, t, 0.0, y, h)?.abs();
                        let rhs = (t - s).powf(kappa / 2.0) * h * h / y.powf(1.0 + kappa);
                        offer(lhs / rhs, ScanPoint { s, t, x: 0.0, y, h });
                    }
                }
            }
        }
        BoundId::KolmT => {
            for it in (i + 1)..=grid.n_time {
                let t = grid.time(it);
                let lhs = time_increment_var(s, t)?;
                offer(
                    lhs / (t - s).sqrt(),
                    ScanPoint {
                        s,
                        t,
                        x: 0.0,
                        y: 0.0,
                        h: 0.0,
                    },
                );
            }
        }
        BoundId::KolmX => {
            if i == 0 {
                return Ok((None, 0));
            }
            for j in 1..grid.n_space {
                let y = grid.space(j);
                let lhs = space_increment_var(s, 0.0, y)?;
                offer(
                    lhs / dist_s1(0.0, y),
                    ScanPoint {
                        s,
                        t: s,
                        x: 0.0,
                        y,
                        h: 0.0,
                    },
                );
            }
        }
    }
    Ok((best, count))
}

/// Maximum ratio over one grid. Rows (first time index) are evaluated in
/// parallel and merged in index order.
pub fn scan_max(bound: BoundId, kappa: f64, grid: &ScanGrid) -> Result<ScanMax> {
    if bound.uses_kappa() && !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::constraint("0 < κ < 1", format!("κ={kappa}")));
    }
    if !(grid.horizon > 0.0 && grid.horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scan horizon {}",
            grid.horizon
        )));
    }
    let rows: Vec<Cell> = (0..=grid.n_time)
        .into_par_iter()
        .map(|i| evaluate_row(bound, kappa, grid, i))
        .collect();
    let mut best: Option<(f64, ScanPoint)> = None;
    let mut evaluated = 0;
    for row in rows {
        let (row_best, count) = row?;
        evaluated += count;
        if let Some((r, p)) = row_best {
            if better(&best, r) {
                best = Some((r, p));
            }
        }
    }
    if let Some((r, _)) = best {
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("{} ratio", bound.name())));
        }
    }
    Ok(ScanMax {
        max_ratio: best.map_or(0.0, |b| b.0),
        argmax: best.map(|b| b.1),
        evaluated,
    })
}

/// Scans `grid` and its refinement (both grids doubled) and judges whether
/// the fitted constant has settled.
pub fn bound_scan(bound: BoundId, kappa: f64, grid: &ScanGrid) -> Result<BoundScanReport> {
    let coarse = scan_max(bound, kappa, grid)?;
    let fine = scan_max(bound, kappa, &grid.refined())?;
    let empty = coarse.evaluated == 0 || coarse.max_ratio == 0.0;
    let refinement_ratio = if empty {
        None
    } else {
        Some(fine.max_ratio / coarse.max_ratio)
    };
    let stable = refinement_ratio.is_some_and(|r| (r - 1.0).abs() <= STABILITY_TOLERANCE);
    let diverged = refinement_ratio.is_some_and(|r| r > DIVERGENCE_FACTOR);
    Ok(BoundScanReport {
        bound_id: bound,
        kappa: bound.uses_kappa().then_some(kappa),
        grid: *grid,
        max_ratio: coarse.max_ratio,
        argmax: coarse.argmax,
        evaluated: coarse.evaluated,
        refined_max_ratio: fine.max_ratio,
        refinement_ratio,
        empty,
        stable,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_grid_is_empty() {
        let grid = ScanGrid {
            horizon: 1.0,
            n_time: 0,
            n_space: 1,
        };
        for b in BoundId::ALL {
            let r = scan_max(b, 0.5, &grid).unwrap();
            assert_eq!(r.evaluated, 0);
            assert_eq!(r.argmax, None);
        }
        let grid = ScanGrid {
            horizon: 1.0,
            n_time: 1,
            n_space: 1,
        };
        let rep = bound_scan(BoundId::EstD2, 0.5, &grid).unwrap();
        assert!(rep.empty && !rep.stable && !rep.diverged);
    }

    #[test]
    fn kappa_outside_unit_interval_rejected() {
        let g = ScanGrid::default();
        assert!(matches!(
            scan_max(BoundId::EstD2, 1.0, &g),
            Err(Error::Constraint { .. })
        ));
        assert!(scan_max(BoundId::KolmT, 1.0, &g).is_ok());
    }

    #[test]
    fn names_roundtrip() {
        for b in BoundId::ALL {
            assert_eq!(b.name().parse::<BoundId>().unwrap(), b);
            assert_eq!(
                serde_json::to_string(&b).unwrap(),
                format!("\"{}\"", b.name())
            );
        }
    }

    #[test]
    fn estd2_small_grid_is_finite_and_stable() {
        let grid = ScanGrid {
            horizon: 1.0,
            n_time: 8,
            n_space: 16,
        };
        let rep = bound_scan(BoundId::EstD2, 0.5, &grid).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        assert!(!rep.diverged);
    }

    #[test]
    fn argmax_is_attained_value() {
        let grid = ScanGrid {
            horizon: 1.0,
            n_time: 4,
            n_space: 8,
        };
        let r = scan_max(BoundId::KolmX, 0.5, &grid).unwrap();
        let p = r.argmax.unwrap();
        let v = space_increment_var(p.t, 0.0, p.y).unwrap() / dist_s1(0.0, p.y);
        assert_eq!(v, r.max_ratio);
    }
}
