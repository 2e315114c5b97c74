//! Analytic `ε² log P(εψ(t,x)^i > a)` for the Gaussian marginal.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::tails::{TailCurve, TailRow};
use crate::covariance::cov_theta;
use crate::error::{Error, Result};

/// `log P(N(0,1) > u)`, accurate far into the tail.
pub fn log_gaussian_tail(u: f64) -> f64 {
    let z = u / SQRT_2;
    if z < 25.0 {
        return (0.5 * libm::erfc(z)).ln();
    }
    let z2 = z * z;
    let series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
    -z2 - (z * PI.sqrt()).ln() + series.ln() + 0.5f64.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchilderReport {
    pub t: f64,
    pub x: f64,
    pub threshold: f64,
    pub sigma_sq: f64,
    /// `−a² / (2σ²)`.
    pub limit: f64,
    pub curve: TailCurve,
    /// `ε² log p` increases as `ε` decreases and stays at or below the limit.
    pub monotone_from_below: bool,
    /// `|ε² log p − limit| / |limit|` at the smallest `ε`; `None` if the limit is 0.
    pub relative_gap: Option<f64>,
}

pub fn schilder_point_check(t: f64, x: f64, a: f64, eps_list: &[f64]) -> Result<SchilderReport> {
    let sigma_sq = cov_theta(t, x, t, x)?;
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "σ² = {sigma_sq} at t={t}; need t > 0"
        )));
    }
    if !a.is_finite() || eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(
            "threshold must be finite and every ε positive".into(),
        ));
    }
    let sigma = sigma_sq.sqrt();
    let limit = -a * a / (2.0 * sigma_sq);
    let mut eps = eps_list.to_vec();
    eps.sort_by(|p, q| q.total_cmp(p));
    let rows: Vec<TailRow> = eps
        .iter()
        .map(|&e| {
            let log_p = log_gaussian_tail(a / (e * sigma));
            TailRow {
                epsilon: e,
                delta: a,
                k: None,
                probability: log_p.exp(),
                ci_low: None,
                ci_high: None,
                hits: None,
                replicas: None,
                eps2_log_p: e * e * log_p,
                upper_bound_only: false,
            }
        })
        .collect();
    let monotone_from_below = rows.windows(2).all(|w| w[1].eps2_log_p >= w[0].eps2_log_p)
        && rows.iter().all(|r| r.eps2_log_p <= limit);
    let relative_gap = match rows.last() {
        Some(r) if limit != 0.0 => Some((r.eps2_log_p - limit).abs() / limit.abs()),
        _ => None,
    };
    Ok(SchilderReport {
        t,
        x,
        threshold: a,
        sigma_sq,
        limit,
        curve: TailCurve { rows },
        monotone_from_below,
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_matches_erfc_and_asymptotics() {
        assert!((log_gaussian_tail(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // P(N > 1) = 0.158655253931457
        assert!((log_gaussian_tail(1.0) - 0.158_655_253_931_457_f64.ln()).abs() < 1e-13);
        // Both branches agree at the switch.
        let u = 25.0 * SQRT_2;
        let exact = -629.485_186_354_631_6;
        let lo = log_gaussian_tail(u * (1.0 - 1e-13));
        let hi = log_gaussian_tail(u * (1.0 + 1e-13));
        assert!(
            (lo - exact).abs() < 1e-8 && (hi - exact).abs() < 1e-8,
            "{lo} {hi}"
        );
        assert!(log_gaussian_tail(1e3).is_finite());
    }

    #[test]
    fn zero_threshold_gives_half() {
        let r = schilder_point_check(1.0, 0.0, 0.0, &[0.5, 0.1]).unwrap();
        for row in &r.curve.rows {
            assert!((row.probability - 0.5).abs() < 1e-15);
        }
        assert_eq!(r.limit, 0.0);
        assert_eq!(r.relative_gap, None);
    }

    #[test]
    fn one_sigma_curve() {
        let s2 = cov_theta(1.0, 0.0, 1.0, 0.0).unwrap();
        let r = schilder_point_check(1.0, 0.0, s2.sqrt(), &[0.125, 0.5, 0.25]).unwrap();
        assert!((r.limit + 0.5).abs() < 1e-15);
        let v: Vec<f64> = r.curve.rows.iter().map(|x| x.eps2_log_p).collect();
        // Values of ε² log P(N > 1/ε) at ε = 1/2, 1/4, 1/8.
        let expected = [
            -0.945_796_083_420_508,
            -0.647_506_342_907_956,
            -0.547_084_955_623_665,
        ];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(r.monotone_from_below);
        assert!(r.relative_gap.unwrap() <= 0.15);
    }

    #[test]
    fn time_zero_rejected() {
        assert!(matches!(
            schilder_point_check(0.0, 0.0, 1.0, &[0.5]),
            Err(Error::InvalidParameter(_))
        ));
    }
}
