//! Covariance of the stationary-in-space heat field `ψ` on the circle, by a
//! theta-function (heat kernel) sum and by a Fourier mode sum, plus the
//! increment combinations used by the moment bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovMethod {
    #[default]
    Theta,
    Fourier,
}

const THETA_CUTOFF: f64 = 1e-16;
const THETA_MAX_SHIFT: i64 = 64;
const FOURIER_CUTOFF: f64 = 1e-17;
const FOURIER_MAX_TERMS: u64 = 10_000_000;

pub fn mode_rate(n: i64) -> f64 {
    4.0 * PI * PI * (n as f64) * (n as f64)
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite(format!("times s={s}, t={t}")));
    }
    if s < 0.0 || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "times must be nonnegative, got s={s}, t={t}"
        )));
    }
    Ok(())
}

/// Representative of `z` modulo 1 in `[-1/2, 1/2]`.
fn reduce(z: f64) -> f64 {
    z - z.round()
}

/// Circle distance `inf_n |x - y + n|`.
pub fn dist_s1(x: f64, y: f64) -> f64 {
    reduce(x - y).abs()
}

/// `∫_0^l u^{-1/2} exp(-c²/4u) du`.
fn theta_primitive(l: f64, c: f64) -> f64 {
    if l <= 0.0 {
        return 0.0;
    }
    let r = l.sqrt();
    let u = c / (2.0 * r);
    2.0 * r * ((-u * u).exp() - PI.sqrt() * u * libm::erfc(u))
}

pub fn cov_theta(s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    check_times(s, t)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite(format!("positions x={x}, y={y}")));
    }
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let a = (s - t).abs();
    let b = s + t;
    let z = reduce(x - y);
    let term = |n: i64| {
        let c = (z - n as f64).abs();
        theta_primitive(b, c) - theta_primitive(a, c)
    };
    let mut sum = term(0);
    for n in 1..=THETA_MAX_SHIFT {
        let (p, m) = (term(n), term(-n));
        sum += p + m;
        if p.abs() + m.abs() < THETA_CUTOFF {
            break;
        }
    }
    Ok(sum / (4.0 * PI.sqrt()))
}

/// `Σ_{n≥1} cos(2πnz)/(4π²n²)` for `z` mod 1.
fn bernoulli_sum(z: f64) -> f64 {
    let f = z - z.floor();
    (f * f - f + 1.0 / 6.0) / 4.0
}

pub fn cov_fourier(s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    check_times(s, t)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite(format!("positions x={x}, y={y}")));
    }
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let a = (s - t).abs();
    let b = s + t;
    let z = reduce(x - y);
    let mut sum = s.min(t);
    if a == 0.0 {
        sum += bernoulli_sum(z);
        for n in 1..=FOURIER_MAX_TERMS {
            let lambda = mode_rate(n as i64);
            let decay = (-lambda * b).exp() / lambda;
            sum -= (2.0 * PI * n as f64 * z).cos() * decay;
            if decay < FOURIER_CUTOFF {
                break;
            }
        }
    } else {
        for n in 1..=FOURIER_MAX_TERMS {
            let lambda = mode_rate(n as i64);
            let lead = (-lambda * a).exp() / lambda;
            sum += (2.0 * PI * n as f64 * z).cos() * lead * (-(-lambda * (b - a)).exp_m1());
            if lead < FOURIER_CUTOFF {
                break;
            }
        }
    }
    Ok(sum)
}

/// `E[ψ(s,x) ψ(t,y)]` for one scalar component.
pub fn cov(s: f64, x: f64, t: f64, y: f64, method: CovMethod) -> Result<f64> {
    match method {
        CovMethod::Theta => cov_theta(s, x, t, y),
        CovMethod::Fourier => cov_fourier(s, x, t, y),
    }
}

/// Covariance of the field built from the modes `|n| ≤ n_modes` only.
pub fn cov_truncated(s: f64, x: f64, t: f64, y: f64, n_modes: usize) -> Result<f64> {
    check_times(s, t)?;
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let a = (s - t).abs();
    let b = s + t;
    let z = reduce(x - y);
    let mut sum = s.min(t);
    for n in 1..=n_modes {
        let lambda = mode_rate(n as i64);
        let weight = (-lambda * a).exp() * (-(-lambda * (b - a)).exp_m1()) / lambda;
        sum += (2.0 * PI * n as f64 * z).cos() * weight;
    }
    Ok(sum)
}

/// `D(s,x;t,y) = E|ψ(t,y) - ψ(t,x) - ψ(s,y) + ψ(s,x)|²`.
pub fn rect_var(s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    let pts = [(t, y, 1.0), (t, x, -1.0), (s, y, -1.0), (s, x, 1.0)];
    let mut sum = 0.0;
    for (i, &(ti, xi, si)) in pts.iter().enumerate() {
        sum += cov_theta(ti, xi, ti, xi)?;
        for &(tj, xj, sj) in &pts[i + 1..] {
            sum += 2.0 * si * sj * cov_theta(ti, xi, tj, xj)?;
        }
    }
    Ok(sum.max(0.0))
}

/// `E|ψ(t,x) - ψ(t,y)|²`.
pub fn space_increment_var(t: f64, x: f64, y: f64) -> Result<f64> {
    let v = 2.0 * cov_theta(t, 0.0, t, 0.0)? - 2.0 * cov_theta(t, x, t, y)?;
    Ok(v.max(0.0))
}

/// `E|ψ(t,x) - ψ(s,x)|²`.
pub fn time_increment_var(s: f64, t: f64) -> Result<f64> {
    let v =
        cov_theta(t, 0.0, t, 0.0)? + cov_theta(s, 0.0, s, 0.0)? - 2.0 * cov_theta(s, 0.0, t, 0.0)?;
    Ok(v.max(0.0))
}

/// `E[(ψ(s,x+h) - ψ(s,x)) (ψ(t,y+h) - ψ(t,y))]`, no restriction on the points.
pub fn increment_cov(s: f64, x: f64, t: f64, y: f64, h: f64) -> Result<f64> {
    Ok(
        cov_theta(s, x + h, t, y + h)? - cov_theta(s, x + h, t, y)? - cov_theta(s, x, t, y + h)?
            + cov_theta(s, x, t, y)?,
    )
}

fn check_separation(x: f64, y: f64, h: f64) -> Result<()> {
    let gap = y - x;
    let tol = 1e-12;
    if !(h > 0.0 && 2.0 * h <= gap + tol && gap <= 0.5 + tol) {
        return Err(Error::constraint(
            "2h ≤ y − x ≤ 1/2",
            format!("h={h}, y−x={gap}"),
        ));
    }
    Ok(())
}

/// Covariance of the time-differenced spatial increments over `[x, x+h]`
/// and `[y, y+h]` between times `s` and `t`.
pub fn second_diff_cov(s: f64, t: f64, x: f64, y: f64, h: f64) -> Result<f64> {
    check_separation(x, y, h)?;
    if s == t {
        return Ok(0.0);
    }
    Ok(increment_cov(t, x, t, y, h)?
        - increment_cov(t, x, s, y, h)?
        - increment_cov(s, x, t, y, h)?
        + increment_cov(s, x, s, y, h)?)
}

/// `E[(ψ(t,x+h) - ψ(t,x)) (ψ(s,y+h) - ψ(s,y))]` under the separation
/// hypothesis; with `s = t` this is the same-time increment covariance.
pub fn separated_increment_cov(t: f64, x: f64, s: f64, y: f64, h: f64) -> Result<f64> {
    check_separation(x, y, h)?;
    increment_cov(t, x, s, y, h)
}

/// Same-time form of [`separated_increment_cov`].
pub fn same_time_increment_cov(t: f64, x: f64, y: f64, h: f64) -> Result<f64> {
    separated_increment_cov(t, x, t, y, h)
}
