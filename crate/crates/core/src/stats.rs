//! Small Monte Carlo helpers: means with standard errors, Wilson intervals,
//! weighted line fits and an order-preserving parallel map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Sample mean and its standard error. Fewer than two samples give `se = NaN`.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            n,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    MeanSe { mean, se, n }
}

/// Sample covariance of two equally long series.
pub fn sample_cov(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1) as f64
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares. With `y_se`, the slope error is propagated from
/// the per-point errors; without, it comes from the residuals.
pub fn fit_line(xs: &[f64], ys: &[f64], y_se: Option<&[f64]>) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / sxx;
    let intercept = my - slope * mx;
    let slope_se = match y_se {
        Some(se) => xs
            .iter()
            .zip(se)
            .map(|(x, s)| ((x - mx) / sxx * s).powi(2))
            .sum::<f64>()
            .sqrt(),
        None if n > 2 => {
            let rss: f64 = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| (y - intercept - slope * x).powi(2))
                .sum();
            (rss / (n - 2) as f64 / sxx).sqrt()
        }
        None => f64::NAN,
    };
    Some(LineFit {
        slope,
        intercept,
        slope_se,
    })
}

/// `f(0), …, f(n-1)` evaluated on the current rayon pool, returned in index
/// order so any later reduction is independent of scheduling.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}
