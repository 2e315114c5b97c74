//! Growth of `‖Z‖_q / ‖Z‖_2` in `q` for functionals of the lifted field at
//! the final time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{sample_field, FieldSample, SpectralConfig};
use crate::stats::{fit_line, mean_se, par_map, sample_cov};

/// A scalar functional of `Ψ_T` between grid nodes `x < y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChaosFunctional {
    /// `Ψ¹_T(x, y)^i = ψ(T, y)^i − ψ(T, x)^i`, degree 1.
    Level1 {
        x: usize,
        y: usize,
        component: usize,
    },
    /// `Ψ²_T(x, y)^{ij}` with `i ≠ j`, degree 2.
    Level2 {
        x: usize,
        y: usize,
        i: usize,
        j: usize,
    },
}

impl ChaosFunctional {
    pub fn degree(&self) -> u32 {
        match self {
            ChaosFunctional::Level1 { .. } => 1,
            ChaosFunctional::Level2 { .. } => 2,
        }
    }

    fn validate(&self, config: &SpectralConfig) -> Result<()> {
        let nodes = config.nodes();
        let (x, y) = match *self {
            ChaosFunctional::Level1 { x, y, component } => {
                if component >= config.dim {
                    return Err(Error::InvalidParameter(format!(
                        "component {component} ≥ d"
                    )));
                }
                (x, y)
            }
            ChaosFunctional::Level2 { x, y, i, j } => {
                if i == j || i >= config.dim || j >= config.dim {
                    return Err(Error::InvalidParameter(format!(
                        "level-2 functional needs distinct components below d, got ({i}, {j})"
                    )));
                }
                (x, y)
            }
        };
        if !(x < y && y < nodes) {
            return Err(Error::InvalidParameter(format!(
                "nodes must satisfy x < y < {nodes}, got ({x}, {y})"
            )));
        }
        Ok(())
    }

    /// Evaluates the functional on the last time slice of `field`.
    pub fn evaluate(&self, field: &FieldSample) -> f64 {
        let t = field.n_times() - 1;
        let d = field.dim();
        let s = field.time_slice(t);
        match *self {
            ChaosFunctional::Level1 { x, y, component } => {
                s[y * d + component] - s[x * d + component]
            }
            ChaosFunctional::Level2 { x, y, i, j } => {
                // ∫_x^y (a^i(r) − a^i(x)) da^j(r) for the polygonal path.
                let mut acc = 0.0;
                for l in (x + 1)..=y {
                    let di = s[l * d + i] - s[(l - 1) * d + i];
                    let dj = s[l * d + j] - s[(l - 1) * d + j];
                    let run = s[(l - 1) * d + i] - s[x * d + i];
                    acc += run * dj + 0.5 * di * dj;
                }
                acc
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosSettings {
    pub functional: ChaosFunctional,
    pub q_list: Vec<f64>,
    pub replicas: usize,
    pub batches: usize,
}

impl Default for ChaosSettings {
    fn default() -> Self {
        ChaosSettings {
            functional: ChaosFunctional::Level2 {
                x: 0,
                y: 1,
                i: 0,
                j: 1,
            },
            q_list: vec![4.0, 5.0, 6.0, 7.0, 8.0],
            replicas: 100_000,
            batches: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRatio {
    pub q: f64,
    pub ratio: f64,
    /// Batch-means standard error.
    pub se: f64,
}

/// `‖Z‖_4/‖Z‖_2` against the Gaussian value `3^{1/4}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCheck {
    pub ratio: f64,
    pub se: f64,
    pub target: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub degree: u32,
    pub replicas: usize,
    /// Empty when `‖Z‖_2 = 0`.
    pub ratios: Vec<MomentRatio>,
    /// Slope of `log(‖Z‖_q/‖Z‖_2)` against `log q`.
    pub exponent: Option<f64>,
    pub exponent_se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub gaussian_check: Option<GaussianCheck>,
}

pub fn chaos_samples(
    config: &SpectralConfig,
    functional: &ChaosFunctional,
    replicas: usize,
) -> Result<Vec<f64>> {
    config.validate()?;
    functional.validate(config)?;
    par_map(replicas, |r| {
        sample_field(config, r as u64).map(|f| functional.evaluate(&f))
    })
    .into_iter()
    .collect()
}

fn abs_moment(xs: &[f64], q: f64) -> f64 {
    xs.iter().map(|x| x.abs().powf(q)).sum::<f64>() / xs.len() as f64
}

fn ratios(xs: &[f64], q_list: &[f64]) -> Option<Vec<f64>> {
    let m2 = abs_moment(xs, 2.0);
    if !(m2 > 0.0) {
        return None;
    }
    Some(
        q_list
            .iter()
            .map(|&q| abs_moment(xs, q).powf(1.0 / q) / m2.sqrt())
            .collect(),
    )
}

fn exponent(q_list: &[f64], r: &[f64]) -> Option<f64> {
    let xs: Vec<f64> = q_list.iter().map(|q| q.ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    fit_line(&xs, &ys, None).map(|f| f.slope)
}

/// Moment ratios and their growth exponent; errors come from `batches`
/// contiguous batches of the samples.
pub fn chaos_moment_ratio(
    samples: &[f64],
    degree: u32,
    q_list: &[f64],
    batches: usize,
) -> Result<ChaosReport> {
    if let Some(q) = q_list.iter().find(|q| !(**q >= 2.0)) {
        return Err(Error::InvalidParameter(format!(
            "moment orders must be ≥ 2, got {q}"
        )));
    }
    let mut report = ChaosReport {
        degree,
        replicas: samples.len(),
        ratios: Vec::new(),
        exponent: None,
        exponent_se: None,
        ci_low: None,
        ci_high: None,
        gaussian_check: None,
    };
    let Some(full) = (!samples.is_empty())
        .then(|| ratios(samples, q_list))
        .flatten()
    else {
        return Ok(report);
    };
    let batches = batches.clamp(1, samples.len());
    let size = samples.len() / batches;
    let per_batch: Vec<Vec<f64>> = (0..batches)
        .filter_map(|b| ratios(&samples[b * size..(b + 1) * size], q_list))
        .collect();
    let batch_se = |vals: Vec<f64>| {
        let m = mean_se(&vals);
        m.se
    };
    report.ratios = q_list
        .iter()
        .enumerate()
        .map(|(i, &q)| MomentRatio {
            q,
            ratio: full[i],
            se: batch_se(per_batch.iter().map(|r| r[i]).collect()),
        })
        .collect();
    report.exponent = exponent(q_list, &full);
    if let Some(p) = report.exponent {
        let se = batch_se(
            per_batch
                .iter()
                .filter_map(|r| exponent(q_list, r))
                .collect(),
        );
        report.exponent_se = Some(se);
        report.ci_low = Some(p - 1.96 * se);
        report.ci_high = Some(p + 1.96 * se);
    }
    if degree == 1 && samples.len() > 1 {
        report.gaussian_check = Some(gaussian_check(samples));
    }
    Ok(report)
}

fn gaussian_check(xs: &[f64]) -> GaussianCheck {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let qu: Vec<f64> = sq.iter().map(|x| x * x).collect();
    let n = xs.len() as f64;
    let m2 = sq.iter().sum::<f64>() / n;
    let m4 = qu.iter().sum::<f64>() / n;
    let ratio = m4.powf(0.25) / m2.sqrt();
    // Delta method on (m4, m2).
    let g4 = ratio / (4.0 * m4);
    let g2 = -ratio / (2.0 * m2);
    let var = (g4 * g4 * sample_cov(&qu, &qu)
        + 2.0 * g4 * g2 * sample_cov(&qu, &sq)
        + g2 * g2 * sample_cov(&sq, &sq))
        / n;
    let se = var.sqrt();
    let target = 3f64.powf(0.25);
    GaussianCheck {
        ratio,
        se,
        target,
        z_score: (ratio - target) / se,
    }
}

pub fn chaos_experiment(config: &SpectralConfig, settings: &ChaosSettings) -> Result<ChaosReport> {
    let samples = chaos_samples(config, &settings.functional, settings.replicas)?;
    chaos_moment_ratio(
        &samples,
        settings.functional.degree(),
        &settings.q_list,
        settings.batches,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::lift_piecewise_linear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cfg() -> SpectralConfig {
        SpectralConfig {
            n_modes: 16,
            time_horizon: 1.0,
            n_time: 1,
            grid_level: 5,
            dim: 2,
            seed: 9,
        }
    }

    #[test]
    fn level2_functional_matches_lift() {
        let f = sample_field(&cfg(), 4).unwrap();
        let lift = lift_piecewise_linear(&f.path(1));
        for (x, y) in [(0, 32), (3, 17), (10, 11)] {
            let inc = lift.increment(x, y).unwrap();
            let v = ChaosFunctional::Level2 { x, y, i: 0, j: 1 }.evaluate(&f);
            assert!((v - inc.level2_entry(0, 1)).abs() < 1e-14);
            let w = ChaosFunctional::Level1 { x, y, component: 1 }.evaluate(&f);
            assert!((w - inc.level1()[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_samples_fit_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let r = chaos_moment_ratio(&xs, 1, &[4.0, 5.0, 6.0, 7.0, 8.0], 20).unwrap();
        let p = r.exponent.unwrap();
        assert!((0.35..=0.65).contains(&p), "{p}");
        let g = r.gaussian_check.unwrap();
        assert!(g.z_score.abs() < 3.0, "{g:?}");
    }

    #[test]
    fn degenerate_and_invalid() {
        let r = chaos_moment_ratio(&[0.0; 100], 1, &[2.0, 4.0], 10).unwrap();
        assert!(r.ratios.is_empty() && r.exponent.is_none());
        assert!(chaos_moment_ratio(&[1.0, 2.0], 1, &[1.5], 1).is_err());
        let f = ChaosFunctional::Level2 {
            x: 0,
            y: 5,
            i: 1,
            j: 1,
        };
        assert!(chaos_samples(&cfg(), &f, 1).is_err());
        let f = ChaosFunctional::Level1 {
            x: 5,
            y: 5,
            component: 0,
        };
        assert!(chaos_samples(&cfg(), &f, 1).is_err());
    }

    #[test]
    fn samples_are_reproducible() {
        let f = ChaosFunctional::Level2 {
            x: 0,
            y: 32,
            i: 0,
            j: 1,
        };
        assert_eq!(
            chaos_samples(&cfg(), &f, 30).unwrap(),
            chaos_samples(&cfg(), &f, 30).unwrap()
        );
    }
}
