//! Hölder and Besov norms of rough slices and sheets, evaluated on the grid.
//!
//! Besov integrals are node-pair Riemann sums: every pair `i < j` contributes
//! its integrand at `(x_i, x_j)` with weight `(2^-K)²`. The space-time
//! version does the same over pairs of time nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RoughSheet, RoughSlice};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub fn order(self) -> u32 {
        match self {
            Level::One => 1,
            Level::Two => 2,
        }
    }

    fn factor(self) -> f64 {
        self.order() as f64
    }
}

fn check_holder_exponent(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn check_besov(alpha: f64, m: f64) -> Result<()> {
    check_holder_exponent(alpha)?;
    if !(m >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "Besov integrability m must be >= 2, got {m}"
        )));
    }
    if !(m * alpha > 1.0) {
        return Err(Error::constraint(
            "m·α > 1",
            format!("m={m}, α={alpha} (the integral diverges at the diagonal)"),
        ));
    }
    Ok(())
}

/// Magnitude of `A^level(i, j) - B^level(i, j)`; `b = None` means the unit path.
struct PairProbe<'a> {
    a: &'a RoughSlice,
    b: Option<&'a RoughSlice>,
    level: Level,
    l1: Vec<f64>,
    l2: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl<'a> PairProbe<'a> {
    fn new(a: &'a RoughSlice, b: Option<&'a RoughSlice>, level: Level) -> Result<Self> {
        if let Some(b) = b {
            a.same_shape(b)?;
        }
        let d = a.dim;
        Ok(PairProbe {
            a,
            b,
            level,
            l1: vec![0.0; d],
            l2: vec![0.0; d * d],
            m1: vec![0.0; d],
            m2: vec![0.0; d * d],
        })
    }

    #[inline]
    fn magnitude(&mut self, i: usize, j: usize) -> f64 {
        self.a.increment_into(i, j, &mut self.l1, &mut self.l2);
        if let Some(b) = self.b {
            b.increment_into(i, j, &mut self.m1, &mut self.m2);
        }
        let (x, y) = match self.level {
            Level::One => (&self.l1, &self.m1),
            Level::Two => (&self.l2, &self.m2),
        };
        let sq: f64 = if self.b.is_some() {
            x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
        } else {
            x.iter().map(|p| p * p).sum()
        };
        sq.sqrt()
    }
}

fn holder_impl(a: &RoughSlice, b: Option<&RoughSlice>, level: Level, alpha: f64) -> Result<f64> {
    check_holder_exponent(alpha)?;
    let mut probe = PairProbe::new(a, b, level)?;
    let n = a.nodes();
    let h = a.mesh();
    let exponent = level.factor() * alpha;
    let denom: Vec<f64> = (0..n).map(|r| (r as f64 * h).powf(exponent)).collect();
    let mut sup = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            sup = sup.max(probe.magnitude(i, j) / denom[j - i]);
        }
    }
    Ok(sup)
}

/// `sup_{i<j} |A^level(x_i, x_j)| / (x_j - x_i)^{level·α}` over grid pairs.
pub fn holder_norm(slice: &RoughSlice, level: Level, alpha: f64) -> Result<f64> {
    holder_impl(slice, None, level, alpha)
}

/// Hölder distance between the level-`level` increments of two slices.
pub fn holder_distance(a: &RoughSlice, b: &RoughSlice, level: Level, alpha: f64) -> Result<f64> {
    holder_impl(a, Some(b), level, alpha)
}

fn besov_impl(
    a: &RoughSlice,
    b: Option<&RoughSlice>,
    level: Level,
    alpha: f64,
    m: f64,
) -> Result<f64> {
    check_besov(alpha, m)?;
    let mut probe = PairProbe::new(a, b, level)?;
    let n = a.nodes();
    let h = a.mesh();
    let power = m / level.factor();
    let weight: Vec<f64> = (0..n)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                h * h / (r as f64 * h).powf(1.0 + m * alpha)
            }
        })
        .collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mag = probe.magnitude(i, j);
            if mag > 0.0 {
                sum += mag.powf(power) * weight[j - i];
            }
        }
    }
    Ok(sum.powf(level.factor() / m))
}

/// Grid Besov norm: level 1 with `(α, m)`, level 2 with `(2α, m/2)`.
pub fn besov_norm(slice: &RoughSlice, level: Level, alpha: f64, m: f64) -> Result<f64> {
    besov_impl(slice, None, level, alpha, m)
}

pub fn besov_distance(
    a: &RoughSlice,
    b: &RoughSlice,
    level: Level,
    alpha: f64,
    m: f64,
) -> Result<f64> {
    besov_impl(a, Some(b), level, alpha, m)
}

/// The three components of the space-time Besov norm of a sheet: the
/// `(β, m)` norm of the initial-value path and the level-1 / level-2
/// quadruple sums with exponents `(β, α, m)` and `(2β, 2α, m/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeBesov {
    pub initial: f64,
    pub level1: f64,
    pub level2: f64,
}

impl SpacetimeBesov {
    pub fn total(&self) -> f64 {
        self.initial + self.level1 + self.level2
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::GridMismatch("time grid is not uniform".into()));
        }
    }
    Ok(dt)
}

pub fn spacetime_besov_norm(
    sheet: &RoughSheet,
    beta: f64,
    alpha: f64,
    m: f64,
) -> Result<SpacetimeBesov> {
    spacetime_impl(sheet, None, beta, alpha, m)
}

/// Space-time Besov norm of the difference `A - B`, level by level.
pub fn spacetime_besov_distance(
    a: &RoughSheet,
    b: &RoughSheet,
    beta: f64,
    alpha: f64,
    m: f64,
) -> Result<SpacetimeBesov> {
    a.same_grid(b)?;
    spacetime_impl(a, Some(b), beta, alpha, m)
}

fn spacetime_impl(
    a: &RoughSheet,
    b: Option<&RoughSheet>,
    beta: f64,
    alpha: f64,
    m: f64,
) -> Result<SpacetimeBesov> {
    check_besov(alpha, m)?;
    if !(beta > 0.0 && beta * m > 1.0) {
        return Err(Error::constraint("β > 1/m", format!("β={beta}, m={m}")));
    }
    let dt = uniform_step(a.times())?;
    let n_t = a.len();
    let d = a.dim();
    let n = a.slice(0).nodes();
    let h = a.slice(0).mesh();

    let time_weight: Vec<f64> = (0..n_t)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                dt * dt / (r as f64 * dt).powf(1.0 + beta * m)
            }
        })
        .collect();
    let space_weight: Vec<f64> = (0..n)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                h * h / (r as f64 * h).powf(1.0 + alpha * m)
            }
        })
        .collect();

    // v_t for A - B
    let init: Vec<Vec<f64>> = (0..n_t)
        .map(|t| {
            let va = a.slice(t).initial_value();
            match b {
                Some(b) => va
                    .iter()
                    .zip(b.slice(t).initial_value())
                    .map(|(x, y)| x - y)
                    .collect(),
                None => va.to_vec(),
            }
        })
        .collect();
    let mut init_sum = 0.0;
    for s in 0..n_t {
        for t in (s + 1)..n_t {
            let diff = super::euclid_diff(&init[t], &init[s]);
            if diff > 0.0 {
                init_sum += diff.powf(m) * time_weight[t - s];
            }
        }
    }

    // Level-1 prefix differences c_t[j] = A¹_t(0, x_j) - B¹_t(0, x_j).
    let c1: Vec<Vec<f64>> = (0..n_t)
        .map(|t| {
            let pa = a.slice(t).level1_prefixes();
            match b {
                Some(b) => pa
                    .iter()
                    .zip(b.slice(t).level1_prefixes())
                    .map(|(x, y)| x - y)
                    .collect(),
                None => pa.to_vec(),
            }
        })
        .collect();

    let half_m = m / 2.0;
    let partials: Vec<(f64, f64)> = (0..n_t)
        .into_par_iter()
        .map(|s| {
            let mut sum1 = 0.0;
            let mut sum2 = 0.0;
            let mut e = vec![0.0; n * d];
            let mut inc = IncScratch::new(d);
            for t in (s + 1)..n_t {
                let wt = time_weight[t - s];
                for (k, ek) in e.iter_mut().enumerate() {
                    *ek = c1[t][k] - c1[s][k];
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let ws = space_weight[j - i];
                        let mut sq1 = 0.0;
                        for p in 0..d {
                            let v = e[j * d + p] - e[i * d + p];
                            sq1 += v * v;
                        }
                        if sq1 > 0.0 {
                            sum1 += sq1.powf(0.5 * m) * wt * ws;
                        }
                        let sq2 = inc.level2_double_diff(a, b, s, t, i, j);
                        if sq2 > 0.0 {
                            sum2 += sq2.powf(0.5 * half_m) * wt * ws;
                        }
                    }
                }
            }
            (sum1, sum2)
        })
        .collect();
    let (sum1, sum2) = partials
        .iter()
        .fold((0.0, 0.0), |(x, y), (p, q)| (x + p, y + q));

    Ok(SpacetimeBesov {
        initial: init_sum.powf(1.0 / m),
        level1: sum1.powf(1.0 / m),
        level2: sum2.powf(2.0 / m),
    })
}

struct IncScratch {
    a1: Vec<f64>,
    a2: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    acc: Vec<f64>,
}

impl IncScratch {
    fn new(d: usize) -> Self {
        IncScratch {
            a1: vec![0.0; d],
            a2: vec![0.0; d * d],
            b1: vec![0.0; d],
            b2: vec![0.0; d * d],
            acc: vec![0.0; d * d],
        }
    }

    /// Squared Frobenius norm of `(A²_t - B²_t)(i,j) - (A²_s - B²_s)(i,j)`.
    fn level2_double_diff(
        &mut self,
        a: &RoughSheet,
        b: Option<&RoughSheet>,
        s: usize,
        t: usize,
        i: usize,
        j: usize,
    ) -> f64 {
        a.slice(t).increment_into(i, j, &mut self.a1, &mut self.a2);
        self.acc.copy_from_slice(&self.a2);
        a.slice(s).increment_into(i, j, &mut self.a1, &mut self.a2);
        for (x, y) in self.acc.iter_mut().zip(&self.a2) {
            *x -= y;
        }
        if let Some(b) = b {
            b.slice(t).increment_into(i, j, &mut self.b1, &mut self.b2);
            for (x, y) in self.acc.iter_mut().zip(&self.b2) {
                *x -= y;
            }
            b.slice(s).increment_into(i, j, &mut self.b1, &mut self.b2);
            for (x, y) in self.acc.iter_mut().zip(&self.b2) {
                *x += y;
            }
        }
        self.acc.iter().map(|v| v * v).sum()
    }
}

/// Both sides of the Besov-to-Hölder embedding inequalities for a pair of
/// slices, and their ratios (`None` when the right-hand side vanishes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub holder1: f64,
    pub besov1: f64,
    pub ratio1: Option<f64>,
    pub holder2: f64,
    pub besov_rhs2: f64,
    pub ratio2: Option<f64>,
}

/// Level 1: `‖A¹-B¹‖_{H;α-1/m}` against `‖A¹-B¹‖_{B;α,m}`.
/// Level 2: `‖A²-B²‖_{H;2α-2/m}` against
/// `(‖A¹-B¹‖_{B} + ‖A²-B²‖_{B}) (‖A¹‖_B + ‖A²‖_B + ‖B¹‖_B + ‖B²‖_B)`.
pub fn embedding_ratio(
    a: &RoughSlice,
    b: &RoughSlice,
    alpha: f64,
    m: f64,
) -> Result<EmbeddingReport> {
    if !(alpha - 1.0 / m > 1.0 / 3.0) {
        return Err(Error::constraint(
            "α - 1/m > 1/3",
            format!("α={alpha}, m={m}"),
        ));
    }
    let lower = alpha - 1.0 / m;
    let holder1 = holder_distance(a, b, Level::One, lower)?;
    let holder2 = holder_distance(a, b, Level::Two, lower)?;
    let besov1 = besov_distance(a, b, Level::One, alpha, m)?;
    let besov2 = besov_distance(a, b, Level::Two, alpha, m)?;
    let size = besov_norm(a, Level::One, alpha, m)?
        + besov_norm(a, Level::Two, alpha, m)?
        + besov_norm(b, Level::One, alpha, m)?
        + besov_norm(b, Level::Two, alpha, m)?;
    let besov_rhs2 = (besov1 + besov2) * size;
    let ratio = |lhs: f64, rhs: f64| if rhs > 0.0 { Some(lhs / rhs) } else { None };
    Ok(EmbeddingReport {
        holder1,
        besov1,
        ratio1: ratio(holder1, besov1),
        holder2,
        besov_rhs2,
        ratio2: ratio(holder2, besov_rhs2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::{lift_piecewise_linear, PathSlice};

    fn linear(level: u32) -> RoughSlice {
        let n = (1usize << level) + 1;
        let h = 1.0 / (n - 1) as f64;
        lift_piecewise_linear(
            &PathSlice::new(1, level, (0..n).map(|j| j as f64 * h).collect()).unwrap(),
        )
    }

    fn wiggly(level: u32, amp: f64, phase: f64) -> RoughSlice {
        let n = (1usize << level) + 1;
        let mut v = Vec::with_capacity(2 * n);
        for j in 0..n {
            let x = j as f64 / (n - 1) as f64;
            v.push(amp * (7.0 * x + phase).sin() + 0.3 * (31.0 * x).cos());
            v.push(amp * (5.0 * x - phase).cos() * x);
        }
        lift_piecewise_linear(&PathSlice::new(2, level, v).unwrap())
    }

    #[test]
    fn constant_slice_norms_vanish() {
        let c = RoughSlice::constant(vec![2.0, 1.0], 5).unwrap();
        assert_eq!(holder_norm(&c, Level::One, 0.4).unwrap(), 0.0);
        assert_eq!(holder_norm(&c, Level::Two, 0.4).unwrap(), 0.0);
        assert_eq!(besov_norm(&c, Level::One, 0.4, 4.0).unwrap(), 0.0);
        assert_eq!(besov_norm(&c, Level::Two, 0.4, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_slice_holder_norms() {
        let s = linear(6);
        assert!((holder_norm(&s, Level::One, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!((holder_norm(&s, Level::Two, 0.5).unwrap() - 0.5).abs() < 1e-14);
        // Level 2 at exponent 2α: ½ sup (y-x)^{2-2α}, attained on the full interval.
        assert!((holder_norm(&s, Level::Two, 0.4).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn linear_slice_besov_riemann_sum_converges() {
        // ∬_{x<y} (y-x)^{1.4} dx dy = 1/(2.4·3.4)
        let exact = (1.0f64 / (2.4 * 3.4)).powf(0.25);
        let mut prev_err = f64::INFINITY;
        for level in [6u32, 8, 10] {
            let v = besov_norm(&linear(level), Level::One, 0.4, 4.0).unwrap();
            let err = (v - exact).abs() / exact;
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 2e-3, "relative error {prev_err}");
    }

    #[test]
    fn besov_rejects_divergent_parameters() {
        let s = linear(3);
        assert!(matches!(
            besov_norm(&s, Level::One, 0.2, 4.0),
            Err(Error::Constraint { .. })
        ));
        assert!(matches!(
            besov_norm(&s, Level::One, 0.4, 1.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn norms_are_homogeneous_under_dilation() {
        let s = wiggly(6, 1.0, 0.2);
        for eps in [0.5, 0.25, 2.0] {
            let d = s.dilate(eps);
            for (level, p) in [(Level::One, 1), (Level::Two, 2)] {
                let f = eps.powi(p);
                let h0 = holder_norm(&s, level, 0.4).unwrap();
                assert!((holder_norm(&d, level, 0.4).unwrap() - f * h0).abs() <= 1e-13 * f * h0);
                let b0 = besov_norm(&s, level, 0.4, 8.0).unwrap();
                assert!(
                    (besov_norm(&d, level, 0.4, 8.0).unwrap() - f * b0).abs() <= 1e-12 * f * b0
                );
            }
        }
    }

    #[test]
    fn distance_to_unit_is_norm() {
        let s = wiggly(5, 0.8, 1.0);
        let unit = RoughSlice::constant(vec![0.0, 0.0], 5).unwrap();
        for level in [Level::One, Level::Two] {
            assert_eq!(
                holder_distance(&s, &unit, level, 0.3).unwrap(),
                holder_norm(&s, level, 0.3).unwrap()
            );
            let a = besov_distance(&s, &unit, level, 0.4, 6.0).unwrap();
            let b = besov_norm(&s, level, 0.4, 6.0).unwrap();
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn embedding_ratio_cases() {
        let a = wiggly(6, 1.0, 0.0);
        let same = embedding_ratio(&a, &a, 0.4, 20.0).unwrap();
        assert_eq!(same.ratio1, None);
        assert_eq!(same.ratio2, None);

        let unit = RoughSlice::constant(vec![0.0, 0.0], 6).unwrap();
        let r = embedding_ratio(&a, &unit, 0.4, 20.0).unwrap();
        let expected = holder_norm(&a, Level::One, 0.35).unwrap()
            / besov_norm(&a, Level::One, 0.4, 20.0).unwrap();
        assert!((r.ratio1.unwrap() - expected).abs() <= 1e-12 * expected);
        assert!(r.ratio2.unwrap().is_finite());

        assert!(matches!(
            embedding_ratio(&a, &unit, 0.4, 10.0),
            Err(Error::Constraint { .. })
        ));
    }

    fn sheet_from(slices: Vec<RoughSlice>) -> RoughSheet {
        let n = slices.len();
        RoughSheet::new((0..n).map(|i| i as f64 / (n - 1) as f64).collect(), slices).unwrap()
    }

    #[test]
    fn spacetime_norm_of_constant_sheet_vanishes() {
        let s = sheet_from(
            (0..5)
                .map(|_| RoughSlice::constant(vec![0.0], 3).unwrap())
                .collect(),
        );
        let v = spacetime_besov_norm(&s, 0.3, 0.4, 6.0).unwrap();
        assert_eq!(
            v,
            SpacetimeBesov {
                initial: 0.0,
                level1: 0.0,
                level2: 0.0
            }
        );
    }

    #[test]
    fn spacetime_norm_separates_for_single_nonzero_slice() {
        // Only the last slice is non-trivial, so every nonzero term pairs
        // the last time with an earlier one.
        let (beta, alpha, m) = (0.3, 0.4, 6.0);
        let level = 4;
        let unit = RoughSlice::constant(vec![0.0, 0.0], level).unwrap();
        let last = wiggly(level, 1.0, 0.5);
        let n_t = 6;
        let mut slices = vec![unit.clone(); n_t - 1];
        slices.push(last.clone());
        let sheet = sheet_from(slices);
        let dt = 1.0 / (n_t - 1) as f64;
        let time_factor: f64 = (1..n_t)
            .map(|r| dt * dt / (r as f64 * dt).powf(1.0 + beta * m))
            .sum();
        let v = spacetime_besov_norm(&sheet, beta, alpha, m).unwrap();
        let b1 = besov_norm(&last, Level::One, alpha, m).unwrap();
        let b2 = besov_norm(&last, Level::Two, alpha, m).unwrap();
        let e1 = (time_factor * b1.powf(m)).powf(1.0 / m);
        let e2 = (time_factor * b2.powf(m / 2.0)).powf(2.0 / m);
        assert!((v.level1 - e1).abs() <= 1e-12 * e1);
        assert!((v.level2 - e2).abs() <= 1e-12 * e2);
        let v0: f64 = last
            .initial_value()
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let e0 = (time_factor * v0.powf(m)).powf(1.0 / m);
        assert!((v.initial - e0).abs() <= 1e-12 * e0);
    }

    #[test]
    fn spacetime_rejects_small_beta() {
        let s = sheet_from(
            (0..3)
                .map(|_| RoughSlice::constant(vec![0.0], 2).unwrap())
                .collect(),
        );
        assert!(matches!(
            spacetime_besov_norm(&s, 0.01, 0.4, 30.0),
            Err(Error::Constraint { .. })
        ));
    }
}
