//! Shifts `h(t,x) = Σ ĥ_n(t) v_n(x)` driven by square-integrable controls,
//! `ĥ_n(t) = ∫_0^t e^{-λ_n(t-r)} f_n(r) dr`, with `‖h‖²_H = Σ ‖f_n‖²_{L²}`.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::mode_rate;
use crate::dyadic::{lift_level, polygonal_restrict};
use crate::error::{Error, Result};
use crate::rough::RoughSheet;
use crate::sampler::{basis_eval, FieldSample, SpectralConfig};

/// Piecewise-constant control of one Fourier mode of one component:
/// `values[i]` on `[breakpoints[i], breakpoints[i+1])`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeControl {
    pub mode: i64,
    pub component: usize,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModeControl {
    pub fn constant(mode: i64, component: usize, horizon: f64, value: f64) -> Self {
        ModeControl {
            mode,
            component,
            breakpoints: vec![0.0, horizon],
            values: vec![value],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.breakpoints.len() != self.values.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "mode {} needs one more breakpoint than values ({} vs {})",
                self.mode,
                self.breakpoints.len(),
                self.values.len()
            )));
        }
        if self
            .breakpoints
            .iter()
            .chain(&self.values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(format!("control of mode {}", self.mode)));
        }
        if self.breakpoints.first().is_some_and(|b| *b < 0.0)
            || self.breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(format!(
                "breakpoints of mode {} must be nonnegative and increasing",
                self.mode
            )));
        }
        Ok(())
    }

    fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(f, w)| f * f * (w[1] - w[0]))
            .sum()
    }

    /// `∫_0^t e^{-λ(t-r)} f(r) dr`, exact on each constant piece.
    fn convolve(&self, lambda: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for (f, w) in self.values.iter().zip(self.breakpoints.windows(2)) {
            let (u0, u1) = (w[0], w[1].min(t));
            if u1 <= u0 {
                continue;
            }
            acc += if lambda == 0.0 {
                f * (u1 - u0)
            } else {
                f * (-lambda * (t - u1)).exp() * (-(-lambda * (u1 - u0)).exp_m1()) / lambda
            };
        }
        acc
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CMControl {
    pub mode_controls: Vec<ModeControl>,
}

impl CMControl {
    pub fn new(mode_controls: Vec<ModeControl>) -> Self {
        CMControl { mode_controls }
    }

    /// Checks every piece, rejects repeated `(mode, component)` pairs,
    /// components `≥ dim` and modes beyond the cutoff.
    pub fn validate(&self, dim: usize, cutoff: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.mode_controls {
            c.validate()?;
            if c.component >= dim {
                return Err(Error::InvalidParameter(format!(
                    "control component {} out of range for d={dim}",
                    c.component
                )));
            }
            if c.mode.unsigned_abs() as usize > cutoff {
                return Err(Error::InvalidParameter(format!(
                    "control mode {} beyond the cutoff N={cutoff}",
                    c.mode
                )));
            }
            if !seen.insert((c.mode, c.component)) {
                return Err(Error::InvalidParameter(format!(
                    "mode {} of component {} controlled twice",
                    c.mode, c.component
                )));
            }
        }
        Ok(())
    }

    /// `‖h‖²_H = Σ ∫ f_n(r)² dr`.
    pub fn norm_sq(&self) -> f64 {
        self.mode_controls.iter().map(ModeControl::norm_sq).sum()
    }

    pub fn scaled(&self, lambda: f64) -> CMControl {
        CMControl {
            mode_controls: self
                .mode_controls
                .iter()
                .map(|c| ModeControl {
                    values: c.values.iter().map(|v| lambda * v).collect(),
                    ..c.clone()
                })
                .collect(),
        }
    }

    /// Union of two controls acting on disjoint `(mode, component)` pairs.
    pub fn combined(&self, other: &CMControl) -> Result<CMControl> {
        let mut all = self.mode_controls.clone();
        all.extend(other.mode_controls.iter().cloned());
        let out = CMControl::new(all);
        let mut seen = BTreeSet::new();
        for c in &out.mode_controls {
            if !seen.insert((c.mode, c.component)) {
                return Err(Error::InvalidParameter(format!(
                    "controls overlap on mode {} of component {}",
                    c.mode, c.component
                )));
            }
        }
        Ok(out)
    }
}

/// `I = ‖h‖²_H / 2`.
pub fn rate_function(ctrl: &CMControl) -> f64 {
    ctrl.norm_sq() / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMPath {
    pub field: FieldSample,
    pub norm_sq: f64,
}

/// Evaluates `h` on the grid of `grid`; the seed is ignored.
pub fn cameron_martin_path(ctrl: &CMControl, grid: &SpectralConfig) -> Result<CMPath> {
    grid.validate()?;
    ctrl.validate(grid.dim, grid.n_modes)?;
    let nodes = grid.nodes();
    let xs: Vec<f64> = (0..nodes).map(|j| j as f64 / (nodes - 1) as f64).collect();
    let basis: Vec<Vec<f64>> = ctrl
        .mode_controls
        .iter()
        .map(|c| xs.iter().map(|&x| basis_eval(c.mode, x)).collect())
        .collect();
    let mut field = FieldSample::zeros(grid.clone())?;
    let d = grid.dim;
    for (ti, t) in grid.times().into_iter().enumerate() {
        let slice = field.time_slice_mut(ti);
        for (c, v) in ctrl.mode_controls.iter().zip(&basis) {
            let amp = c.convolve(mode_rate(c.mode), t);
            if amp == 0.0 {
                continue;
            }
            for (j, vj) in v.iter().enumerate() {
                slice[j * d + c.component] += amp * vj;
            }
        }
    }
    Ok(CMPath {
        field,
        norm_sq: ctrl.norm_sq(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmRegularity {
    pub q: f64,
    pub gamma: f64,
    /// `sup_t sup_{x<y} |h(t,y) - h(t,x)| / |y - x|^{1/2}` over grid pairs.
    pub holder_half: f64,
    /// `sup_t (Σ_k k^γ Σ_i |h(t, i/2^k) - h(t, (i-1)/2^k)|^q)^{1/q}`.
    pub q_variation: f64,
    pub h_norm: f64,
    /// Both quantities divided by `‖h‖_H`; `None` when `h = 0`.
    pub holder_ratio: Option<f64>,
    pub q_variation_ratio: Option<f64>,
}

/// Default weight exponent in the dyadic `q`-variation majorant; any
/// `γ > q − 1` is admissible.
pub fn default_gamma(q: f64) -> f64 {
    q - 0.75
}

pub fn cm_regularity_check(path: &CMPath, q: f64, gamma: Option<f64>) -> Result<CmRegularity> {
    if !(q > 4.0 / 3.0 && q < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in (4/3, 2), got {q}"
        )));
    }
    let gamma = gamma.unwrap_or_else(|| default_gamma(q));
    if !(gamma > q - 1.0) {
        return Err(Error::constraint("γ > q − 1", format!("γ={gamma}, q={q}")));
    }
    let h = &path.field;
    let d = h.dim();
    let nodes = h.nodes();
    let level = h.grid_level();
    let mesh = 1.0 / (nodes - 1) as f64;
    let inv_sqrt: Vec<f64> = (0..nodes)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                1.0 / (r as f64 * mesh).sqrt()
            }
        })
        .collect();
    let per_time: Vec<(f64, f64)> = (0..h.n_times())
        .into_par_iter()
        .map(|t| {
            let s = h.time_slice(t);
            let diff = |i: usize, j: usize| -> f64 {
                (0..d)
                    .map(|c| (s[j * d + c] - s[i * d + c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let mut holder = 0.0f64;
            for i in 0..nodes {
                for j in (i + 1)..nodes {
                    holder = holder.max(diff(i, j) * inv_sqrt[j - i]);
                }
            }
            let mut qsum = 0.0;
            for k in 1..=level {
                let step = 1usize << (level - k);
                let inner: f64 = (1..=(1usize << k))
                    .map(|i| diff((i - 1) * step, i * step).powf(q))
                    .sum();
                qsum += (k as f64).powf(gamma) * inner;
            }
            (holder, qsum.powf(1.0 / q))
        })
        .collect();
    let holder_half = per_time.iter().fold(0.0f64, |m, p| m.max(p.0));
    let q_variation = per_time.iter().fold(0.0f64, |m, p| m.max(p.1));
    let h_norm = path.norm_sq.sqrt();
    let ratio = |v: f64| (h_norm > 0.0).then(|| v / h_norm);
    Ok(CmRegularity {
        q,
        gamma,
        holder_half,
        q_variation,
        h_norm,
        holder_ratio: ratio(holder_half),
        q_variation_ratio: ratio(q_variation),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRow {
    pub k: u32,
    /// `sup_{t,x} |h(k)(t,x) - h(t,x)|` on the grid.
    pub pointwise: f64,
    /// `sup_{t, x<y} |H(k)^1_{x,y} - H^1_{x,y}|`.
    pub level1: f64,
    /// `sup_{t, x<y} |H(k)^2_{x,y} - H^2_{x,y}|`.
    pub level2: f64,
}

fn sheet_pair_sup(a: &RoughSheet, b: &RoughSheet) -> (f64, f64) {
    let d = a.dim();
    let per_time: Vec<(f64, f64)> = (0..a.len())
        .into_par_iter()
        .map(|t| {
            let (sa, sb) = (a.slice(t), b.slice(t));
            let n = sa.nodes();
            let (mut a1, mut a2) = (vec![0.0; d], vec![0.0; d * d]);
            let (mut b1, mut b2) = (vec![0.0; d], vec![0.0; d * d]);
            let (mut m1, mut m2) = (0.0f64, 0.0f64);
            for i in 0..n {
                for j in (i + 1)..n {
                    sa.increment_into(i, j, &mut a1, &mut a2);
                    sb.increment_into(i, j, &mut b1, &mut b2);
                    let e1: f64 = a1.iter().zip(&b1).map(|(x, y)| (x - y).powi(2)).sum();
                    let e2: f64 = a2.iter().zip(&b2).map(|(x, y)| (x - y).powi(2)).sum();
                    m1 = m1.max(e1);
                    m2 = m2.max(e2);
                }
            }
            (m1.sqrt(), m2.sqrt())
        })
        .collect();
    per_time
        .iter()
        .fold((0.0f64, 0.0f64), |(x, y), p| (x.max(p.0), y.max(p.1)))
}

/// Distances between the lifts of the level-`k` polygonal approximations
/// of `h` and the lift on the full grid.
pub fn cm_lift_uniform_convergence(path: &CMPath, ks: &[u32]) -> Result<Vec<UniformRow>> {
    let h = &path.field;
    let full = lift_level(h, h.grid_level())?;
    let d = h.dim();
    ks.iter()
        .map(|&k| {
            let restricted = polygonal_restrict(h, k)?;
            let pointwise = restricted
                .values()
                .chunks_exact(d)
                .zip(h.values().chunks_exact(d))
                .map(|(p, q)| {
                    p.iter()
                        .zip(q)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0f64, f64::max);
            let (level1, level2) = sheet_pair_sup(&lift_level(h, k)?, &full);
            Ok(UniformRow {
                k,
                pointwise,
                level1,
                level2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(level: u32) -> SpectralConfig {
        SpectralConfig {
            n_modes: 8,
            time_horizon: 1.0,
            n_time: 4,
            grid_level: level,
            dim: 2,
            seed: 0,
        }
    }

    #[test]
    fn zero_control_gives_zero_path() {
        let p = cameron_martin_path(&CMControl::default(), &grid(4)).unwrap();
        assert!(p.field.values().iter().all(|v| *v == 0.0));
        assert_eq!(p.norm_sq, 0.0);
        let r = cm_regularity_check(&p, 1.5, None).unwrap();
        assert_eq!((r.holder_half, r.q_variation), (0.0, 0.0));
        assert_eq!(r.holder_ratio, None);
    }

    #[test]
    fn brownian_mode_integrates_control() {
        let ctrl = CMControl::new(vec![ModeControl::constant(0, 0, 1.0, 1.0)]);
        let p = cameron_martin_path(&ctrl, &grid(3)).unwrap();
        for (ti, t) in p.field.times().iter().enumerate() {
            for j in 0..p.field.nodes() {
                assert!((p.field.value(ti, j, 0) - t).abs() < 1e-15);
                assert_eq!(p.field.value(ti, j, 1), 0.0);
            }
        }
        assert_eq!(p.norm_sq, 1.0);
        assert_eq!(rate_function(&ctrl), 0.5);
    }

    #[test]
    fn first_mode_closed_form() {
        let ctrl = CMControl::new(vec![ModeControl::constant(1, 1, 1.0, 1.0)]);
        let p = cameron_martin_path(&ctrl, &grid(3)).unwrap();
        let l = 4.0 * PI * PI;
        for (ti, t) in p.field.times().iter().enumerate() {
            let amp = (1.0 - (-l * t).exp()) / l;
            for j in 0..p.field.nodes() {
                let x = j as f64 / 8.0;
                let expect = amp * std::f64::consts::SQRT_2 * (2.0 * PI * x).cos();
                assert!((p.field.value(ti, j, 1) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn piecewise_control_matches_split_sum() {
        // A two-piece control equals the sum of its pieces.
        let two = ModeControl {
            mode: 2,
            component: 0,
            breakpoints: vec![0.0, 0.3, 0.8],
            values: vec![1.5, -2.0],
        };
        let a = ModeControl {
            mode: 2,
            component: 0,
            breakpoints: vec![0.0, 0.3],
            values: vec![1.5],
        };
        let b = ModeControl {
            mode: 2,
            component: 0,
            breakpoints: vec![0.3, 0.8],
            values: vec![-2.0],
        };
        let l = mode_rate(2);
        for t in [0.1, 0.3, 0.5, 1.0] {
            assert!((two.convolve(l, t) - a.convolve(l, t) - b.convolve(l, t)).abs() < 1e-16);
        }
        assert!((two.norm_sq() - (2.25 * 0.3 + 4.0 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn control_validation() {
        let g = grid(3);
        let dup = CMControl::new(vec![
            ModeControl::constant(1, 0, 1.0, 1.0),
            ModeControl::constant(1, 0, 1.0, 2.0),
        ]);
        assert!(cameron_martin_path(&dup, &g).is_err());
        let far = CMControl::new(vec![ModeControl::constant(9, 0, 1.0, 1.0)]);
        assert!(cameron_martin_path(&far, &g).is_err());
        let comp = CMControl::new(vec![ModeControl::constant(1, 2, 1.0, 1.0)]);
        assert!(cameron_martin_path(&comp, &g).is_err());
        let bad = CMControl::new(vec![ModeControl {
            mode: 0,
            component: 0,
            breakpoints: vec![0.5, 0.2],
            values: vec![1.0],
        }]);
        assert!(cameron_martin_path(&bad, &g).is_err());
    }

    #[test]
    fn rate_function_scaling_and_additivity() {
        let a = CMControl::new(vec![ModeControl {
            mode: 3,
            component: 0,
            breakpoints: vec![0.0, 0.25, 1.0],
            values: vec![0.5, 1.25],
        }]);
        let b = CMControl::new(vec![ModeControl::constant(-1, 1, 0.5, 2.0)]);
        assert_eq!(rate_function(&a.scaled(3.0)), 9.0 * rate_function(&a));
        assert_eq!(rate_function(&a.scaled(0.5)), 0.25 * rate_function(&a));
        assert_eq!(
            rate_function(&a.combined(&b).unwrap()),
            rate_function(&a) + rate_function(&b)
        );
        assert!(a.combined(&a).is_err());
    }

    #[test]
    fn regularity_is_linear_and_validated() {
        let ctrl = CMControl::new(vec![
            ModeControl::constant(1, 0, 1.0, 1.0),
            ModeControl::constant(-2, 1, 1.0, 0.5),
        ]);
        let g = grid(6);
        let r1 = cm_regularity_check(&cameron_martin_path(&ctrl, &g).unwrap(), 1.5, None).unwrap();
        let r2 = cm_regularity_check(
            &cameron_martin_path(&ctrl.scaled(2.0), &g).unwrap(),
            1.5,
            None,
        )
        .unwrap();
        assert!((r2.holder_half - 2.0 * r1.holder_half).abs() < 1e-14);
        assert!((r2.q_variation - 2.0 * r1.q_variation).abs() < 1e-12);
        assert!((r2.holder_ratio.unwrap() - r1.holder_ratio.unwrap()).abs() < 1e-14);
        let p = cameron_martin_path(&ctrl, &g).unwrap();
        assert!(matches!(
            cm_regularity_check(&p, 2.0, None),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            cm_regularity_check(&p, 1.2, None),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            cm_regularity_check(&p, 1.5, Some(0.4)),
            Err(Error::Constraint { .. })
        ));
    }

    #[test]
    fn lift_prefix_is_increment_of_h() {
        let ctrl = CMControl::new(vec![
            ModeControl::constant(1, 0, 1.0, 1.0),
            ModeControl::constant(2, 1, 1.0, -1.0),
        ]);
        let p = cameron_martin_path(&ctrl, &grid(5)).unwrap();
        let sheet = lift_level(&p.field, 5).unwrap();
        for t in 0..p.field.n_times() {
            let pre = sheet.slice(t).level1_prefixes();
            for j in 0..p.field.nodes() {
                for i in 0..2 {
                    assert_eq!(
                        pre[j * 2 + i],
                        p.field.value(t, j, i) - p.field.value(t, 0, i)
                    );
                }
            }
        }
    }

    #[test]
    fn x_constant_path_has_zero_lift_error() {
        let ctrl = CMControl::new(vec![
            ModeControl::constant(0, 0, 1.0, 1.0),
            ModeControl::constant(0, 1, 1.0, -0.5),
        ]);
        let p = cameron_martin_path(&ctrl, &grid(5)).unwrap();
        for row in cm_lift_uniform_convergence(&p, &[1, 2, 3]).unwrap() {
            assert_eq!((row.pointwise, row.level1, row.level2), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn single_mode_lift_error_decreases() {
        let ctrl = CMControl::new(vec![
            ModeControl::constant(1, 0, 1.0, 1.0),
            ModeControl::constant(-1, 1, 1.0, 1.0),
        ]);
        let p = cameron_martin_path(&ctrl, &grid(7)).unwrap();
        let reg = cm_regularity_check(&p, 1.5, None).unwrap();
        let rows = cm_lift_uniform_convergence(&p, &[2, 3, 4, 5, 6]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].level1 < w[0].level1 && w[1].level2 < w[0].level2);
        }
        for r in &rows {
            assert!(r.pointwise <= 2.0 * reg.holder_half * 2f64.powf(-(r.k as f64) / 2.0));
        }
    }
}
