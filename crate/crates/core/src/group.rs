//! The step-2 truncated tensor group over `R^d`.
//!
//! Elements are triples `(1, g1, g2)` with `g1` a vector and `g2` a `d x d`
//! matrix stored row-major. The product is Chen's rule
//! `(g1, g2) (h1, h2) = (g1 + h1, g2 + h2 + g1 ⊗ h1)`.
//!
//! The homogeneous norm used throughout is
//! `‖g‖ = max(|g1|, |Anti(g2)|_F^{1/2})`. It is symmetric under inversion,
//! scales linearly under dilation and is sub-additive under the product, so
//! `d(g, h) = ‖g⁻¹ h‖` is a genuine left-invariant metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the entries of `Sym(g2) - ½ g1 ⊗ g1`, scaled by
/// `max(1, |g1|²)` so that dilated elements are judged on the same footing.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    dim: usize,
    level1: Vec<f64>,
    level2: Vec<f64>,
}

impl GroupElement {
    pub fn unit(dim: usize) -> Self {
        GroupElement {
            dim,
            level1: vec![0.0; dim],
            level2: vec![0.0; dim * dim],
        }
    }

    /// Builds an element from its two levels; `level2` is row-major.
    pub fn new(level1: Vec<f64>, level2: Vec<f64>) -> Result<Self> {
        let dim = level1.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if level2.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: level2.len(),
            });
        }
        if level1.iter().chain(level2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("group element entries".into()));
        }
        Ok(GroupElement {
            dim,
            level1,
            level2,
        })
    }

    /// Lift of the straight segment with displacement `delta`: `(Δ, ½ Δ⊗Δ)`.
    pub fn segment(delta: &[f64]) -> Self {
        let dim = delta.len();
        let mut level2 = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                level2[i * dim + j] = 0.5 * delta[i] * delta[j];
            }
        }
        GroupElement {
            dim,
            level1: delta.to_vec(),
            level2,
        }
    }

    pub(crate) fn from_raw(dim: usize, level1: Vec<f64>, level2: Vec<f64>) -> Self {
        debug_assert_eq!(level1.len(), dim);
        debug_assert_eq!(level2.len(), dim * dim);
        GroupElement {
            dim,
            level1,
            level2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level1(&self) -> &[f64] {
        &self.level1
    }

    pub fn level2(&self) -> &[f64] {
        &self.level2
    }

    pub fn level2_entry(&self, i: usize, j: usize) -> f64 {
        self.level2[i * self.dim + j]
    }

    pub fn is_unit(&self) -> bool {
        self.level1
            .iter()
            .chain(self.level2.iter())
            .all(|&v| v == 0.0)
    }

    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let d = self.dim;
        let level1 = self
            .level1
            .iter()
            .zip(&other.level1)
            .map(|(a, b)| a + b)
            .collect();
        let mut level2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                level2[k] = self.level2[k] + other.level2[k] + self.level1[i] * other.level1[j];
            }
        }
        Ok(GroupElement {
            dim: d,
            level1,
            level2,
        })
    }

    pub fn inverse(&self) -> GroupElement {
        let d = self.dim;
        let level1 = self.level1.iter().map(|v| -v).collect();
        let mut level2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                level2[k] = self.level1[i] * self.level1[j] - self.level2[k];
            }
        }
        GroupElement {
            dim: d,
            level1,
            level2,
        }
    }

    pub fn dilate(&self, lambda: f64) -> GroupElement {
        let l2 = lambda * lambda;
        GroupElement {
            dim: self.dim,
            level1: self.level1.iter().map(|v| lambda * v).collect(),
            level2: self.level2.iter().map(|v| l2 * v).collect(),
        }
    }

    /// Largest entry of `|Sym(g2) - ½ g1⊗g1|`.
    pub fn symmetric_defect(&self) -> f64 {
        symmetric_defect(self.dim, &self.level1, &self.level2)
    }

    pub fn is_geometric(&self) -> bool {
        self.symmetric_defect() <= geometric_tolerance(&self.level1)
    }

    /// Frobenius norm of the antisymmetric part of level 2.
    pub fn area_norm(&self) -> f64 {
        antisymmetric_frobenius(self.dim, &self.level2)
    }

    /// The homogeneous norm `max(|g1|, |Anti(g2)|_F^{1/2})`.
    pub fn hom_norm(&self) -> Result<f64> {
        let defect = self.symmetric_defect();
        if defect > geometric_tolerance(&self.level1) {
            return Err(Error::NonGeometric { violation: defect });
        }
        Ok(hom_norm_unchecked(self.dim, &self.level1, &self.level2))
    }
}

/// `d(g, h) = ‖g⁻¹ h‖`.
pub fn group_dist(g: &GroupElement, h: &GroupElement) -> Result<f64> {
    if g.dim != h.dim {
        return Err(Error::DimensionMismatch {
            left: g.dim,
            right: h.dim,
        });
    }
    for e in [g, h] {
        let defect = e.symmetric_defect();
        if defect > geometric_tolerance(&e.level1) {
            return Err(Error::NonGeometric { violation: defect });
        }
    }
    Ok(g.inverse().multiply(h)?.hom_norm_raw())
}

impl GroupElement {
    fn hom_norm_raw(&self) -> f64 {
        hom_norm_unchecked(self.dim, &self.level1, &self.level2)
    }
}

pub(crate) fn geometric_tolerance(level1: &[f64]) -> f64 {
    let sq: f64 = level1.iter().map(|v| v * v).sum();
    GEOMETRIC_TOLERANCE * sq.max(1.0)
}

pub(crate) fn symmetric_defect(dim: usize, level1: &[f64], level2: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            let sym = 0.5 * (level2[i * dim + j] + level2[j * dim + i]);
            worst = worst.max((sym - 0.5 * level1[i] * level1[j]).abs());
        }
    }
    worst
}

pub(crate) fn antisymmetric_frobenius(dim: usize, level2: &[f64]) -> f64 {
    // Each strictly upper entry appears twice in the Frobenius sum.
    let mut sq = 0.0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let a = 0.5 * (level2[i * dim + j] - level2[j * dim + i]);
            sq += 2.0 * a * a;
        }
    }
    sq.sqrt()
}

pub(crate) fn hom_norm_unchecked(dim: usize, level1: &[f64], level2: &[f64]) -> f64 {
    let first = level1.iter().map(|v| v * v).sum::<f64>().sqrt();
    first.max(antisymmetric_frobenius(dim, level2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(l1: &[f64], l2: &[f64]) -> GroupElement {
        GroupElement::new(l1.to_vec(), l2.to_vec()).unwrap()
    }

    /// Geometric element: `(v, ½ v⊗v + A)` with `A` antisymmetric.
    fn geometric(v: &[f64], area: &[f64]) -> GroupElement {
        let d = v.len();
        let mut l2 = vec![0.0; d * d];
        let mut idx = 0;
        for i in 0..d {
            for j in 0..d {
                l2[i * d + j] = 0.5 * v[i] * v[j];
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                l2[i * d + j] += area[idx];
                l2[j * d + i] -= area[idx];
                idx += 1;
            }
        }
        el(v, &l2)
    }

    fn geometric_strategy(d: usize) -> impl Strategy<Value = GroupElement> {
        (
            prop::collection::vec(-3.0..3.0f64, d),
            prop::collection::vec(-3.0..3.0f64, d * (d - 1) / 2),
        )
            .prop_map(|(v, a)| geometric(&v, &a))
    }

    fn max_abs_diff(a: &GroupElement, b: &GroupElement) -> f64 {
        a.level1
            .iter()
            .zip(&b.level1)
            .chain(a.level2.iter().zip(&b.level2))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn multiply_examples() {
        let a = el(&[1.0], &[0.0]);
        let b = el(&[2.0], &[0.0]);
        let c = a.multiply(&b).unwrap();
        assert_eq!(c.level1(), &[3.0]);
        assert_eq!(c.level2(), &[2.0]);

        let e1 = el(&[1.0, 0.0], &[0.0; 4]);
        let e2 = el(&[0.0, 1.0], &[0.0; 4]);
        let p = e1.multiply(&e2).unwrap();
        assert_eq!(p.level2(), &[0.0, 1.0, 0.0, 0.0]);

        let g = geometric(&[0.3, -1.2], &[0.7]);
        assert_eq!(GroupElement::unit(2).multiply(&g).unwrap(), g);
        assert_eq!(g.multiply(&GroupElement::unit(2)).unwrap(), g);
    }

    #[test]
    fn multiply_rejects_dimension_mismatch() {
        let r = GroupElement::unit(2).multiply(&GroupElement::unit(3));
        assert!(matches!(
            r,
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(GroupElement::unit(3).inverse(), GroupElement::unit(3));
        let g = el(&[2.0], &[1.0]);
        let inv = g.inverse();
        assert_eq!(inv.level1(), &[-2.0]);
        assert_eq!(inv.level2(), &[3.0]);
        assert!(g.multiply(&inv).unwrap().is_unit());
    }

    #[test]
    fn dilate_examples() {
        let g = el(&[1.0], &[1.0]);
        assert_eq!(g.dilate(1.0), g);
        assert!(g.dilate(0.0).is_unit());
        let g2 = g.dilate(2.0);
        assert_eq!(g2.level1(), &[2.0]);
        assert_eq!(g2.level2(), &[4.0]);
    }

    #[test]
    fn hom_norm_examples() {
        assert_eq!(GroupElement::unit(2).hom_norm().unwrap(), 0.0);
        assert_eq!(el(&[3.0], &[4.5]).hom_norm().unwrap(), 3.0);

        // (0,0) -> (1,0) -> (1,1): level 2 is [[0.5, 1], [0, 0.5]], the
        // antisymmetric part has entries ±½ and Frobenius norm √½.
        let g = GroupElement::segment(&[1.0, 0.0])
            .multiply(&GroupElement::segment(&[0.0, 1.0]))
            .unwrap();
        assert_eq!(g.level2(), &[0.5, 1.0, 0.0, 0.5]);
        let expected = 2f64.sqrt().max(0.5f64.sqrt().sqrt());
        assert!((g.hom_norm().unwrap() - expected).abs() < 1e-15);

        // Area-dominated element: pure antisymmetric level 2.
        let loop_ = geometric(&[0.0, 0.0], &[2.0]);
        assert!((loop_.hom_norm().unwrap() - 8f64.sqrt().sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hom_norm_rejects_non_geometric() {
        let r = el(&[1.0], &[3.0]).hom_norm();
        match r {
            Err(Error::NonGeometric { violation }) => assert!((violation - 2.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_dist_examples() {
        let g = geometric(&[0.4, 1.0], &[0.2]);
        let h = geometric(&[-1.0, 0.5], &[-0.3]);
        assert_eq!(group_dist(&g, &g).unwrap(), 0.0);
        assert_eq!(
            group_dist(&GroupElement::unit(2), &g).unwrap(),
            g.hom_norm().unwrap()
        );
        let eps = 0.37;
        let lhs = group_dist(&g.dilate(eps), &h.dilate(eps)).unwrap();
        let rhs = eps * group_dist(&g, &h).unwrap();
        assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn sum_form_norm_is_not_subadditive() {
        // The candidate |g1| + 2|Anti g2|^{1/2} breaks the triangle
        // inequality on e1 followed by e2; the max form does not.
        let a = GroupElement::segment(&[1.0, 0.0]);
        let b = GroupElement::segment(&[0.0, 1.0]);
        let ab = a.multiply(&b).unwrap();
        let sum_form = |g: &GroupElement| {
            g.level1().iter().map(|v| v * v).sum::<f64>().sqrt() + 2.0 * g.area_norm().sqrt()
        };
        assert!(sum_form(&ab) > sum_form(&a) + sum_form(&b));
        assert!(ab.hom_norm().unwrap() <= a.hom_norm().unwrap() + b.hom_norm().unwrap());
    }

    #[test]
    fn norm_equivalence_constant_is_finite() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for n in 0..10_000 {
            let d = 1 + n % 3;
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let v: Vec<f64> = (0..d)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            let a: Vec<f64> = (0..d * (d - 1) / 2)
                .map(|_| scale * scale * rng.random_range(-1.0..1.0))
                .collect();
            let g = geometric(&v, &a);
            let norm = g.hom_norm().unwrap();
            if norm == 0.0 {
                continue;
            }
            let inhom = v.iter().map(|x| x * x).sum::<f64>().sqrt()
                + g.level2().iter().map(|x| x * x).sum::<f64>().sqrt().sqrt();
            lo = lo.min(inhom / norm);
            hi = hi.max(inhom / norm);
        }
        let c = hi.max(1.0 / lo);
        assert!(c.is_finite() && c < 3.0, "fitted constant {c}");
    }

    proptest! {
        #[test]
        fn associativity(d in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a: Vec<f64> = (0..d * (d - 1) / 2).map(|_| rng.random_range(-2.0..2.0)).collect();
                geometric(&v, &a)
            };
            let (g, h, k) = (draw(), draw(), draw());
            let left = g.multiply(&h).unwrap().multiply(&k).unwrap();
            let right = g.multiply(&h.multiply(&k).unwrap()).unwrap();
            let scale = left.level2().iter().map(|x| x.abs()).fold(1.0, f64::max);
            prop_assert!(max_abs_diff(&left, &right) <= 1e-12 * scale);
        }

        #[test]
        fn inverse_laws(g in geometric_strategy(3)) {
            let id = g.multiply(&g.inverse()).unwrap();
            let scale = g.level2().iter().map(|x| x.abs()).fold(1.0, f64::max);
            prop_assert!(max_abs_diff(&id, &GroupElement::unit(3)) <= 1e-12 * scale);
            prop_assert!(max_abs_diff(&g.inverse().inverse(), &g) <= 1e-12 * scale);
            let n = g.hom_norm().unwrap();
            prop_assert!((g.inverse().hom_norm().unwrap() - n).abs() <= 1e-12 * n.max(1.0));
        }

        #[test]
        fn dilation_semigroup_and_homogeneity(
            g in geometric_strategy(2),
            lambda in -4.0..4.0f64,
            mu in -4.0..4.0f64,
        ) {
            let twice = g.dilate(mu).dilate(lambda);
            let once = g.dilate(lambda * mu);
            prop_assert!(max_abs_diff(&twice, &once) <= 1e-13 * (1.0 + once.level2().iter().map(|x| x.abs()).fold(0.0, f64::max)));
            let n = g.hom_norm().unwrap();
            let nd = g.dilate(lambda).hom_norm().unwrap();
            prop_assert!((nd - lambda.abs() * n).abs() <= 1e-14 * (lambda.abs() * n).max(f64::MIN_POSITIVE));
        }

        #[test]
        fn triangle_inequality(
            g in geometric_strategy(3),
            h in geometric_strategy(3),
            k in geometric_strategy(3),
        ) {
            let gk = group_dist(&g, &k).unwrap();
            let gh = group_dist(&g, &h).unwrap();
            let hk = group_dist(&h, &k).unwrap();
            prop_assert!(gk <= gh + hk + 1e-12 * (gh + hk).max(1.0));
            let hg = group_dist(&h, &g).unwrap();
            prop_assert!((gh - hg).abs() <= 1e-12 * gh.max(1.0));
        }
    }
}
