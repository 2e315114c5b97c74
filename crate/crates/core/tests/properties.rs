use heatlift_core::covariance::{cov_theta, cov_truncated};
use heatlift_core::dyadic::{lift_level, polygonal_restrict};
use heatlift_core::rough::{holder_norm, lift_piecewise_linear, Level, PathSlice, RoughSheet};
use heatlift_core::sampler::{sample_field, SpectralConfig};
use proptest::prelude::*;

fn path_strategy() -> impl Strategy<Value = PathSlice> {
    (1usize..4, 1u32..6).prop_flat_map(|(d, level)| {
        let n = ((1usize << level) + 1) * d;
        prop::collection::vec(-3.0..3.0f64, n)
            .prop_map(move |v| PathSlice::new(d, level, v).unwrap())
    })
}

fn small_config(seed: u64) -> SpectralConfig {
    SpectralConfig {
        n_modes: 16,
        time_horizon: 0.5,
        n_time: 3,
        grid_level: 5,
        dim: 2,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lifts_satisfy_chen_and_are_geometric(path in path_strategy(), picks in prop::array::uniform3(0usize..1000)) {
        let lift = lift_piecewise_linear(&path);
        let n = lift.nodes();
        let mut p = picks.map(|x| x % n);
        p.sort_unstable();
        let whole = lift.increment(p[0], p[2]).unwrap();
        let split = lift.increment(p[0], p[1]).unwrap().multiply(&lift.increment(p[1], p[2]).unwrap()).unwrap();
        for (a, b) in whole.level2().iter().zip(split.level2()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(whole.symmetric_defect() <= 1e-12);
    }

    #[test]
    fn level1_prefix_is_the_path_increment(path in path_strategy()) {
        let lift = lift_piecewise_linear(&path);
        let d = path.dim();
        for j in 0..path.nodes() {
            let pre = lift.prefix(j).unwrap();
            for i in 0..d {
                prop_assert_eq!(pre.level1()[i], path.point(j)[i] - path.point(0)[i]);
            }
            prop_assert_eq!(lift.path_value(j).len(), d);
        }
    }

    #[test]
    fn holder_norm_scales_with_dilation(path in path_strategy(), lambda in 0.1..5.0f64) {
        let lift = lift_piecewise_linear(&path);
        let dil = lift.dilate(lambda);
        for (level, power) in [(Level::One, 1), (Level::Two, 2)] {
            let a = holder_norm(&lift, level, 0.4).unwrap();
            let b = holder_norm(&dil, level, 0.4).unwrap();
            let expect = lambda.powi(power) * a;
            prop_assert!((b - expect).abs() <= 1e-12 * expect.max(1e-300));
        }
    }

    #[test]
    fn covariance_is_symmetric_and_periodic(
        s in 0.0..1.5f64, t in 0.0..1.5f64, x in -1.0..2.0f64, y in -1.0..2.0f64,
    ) {
        let a = cov_theta(s, x, t, y).unwrap();
        prop_assert!((a - cov_theta(t, y, s, x).unwrap()).abs() <= 1e-12);
        prop_assert!((a - cov_theta(s, x + 1.0, t, y).unwrap()).abs() <= 1e-10);
        prop_assert!(a <= (cov_theta(s, x, s, x).unwrap() * cov_theta(t, y, t, y).unwrap()).sqrt() + 1e-12);
    }

    #[test]
    fn truncated_covariance_grows_toward_exact(s in 0.1..1.0f64, t in 0.1..1.0f64) {
        // On the diagonal every mode adds a positive term.
        let full = cov_theta(s, 0.3, s, 0.3).unwrap();
        let mut prev = 0.0;
        for n in [4usize, 16, 64, 256] {
            let c = cov_truncated(s, 0.3, s, 0.3, n).unwrap();
            prop_assert!(c >= prev && c <= full + 1e-12);
            prev = c;
        }
        prop_assert!(full - prev < 1e-3);
        prop_assert!(cov_truncated(s, 0.2, t, 0.7, 8).unwrap().is_finite());
    }

    #[test]
    fn restriction_is_idempotent(seed in any::<u64>(), k in 0u32..5) {
        let f = sample_field(&small_config(seed), 1).unwrap();
        let r = polygonal_restrict(&f, k).unwrap();
        prop_assert_eq!(polygonal_restrict(&r, k).unwrap(), r.clone());
        let step = 1usize << (5 - k);
        for t in 0..f.n_times() {
            for j in (0..f.nodes()).step_by(step) {
                for i in 0..2 {
                    prop_assert_eq!(r.value(t, j, i), f.value(t, j, i));
                }
            }
        }
    }

    #[test]
    fn dist_infty_is_a_homogeneous_metric(seed in any::<u64>(), lambda in -3.0..3.0f64) {
        let c = small_config(seed);
        let a = lift_level(&sample_field(&c, 0).unwrap(), 5).unwrap();
        let b = lift_level(&sample_field(&c, 1).unwrap(), 3).unwrap();
        prop_assert_eq!(a.dist_infty(&a).unwrap(), 0.0);
        let ab = a.dist_infty(&b).unwrap();
        prop_assert!((ab - b.dist_infty(&a).unwrap()).abs() <= 1e-12 * ab.max(1.0));
        let scaled = a.dilate(lambda).dist_infty(&b.dilate(lambda)).unwrap();
        prop_assert!((scaled - lambda.abs() * ab).abs() <= 1e-14 * (lambda.abs() * ab).max(f64::MIN_POSITIVE));
    }
}

#[test]
fn sampling_is_deterministic_per_seed_and_replica() {
    let c = small_config(3);
    assert!(sample_field(&c, 4).unwrap() == sample_field(&c, 4).unwrap());
    assert!(sample_field(&c, 4).unwrap() != sample_field(&c, 5).unwrap());
    assert!(sample_field(&c, 4).unwrap() != sample_field(&small_config(4), 4).unwrap());
}

#[test]
fn sheet_rejects_mismatched_slices() {
    let c = small_config(0);
    let a = lift_level(&sample_field(&c, 0).unwrap(), 5).unwrap();
    let other = SpectralConfig { grid_level: 4, ..c };
    let b = lift_level(&sample_field(&other, 0).unwrap(), 4).unwrap();
    assert!(a.dist_infty(&b).is_err());
    let mixed = vec![a.slice(0).clone(), b.slice(0).clone()];
    assert!(RoughSheet::new(vec![0.0, 0.1], mixed).is_err());
}
