mod common;

use common::{apply, random_homography, rng};
use mcmatch::cluster::{dlt, ransac_homography, PointPair, RansacParams};
use mcmatch::Homography;
use proptest::prelude::*;
use rand::Rng;

fn planted(seed: u64) -> Homography<f64> {
    Homography::new(random_homography(&mut rng(seed))).unwrap()
}

fn points(seed: u64, h: &Homography<f64>, n: usize) -> Vec<PointPair<f64>> {
    let mut r = rng(seed ^ 0x5eed);
    (0..n)
        .map(|_| {
            let p = [r.random_range(0.0..400.0), r.random_range(0.0..300.0)];
            (p, apply(h.matrix(), p))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dlt_recovers_planted_from_eight_points(seed in 0u64..1_000_000) {
        let h = planted(seed);
        let fit = dlt(&points(seed, &h, 8)).unwrap();
        prop_assert!(fit.max_abs_diff(&h) <= 1e-6, "{}", fit.max_abs_diff(&h));
    }

    #[test]
    fn ransac_recovers_planted_among_wild_outliers(seed in 0u64..1_000_000) {
        let h = planted(seed);
        let mut pairs = points(seed, &h, 30);
        let mut r = rng(seed ^ 0xbad);
        for p in pairs.iter_mut().take(10) {
            p.1 = [r.random_range(-200.0..600.0), r.random_range(-200.0..500.0)];
        }
        let params = RansacParams { iterations: 500, tolerance: 1.0, seed, stream: 0 };
        let fit = ransac_homography(&pairs, &params).unwrap();
        prop_assert!(fit.homography.max_abs_diff(&h) <= 1e-4);
        prop_assert!(fit.inliers.iter().filter(|&&i| i >= 10).count() == 20);
    }

    #[test]
    fn canonical_scale_is_invariant(seed in 0u64..1_000_000, s in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let h = planted(seed);
        let scaled = h.matrix().map(|row| row.map(|v| v * s));
        let back = Homography::new(scaled).unwrap();
        prop_assert!(back.max_abs_diff(&h) <= 1e-12);
    }
}

#[test]
fn known_translation_with_outliers() {
    let h = Homography::new([[1.0, 0.0, 10.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let mut pairs = points(11, &h, 20);
    let mut r = rng(12);
    for _ in 0..5 {
        let p = [r.random_range(0.0..400.0), r.random_range(0.0..300.0)];
        pairs.push((p, [r.random_range(0.0..400.0), r.random_range(0.0..300.0)]));
    }
    let fit = ransac_homography(
        &pairs,
        &RansacParams {
            iterations: 1000,
            tolerance: 3.0,
            seed: 0,
            stream: 0,
        },
    )
    .unwrap();
    assert!(fit.homography.max_abs_diff(&h) <= 1e-6);
    assert_eq!(fit.inliers, (0..20).collect::<Vec<_>>());
}
