mod common;

use nerfmt::field::{render_ray, RadianceField, RenderConfig};
use nerfmt::geometry::{Aabb, Ray, Vec3};
use proptest::prelude::*;

#[test]
fn gradients_match_central_differences() {
    for seed in [1, 2] {
        let r = common::gradient_check(seed, 100, 1e-4);
        assert_eq!(r.checked, 100);
        assert!(r.max_rel_err < 1e-3, "seed {seed}: {r:?}");
    }
}

#[test]
fn compositing_invariants_hold() {
    common::compositing_check(7, 300).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // a homogeneous medium has the closed-form transmittance exp(-σL)
    #[test]
    fn homogeneous_medium_matches_beer_lambert(sigma in 0.0f64..8.0, n in 2usize..64, len in 0.1f64..1.0) {
        let f = RadianceField::new([3; 3], Aabb::new([0.0; 3], [1.0; 3]), sigma, 0.7, [0.1, 0.2, 0.3]).unwrap();
        let ray = Ray { origin: Vec3::new(0.0, 0.5, 0.5), direction: Vec3::x(), t_near: 0.0, t_far: len };
        let r = render_ray(&f, &ray, &RenderConfig { samples_per_ray: n, ..Default::default() });
        let t = (-sigma * len).exp();
        prop_assert!((r.transmittance_residual - t).abs() < 1e-12);
        for (c, bg) in r.color.iter().zip(f.background) {
            prop_assert!((c - (0.7 * (1.0 - t) + bg * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_are_a_partition_of_unity(seed in any::<u64>(), n in 2usize..128, jitter in any::<bool>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_field(&mut rng, 5);
        let ray = common::random_ray(&mut rng, &f.bounds);
        let r = render_ray(&f, &ray, &RenderConfig { samples_per_ray: n, jitter, seed, ..Default::default() });
        let s: f64 = r.weights.iter().sum();
        prop_assert!((s + r.transmittance_residual - 1.0).abs() < 1e-9);
        prop_assert!(r.weights.iter().all(|w| *w >= 0.0));
    }
}
