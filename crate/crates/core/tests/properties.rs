use priorseg::grid::BoundaryPerturbation;
use priorseg::noise::{self, ClassicalParams};
use priorseg::synth::hamming;
use priorseg::{LevelSetField, MomentVector, NaturalParams, NoiseFamily, Pixel, RegionMask};
use proptest::prelude::*;

/// Union of up to four disks and rectangles kept off the border of a 48x48 grid.
fn blob() -> impl Strategy<Value = RegionMask> {
    let part = (4.0..44.0f64, 4.0..44.0f64, 1.5..9.0f64, any::<bool>());
    prop::collection::vec(part, 1..5).prop_filter_map("empty or touching border", |parts| {
        let m = RegionMask::from_fn(48, 48, |x, y| {
            let (x, y) = (x as f64, y as f64);
            parts.iter().any(|&(cx, cy, r, round)| {
                if round {
                    (x - cx).hypot(y - cy) < r
                } else {
                    (x - cx).abs() < r && (y - cy).abs() < 0.6 * r
                }
            })
        })
        .ok()?;
        let inner = (0..48).all(|i| !m.get(i, 0) && !m.get(i, 47) && !m.get(0, i) && !m.get(47, i));
        (m.area() >= 4 && inner).then_some(m)
    })
}

fn random_mask(w: usize, h: usize) -> impl Strategy<Value = RegionMask> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |d| RegionMask::new(w, h, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_low_order_moments(m in blob()) {
        let lam = MomentVector::from_mask(&m, 8).unwrap();
        prop_assert!((lam.get(0, 0) - 0.25).abs() <= 1e-12);
        prop_assert!(lam.get(1, 0).abs() <= 1e-12);
        prop_assert!(lam.get(0, 1).abs() <= 1e-12);
    }

    #[test]
    fn integer_translation_is_exact(m in blob(), dx in -3isize..=3, dy in -3isize..=3) {
        let moved = m.shifted(dx, dy);
        prop_assume!(moved.area() == m.area());
        let a = MomentVector::from_mask(&m, 8).unwrap();
        let b = MomentVector::from_mask(&moved, 8).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reinitialization_keeps_the_mask(m in blob()) {
        let phi = LevelSetField::from_mask(&m).unwrap();
        prop_assert_eq!(phi.mask(), m.clone());
        let again = phi.reinitialize().unwrap();
        prop_assert_eq!(again.mask(), m);
    }

    #[test]
    fn boundary_pixels_touch_the_outside(m in blob()) {
        for p in m.boundary_pixels() {
            prop_assert!(m.get(p.x, p.y));
            let (x, y) = (p.x as isize, p.y as isize);
            let outside = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)].iter().any(|&(a, b)| {
                a >= 0 && b >= 0 && (a as usize) < m.width() && (b as usize) < m.height()
                    && !m.get(a as usize, b as usize)
            });
            prop_assert!(outside);
        }
    }

    #[test]
    fn perturbation_is_additive(a in -2.0..2.0f64, b in -2.0..2.0f64, cx in 5usize..40, cy in 5usize..40) {
        let phi = LevelSetField::from_fn(48, 48, |x, y| (x as f64 - 24.0).hypot(y as f64 - 24.0) - 10.0).unwrap();
        let c = Pixel::new(cx, cy);
        let pa = BoundaryPerturbation::new(c, 4.0, a).unwrap();
        let pb = BoundaryPerturbation::new(c, 4.0, b).unwrap();
        let pab = BoundaryPerturbation::new(c, 4.0, a + b).unwrap();
        let two = phi.apply_perturbation(&pa).apply_perturbation(&pb);
        let one = phi.apply_perturbation(&pab);
        for (x, y) in two.values().iter().zip(one.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn hamming_is_a_metric(a in random_mask(6, 5), b in random_mask(6, 5), c in random_mask(6, 5)) {
        let (ab, _) = hamming(&a, &b).unwrap();
        let (ba, _) = hamming(&b, &a).unwrap();
        let (bc, _) = hamming(&b, &c).unwrap();
        let (ac, _) = hamming(&a, &c).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc);
        prop_assert_eq!(ab == 0, a == b);
    }

    #[test]
    fn ml_fit_is_stationary_and_residual_vanishes(
        ys in prop::collection::vec(0.05..20.0f64, 3..200),
        fam in prop::sample::select(vec![
            NoiseFamily::GaussianMeanVar,
            NoiseFamily::GaussianKnownVar { variance: 2.0 },
            NoiseFamily::Rayleigh,
            NoiseFamily::Exponential,
        ]),
    ) {
        let eta = noise::ml_estimate(fam, &ys).unwrap();
        let grad = eta.grad_log_partition();
        let k = grad.len();
        let mut mean = vec![0.0; k];
        for &y in &ys {
            let t = noise::sufficient_stat(fam, y).unwrap();
            for j in 0..k {
                mean[j] += t[j] / ys.len() as f64;
            }
        }
        let err: f64 = grad.iter().zip(&mean).map(|(g, m)| (g - m).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * mean.iter().fold(1.0f64, |s, m| s.max(m.abs())), "{err}");
        for (j, g) in grad.iter().enumerate() {
            let resid: f64 = ys.iter().map(|&y| noise::sufficient_stat(fam, y).unwrap()[j] - g).sum();
            let scale = ys.iter().map(|&y| noise::sufficient_stat(fam, y).unwrap()[j].abs()).sum::<f64>();
            prop_assert!(resid.abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn swapping_regions_negates_the_speed(m1 in 0.5..5.0f64, m2 in 0.5..5.0f64, y in 0.1..8.0f64) {
        let g = |m: f64| NaturalParams::from_classical(
            NoiseFamily::GaussianMeanVar,
            ClassicalParams::Gaussian { mean: m, variance: 0.7 * m },
        ).unwrap();
        let (a, b) = (g(m1), g(m2));
        let f = noise::log_likelihood_ratio(&a, &b, y).unwrap();
        let r = noise::log_likelihood_ratio(&b, &a, y).unwrap();
        prop_assert_eq!(f, -r);
    }
}
