use priorseg::shape::GeometricMoments;
use priorseg::{LegendreBasis, MomentVector, RegionMask};

fn ellipse(n: usize, cx: f64, cy: f64, a: f64, b: f64) -> RegionMask {
    RegionMask::from_fn(n, n, |x, y| {
        ((x as f64 - cx) / a).powi(2) + ((y as f64 - cy) / b).powi(2) < 1.0
    })
    .unwrap()
}

fn rel_diff(a: &MomentVector, b: &MomentVector) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b.iter())
        .map(|((_, _, x), (_, _, y))| (x - y).powi(2))
        .sum();
    let den: f64 = a.iter().map(|(_, _, x)| x * x).sum();
    (num / den).sqrt()
}

#[test]
fn scaled_smooth_shapes_agree() {
    let base = MomentVector::from_mask(&ellipse(200, 60.3, 58.7, 24.0, 15.0), 8).unwrap();
    for s in [1.5, 2.0] {
        let big =
            MomentVector::from_mask(&ellipse(200, 100.1, 98.4, 24.0 * s, 15.0 * s), 8).unwrap();
        let r = rel_diff(&base, &big);
        assert!(r <= 2e-2, "x{s}: relative difference {r}");
    }
}

#[test]
fn subpixel_shifts_agree() {
    let base = MomentVector::from_mask(&ellipse(96, 46.0, 47.0, 30.0, 20.0), 8).unwrap();
    for (dx, dy) in [(0.25, 0.0), (0.5, 0.5), (0.3, -0.7)] {
        let moved =
            MomentVector::from_mask(&ellipse(96, 46.0 + dx, 47.0 + dy, 30.0, 20.0), 8).unwrap();
        let r = rel_diff(&base, &moved);
        assert!(r <= 1e-2, "shift ({dx}, {dy}): {r}");
    }
}

#[test]
fn order_twelve_reconstruction_classifies_convex_shape() {
    let n = 12;
    let mask = ellipse(96, 47.0, 49.0, 22.0, 14.0);
    let lam = MomentVector::from_mask(&mask, n).unwrap();
    let geo = GeometricMoments::from_mask(&mask, 1).unwrap();
    let (xb, yb) = geo.barycenter();
    let scale = geo.area().sqrt();
    let basis = LegendreBasis::new(n).unwrap();
    let (mut hits, mut total) = (0usize, 0usize);
    for y in 0..96 {
        for x in 0..96 {
            let (u, v) = ((x as f64 - xb) / scale, (y as f64 - yb) / scale);
            if u.abs() > 1.0 || v.abs() > 1.0 {
                continue;
            }
            let f: f64 = lam
                .iter()
                .map(|(p, q, l)| l * basis.eval(p, u) * basis.eval(q, v))
                .sum();
            total += 1;
            if (f > 0.5) == mask.get(x, y) {
                hits += 1;
            }
        }
    }
    let frac = hits as f64 / total as f64;
    assert!(frac >= 0.9, "reconstruction accuracy {frac}");
}

#[test]
fn printed_l_term_fails_the_finite_difference_check() {
    use priorseg::grid::{smooth_delta, BoundaryPerturbation};
    use priorseg::shape::{shape_distance, LTerm, ShapeGradient};
    use priorseg::{LevelSetField, Pixel};

    let n = 96;
    // mirror-symmetric pairs cancel the barycenter terms, so use lopsided shapes
    let shape = RegionMask::from_fn(n, n, |x, y| {
        let (x, y) = (x as f64, y as f64);
        ((x - 46.0) / 24.0).powi(2) + ((y - 48.0) / 14.0).powi(2) < 1.0
            || (x - 62.0).hypot(y - 36.0) < 10.0
    })
    .unwrap();
    let reference = RegionMask::from_fn(n, n, |x, y| x > 20 && y > 24 && x + y < 110).unwrap();
    let lam_ref = MomentVector::from_mask(&reference, 8).unwrap();
    let phi = LevelSetField::from_mask(&shape).unwrap();
    let d = |f: &LevelSetField| {
        shape_distance(&MomentVector::from_levelset(f, 8).unwrap(), &lam_ref).unwrap()
    };
    let eps = 0.25;
    let check = |c: Pixel| {
        let fd = (d(&phi.apply_perturbation(&BoundaryPerturbation::new(c, 3.0, eps).unwrap()))
            - d(&phi.apply_perturbation(&BoundaryPerturbation::new(c, 3.0, -eps).unwrap())))
            / (2.0 * eps);
        let unit = BoundaryPerturbation::new(c, 3.0, 1.0).unwrap();
        let predict = |form: LTerm| {
            let g = ShapeGradient::new(
                GeometricMoments::from_levelset(&phi, 8).unwrap(),
                &lam_ref,
                form,
            )
            .unwrap();
            let mut s = 0.0;
            for y in 0..n {
                for x in 0..n {
                    let b = unit.bump(x, y);
                    if b != 0.0 {
                        s += g.gradient_at(x as f64, y as f64) * smooth_delta(phi.get(x, y)) * b;
                    }
                }
            }
            s
        };
        (fd, predict(LTerm::Derived), predict(LTerm::Printed))
    };
    let sites: Vec<Pixel> = shape.boundary_pixels().into_iter().step_by(7).collect();
    let checks: Vec<_> = sites.iter().map(|&c| (c, check(c))).collect();
    let peak = checks
        .iter()
        .fold(0.0f64, |m, (_, (fd, _, _))| m.max(fd.abs()));
    let mut worst_printed: f64 = 0.0;
    for (c, (fd, derived, printed)) in checks
        .into_iter()
        .filter(|(_, (fd, _, _))| fd.abs() >= 0.1 * peak)
    {
        let err = (derived - fd).abs() / fd.abs();
        assert!(err <= 1e-2, "derived form error {err} at {c:?}");
        worst_printed = worst_printed.max((printed - fd).abs() / fd.abs());
    }
    assert!(worst_printed > 0.1, "printed form error {worst_printed}");
}
