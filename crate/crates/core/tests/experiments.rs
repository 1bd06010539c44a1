use priorseg::evolution::{segment, EvolutionConfig, NoiseModels};
use priorseg::synth::{run_fig1_experiment, Fig1Config, RegionNoise};
use priorseg::{ImageGrid, MomentVector, NoiseFamily, RegionMask, Status};

#[test]
fn unoccluded_high_snr_is_easy_for_both_runs() {
    let mut cfg = Fig1Config::occluded_square(3);
    cfg.phantom.occlusions.clear();
    cfg.noise.snr = Some(16.0);
    let r = run_fig1_experiment(&cfg).unwrap();
    assert!(
        r.without_prior.hamming <= 0.02,
        "without prior {}",
        r.without_prior.hamming
    );
    assert!(
        r.with_prior.hamming <= 0.02,
        "with prior {}",
        r.with_prior.hamming
    );
}

#[test]
fn fig1_report_is_reproducible() {
    let mut cfg = Fig1Config::occluded_square(11);
    cfg.evolution.max_outer_iters = 6;
    let a = run_fig1_experiment(&cfg).unwrap();
    let b = run_fig1_experiment(&cfg).unwrap();
    assert_eq!(a.noisy, b.noisy);
    assert_eq!(a.table_csv(), b.table_csv());
    assert_eq!(a.with_prior.mask, b.with_prior.mask);
    assert_eq!(
        a.with_prior.trace.to_csv(false),
        b.with_prior.trace.to_csv(false)
    );
}

#[test]
fn fig1_outputs_are_written() {
    let mut cfg = Fig1Config::occluded_square(2);
    cfg.evolution.max_outer_iters = 3;
    cfg.noise.inside = RegionNoise::Gaussian { sigma: Some(0.5) };
    cfg.noise.outside = RegionNoise::Gaussian { sigma: Some(0.5) };
    let dir = tempfile::tempdir().unwrap();
    run_fig1_experiment(&cfg)
        .unwrap()
        .write_to(dir.path())
        .unwrap();
    for f in [
        "noisy.png",
        "with_prior_overlay.png",
        "without_prior_trace.csv",
        "hamming.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let table = std::fs::read_to_string(dir.path().join("hamming.csv")).unwrap();
    assert!(table.starts_with("# SNR = (mu_in - mu_out)^2 / sigma^2"));
    assert_eq!(table.lines().count(), 4);
}

fn two_level() -> (ImageGrid, RegionMask) {
    let truth = RegionMask::from_fn(64, 64, |x, y| {
        (x as f64 - 30.0).hypot(y as f64 - 33.0) < 14.0
    })
    .unwrap();
    let img = ImageGrid::from_fn(64, 64, |x, y| if truth.get(x, y) { 3.0 } else { 1.0 }).unwrap();
    (img, truth)
}

#[test]
fn zero_noise_steps_with_equal_models_leave_only_shape_and_curvature() {
    let (img, _) = two_level();
    let init = RegionMask::from_fn(64, 64, |x, y| {
        (20..44).contains(&x) && (24..40).contains(&y)
    })
    .unwrap();
    let lam = MomentVector::from_mask(
        &RegionMask::from_fn(64, 64, |x, y| {
            (x as f64 - 32.0).hypot(y as f64 - 32.0) < 10.0
        })
        .unwrap(),
        8,
    )
    .unwrap();
    let cfg = EvolutionConfig {
        n_noise_iters: 0,
        beta: 0.0,
        alpha: 1e5,
        max_outer_iters: 5,
        ..EvolutionConfig::default()
    };
    let seg = segment(
        &img,
        &init,
        &cfg,
        &NoiseModels::same(NoiseFamily::GaussianMeanVar),
        Some(&lam),
    )
    .unwrap();
    let e = seg.trace.outer_energies();
    assert!(
        e.last().unwrap() < e.first().unwrap(),
        "shape flow should lower d: {e:?}"
    );
    // no shape weight and no noise steps: nothing moves
    let idle = EvolutionConfig { alpha: 0.0, ..cfg };
    let seg = segment(
        &img,
        &init,
        &idle,
        &NoiseModels::same(NoiseFamily::GaussianMeanVar),
        Some(&lam),
    )
    .unwrap();
    assert_eq!(seg.mask, init);
}

#[test]
fn every_run_terminates_at_the_cap() {
    let (img, _) = two_level();
    let init = RegionMask::from_fn(64, 64, |x, y| {
        (x as f64 - 30.0).hypot(y as f64 - 33.0) < 5.0
    })
    .unwrap();
    let cfg = EvolutionConfig {
        max_outer_iters: 2,
        tolerance: 1e-300,
        ..EvolutionConfig::default()
    };
    let seg = segment(
        &img,
        &init,
        &cfg,
        &NoiseModels::same(NoiseFamily::GaussianKnownVar { variance: 1.0 }),
        None,
    )
    .unwrap();
    assert!(seg.outer_iters <= 2);
    assert!(matches!(
        seg.status,
        Status::MaxIterations | Status::Converged
    ));
}

#[test]
fn clean_two_level_image_is_recovered() {
    let (img, truth) = two_level();
    let init = RegionMask::from_fn(64, 64, |x, y| {
        (x as f64 - 32.0).hypot(y as f64 - 32.0) < 6.0
    })
    .unwrap();
    let seg = segment(
        &img,
        &init,
        &EvolutionConfig::default(),
        &NoiseModels::same(NoiseFamily::GaussianKnownVar { variance: 1.0 }),
        None,
    )
    .unwrap();
    let (count, _) = priorseg::synth::hamming(&seg.mask, &truth).unwrap();
    assert!(count <= 20, "{count} pixels differ");
}
