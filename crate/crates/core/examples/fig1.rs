//! Run the occluded-square experiment and write its images and tables.
//!
//! `cargo run --release --example fig1 -- [out_dir] [seed]`

use std::path::PathBuf;

use priorseg::synth::{run_fig1_experiment, Fig1Config};

fn env_f64(key: &str) -> Option<f64> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

fn main() -> priorseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "fig1_out".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = Fig1Config::occluded_square(seed);
    if let Some(v) = env_f64("ALPHA_SCALE") {
        cfg.alpha_scale = v;
    }
    if let Some(v) = env_f64("BETA") {
        cfg.evolution.beta = v;
    }
    if let Some(v) = env_f64("OUTER") {
        cfg.evolution.max_outer_iters = v as usize;
    }
    if let Some(v) = env_f64("DT") {
        cfg.evolution.dt = v;
    }
    if let Some(v) = env_f64("NNOISE") {
        cfg.evolution.n_noise_iters = v as usize;
    }
    if let Some(v) = env_f64("TOL") {
        cfg.evolution.tolerance = v;
    }
    if let Some(v) = env_f64("INITR") {
        cfg.init = priorseg::synth::ShapeSpec::Disk {
            center: [64.0, 64.0],
            radius: v,
        };
    }
    let t = std::time::Instant::now();
    let report = run_fig1_experiment(&cfg)?;
    report.write_to(&out)?;
    print!("{}", report.table_csv());
    for r in [&report.without_prior, &report.with_prior] {
        eprintln!("{:?} area {}", r.status, r.mask.area());
    }
    eprintln!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
