//! Segment the Rayleigh phantom with the Rayleigh and the Gaussian model.
//!
//! `cargo run --release --example rayleigh -- [seeds]`

use priorseg::evolution::{segment, EvolutionConfig, NoiseModels};
use priorseg::synth::{add_noise, hamming, rayleigh_phantom, render_phantom};
use priorseg::NoiseFamily;

fn main() -> priorseg::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    println!("seed,rayleigh,gaussian");
    for seed in 0..seeds {
        let (spec, noise, init) = rayleigh_phantom(seed);
        let ph = render_phantom(&spec)?;
        let img = add_noise(&ph.clean, &ph.occluded, &noise)?;
        let init = init.rasterize(spec.width, spec.height)?;
        let cfg = EvolutionConfig {
            seed,
            ..EvolutionConfig::default()
        };
        let mut row = vec![];
        for fam in [NoiseFamily::Rayleigh, NoiseFamily::GaussianMeanVar] {
            let seg = segment(&img, &init, &cfg, &NoiseModels::same(fam), None)?;
            row.push(hamming(&seg.mask, &ph.truth)?.1);
        }
        println!("{seed},{:.4},{:.4}", row[0], row[1]);
    }
    Ok(())
}
