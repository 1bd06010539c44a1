//! Synthetic phantoms, region noise, mask metrics and the occlusion experiment.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    auto_alpha_scale, segment, EvolutionConfig, EvolutionTrace, NoiseModels, Status,
};
use crate::grid::{ImageGrid, RegionMask};
use crate::io;
use crate::noise::{ClassicalParams, NaturalParams, NoiseFamily};
use crate::shape::MomentVector;

/// Vocabulary of the SNR convention, written into every report.
pub const SNR_DEFINITION: &str = "SNR = (mu_in - mu_out)^2 / sigma^2";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Disk { center: [f64; 2], radius: f64 },
    Square { center: [f64; 2], half: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { center: [f64; 2], radii: [f64; 2] },
    Polygon { vertices: Vec<[f64; 2]> },
    MaskFile { path: PathBuf },
}

fn point_in_polygon(x: f64, y: f64, v: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (xi, yi) = (v[i][0], v[i][1]);
        let (xj, yj) = (v[j][0], v[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl ShapeSpec {
    /// Whether the pixel center `(x, y)` lies inside the shape.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            ShapeSpec::Disk { center, radius } => (x - center[0]).hypot(y - center[1]) < *radius,
            ShapeSpec::Square { center, half } => {
                (x - center[0]).abs() < *half && (y - center[1]).abs() < *half
            }
            ShapeSpec::Rect { x0, y0, x1, y1 } => x >= *x0 && x < *x1 && y >= *y0 && y < *y1,
            ShapeSpec::Ellipse { center, radii } => {
                ((x - center[0]) / radii[0]).powi(2) + ((y - center[1]) / radii[1]).powi(2) < 1.0
            }
            ShapeSpec::Polygon { vertices } => {
                vertices.len() >= 3 && point_in_polygon(x, y, vertices)
            }
            ShapeSpec::MaskFile { .. } => false,
        }
    }

    /// Pixel-center rasterization on a `width x height` canvas.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<RegionMask> {
        if let ShapeSpec::MaskFile { path } = self {
            let m = io::read_mask(path)?;
            if m.width() != width || m.height() != height {
                return Err(Error::SizeMismatch(m.width(), m.height(), width, height));
            }
            return Ok(m);
        }
        RegionMask::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }

    /// Rasterize and require a nonempty shape that does not touch the canvas border.
    pub fn rasterize_inside(&self, width: usize, height: usize) -> Result<RegionMask> {
        let m = self.rasterize(width, height)?;
        if m.area() == 0 {
            return Err(Error::OutOfCanvas(format!(
                "{self:?} covers no pixel of {width}x{height}"
            )));
        }
        let touches = (0..width).any(|x| m.get(x, 0) || m.get(x, height - 1))
            || (0..height).any(|y| m.get(0, y) || m.get(width - 1, y));
        if touches {
            return Err(Error::OutOfCanvas(format!(
                "{self:?} reaches the border of {width}x{height}"
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub shape: ShapeSpec,
    /// Clean intensity of the object.
    pub inside: f64,
    /// Clean intensity of the background.
    pub outside: f64,
    /// Parts erased from the object and painted as background.
    #[serde(default)]
    pub occlusions: Vec<ShapeSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub clean: ImageGrid,
    /// Un-occluded shape.
    pub truth: RegionMask,
    /// Visible part of the object.
    pub occluded: RegionMask,
}

pub fn render_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParam(
            "phantom canvas must be nonempty".into(),
        ));
    }
    let truth = spec.shape.rasterize_inside(w, h)?;
    let occluded = RegionMask::from_fn(w, h, |x, y| {
        truth.get(x, y)
            && !spec
                .occlusions
                .iter()
                .any(|o| o.contains(x as f64, y as f64))
    })?;
    let clean = ImageGrid::from_fn(w, h, |x, y| {
        if occluded.get(x, y) {
            spec.inside
        } else {
            spec.outside
        }
    })?;
    Ok(Phantom {
        clean,
        truth,
        occluded,
    })
}

/// Sampling family of one region; the clean intensity is the mean unless an
/// explicit scale is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionNoise {
    /// Additive white Gaussian noise of standard deviation `sigma`.
    Gaussian {
        #[serde(default)]
        sigma: Option<f64>,
    },
    /// Rayleigh with `sigma2`, or with mean equal to the clean intensity.
    Rayleigh {
        #[serde(default)]
        sigma2: Option<f64>,
    },
    Poisson,
    Exponential,
    Bernoulli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub inside: RegionNoise,
    pub outside: RegionNoise,
    /// Gaussian regions only: sets `sigma = |mu_in - mu_out| / sqrt(snr)`.
    #[serde(default)]
    pub snr: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn region_means(clean: &ImageGrid, mask: &RegionMask) -> (f64, f64) {
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in clean.data().iter().zip(mask.data()) {
        if m {
            si += v;
            ni += 1;
        } else {
            so += v;
            no += 1;
        }
    }
    (si / ni.max(1) as f64, so / no.max(1) as f64)
}

/// Standard deviation giving the requested SNR between two region means.
pub fn sigma_for_snr(mu_in: f64, mu_out: f64, snr: f64) -> f64 {
    (mu_in - mu_out).abs() / snr.sqrt()
}

/// Per-pixel independent sampling from the family of the pixel's region.
pub fn add_noise(clean: &ImageGrid, mask: &RegionMask, spec: &NoiseSpec) -> Result<ImageGrid> {
    if mask.width() != clean.width() || mask.height() != clean.height() {
        return Err(Error::SizeMismatch(
            mask.width(),
            mask.height(),
            clean.width(),
            clean.height(),
        ));
    }
    let snr_sigma = match spec.snr {
        Some(snr) if !(snr > 0.0 && snr.is_finite()) => {
            return Err(Error::InvalidParam(format!(
                "snr must be positive, got {snr}"
            )))
        }
        Some(snr) => {
            let (mi, mo) = region_means(clean, mask);
            Some(sigma_for_snr(mi, mo, snr))
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(clean.data().len());
    for (&c, &m) in clean.data().iter().zip(mask.data()) {
        let region = if m { spec.inside } else { spec.outside };
        let bad = |what: String| Error::InvalidParam(format!("{region:?}: {what}"));
        let v = match region {
            RegionNoise::Gaussian { sigma } => {
                let s = sigma
                    .or(snr_sigma)
                    .ok_or_else(|| bad("needs sigma or snr".into()))?;
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(bad(format!("sigma {s}")));
                }
                if s == 0.0 {
                    c
                } else {
                    NaturalParams::from_classical(
                        NoiseFamily::GaussianMeanVar,
                        ClassicalParams::Gaussian {
                            mean: c,
                            variance: s * s,
                        },
                    )?
                    .sample(&mut rng)
                }
            }
            RegionNoise::Rayleigh { sigma2 } => {
                let s2 = sigma2.unwrap_or(2.0 * c * c / std::f64::consts::PI);
                NaturalParams::from_classical(
                    NoiseFamily::Rayleigh,
                    ClassicalParams::Rayleigh { sigma2: s2 },
                )
                .map_err(|e| bad(e.to_string()))?
                .sample(&mut rng)
            }
            RegionNoise::Poisson => NaturalParams::from_classical(
                NoiseFamily::Poisson,
                ClassicalParams::Poisson { lambda: c },
            )
            .map_err(|e| bad(e.to_string()))?
            .sample(&mut rng),
            RegionNoise::Exponential => NaturalParams::from_classical(
                NoiseFamily::Exponential,
                ClassicalParams::Exponential { rate: 1.0 / c },
            )
            .map_err(|e| bad(e.to_string()))?
            .sample(&mut rng),
            RegionNoise::Bernoulli => NaturalParams::from_classical(
                NoiseFamily::Bernoulli,
                ClassicalParams::Bernoulli { p: c },
            )
            .map_err(|e| bad(e.to_string()))?
            .sample(&mut rng),
        };
        out.push(v);
    }
    ImageGrid::new(clean.width(), clean.height(), out)
}

/// Disagreeing pixel count and its fraction of the grid.
pub fn hamming(a: &RegionMask, b: &RegionMask) -> Result<(usize, f64)> {
    a.same_size(b)?;
    let count = a
        .data()
        .iter()
        .zip(b.data())
        .filter(|(x, y)| x != y)
        .count();
    Ok((count, count as f64 / a.data().len() as f64))
}

/// Dice overlap; 1 for two empty masks.
pub fn dice(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    a.same_size(b)?;
    let both = a
        .data()
        .iter()
        .zip(b.data())
        .filter(|(x, y)| **x && **y)
        .count();
    let total = a.area() + b.area();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    })
}

/// Reference shape on its own canvas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub width: usize,
    pub height: usize,
    pub shape: ShapeSpec,
}

impl ReferenceSpec {
    pub fn moments(&self, order: usize) -> Result<MomentVector> {
        MomentVector::from_mask(&self.shape.rasterize(self.width, self.height)?, order)
    }
}

/// Occluded-phantom experiment: the same noisy image segmented without and
/// with the shape prior from the same initial contour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1Config {
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
    pub init: ShapeSpec,
    pub reference: ReferenceSpec,
    pub models: NoiseModels,
    pub order: usize,
    pub evolution: EvolutionConfig,
    /// Prior weight of the second run, as a multiple of [`auto_alpha_scale`].
    pub alpha_scale: f64,
}

impl Fig1Config {
    /// 128x128 square object with two rectangular notches, Gaussian noise at SNR 1.
    pub fn occluded_square(seed: u64) -> Self {
        Self {
            phantom: PhantomSpec {
                width: 128,
                height: 128,
                shape: ShapeSpec::Square {
                    center: [64.0, 64.0],
                    half: 30.0,
                },
                inside: 2.0,
                outside: 1.0,
                occlusions: vec![
                    ShapeSpec::Rect {
                        x0: 74.0,
                        y0: 30.0,
                        x1: 98.0,
                        y1: 46.0,
                    },
                    ShapeSpec::Rect {
                        x0: 30.0,
                        y0: 78.0,
                        x1: 46.0,
                        y1: 100.0,
                    },
                ],
            },
            noise: NoiseSpec {
                inside: RegionNoise::Gaussian { sigma: None },
                outside: RegionNoise::Gaussian { sigma: None },
                snr: Some(1.0),
                seed,
            },
            init: ShapeSpec::Disk {
                center: [64.0, 64.0],
                radius: 20.0,
            },
            reference: ReferenceSpec {
                width: 96,
                height: 96,
                shape: ShapeSpec::Square {
                    center: [40.0, 52.0],
                    half: 22.0,
                },
            },
            models: NoiseModels::same(NoiseFamily::GaussianMeanVar),
            order: 8,
            evolution: EvolutionConfig {
                seed,
                ..EvolutionConfig::default()
            },
            alpha_scale: 1.0,
        }
    }
}

/// Echo-like preset: dark Rayleigh blood pool inside a brighter Rayleigh wall.
pub fn rayleigh_phantom(seed: u64) -> (PhantomSpec, NoiseSpec, ShapeSpec) {
    let phantom = PhantomSpec {
        width: 128,
        height: 128,
        shape: ShapeSpec::Ellipse {
            center: [64.0, 62.0],
            radii: [34.0, 24.0],
        },
        inside: 1.0,
        outside: 2.0,
        occlusions: Vec::new(),
    };
    let noise = NoiseSpec {
        inside: RegionNoise::Rayleigh { sigma2: None },
        outside: RegionNoise::Rayleigh { sigma2: None },
        snr: None,
        seed,
    };
    let init = ShapeSpec::Disk {
        center: [60.0, 64.0],
        radius: 14.0,
    };
    (phantom, noise, init)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub alpha: f64,
    pub mask: RegionMask,
    pub trace: EvolutionTrace,
    pub status: Status,
    pub outer_iters: usize,
    pub hamming_count: usize,
    pub hamming: f64,
    pub dice: f64,
}

fn summarize(
    seg: crate::evolution::Segmentation,
    alpha: f64,
    truth: &RegionMask,
) -> Result<RunSummary> {
    let (hamming_count, hamming) = hamming(&seg.mask, truth)?;
    let dice = dice(&seg.mask, truth)?;
    Ok(RunSummary {
        alpha,
        mask: seg.mask,
        trace: seg.trace,
        status: seg.status,
        outer_iters: seg.outer_iters,
        hamming_count,
        hamming,
        dice,
    })
}

#[derive(Clone, Debug)]
pub struct Fig1Report {
    pub noisy: ImageGrid,
    pub truth: RegionMask,
    pub occluded: RegionMask,
    pub init: RegionMask,
    pub without_prior: RunSummary,
    pub with_prior: RunSummary,
}

impl Fig1Report {
    /// Hamming-vs-ground-truth table, prefixed by the SNR convention.
    pub fn table_csv(&self) -> String {
        let mut s = format!(
            "# {SNR_DEFINITION}\nrun,alpha,status,outer_iters,hamming_count,hamming,dice\n"
        );
        for (name, r) in [
            ("without_prior", &self.without_prior),
            ("with_prior", &self.with_prior),
        ] {
            let status = match &r.status {
                Status::Converged => "converged",
                Status::MaxIterations => "max-iterations",
                Status::Aborted { .. } => "aborted",
            };
            s.push_str(&format!(
                "{name},{},{status},{},{},{},{}\n",
                r.alpha, r.outer_iters, r.hamming_count, r.hamming, r.dice
            ));
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        io::write_image_png(&self.noisy, dir.join("noisy.png"))?;
        io::write_mask_png(&self.truth, dir.join("ground_truth.png"))?;
        io::write_overlay_png(&self.noisy, &self.init, None, dir.join("init_overlay.png"))?;
        for (name, r) in [
            ("without_prior", &self.without_prior),
            ("with_prior", &self.with_prior),
        ] {
            io::write_mask_png(&r.mask, dir.join(format!("{name}_mask.png")))?;
            io::write_overlay_png(
                &self.noisy,
                &r.mask,
                Some(&self.truth),
                dir.join(format!("{name}_overlay.png")),
            )?;
            fs::write(dir.join(format!("{name}_trace.csv")), r.trace.to_csv(false))?;
        }
        fs::write(dir.join("hamming.csv"), self.table_csv())?;
        Ok(())
    }
}

pub fn run_fig1_experiment(config: &Fig1Config) -> Result<Fig1Report> {
    let phantom = render_phantom(&config.phantom)?;
    let noisy = add_noise(&phantom.clean, &phantom.occluded, &config.noise)?;
    let init = config
        .init
        .rasterize(config.phantom.width, config.phantom.height)?;
    let lam_ref = config.reference.moments(config.order)?;

    let plain = EvolutionConfig {
        alpha: 0.0,
        ..config.evolution.clone()
    };
    let seg = segment(&noisy, &init, &plain, &config.models, None)?;
    let without_prior = summarize(seg, 0.0, &phantom.truth)?;

    let alpha = config.alpha_scale * auto_alpha_scale(&init);
    let prior = EvolutionConfig {
        alpha,
        ..config.evolution.clone()
    };
    let seg = segment(&noisy, &init, &prior, &config.models, Some(&lam_ref))?;
    let with_prior = summarize(seg, alpha, &phantom.truth)?;

    Ok(Fig1Report {
        noisy,
        truth: phantom.truth,
        occluded: phantom.occluded,
        init,
        without_prior,
        with_prior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_phantom(occlusions: Vec<ShapeSpec>) -> PhantomSpec {
        PhantomSpec {
            width: 128,
            height: 128,
            shape: ShapeSpec::Disk {
                center: [64.0, 64.0],
                radius: 20.0,
            },
            inside: 3.0,
            outside: 1.0,
            occlusions,
        }
    }

    #[test]
    fn phantom_cases() {
        let p = render_phantom(&disk_phantom(vec![])).unwrap();
        assert_eq!(p.occluded, p.truth);
        let area = p.truth.area() as f64;
        let expected = std::f64::consts::PI * 400.0;
        assert!((area - expected).abs() <= 0.05 * expected);
        let all = render_phantom(&disk_phantom(vec![ShapeSpec::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 128.0,
            y1: 128.0,
        }]))
        .unwrap();
        assert_eq!(all.occluded.area(), 0);
        assert!(all.clean.data().iter().all(|&v| v == 1.0));
        let out = PhantomSpec {
            shape: ShapeSpec::Disk {
                center: [5.0, 64.0],
                radius: 20.0,
            },
            ..disk_phantom(vec![])
        };
        assert!(matches!(render_phantom(&out), Err(Error::OutOfCanvas(_))));
    }

    #[test]
    fn polygon_rasterization() {
        let tri = ShapeSpec::Polygon {
            vertices: vec![[2.0, 2.0], [18.0, 2.0], [2.0, 18.0]],
        };
        let m = tri.rasterize(20, 20).unwrap();
        assert!(m.get(4, 4) && !m.get(15, 15));
        // area close to the continuous triangle
        assert!((m.area() as f64 - 128.0).abs() < 20.0);
    }

    #[test]
    fn noise_cases() {
        let p = render_phantom(&disk_phantom(vec![])).unwrap();
        let zero = NoiseSpec {
            inside: RegionNoise::Gaussian { sigma: Some(0.0) },
            outside: RegionNoise::Gaussian { sigma: Some(0.0) },
            snr: None,
            seed: 3,
        };
        assert_eq!(add_noise(&p.clean, &p.truth, &zero).unwrap(), p.clean);
        assert_eq!(sigma_for_snr(3.0, 1.0, 1.0), 2.0);
        let a = add_noise(
            &p.clean,
            &p.truth,
            &NoiseSpec {
                snr: Some(1.0),
                ..zero.clone()
            },
        )
        .unwrap();
        let b = add_noise(
            &p.clean,
            &p.truth,
            &NoiseSpec {
                snr: Some(1.0),
                ..zero.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        let bad = NoiseSpec {
            snr: Some(0.0),
            ..zero
        };
        assert!(add_noise(&p.clean, &p.truth, &bad).is_err());
    }

    #[test]
    fn rayleigh_second_moment() {
        let clean = ImageGrid::filled(120, 100, 1.0).unwrap();
        let mask = RegionMask::new(120, 100, vec![true; 12_000]).unwrap();
        let spec = NoiseSpec {
            inside: RegionNoise::Rayleigh { sigma2: Some(2.0) },
            outside: RegionNoise::Rayleigh { sigma2: Some(2.0) },
            snr: None,
            seed: 9,
        };
        let img = add_noise(&clean, &mask, &spec).unwrap();
        let sq: Vec<f64> = img.data().iter().map(|v| v * v).collect();
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            (mean - 4.0).abs() <= 3.0 * (var / n).sqrt(),
            "mean y^2 = {mean}"
        );
    }

    #[test]
    fn hamming_cases() {
        let a = RegionMask::from_fn(10, 10, |x, _| x < 4).unwrap();
        assert_eq!(hamming(&a, &a).unwrap(), (0, 0.0));
        assert_eq!(hamming(&a, &a.complement()).unwrap(), (100, 1.0));
        let m = RegionMask::new(
            3,
            3,
            vec![true, false, true, false, true, false, true, false, true],
        )
        .unwrap();
        let mut n = m.clone();
        n.set(0, 0, false);
        n.set(1, 0, true);
        assert_eq!(hamming(&m, &n).unwrap(), (2, 2.0 / 9.0));
        assert!(hamming(&a, &m).is_err());
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &a.complement()).unwrap(), 0.0);
    }
}
