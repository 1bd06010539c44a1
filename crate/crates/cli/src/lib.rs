//! Config-driven front end for `priorseg`: segmentation runs, moment export
//! and benchmark matrices.

pub mod bench;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use priorseg::evolution::{auto_alpha_scale, EnergyBreakdown};
use priorseg::synth::{add_noise, dice, hamming, render_phantom, SNR_DEFINITION};
use priorseg::{io, segment_observed, ImageGrid, MomentVector, RegionMask, Segmentation, Status};

pub use bench::cmd_bench;
pub use config::{BenchConfig, RunConfig};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Log every k-th outer iteration; 0 disables.
    pub trace_every: usize,
    /// Write wall-clock times into trace.csv.
    pub timings: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            trace_every: 10,
            timings: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HammingReport {
    pub count: usize,
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Energies {
    pub initial: Option<EnergyBreakdown>,
    #[serde(rename = "final")]
    pub last: Option<EnergyBreakdown>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub segment_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    #[serde(flatten)]
    pub status: Status,
    pub outer_iters: usize,
    pub alpha: f64,
    pub seed: u64,
    pub area: usize,
    pub energy: Energies,
    pub hamming: Option<HammingReport>,
    pub dice: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_definition: Option<&'static str>,
    pub timings: Timings,
}

/// Finished run: segmentation plus everything needed for its artifacts.
pub struct RunOutcome {
    pub image: ImageGrid,
    pub truth: Option<RegionMask>,
    pub segmentation: Segmentation,
    pub report: Report,
}

fn load_prior(cfg: &RunConfig) -> Result<Option<MomentVector>> {
    let Some(pr) = &cfg.prior else {
        return Ok(None);
    };
    let lam = if let Some(p) = &pr.moments_file {
        let text =
            fs::read_to_string(p).with_context(|| format!("prior.moments_file {}", p.display()))?;
        let lam = MomentVector::from_text(&text).context("prior.moments_file")?;
        if let Some(n) = pr.order {
            if n != lam.order() {
                bail!(
                    "prior.order: {n} differs from order {} stored in the moments file",
                    lam.order()
                );
            }
        }
        lam
    } else if let Some(p) = &pr.reference_mask {
        let mask =
            io::read_mask(p).with_context(|| format!("prior.reference_mask {}", p.display()))?;
        MomentVector::from_mask(&mask, pr.order.unwrap_or(8)).context("prior.reference_mask")?
    } else if let Some(r) = &pr.reference {
        r.moments(pr.order.unwrap_or(8))
            .context("prior.reference")?
    } else {
        bail!("prior: no reference given");
    };
    Ok(Some(lam))
}

/// Run the segmentation described by a validated, path-resolved config.
pub fn run(cfg: &RunConfig, opts: &Options) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let (image, truth, snr_definition) = match (&cfg.input, &cfg.phantom) {
        (Some(inp), _) => {
            let img = io::read_image(&inp.image)
                .with_context(|| format!("input.image {}", inp.image.display()))?;
            let gt = match &inp.ground_truth {
                Some(p) => Some(
                    io::read_mask(p)
                        .with_context(|| format!("input.ground_truth {}", p.display()))?,
                ),
                None => None,
            };
            (img, gt, None)
        }
        (None, Some(ph)) => {
            let rendered = render_phantom(ph).context("phantom")?;
            let spec = cfg
                .phantom_noise
                .as_ref()
                .context("phantom_noise: required with phantom")?;
            let noisy =
                add_noise(&rendered.clean, &rendered.occluded, spec).context("phantom_noise")?;
            (noisy, Some(rendered.truth), Some(SNR_DEFINITION))
        }
        (None, None) => bail!("input, phantom: one image source is required"),
    };
    let init = cfg
        .init
        .rasterize(image.width(), image.height())
        .context("init")?;
    let lam_ref = load_prior(cfg)?;
    let mut evolution = cfg.evolution.clone();
    if let Some(scale) = cfg.prior.as_ref().and_then(|p| p.alpha_scale) {
        evolution.alpha = scale * auto_alpha_scale(&init);
    }
    if lam_ref.is_some() && evolution.alpha == 0.0 {
        warn!("prior given with zero weight; running without the shape term");
    }

    let every = opts.trace_every;
    let t1 = Instant::now();
    let seg = segment_observed(
        &image,
        &init,
        &evolution,
        &cfg.noise,
        lam_ref.as_ref(),
        |iter, e| {
            if every > 0 && iter % every == 0 {
                info!(
                    "iter {iter}: E={:.6e} noise={:.6e} shape={:.6e} reg={:.6e}",
                    e.total, e.noise, e.shape, e.regularization
                );
            }
        },
    )?;
    let segment_ms = t1.elapsed().as_secs_f64() * 1e3;

    let (hamming_report, dice_value) = match &truth {
        Some(t) => {
            let (count, normalized) = hamming(&seg.mask, t)?;
            (
                Some(HammingReport { count, normalized }),
                Some(dice(&seg.mask, t)?),
            )
        }
        None => (None, None),
    };
    let last = seg
        .trace
        .records
        .last()
        .map(|r| r.energy)
        .or(seg.trace.initial);
    let report = Report {
        schema: REPORT_SCHEMA,
        status: seg.status.clone(),
        outer_iters: seg.outer_iters,
        alpha: evolution.alpha,
        seed: evolution.seed,
        area: seg.mask.area(),
        energy: Energies {
            initial: seg.trace.initial,
            last,
        },
        hamming: hamming_report,
        dice: dice_value,
        snr_definition,
        timings: Timings {
            total_ms: t0.elapsed().as_secs_f64() * 1e3,
            segment_ms,
        },
    };
    Ok(RunOutcome {
        image,
        truth,
        segmentation: seg,
        report,
    })
}

/// Write final_mask.png, overlay.png, trace.csv and report.json into `dir`.
pub fn write_outputs(out: &RunOutcome, dir: &Path, opts: &Options) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("output_dir {}", dir.display()))?;
    let seg = &out.segmentation;
    io::write_mask_png(&seg.mask, dir.join("final_mask.png"))?;
    io::write_overlay_png(
        &out.image,
        &seg.mask,
        out.truth.as_ref(),
        dir.join("overlay.png"),
    )?;
    fs::write(dir.join("trace.csv"), seg.trace.to_csv(opts.timings))?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&out.report)? + "\n",
    )?;
    Ok(())
}

pub fn exit_code(status: &Status) -> i32 {
    match status {
        Status::Converged => 0,
        Status::MaxIterations => 2,
        Status::Aborted { .. } => 1,
    }
}

/// `segment`: load, run, write. Returns the final status.
pub fn segment_command(path: &Path, opts: &Options) -> Result<Status> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed_env()?;
    let out = run(&cfg, opts)?;
    write_outputs(&out, &cfg.output_dir, opts)?;
    let status = out.segmentation.status.clone();
    match &status {
        Status::Converged => info!(
            "converged after {} outer iterations",
            out.report.outer_iters
        ),
        Status::MaxIterations => warn!("stopped at the iteration cap ({})", out.report.outer_iters),
        Status::Aborted { reason } => warn!("aborted: {reason}"),
    }
    Ok(status)
}

/// Exit code of `priorseg segment`: 0 converged, 2 cap reached, 1 error.
pub fn cmd_segment(path: &Path, opts: &Options) -> i32 {
    match segment_command(path, opts) {
        Ok(status) => {
            if let Status::Aborted { reason } = &status {
                eprintln!("error: evolution aborted: {reason}");
            }
            exit_code(&status)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// `moments`: moment file text of a mask, headed by a `lambda_00` comment.
pub fn moments_text(mask_path: &Path, order: usize) -> Result<String> {
    let mask = io::read_mask(mask_path)
        .with_context(|| format!("cannot read mask {}", mask_path.display()))?;
    let lam = MomentVector::from_mask(&mask, order)
        .with_context(|| format!("mask {}", mask_path.display()))?;
    Ok(format!(
        "# lambda_00 = {}\n{}",
        lam.get(0, 0),
        lam.to_text()
    ))
}

pub fn cmd_moments(mask_path: &Path, order: usize, output: Option<&PathBuf>) -> i32 {
    let res = moments_text(mask_path, order).and_then(|text| match output {
        Some(p) => fs::write(p, &text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
