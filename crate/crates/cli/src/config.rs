//! Run and bench configuration files (TOML, or JSON by extension).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use priorseg::synth::{NoiseSpec, PhantomSpec, ReferenceSpec, ShapeSpec};
use priorseg::{EvolutionConfig, NoiseModels};

pub const SEED_ENV: &str = "PRIORSEG_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageInput {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments_file: Option<PathBuf>,
    /// Synthetic reference shape on its own canvas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    /// Moment order; defaults to 8, or to the order stored in `moments_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Prior weight as a multiple of the automatic scale; overrides `evolution.alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ImageInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
    /// Sampling noise of the phantom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom_noise: Option<NoiseSpec>,
    pub init: ShapeSpec,
    /// Region noise models used by the segmentation.
    pub noise: NoiseModels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
}

fn join(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_shape(base: &Path, s: &mut ShapeSpec) {
    if let ShapeSpec::MaskFile { path } = s {
        *path = join(base, path);
    }
}

fn check_file(key: &str, p: &Path) -> Result<()> {
    if !p.is_file() {
        bail!("{key}: file {} does not exist", p.display());
    }
    Ok(())
}

fn check_shape(key: &str, s: &ShapeSpec) -> Result<()> {
    match s {
        ShapeSpec::MaskFile { path } => check_file(&format!("{key}.path"), path),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Parse, resolve relative paths against the file's directory and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = load_file(path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.output_dir = join(base, &self.output_dir);
        if let Some(inp) = &mut self.input {
            inp.image = join(base, &inp.image);
            if let Some(gt) = &mut inp.ground_truth {
                *gt = join(base, gt);
            }
        }
        if let Some(ph) = &mut self.phantom {
            resolve_shape(base, &mut ph.shape);
        }
        resolve_shape(base, &mut self.init);
        if let Some(pr) = &mut self.prior {
            for p in [&mut pr.reference_mask, &mut pr.moments_file]
                .into_iter()
                .flatten()
            {
                *p = join(base, p);
            }
            if let Some(r) = &mut pr.reference {
                resolve_shape(base, &mut r.shape);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input, &self.phantom) {
            (Some(_), Some(_)) => bail!("input, phantom: give exactly one image source, not both"),
            (None, None) => bail!("input, phantom: one image source is required"),
            (Some(inp), None) => {
                check_file("input.image", &inp.image)?;
                if let Some(gt) = &inp.ground_truth {
                    check_file("input.ground_truth", gt)?;
                }
                if self.phantom_noise.is_some() {
                    bail!("phantom_noise: only valid together with phantom");
                }
            }
            (None, Some(ph)) => {
                check_shape("phantom.shape", &ph.shape)?;
                if self.phantom_noise.is_none() {
                    bail!("phantom_noise: required with phantom");
                }
            }
        }
        check_shape("init", &self.init)?;
        self.evolution
            .validate()
            .with_context(|| "evolution".to_string())?;
        self.noise.inside.validate().context("noise.inside")?;
        self.noise.outside.validate().context("noise.outside")?;
        match &self.prior {
            None if self.evolution.alpha > 0.0 => {
                bail!("evolution.alpha: a positive prior weight needs a [prior] section")
            }
            None => {}
            Some(pr) => {
                let sources = [
                    pr.reference_mask.is_some(),
                    pr.moments_file.is_some(),
                    pr.reference.is_some(),
                ];
                if sources.iter().filter(|&&b| b).count() != 1 {
                    bail!("prior: give exactly one of reference_mask, moments_file, reference");
                }
                if let Some(p) = &pr.reference_mask {
                    check_file("prior.reference_mask", p)?;
                }
                if let Some(p) = &pr.moments_file {
                    check_file("prior.moments_file", p)?;
                }
                if let Some(r) = &pr.reference {
                    check_shape("prior.reference.shape", &r.shape)?;
                }
                if let Some(s) = pr.alpha_scale {
                    if !(s >= 0.0 && s.is_finite()) {
                        bail!("prior.alpha_scale: must be finite and >= 0, got {s}");
                    }
                    if self.evolution.alpha != 0.0 {
                        bail!("prior.alpha_scale, evolution.alpha: set only one prior weight");
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply the seed override from `PRIORSEG_SEED`, if set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed: u64 = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}: not an unsigned integer: {v:?}"))?;
            self.set_seed(seed);
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.evolution.seed = seed;
        if let Some(n) = &mut self.phantom_noise {
            n.seed = seed;
        }
    }
}

/// Base run of a bench: inline table or path to a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRun {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

/// Cartesian matrix of overrides; an absent axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_scale: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Model family names, applied to both regions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<String>>,
    /// Phantom SNR values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub output_dir: PathBuf,
    pub base: BaseRun,
    #[serde(default)]
    pub matrix: Matrix,
}

impl BenchConfig {
    /// Parse and return the resolved base run and output directory.
    pub fn load(path: &Path) -> Result<(Self, RunConfig)> {
        let cfg: Self = load_file(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let base = match &cfg.base {
            BaseRun::Path(p) => RunConfig::load(&join(dir, p)).context("base")?,
            BaseRun::Inline(run) => {
                let mut run = (**run).clone();
                run.resolve_paths(dir);
                run.validate().context("base")?;
                run
            }
        };
        let mut cfg = cfg;
        cfg.output_dir = join(dir, &cfg.output_dir);
        Ok((cfg, base))
    }
}

pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let parsed = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("invalid config {}", path.display()))
}
