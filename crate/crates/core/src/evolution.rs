//! Combined functional and the alternating noise / shape evolution.
//!
//! The energy of a partition is
//!
//! ```text
//! E = sum_in -log p(y; eta_in) + sum_out -log p(y; eta_out) + alpha d(O, O_ref) + beta |C|
//! ```
//!
//! with both `eta` re-fit by maximum likelihood on the current partition. One
//! outer iteration runs `n_noise_iters` explicit steps of the noise + curvature
//! flow, then shape-only steps until the largest shape speed on the band drops
//! below the threshold. An outer iteration is accepted only if it does not
//! increase `E`; otherwise it is retried from the same state with half the time
//! step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LevelSetField, RegionMask};
use crate::noise::{self, NaturalParams, NoiseFamily, SufficientStats};
use crate::shape::{shape_distance, MomentVector, ShapeGradient, ShapeSpeedField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Shape-prior weight.
    pub alpha: f64,
    /// Curve-length weight.
    pub beta: f64,
    pub n_noise_iters: usize,
    /// Shape phase stops once `alpha * max|v_shape|` on the band is below this.
    pub shape_speed_threshold: f64,
    /// Hard cap on shape steps per outer iteration.
    pub max_shape_iters: usize,
    /// Largest interface displacement per step, in pixels.
    pub dt: f64,
    pub max_outer_iters: usize,
    /// Relative total-energy change regarded as converged.
    pub tolerance: f64,
    /// Number of consecutive outer iterations below `tolerance`.
    pub window: usize,
    pub reinit_every: usize,
    /// Pixels with `|phi| <= band_width` are updated.
    pub band_width: f64,
    /// Time-step halvings tried before an outer iteration is given up.
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.5,
            n_noise_iters: 10,
            shape_speed_threshold: 1e-3,
            max_shape_iters: 50,
            dt: 0.9,
            max_outer_iters: 200,
            tolerance: 1e-5,
            window: 3,
            reinit_every: 5,
            band_width: 3.0,
            max_backtracks: 6,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_string()));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad("beta must be finite and >= 0");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if !(self.shape_speed_threshold > 0.0) {
            return bad("shape_speed_threshold must be > 0");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.reinit_every == 0 {
            return bad("reinit_every must be >= 1");
        }
        if !(self.band_width >= 1.0) {
            return bad("band_width must be >= 1");
        }
        Ok(())
    }
}

/// Noise families of the two regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModels {
    pub inside: NoiseFamily,
    pub outside: NoiseFamily,
}

impl NoiseModels {
    pub fn same(family: NoiseFamily) -> Self {
        Self {
            inside: family,
            outside: family,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub noise: f64,
    /// `alpha * d`
    pub shape: f64,
    /// `beta * length`
    pub regularization: f64,
    pub distance: f64,
    pub length: f64,
}

/// Total energy of the partition encoded by `phi`.
pub fn total_energy(
    image: &ImageGrid,
    phi: &LevelSetField,
    config: &EvolutionConfig,
    models: &NoiseModels,
    lam_ref: Option<&MomentVector>,
) -> Result<EnergyBreakdown> {
    let mask = phi.mask();
    let noise = noise::noise_energy(image, &mask, models.inside, models.outside)?;
    let distance = match lam_ref {
        Some(r) => shape_distance(&MomentVector::from_levelset(phi, r.order())?, r)?,
        None => 0.0,
    };
    let length = phi.contour_length();
    let shape = if config.alpha == 0.0 {
        0.0
    } else {
        config.alpha * distance
    };
    let regularization = if config.beta == 0.0 {
        0.0
    } else {
        config.beta * length
    };
    Ok(EnergyBreakdown {
        total: noise + shape + regularization,
        noise,
        shape,
        regularization,
        distance,
        length,
    })
}

/// Scale for `alpha` that puts `alpha * d` in the units of the noise energy:
/// the squared area of the initial region.
pub fn auto_alpha_scale(init_mask: &RegionMask) -> f64 {
    let a = init_mask.area() as f64;
    a * a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Noise,
    Shape,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Noise => "noise",
            Phase::Shape => "shape",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub phase: Phase,
    pub energy: EnergyBreakdown,
    pub area: usize,
    pub max_speed: f64,
    pub ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub initial: Option<EnergyBreakdown>,
    pub records: Vec<TraceRecord>,
}

impl EvolutionTrace {
    /// Total energy at the end of each accepted outer iteration, preceded by
    /// the initial energy.
    pub fn outer_energies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.initial.iter().map(|e| e.total).collect();
        let mut i = 0;
        while i < self.records.len() {
            let iter = self.records[i].iter;
            let mut last = &self.records[i];
            while i < self.records.len() && self.records[i].iter == iter {
                last = &self.records[i];
                i += 1;
            }
            out.push(last.energy.total);
        }
        out
    }

    /// CSV with columns `iter,phase,E_total,E_noise,E_shape,E_reg,area,max_speed,ms`.
    /// Wall times are written only when `timings` is set (0 otherwise) so the
    /// file is reproducible byte for byte.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut s = String::from("iter,phase,E_total,E_noise,E_shape,E_reg,area,max_speed,ms\n");
        for r in &self.records {
            let ms = if timings { r.ms } else { 0.0 };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.iter,
                r.phase.as_str(),
                r.energy.total,
                r.energy.noise,
                r.energy.shape,
                r.energy.regularization,
                r.area,
                r.max_speed,
                ms
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
    Aborted { reason: String },
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub mask: RegionMask,
    pub phi: LevelSetField,
    pub trace: EvolutionTrace,
    pub status: Status,
    pub outer_iters: usize,
}

impl Segmentation {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Region statistics kept in sync with the mask.
#[derive(Clone, Debug)]
struct RegionState {
    mask: RegionMask,
    inside: SufficientStats,
    outside: SufficientStats,
}

impl RegionState {
    fn new(image: &ImageGrid, mask: RegionMask, models: &NoiseModels) -> Result<Self> {
        let mut inside = SufficientStats::new(models.inside);
        let mut outside = SufficientStats::new(models.outside);
        for (&y, &m) in image.data().iter().zip(mask.data()) {
            if m {
                inside.add(y)?;
            } else {
                outside.add(y)?;
            }
        }
        Ok(Self {
            mask,
            inside,
            outside,
        })
    }

    fn fit(&self) -> Result<(NaturalParams, NaturalParams)> {
        if self.inside.n() == 0 {
            return Err(Error::EmptyRegion("inside"));
        }
        if self.outside.n() == 0 {
            return Err(Error::EmptyRegion("outside"));
        }
        Ok((self.inside.ml_estimate()?, self.outside.ml_estimate()?))
    }

    /// Move flipped pixels between the region statistics.
    fn sync(&mut self, image: &ImageGrid, phi: &LevelSetField) -> Result<()> {
        let data = image.data();
        for (i, &v) in phi.values().iter().enumerate() {
            let now = v < 0.0;
            let (x, y) = (i % phi.width(), i / phi.width());
            if now != self.mask.get(x, y) {
                if now {
                    self.outside.remove(data[i])?;
                    self.inside.add(data[i])?;
                } else {
                    self.inside.remove(data[i])?;
                    self.outside.add(data[i])?;
                }
                self.mask.set(x, y, now);
            }
        }
        Ok(())
    }
}

/// Apply `phi <- phi - dt * (F_adv |grad phi|_upwind - beta kappa |grad phi|)`
/// on the listed pixels, all derivatives taken from the old field.
fn explicit_update(phi: &mut LevelSetField, band: &[usize], adv: &[f64], curv: &[f64], dt: f64) {
    let w = phi.width();
    let deltas: Vec<f64> = band
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let (x, y) = (i % w, i / w);
            let mut d = 0.0;
            if adv[j] != 0.0 {
                d += adv[j] * phi.upwind_gradient_norm(x, y, adv[j]);
            }
            if curv[j] != 0.0 {
                d -= curv[j] * phi.gradient_norm(x, y);
            }
            d
        })
        .collect();
    let values = phi.values_mut();
    for (&i, d) in band.iter().zip(deltas) {
        values[i] -= dt * d;
    }
}

fn band_of(phi: &LevelSetField, width: f64) -> Vec<usize> {
    phi.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= width)
        .map(|(i, _)| i)
        .collect()
}

/// One explicit step of the noise + curvature flow with given region models.
/// Returns the largest absolute outward speed on the band.
fn noise_step_with(
    phi: &mut LevelSetField,
    image: &ImageGrid,
    eta_in: &NaturalParams,
    eta_out: &NaturalParams,
    config: &EvolutionConfig,
    dt_scale: f64,
) -> Result<f64> {
    let band = band_of(phi, config.band_width);
    let w = phi.width();
    let mut adv = Vec::with_capacity(band.len());
    let mut curv = Vec::with_capacity(band.len());
    let mut max_speed: f64 = 0.0;
    for &i in &band {
        let (x, y) = (i % w, i / w);
        let f = noise::log_likelihood_ratio(eta_in, eta_out, image.get(x, y))?;
        let k = if config.beta > 0.0 {
            config.beta * phi.curvature(x, y)
        } else {
            0.0
        };
        max_speed = max_speed.max((f - k).abs());
        adv.push(f);
        curv.push(k);
    }
    if max_speed == 0.0 {
        return Ok(0.0);
    }
    let mut dt = dt_scale * config.dt / max_speed;
    if config.beta > 0.0 {
        dt = dt.min(0.25 / config.beta);
    }
    explicit_update(phi, &band, &adv, &curv, dt);
    Ok(max_speed)
}

/// One noise-phase step: ML fit on the current partition, then an explicit
/// step with outward speed `log p_in - log p_out - beta kappa`.
pub fn noise_phase_step(
    phi: &LevelSetField,
    image: &ImageGrid,
    models: &NoiseModels,
    config: &EvolutionConfig,
) -> Result<LevelSetField> {
    let mask = phi.mask();
    if mask.is_uniform() {
        return Err(Error::ContourVanished);
    }
    let (eta_in, eta_out) = noise::fit_regions(image, &mask, models.inside, models.outside)?;
    let mut out = phi.clone();
    noise_step_with(&mut out, image, &eta_in, &eta_out, config, 1.0)?;
    if out.mask().is_uniform() {
        return Err(Error::ContourVanished);
    }
    Ok(out)
}

/// One shape step with a monotone line search on `d`. Returns the new field
/// and `alpha * max|v_shape|` measured before the step; no step is taken when
/// that value is below the threshold.
fn shape_step_inner(
    phi: &LevelSetField,
    lam_ref: &MomentVector,
    config: &EvolutionConfig,
    dt_scale: f64,
) -> Result<(LevelSetField, f64)> {
    if config.alpha == 0.0 {
        return Ok((phi.clone(), 0.0));
    }
    let grad = ShapeGradient::from_levelset(phi, lam_ref)?;
    let d0 = shape_distance(grad.lambda(), lam_ref)?;
    let field = ShapeSpeedField::on_band(&grad, phi, config.band_width);
    let max_abs = config.alpha * field.max_abs();
    if !(max_abs >= config.shape_speed_threshold) {
        return Ok((phi.clone(), max_abs));
    }
    let band = field.band();
    let adv: Vec<f64> = band.iter().map(|&i| field.values()[i]).collect();
    let curv = vec![0.0; band.len()];
    let mut dt = dt_scale * config.dt / field.max_abs();
    for _ in 0..6 {
        let mut trial = phi.clone();
        explicit_update(&mut trial, band, &adv, &curv, dt);
        if !trial.mask().is_uniform() {
            if let Ok(lam) = MomentVector::from_levelset(&trial, lam_ref.order()) {
                if shape_distance(&lam, lam_ref)? <= d0 {
                    return Ok((trial, max_abs));
                }
            }
        }
        dt *= 0.5;
    }
    Ok((phi.clone(), max_abs))
}

/// One shape-phase step with speed `alpha * v_shape`.
pub fn shape_phase_step(
    phi: &LevelSetField,
    lam_ref: &MomentVector,
    config: &EvolutionConfig,
) -> Result<(LevelSetField, f64)> {
    if phi.mask().is_uniform() {
        return Err(Error::ContourVanished);
    }
    shape_step_inner(phi, lam_ref, config, 1.0)
}

struct Evolver<'a> {
    image: &'a ImageGrid,
    config: &'a EvolutionConfig,
    models: &'a NoiseModels,
    lam_ref: Option<&'a MomentVector>,
}

#[derive(Clone)]
struct State {
    phi: LevelSetField,
    regions: RegionState,
    steps_since_reinit: usize,
}

impl Evolver<'_> {
    fn shape_active(&self) -> bool {
        self.config.alpha > 0.0 && self.lam_ref.is_some()
    }

    fn maybe_reinit(&self, state: &mut State) -> Result<()> {
        state.steps_since_reinit += 1;
        if state.steps_since_reinit >= self.config.reinit_every {
            state.phi = state.phi.reinitialize()?;
            state.steps_since_reinit = 0;
        }
        Ok(())
    }

    fn noise_phase(&self, state: &mut State, dt_scale: f64) -> Result<f64> {
        let mut max_speed: f64 = 0.0;
        for _ in 0..self.config.n_noise_iters {
            let (eta_in, eta_out) = state.regions.fit()?;
            let s = noise_step_with(
                &mut state.phi,
                self.image,
                &eta_in,
                &eta_out,
                self.config,
                dt_scale,
            )?;
            max_speed = max_speed.max(s);
            state.regions.sync(self.image, &state.phi)?;
            self.maybe_reinit(state)?;
        }
        Ok(max_speed)
    }

    fn shape_phase(&self, state: &mut State, dt_scale: f64) -> Result<f64> {
        let lam_ref = self.lam_ref.expect("shape phase needs a reference");
        let mut last = 0.0;
        for _ in 0..self.config.max_shape_iters.max(1) {
            let (next, m) = shape_step_inner(&state.phi, lam_ref, self.config, dt_scale)?;
            last = m;
            let moved = next != state.phi;
            state.phi = next;
            if !moved {
                break;
            }
            state.regions.sync(self.image, &state.phi)?;
            self.maybe_reinit(state)?;
            if m < self.config.shape_speed_threshold {
                break;
            }
        }
        Ok(last)
    }

    fn energy(&self, phi: &LevelSetField) -> Result<EnergyBreakdown> {
        total_energy(self.image, phi, self.config, self.models, self.lam_ref)
    }

    /// One outer iteration from `state`; returns the end state and its records.
    fn attempt(
        &self,
        state: &State,
        iter: usize,
        dt_scale: f64,
    ) -> Result<(State, Vec<TraceRecord>, EnergyBreakdown)> {
        let mut s = state.clone();
        // refresh sufficient statistics to bound drift from incremental updates
        s.regions = RegionState::new(self.image, s.phi.mask(), self.models)?;
        let mut records = Vec::new();

        let t0 = Instant::now();
        let noise_speed = self.noise_phase(&mut s, dt_scale)?;
        if !self.shape_active() {
            s.phi = s.phi.reinitialize()?;
            s.steps_since_reinit = 0;
        }
        let e = self.energy(&s.phi)?;
        records.push(TraceRecord {
            iter,
            phase: Phase::Noise,
            energy: e,
            area: s.regions.mask.area(),
            max_speed: noise_speed,
            ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        let mut end = e;
        if self.shape_active() {
            let t1 = Instant::now();
            let shape_speed = self.shape_phase(&mut s, dt_scale)?;
            s.phi = s.phi.reinitialize()?;
            s.steps_since_reinit = 0;
            end = self.energy(&s.phi)?;
            records.push(TraceRecord {
                iter,
                phase: Phase::Shape,
                energy: end,
                area: s.regions.mask.area(),
                max_speed: shape_speed,
                ms: t1.elapsed().as_secs_f64() * 1e3,
            });
        }
        if !end.total.is_finite() {
            return Err(Error::NonFiniteEnergy(iter));
        }
        Ok((s, records, end))
    }
}

/// Run the alternating scheme from `init_mask` until convergence or the
/// iteration cap.
pub fn segment(
    image: &ImageGrid,
    init_mask: &RegionMask,
    config: &EvolutionConfig,
    models: &NoiseModels,
    lam_ref: Option<&MomentVector>,
) -> Result<Segmentation> {
    segment_observed(image, init_mask, config, models, lam_ref, |_, _| {})
}

/// [`segment`] calling `on_iter(iter, energy)` after every accepted outer iteration.
pub fn segment_observed(
    image: &ImageGrid,
    init_mask: &RegionMask,
    config: &EvolutionConfig,
    models: &NoiseModels,
    lam_ref: Option<&MomentVector>,
    mut on_iter: impl FnMut(usize, &EnergyBreakdown),
) -> Result<Segmentation> {
    config.validate()?;
    models.inside.validate()?;
    models.outside.validate()?;
    init_mask.same_size(&RegionMask::empty(image.width(), image.height())?)?;
    if init_mask.area() == 0 {
        return Err(Error::EmptyRegion("initial inside"));
    }
    if init_mask.is_uniform() {
        return Err(Error::EmptyRegion("initial outside"));
    }
    let phi = LevelSetField::from_mask(init_mask)?;
    let ev = Evolver {
        image,
        config,
        models,
        lam_ref,
    };
    let mut trace = EvolutionTrace::default();
    if config.max_outer_iters == 0 {
        return Ok(Segmentation {
            mask: init_mask.clone(),
            phi,
            trace,
            status: Status::MaxIterations,
            outer_iters: 0,
        });
    }
    let mut energy = ev.energy(&phi)?;
    if !energy.total.is_finite() {
        return Err(Error::NonFiniteEnergy(0));
    }
    trace.initial = Some(energy);
    let mut state = State {
        regions: RegionState::new(image, phi.mask(), models)?,
        phi,
        steps_since_reinit: 0,
    };
    let mut quiet = 0usize;
    let mut status = Status::MaxIterations;
    let mut done = 0usize;
    for iter in 1..=config.max_outer_iters {
        let mut dt_scale = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        let mut any_ok = false;
        for _ in 0..=config.max_backtracks {
            match ev.attempt(&state, iter, dt_scale) {
                Ok((s, recs, e)) if e.total <= energy.total + 1e-9 * energy.total.abs() => {
                    accepted = Some((s, recs, e));
                    break;
                }
                Ok(_) => any_ok = true,
                Err(err) => last_err = Some(err),
            }
            dt_scale *= 0.5;
        }
        let Some((s, recs, e)) = accepted else {
            status = match last_err {
                Some(err) if !any_ok => Status::Aborted {
                    reason: err.to_string(),
                },
                // no tried step decreases the energy: stationary
                _ => Status::Converged,
            };
            break;
        };
        let rel = (energy.total - e.total).abs() / energy.total.abs().max(f64::MIN_POSITIVE);
        state = s;
        energy = e;
        trace.records.extend(recs);
        done = iter;
        on_iter(iter, &energy);
        quiet = if rel < config.tolerance { quiet + 1 } else { 0 };
        if quiet >= config.window {
            status = Status::Converged;
            break;
        }
    }
    Ok(Segmentation {
        mask: state.phi.mask(),
        phi: state.phi,
        trace,
        status,
        outer_iters: done,
    })
}
