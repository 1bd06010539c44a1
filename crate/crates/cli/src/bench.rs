//! Benchmark matrices: one segmentation per cell, run on a bounded pool.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use priorseg::{NoiseFamily, NoiseModels, Status};

use crate::config::{BenchConfig, RunConfig};
use crate::{run, write_outputs, Options};

/// Overrides of one cell; `None` keeps the base value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub alpha: Option<f64>,
    pub alpha_scale: Option<f64>,
    pub seed: Option<u64>,
    pub family: Option<String>,
    pub snr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CellRow {
    pub cell: Cell,
    pub status: Option<Status>,
    pub outer_iters: usize,
    pub final_energy: Option<f64>,
    pub hamming: Option<f64>,
    pub dice: Option<f64>,
    pub error: Option<String>,
}

fn axis<T: Clone>(values: &Option<Vec<T>>) -> Vec<Option<T>> {
    match values {
        Some(v) if !v.is_empty() => v.iter().cloned().map(Some).collect(),
        _ => vec![None],
    }
}

/// Cartesian product in a fixed order: alpha, alpha_scale, family, snr, seed.
pub fn expand(cfg: &BenchConfig) -> Vec<Cell> {
    let m = &cfg.matrix;
    let mut cells = Vec::new();
    for alpha in axis(&m.alpha) {
        for alpha_scale in axis(&m.alpha_scale) {
            for family in axis(&m.families) {
                for snr in axis(&m.snr) {
                    for seed in axis(&m.seeds) {
                        cells.push(Cell {
                            index: cells.len(),
                            alpha,
                            alpha_scale,
                            seed,
                            family: family.clone(),
                            snr,
                        });
                    }
                }
            }
        }
    }
    cells
}

/// Base config with a cell's overrides applied, writing into `out_dir`.
pub fn cell_config(base: &RunConfig, cell: &Cell, out_dir: &Path) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.output_dir = out_dir.to_path_buf();
    if let Some(a) = cell.alpha {
        cfg.evolution.alpha = a;
        if let Some(p) = &mut cfg.prior {
            p.alpha_scale = None;
        }
    }
    if let Some(s) = cell.alpha_scale {
        let Some(p) = &mut cfg.prior else {
            bail!("matrix.alpha_scale: the base run has no [prior]");
        };
        p.alpha_scale = Some(s);
        cfg.evolution.alpha = 0.0;
    }
    if let Some(seed) = cell.seed {
        cfg.set_seed(seed);
    }
    if let Some(name) = &cell.family {
        let family = NoiseFamily::from_name(name, None)
            .with_context(|| format!("matrix.families: {name}"))?;
        cfg.noise = NoiseModels::same(family);
    }
    if let Some(snr) = cell.snr {
        let Some(n) = &mut cfg.phantom_noise else {
            bail!("matrix.snr: the base run has no phantom_noise");
        };
        n.snr = Some(snr);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_cell(base: &RunConfig, cell: &Cell, out_root: &Path, opts: &Options) -> CellRow {
    let dir = out_root
        .join("cells")
        .join(format!("cell_{:03}", cell.index));
    let result = cell_config(base, cell, &dir).and_then(|cfg| {
        let out = run(&cfg, opts)?;
        write_outputs(&out, &cfg.output_dir, opts)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            let error = match &out.segmentation.status {
                Status::Aborted { reason } => Some(reason.clone()),
                _ => None,
            };
            CellRow {
                cell: cell.clone(),
                status: Some(out.segmentation.status.clone()),
                outer_iters: out.report.outer_iters,
                final_energy: out.report.energy.last.map(|e| e.total),
                hamming: out.report.hamming.map(|h| h.normalized),
                dice: out.report.dice,
                error,
            }
        }
        Err(e) => CellRow {
            cell: cell.clone(),
            status: None,
            outer_iters: 0,
            final_energy: None,
            hamming: None,
            dice: None,
            error: Some(format!("{e:#}")),
        },
    }
}

/// Run every cell with at most `jobs` workers; rows come back in cell order.
pub fn run_bench(
    cfg: &BenchConfig,
    base: &RunConfig,
    jobs: usize,
    opts: &Options,
) -> Result<Vec<CellRow>> {
    let cells = expand(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start worker pool")?;
    info!("bench: {} cells on {} workers", cells.len(), jobs.max(1));
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(base, c, &cfg.output_dir, opts))
            .collect()
    }))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn status_name(s: &Option<Status>) -> &'static str {
    match s {
        Some(Status::Converged) => "converged",
        Some(Status::MaxIterations) => "max-iterations",
        Some(Status::Aborted { .. }) => "aborted",
        None => "error",
    }
}

pub fn rows_csv(rows: &[CellRow]) -> String {
    let mut s = String::from("cell,alpha,alpha_scale,family,snr,seed,status,outer_iters,final_energy,hamming,dice,error\n");
    for r in rows {
        let c = &r.cell;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.index,
            opt(&c.alpha),
            opt(&c.alpha_scale),
            opt(&c.family),
            opt(&c.snr),
            opt(&c.seed),
            status_name(&r.status),
            r.outer_iters,
            opt(&r.final_energy),
            opt(&r.hamming),
            opt(&r.dice),
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    s
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Seeds aggregated per (alpha, alpha_scale, family, snr) group.
pub fn summary_csv(rows: &[CellRow]) -> String {
    let mut groups: Vec<(String, Vec<&CellRow>)> = Vec::new();
    for r in rows {
        let c = &r.cell;
        let key = format!(
            "{},{},{},{}",
            opt(&c.alpha),
            opt(&c.alpha_scale),
            opt(&c.family),
            opt(&c.snr)
        );
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut s = String::from(
        "alpha,alpha_scale,family,snr,cells,failed,mean_hamming,median_hamming,mean_dice\n",
    );
    for (key, members) in groups {
        let mut h: Vec<f64> = members.iter().filter_map(|r| r.hamming).collect();
        let d: Vec<f64> = members.iter().filter_map(|r| r.dice).collect();
        let failed = members.iter().filter(|r| r.error.is_some()).count();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mean_h = mean(&h);
        let mean_d = mean(&d);
        let _ = writeln!(
            s,
            "{key},{},{failed},{},{},{}",
            members.len(),
            opt(&mean_h),
            opt(&median(&mut h)),
            opt(&mean_d)
        );
    }
    s
}

/// `bench`: returns the rows after writing cells.csv and summary.csv.
pub fn bench_command(path: &Path, jobs: usize, opts: &Options) -> Result<Vec<CellRow>> {
    let (cfg, mut base) = BenchConfig::load(path)?;
    base.apply_seed_env()?;
    let rows = run_bench(&cfg, &base, jobs, opts)?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("output_dir {}", cfg.output_dir.display()))?;
    fs::write(cfg.output_dir.join("cells.csv"), rows_csv(&rows))?;
    fs::write(cfg.output_dir.join("summary.csv"), summary_csv(&rows))?;
    for r in &rows {
        if let Some(e) = &r.error {
            warn!("cell {}: {e}", r.cell.index);
        }
    }
    Ok(rows)
}

/// Exit code of `priorseg bench`: 0 unless every cell failed.
pub fn cmd_bench(path: &Path, jobs: usize, opts: &Options) -> i32 {
    match bench_command(path, jobs, opts) {
        Ok(rows) if !rows.is_empty() && rows.iter().all(|r| r.error.is_some()) => {
            eprintln!("error: all {} bench cells failed", rows.len());
            1
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
