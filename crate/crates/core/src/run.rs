//! Executes an [`ExperimentConfig`] and writes `results.csv`, `results.json` and `path.dat`.

use crate::config::{ExperimentConfig, InitMode, OutputFormat};
use crate::error::{Error, Result};
use crate::model::{Family, Model};
use crate::opt::MaximizeOptions;
use crate::path::{self, OdeOptions, PathResult, PointDiagnostics, SweepOptions};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const CSV_COLUMNS: [&str; 7] =
    ["lambda", "gap_canonical", "gap_optimized", "n_iter", "converged", "grad_norm", "s_params_json"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub lambda: f64,
    pub gap_canonical: f64,
    pub gap_optimized: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub s_params: Vec<f64>,
    pub ground_degeneracy: usize,
    pub canonical_ground_degeneracy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Minimum over converged rows; `null` when no row converged.
    pub min_gap_canonical: Option<f64>,
    pub min_gap_optimized: Option<f64>,
    pub n_converged: usize,
    /// `Δ_opt / Δ_can` at the last grid point.
    pub improvement_ratio: f64,
    pub last_row_converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_s: f64,
    pub rows: Vec<Row>,
    pub summary: Option<Summary>,
    pub s_matrices: Vec<Vec<Vec<[f64; 2]>>>,
    pub diagnostics: Vec<PointDiagnostics>,
    pub ode: Option<PathResult>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Top-level record for multi-instance runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_clock_s: f64,
    pub instances: Vec<RunRecord>,
    pub n_failed: usize,
    pub mean_improvement_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
}

pub enum RunOutput {
    Single(RunRecord),
    Batch(BatchRecord),
}

impl RunOutput {
    pub fn records(&self) -> Vec<&RunRecord> {
        match self {
            RunOutput::Single(r) => vec![r],
            RunOutput::Batch(b) => b.instances.iter().collect(),
        }
    }

    pub fn all_failed(&self) -> bool {
        self.records().iter().all(|r| r.failed())
    }
}

pub fn rows_of(res: &PathResult) -> Vec<Row> {
    (0..res.lambdas.len())
        .map(|i| {
            let d = &res.diagnostics[i];
            Row {
                lambda: res.lambdas[i],
                gap_canonical: res.gaps_canonical[i],
                gap_optimized: res.gaps_optimized[i],
                n_iter: d.n_iter,
                converged: d.converged,
                grad_norm: d.grad_norm,
                s_params: res.s_params[i].clone(),
                ground_degeneracy: d.ground_degeneracy,
                canonical_ground_degeneracy: d.canonical_ground_degeneracy,
            }
        })
        .collect()
}

pub fn summarize(rows: &[Row]) -> Option<Summary> {
    let last = rows.last()?;
    let conv: Vec<&Row> = rows.iter().filter(|r| r.converged).collect();
    let min = |f: fn(&Row) -> f64| conv.iter().map(|r| f(r)).filter(|v| v.is_finite()).reduce(f64::min);
    Some(Summary {
        min_gap_canonical: min(|r| r.gap_canonical),
        min_gap_optimized: min(|r| r.gap_optimized),
        n_converged: conv.len(),
        improvement_ratio: last.gap_optimized / last.gap_canonical,
        last_row_converged: last.converged,
    })
}

fn sweep_options(cfg: &ExperimentConfig, workers: usize) -> Result<SweepOptions> {
    let init = match cfg.optimizer.init {
        InitMode::File => {
            let f = cfg.optimizer.init_file.as_ref().expect("checked by config");
            let text = std::fs::read_to_string(f)?;
            let p: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| Error::Config { path: "optimizer.init_file".into(), msg: e.to_string() })?;
            Some(p)
        }
        _ => None,
    };
    Ok(SweepOptions {
        sector: cfg.sector_spec(),
        template: cfg.template,
        warm_start: cfg.optimizer.init != InitMode::Canonical,
        maximize: MaximizeOptions { grad_tol: cfg.optimizer.grad_tol, max_iter: cfg.optimizer.max_iter, ..Default::default() },
        workers: workers.max(1),
        init,
        ..Default::default()
    })
}

/// Runs one instance without touching the filesystem.
pub fn run_instance(cfg: &ExperimentConfig, seed: Option<u64>, workers: usize) -> RunRecord {
    let t0 = Instant::now();
    let mut rec = RunRecord {
        config: cfg.clone(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: 0.0,
        rows: Vec::new(),
        summary: None,
        s_matrices: Vec::new(),
        diagnostics: Vec::new(),
        ode: None,
        error: None,
    };
    let family = Family::new(cfg.model, seed.unwrap_or(cfg.random_model.seed), cfg.random_model.t);
    let lambdas = cfg.lambdas();
    let outcome = (|| -> Result<()> {
        let opts = sweep_options(cfg, workers)?;
        let res = path::sweep(&family, cfg.n_sites, &lambdas, &opts)?;
        rec.rows = rows_of(&res);
        rec.summary = summarize(&rec.rows);
        rec.s_matrices = res.s_matrices.clone();
        rec.diagnostics = res.diagnostics.clone();
        if cfg.ode.enabled {
            let ode = OdeOptions {
                h_p: cfg.ode.h_p,
                h_lambda: cfg.ode.h_lambda,
                reproject_every: cfg.ode.reproject_every,
                ..Default::default()
            };
            let start = res.s_params.first().cloned().unwrap_or_default();
            match path::ode_follow(&family, cfg.n_sites, &lambdas, &start, &opts, &ode) {
                Ok(p) => rec.ode = Some(p),
                Err(e) => warn!("ODE follow failed: {e}"),
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        warn!("instance {seed:?} failed: {e}");
        rec.error = Some(e.to_string());
    }
    rec.wall_clock_s = t0.elapsed().as_secs_f64();
    rec
}

/// Runs every instance of the config and writes the output files.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let workers = opts.workers.max(1);
    if cfg.model != Model::Random || cfg.random_model.n_instances == 1 {
        let seed = (cfg.model == Model::Random).then_some(cfg.random_model.seed);
        let rec = run_instance(cfg, seed, workers);
        write_outputs(&rec, &out_dir, &cfg.output.formats)?;
        return Ok(RunOutput::Single(rec));
    }
    let t0 = Instant::now();
    let seeds = cfg.seeds();
    let slots: Vec<Mutex<Option<RunRecord>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                info!("seed {} started", seeds[i]);
                let rec = run_instance(cfg, Some(seeds[i]), 1);
                *slots[i].lock().unwrap() = Some(rec);
            });
        }
    });
    let instances: Vec<RunRecord> = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every seed ran")).collect();
    for rec in &instances {
        let dir = out_dir.join(format!("seed-{}", rec.seed.unwrap_or(0)));
        std::fs::create_dir_all(&dir)?;
        write_outputs(rec, &dir, &cfg.output.formats)?;
    }
    let ratios: Vec<f64> = instances
        .iter()
        .filter_map(|r| r.summary.as_ref().map(|s| s.improvement_ratio))
        .filter(|r| r.is_finite())
        .collect();
    let batch = BatchRecord {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: t0.elapsed().as_secs_f64(),
        n_failed: instances.iter().filter(|r| r.failed()).count(),
        mean_improvement_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        instances,
    };
    if cfg.output.formats.contains(&OutputFormat::Json) {
        write_json(&batch, &out_dir.join("results.json"))?;
    }
    Ok(RunOutput::Batch(batch))
}

pub fn write_outputs(rec: &RunRecord, dir: &Path, formats: &[OutputFormat]) -> Result<()> {
    for f in formats {
        match f {
            OutputFormat::Csv => write_csv(&rec.rows, &dir.join("results.csv"))?,
            OutputFormat::Json => write_json(rec, &dir.join("results.json"))?,
            OutputFormat::Dat => write_dat(rec, &dir.join("path.dat"))?,
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV body for `rows`, without the timestamp line.
pub fn csv_body(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(ser)?;
    for r in rows {
        let params: Vec<String> = r.s_params.iter().map(|&p| fmt_f(p)).collect();
        w.write_record([
            fmt_f(r.lambda),
            fmt_f(r.gap_canonical),
            fmt_f(r.gap_optimized),
            r.n_iter.to_string(),
            r.converged.to_string(),
            fmt_f(r.grad_norm),
            format!("[{}]", params.join(",")),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

pub fn write_csv(rows: &[Row], path: &Path) -> Result<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# generated {stamp}")?;
    f.write_all(csv_body(rows)?.as_bytes())?;
    Ok(())
}

/// Parses a CSV written by [`write_csv`]; `#` lines are skipped.
pub fn read_csv(text: &str) -> Result<Vec<(f64, f64, f64, usize, bool, f64, Vec<f64>)>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let ser = |e: &dyn std::fmt::Display| Error::Serde(e.to_string());
    let header = r.headers().map_err(|e| ser(&e))?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Serde(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ser(&e))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| ser(&e));
        // written as a JSON array, but NaN and inf are not JSON numbers
        let inner = rec[6].trim().trim_start_matches('[').trim_end_matches(']');
        let params = inner
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<f64>().map_err(|e| ser(&e)))
            .collect::<Result<Vec<f64>>>()?;
        out.push((
            f(0)?,
            f(1)?,
            f(2)?,
            rec[3].parse::<usize>().map_err(|e| ser(&e))?,
            rec[4].parse::<bool>().map_err(|e| ser(&e))?,
            f(5)?,
            params,
        ));
    }
    Ok(out)
}

/// Two-column blocks separated by blank lines: canonical gap, optimized gap,
/// then the ODE gap when present.
pub fn write_dat(rec: &RunRecord, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# lambda gap_canonical")?;
    for r in &rec.rows {
        writeln!(f, "{} {}", fmt_f(r.lambda), fmt_f(r.gap_canonical))?;
    }
    writeln!(f)?;
    writeln!(f)?;
    writeln!(f, "# lambda gap_optimized")?;
    for r in &rec.rows {
        writeln!(f, "{} {}", fmt_f(r.lambda), fmt_f(r.gap_optimized))?;
    }
    if let Some(ode) = &rec.ode {
        writeln!(f)?;
        writeln!(f)?;
        writeln!(f, "# lambda gap_ode")?;
        for (l, g) in ode.lambdas.iter().zip(&ode.gaps_optimized) {
            writeln!(f, "{} {}", fmt_f(*l), fmt_f(*g))?;
        }
    }
    f.flush()?;
    Ok(())
}
