use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::table::Table;
use super::{Output, RunConfig, SpectrumSettings};
use crate::config::{ModelConfig, ModelKind};
use crate::dressed::{self, DressedBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::{self, GaugeModel};
use crate::spectra::{self, SpectrumResult};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory under which `run-<hash>` is created.
    pub out_root: PathBuf,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// Overrides `spectrum.normalize` when set.
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub variant: String,
    pub sweep: Option<String>,
    pub index: Option<usize>,
    pub value: Option<f64>,
    pub status: JobStatus,
    pub error: Option<String>,
    /// Relative to the run directory.
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub run_dir: PathBuf,
    pub workers: usize,
    pub jobs: Vec<JobRecord>,
    /// Per-sweep tables merged across jobs, relative to the run directory.
    pub merged: Vec<PathBuf>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.jobs.iter().filter(|j| j.status == JobStatus::Failed).count()
    }
}

/// Loads, validates and runs a configuration file.
pub fn run(config_path: &Path, options: &RunOptions) -> Result<RunManifest> {
    let cfg = RunConfig::load(config_path)?;
    run_config(&cfg, options)
}

struct Job {
    id: String,
    variant: String,
    sweep: Option<(usize, String)>,
    index: Option<usize>,
    value: Option<f64>,
    model: ModelConfig,
    outputs: Vec<Output>,
    dir: PathBuf,
}

struct JobResult {
    tables: Vec<(Output, Table)>,
    files: Vec<PathBuf>,
    error: Option<String>,
    seconds: f64,
}

pub fn run_config(cfg: &RunConfig, options: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let mut settings = cfg.spectrum.clone();
    if let Some(n) = options.normalize {
        settings.normalize = n;
    }
    let hash = cfg.hash();
    let run_dir = options.out_root.join(format!("run-{hash}"));
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;

    let mut jobs = Vec::new();
    for (variant, model) in cfg.variants()? {
        if cfg.sweep.is_empty() {
            jobs.push(Job {
                id: variant.clone(),
                dir: PathBuf::from("jobs").join(&variant),
                variant,
                sweep: None,
                index: None,
                value: None,
                model,
                outputs: cfg.outputs.clone(),
            });
            continue;
        }
        for (s, spec) in cfg.sweep.iter().enumerate() {
            let label = spec.label();
            for (i, v) in spec.range.values().into_iter().enumerate() {
                jobs.push(Job {
                    id: format!("{variant}/{label}/{i:04}"),
                    dir: PathBuf::from("jobs").join(&variant).join(&label).join(format!("{i:04}")),
                    variant: variant.clone(),
                    sweep: Some((s, label.clone())),
                    index: Some(i),
                    value: Some(v),
                    model: spec.target.apply(&model, v),
                    outputs: spec.outputs.clone(),
                });
            }
        }
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.workers {
            b = b.num_threads(n.max(1));
        }
        b.build().map_err(|e| Error::numerical("thread pool", e.to_string()))?
    };
    let workers = pool.current_num_threads();
    log::info!("{} jobs on {workers} workers into {}", jobs.len(), run_dir.display());
    let results: Vec<JobResult> = pool.install(|| jobs.par_iter().map(|j| execute(j, &settings, &run_dir)).collect());

    let mut records = Vec::with_capacity(jobs.len());
    let mut merged_tables: Vec<(PathBuf, Table)> = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        if let Some(err) = &res.error {
            log::error!("job {} failed: {err}", job.id);
        }
        if let (Some((s, label)), Some(value)) = (&job.sweep, job.value) {
            let target = cfg.sweep[*s].target.name();
            for (out, table) in res.tables {
                let path = PathBuf::from(format!("{}__{label}__{}.csv", job.variant, out.name()));
                let rows = table.with_leading(target, value);
                match merged_tables.iter_mut().find(|(p, _)| *p == path) {
                    Some((_, t)) => t.append(rows),
                    None => merged_tables.push((path, rows)),
                }
            }
        } else {
            for (out, table) in res.tables {
                merged_tables.push((PathBuf::from(format!("{}__{}.csv", job.variant, out.name())), table));
            }
        }
        records.push(JobRecord {
            id: job.id.clone(),
            variant: job.variant.clone(),
            sweep: job.sweep.as_ref().map(|(_, l)| l.clone()),
            index: job.index,
            value: job.value,
            status: if res.error.is_none() { JobStatus::Ok } else { JobStatus::Failed },
            error: res.error,
            outputs: res.files,
            wall_seconds: res.seconds,
        });
    }
    let mut merged = Vec::new();
    for (path, table) in merged_tables {
        table.write_csv(&run_dir.join(&path))?;
        merged.push(path);
    }

    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: cfg.clone(),
        run_dir: run_dir.clone(),
        workers,
        jobs: records,
        merged,
    };
    for path in manifest.jobs.iter().flat_map(|j| j.outputs.iter()).chain(&manifest.merged) {
        let full = run_dir.join(path);
        let len = fs::metadata(&full).map_err(|e| Error::io(&full, e))?.len();
        if len == 0 {
            return Err(Error::numerical("run", format!("output {} is empty", full.display())));
        }
    }
    write_json(&run_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn execute(job: &Job, settings: &SpectrumSettings, run_dir: &Path) -> JobResult {
    let start = Instant::now();
    let mut files = Vec::new();
    let outcome = evaluate_point(&job.model, &job.outputs, settings).and_then(|point| {
        let dir = run_dir.join(&job.dir);
        for (out, table) in &point.tables {
            let rel = job.dir.join(format!("{}.csv", out.name()));
            table.write_csv(&run_dir.join(&rel))?;
            files.push(rel);
        }
        for (out, sidecar) in &point.sidecars {
            let rel = job.dir.join(format!("{}.json", out.name()));
            write_json(&dir.join(format!("{}.json", out.name())), sidecar)?;
            files.push(rel);
        }
        Ok(point.tables)
    });
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(tables) => JobResult {
            tables,
            files,
            error: None,
            seconds,
        },
        Err(e) => JobResult {
            tables: Vec::new(),
            files,
            error: Some(e.to_string()),
            seconds,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSidecar {
    pub config: ModelConfig,
    pub config_hash: String,
    pub gauge: crate::config::Gauge,
    pub method: spectra::Method,
    pub normalized: bool,
    pub max_intensity: f64,
    pub peaks: Vec<spectra::PeakAnnotation>,
    pub gaps: Vec<f64>,
    pub clipped: usize,
    pub warnings: Vec<String>,
    pub steady_state_residual: Option<f64>,
    pub steady_state_min_eigenvalue: Option<f64>,
}

/// Tables (and spectrum sidecars) for one parameter point.
pub struct PointOutputs {
    pub tables: Vec<(Output, Table)>,
    pub sidecars: Vec<(Output, SpectrumSidecar)>,
}

pub fn evaluate_point(cfg: &ModelConfig, outputs: &[Output], settings: &SpectrumSettings) -> Result<PointOutputs> {
    let mut outputs = outputs.to_vec();
    outputs.sort();
    outputs.dedup();
    let grid = settings.grid();
    let mut tables = Vec::new();
    let mut sidecars = Vec::new();

    let mut qrt = None;
    if outputs.contains(&Output::SpectrumQrt) {
        qrt = Some(spectra::compute_qrt(cfg, &grid)?);
    }
    let needs_basis = outputs
        .iter()
        .any(|o| matches!(o, Output::Eigenvalues | Output::Parity | Output::P2Table));
    let built: Option<(GaugeModel, DressedBasis)> = match (&qrt, needs_basis) {
        (None, true) => {
            let model = hamiltonian::build(cfg)?;
            let basis = dressed::diagonalize(&model, cfg.m_dressed)?;
            Some((model, basis))
        }
        _ => None,
    };
    let pair = qrt
        .as_ref()
        .map(|r| (&r.model, &r.basis))
        .or(built.as_ref().map(|(m, b)| (m, b)));

    for out in outputs {
        match out {
            Output::Eigenvalues => {
                let (_, basis) = pair.expect("basis built");
                let mut t = Table::new(&["level", "energy"]);
                for (k, e) in basis.energies.iter().enumerate() {
                    t.push(vec![k.into(), (*e).into()]);
                }
                tables.push((out, t));
            }
            Output::Parity => {
                let (model, basis) = pair.expect("basis built");
                let table = dressed::parity_table(basis, model)?;
                let mut t = Table::new(&["state", "energy", "parity", "parity_imag", "label", "conserved"]);
                for r in &table.rows {
                    let label = match r.label {
                        dressed::ParityLabel::Even => "even",
                        dressed::ParityLabel::Odd => "odd",
                    };
                    t.push(vec![r.state.into(), r.energy.into(), r.parity.into(), r.parity_imag.into(), label.into(), r.conserved.into()]);
                }
                tables.push((out, t));
            }
            Output::P2Table => {
                let (model, basis) = pair.expect("basis built");
                let mut t = Table::new(&["upper", "lower", "label", "omega", "p2", "rate"]);
                for f in spectra::photon_flux_table(basis, model, cfg.bath_cav) {
                    t.push(vec![
                        f.upper.into(),
                        f.lower.into(),
                        f.label.unwrap_or("").into(),
                        f.omega.into(),
                        f.p2.into(),
                        f.rate.into(),
                    ]);
                }
                tables.push((out, t));
            }
            Output::SpectrumQrt => {
                let r = qrt.as_ref().expect("qrt computed");
                let flux = spectra::photon_flux_table(&r.basis, &r.model, cfg.bath_cav);
                let sidecar = sidecar(cfg, &r.spectrum, &flux, settings, Some(&r.steady));
                tables.push((out, spectrum_table(&r.spectrum, settings.normalize)));
                sidecars.push((out, sidecar));
            }
            Output::SpectrumSaa => {
                let s = spectra::spectrum_saa(cfg, &grid)?;
                let bare = ModelConfig {
                    model: if cfg.model.is_rwa() { ModelKind::Jcm } else { ModelKind::Qrm },
                    g_s: 0.0,
                    ..cfg.clone()
                };
                let model = hamiltonian::build(&bare)?;
                let basis = dressed::diagonalize(&model, bare.m_dressed)?;
                let flux = spectra::photon_flux_table(&basis, &model, cfg.bath_cav);
                sidecars.push((out, sidecar(cfg, &s, &flux, settings, None)));
                tables.push((out, spectrum_table(&s, settings.normalize)));
            }
        }
    }
    Ok(PointOutputs { tables, sidecars })
}

fn spectrum_table(s: &SpectrumResult, normalize: bool) -> Table {
    let s = if normalize { s.normalized() } else { s.clone() };
    let mut t = Table::new(&["omega_over_omega_c", "intensity"]);
    for (w, v) in s.omega_grid.iter().zip(&s.intensity) {
        t.push(vec![(*w).into(), (*v).into()]);
    }
    t
}

fn sidecar(
    cfg: &ModelConfig,
    s: &SpectrumResult,
    flux: &[spectra::FluxEntry],
    settings: &SpectrumSettings,
    steady: Option<&crate::gme::SteadyState>,
) -> SpectrumSidecar {
    let shown = if settings.normalize { s.normalized() } else { s.clone() };
    let step = (settings.omega_max - settings.omega_min) / (settings.points - 1) as f64;
    let peaks = shown.peaks(settings.peak_threshold);
    SpectrumSidecar {
        config: cfg.clone(),
        config_hash: s.config_hash.clone(),
        gauge: s.gauge,
        method: s.method,
        normalized: settings.normalize,
        max_intensity: s.max_intensity(),
        peaks: spectra::annotate_peaks(&peaks, flux, 2.0 * step),
        gaps: s.gaps.clone(),
        clipped: s.clipped,
        warnings: s.warnings.clone(),
        steady_state_residual: steady.map(|ss| ss.residual),
        steady_state_min_eigenvalue: steady.map(|ss| ss.min_eigenvalue),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::numerical("json", e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(top: &str, extra: &str) -> RunConfig {
        let text = format!("{top}[model]\nn_fock = 16\nm_dressed = 6\n[spectrum]\npoints = 40\n{extra}");
        RunConfig::parse(&text, Path::new("t.toml")).unwrap()
    }

    #[test]
    fn single_point_emits_every_output() {
        let cfg = small_config("outputs = [\"eigenvalues\", \"parity\", \"p2_table\", \"spectrum_qrt\"]\n", "");
        let dir = tempfile::tempdir().unwrap();
        let m = run_config(
            &cfg,
            &RunOptions {
                out_root: dir.path().to_path_buf(),
                workers: Some(1),
                normalize: None,
            },
        )
        .unwrap();
        assert_eq!(m.jobs.len(), 1);
        assert_eq!(m.failed(), 0);
        assert_eq!(m.merged.len(), 4);
        assert!(m.run_dir.join("manifest.json").exists());
        assert!(m.run_dir.join("jobs/default/spectrum_qrt.json").exists());
    }

    #[test]
    fn sweep_merges_in_order_and_is_deterministic() {
        let cfg = small_config(
            "",
            "[[sweep]]\ntarget = \"eta_joint\"\nrange = { start = 0.1, stop = 0.5, points = 3 }\noutputs = [\"eigenvalues\", \"spectrum_qrt\"]\n",
        );
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = |p: &Path, w| RunOptions {
            out_root: p.to_path_buf(),
            workers: Some(w),
            normalize: None,
        };
        let ma = run_config(&cfg, &opts(a.path(), 1)).unwrap();
        let mb = run_config(&cfg, &opts(b.path(), 3)).unwrap();
        assert_eq!(ma.jobs.len(), 3);
        for p in &ma.merged {
            let x = fs::read(ma.run_dir.join(p)).unwrap();
            let y = fs::read(mb.run_dir.join(p)).unwrap();
            assert_eq!(x, y, "{}", p.display());
        }
        let (_, rows) = super::super::read_csv(&ma.run_dir.join("default__eta_joint__eigenvalues.csv")).unwrap();
        assert_eq!(rows.len(), 18);
        assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(rows[17][0].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn failing_job_is_recorded_and_others_proceed() {
        // Without atomic loss or pump the decoupled excited atom is stable,
        // so the steady state is degenerate at eta = 0 only.
        let cfg = small_config(
            "",
            "[[sweep]]\ntarget = \"eta_joint\"\nrange = { start = 0.0, stop = 0.2, points = 2 }\noutputs = [\"spectrum_qrt\"]\n",
        );
        let cfg = RunConfig {
            model: ModelConfig {
                gamma_a: 0.0,
                kappa: 0.1,
                p_inc: 0.0,
                rate_unit: crate::config::RateUnit::OmegaC,
                ..cfg.model.clone()
            },
            ..cfg
        };
        let dir = tempfile::tempdir().unwrap();
        let m = run_config(
            &cfg,
            &RunOptions {
                out_root: dir.path().to_path_buf(),
                workers: Some(1),
                normalize: None,
            },
        )
        .unwrap();
        assert_eq!(m.failed(), 1);
        assert!(m.jobs[0].error.as_deref().unwrap().contains("not unique"));
        assert_eq!(m.jobs[1].status, JobStatus::Ok);
        let (_, rows) = super::super::read_csv(&m.run_dir.join(&m.merged[0])).unwrap();
        assert_eq!(rows.len(), 40);
    }
}
