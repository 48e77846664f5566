//! The pipeline stages behind each subcommand.
//!
//! Work items (motions, bootstrap replicates) run in parallel; every result
//! is placed by index before anything is written, so output files do not
//! depend on the number of threads.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use seisfrag::accelerogram::{AccelUnit, Accelerogram};
use seisfrag::bootstrap::{bootstrap_curves, median_im, median_im_logstd, Estimator, KdeBandwidth};
use seisfrag::ground_motion::{
    draw_feasible, solve_modulator, synthesize_with, GroundMotionParams, ModulatorCoeffs,
    ParamSampler,
};
use seisfrag::intensity::{demand_points, DemandPoint, DemandRecord, IMRecord, ImKind};
use seisfrag::nonparametric::{
    bandwidth_lscv_2d, bandwidth_normal_reference_2d, default_grid, transform, Bandwidth1D,
    FragilityCurve,
};
use seisfrag::parametric::{fit_linear_demand, fit_mle, fit_segmented, lr_to_fragility};
use seisfrag::rng::RandomStream;
use seisfrag::structure::{integrate, max_interstorey_drift, modal_analysis, ShearFrameModel};

use crate::config::{BandwidthMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, opt, sha256_hex, write_csv, RunManifest};
use crate::plot::{fragility_chart, Band, Series};

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "motion_id",
    "arias_intensity_sg",
    "d595_s",
    "t_mid_s",
    "f_mid_hz",
    "f_slope_hz_per_s",
    "zeta_f",
    "rejected_draws",
    "frequency_clipped",
    "arias_emp_sg",
    "d595_emp_s",
    "t_mid_emp_s",
];
pub const RECORD_COLUMNS: [&str; 7] = [
    "motion_id",
    "pga_g",
    "sa_g",
    "psa_g",
    "arias_sg",
    "d595_s",
    "delta_max",
];
pub const FAILURE_COLUMNS: [&str; 3] = ["motion_id", "source", "reason"];
pub const PARAMETER_COLUMNS: [&str; 17] = [
    "method",
    "im",
    "threshold",
    "alpha_g",
    "beta",
    "slope",
    "intercept",
    "zeta",
    "r2",
    "break_g",
    "slope_upper",
    "intercept_upper",
    "zeta_upper",
    "log_likelihood",
    "n",
    "status",
    "message",
];
pub const BOOTSTRAP_COLUMNS: [&str; 6] = [
    "im_g",
    "original",
    "median",
    "lower",
    "upper",
    "valid_count",
];
pub const MEDIAN_IM_COLUMNS: [&str; 3] = ["replicate", "median_im_g", "status"];
pub const BOOTSTRAP_SUMMARY_COLUMNS: [&str; 8] = [
    "method",
    "im",
    "threshold",
    "replicates",
    "failures",
    "valid_median_ims",
    "median_im_logstd",
    "original_median_im_g",
];

/// Command state: resolved configuration, output directory and manifest.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub plot: bool,
    pub units: Option<AccelUnit>,
    pub manifest: RunManifest,
}

impl Context {
    pub fn new(
        cfg: RunConfig,
        out: PathBuf,
        plot: bool,
        units: Option<AccelUnit>,
        command: &str,
    ) -> CliResult<Self> {
        let hash = config_hash(&cfg)?;
        let manifest = RunManifest::new(command, cfg.seed, hash);
        Ok(Self {
            cfg,
            out,
            plot,
            units,
            manifest,
        })
    }

    fn emit_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let path = self.out.join(rel);
        write_csv(&path, header, rows)?;
        self.manifest.record_output(&self.out, &path)?;
        Ok(path)
    }

    fn emit_text(&mut self, rel: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        std::fs::write(&path, text).map_err(CliError::io(&path))?;
        self.manifest.record_output(&self.out, &path)?;
        Ok(path)
    }

    pub fn finish(&self) -> CliResult<PathBuf> {
        self.manifest.write(&self.out)
    }
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> CliResult<String> {
    let json = serde_json::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sha256_hex(json.as_bytes()))
}

enum Source {
    Sampled(Box<ParamSampler>),
    Fixed(GroundMotionParams, ModulatorCoeffs),
}

/// Deterministic source of synthetic motions: motion `i` uses stream
/// `(seed, i)`.
pub struct MotionGenerator {
    source: Source,
    seed: u64,
    dt: f64,
    max_attempts: u32,
}

/// Descriptors and sampling flags of one synthetic motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionMeta {
    pub id: usize,
    pub params: GroundMotionParams,
    /// Infeasible draws rejected before this one.
    pub rejected: u32,
    pub frequency_clipped: bool,
}

pub struct GeneratedMotion {
    pub meta: MotionMeta,
    pub accelerogram: Accelerogram,
}

impl MotionGenerator {
    pub fn from_config(cfg: &RunConfig) -> CliResult<Self> {
        let gm = &cfg.ground_motion;
        let source = match &gm.fixed {
            Some(f) => {
                let p = f.to_params();
                p.validate()?;
                let c = solve_modulator(p.arias_intensity, p.effective_duration, p.t_mid)?;
                Source::Fixed(p, c)
            }
            None => Source::Sampled(Box::new(gm.distributions()?.compile()?)),
        };
        Ok(Self {
            source,
            seed: cfg.seed,
            dt: cfg.dt,
            max_attempts: gm.max_attempts(),
        })
    }

    pub fn motion(&self, id: usize) -> CliResult<GeneratedMotion> {
        let stream = RandomStream::new(self.seed, id as u64);
        let (params, coeffs, rejected) = match &self.source {
            Source::Sampled(s) => {
                let d = draw_feasible(s, &stream, self.max_attempts)?;
                (d.params, d.modulator, d.rejected)
            }
            Source::Fixed(p, c) => (*p, *c, 0),
        };
        let m = synthesize_with(&params, &coeffs, &stream, self.dt)?;
        Ok(GeneratedMotion {
            meta: MotionMeta {
                id,
                params,
                rejected,
                frequency_clipped: m.frequency_clipped,
            },
            accelerogram: m.accelerogram,
        })
    }
}

/// Structural model plus the oscillator used for spectral IMs.
pub struct Analysis {
    pub model: ShearFrameModel,
    /// Fundamental period, the spectral period.
    pub period: f64,
    pub sa_damping: f64,
}

impl Analysis {
    pub fn from_config(cfg: &RunConfig) -> CliResult<Self> {
        let model = cfg.structure.model()?;
        let period = modal_analysis(&model)?.periods[0];
        Ok(Self {
            model,
            period,
            sa_damping: cfg.analysis.sa_damping,
        })
    }

    pub fn run(&self, id: usize, acc: &Accelerogram) -> CliResult<DemandRecord> {
        let im = IMRecord::compute(acc, self.period, self.sa_damping)?;
        let resp = integrate(&self.model, acc)?;
        let delta = max_interstorey_drift(&resp, self.model.heights());
        Ok(DemandRecord::new(id, im, delta)?)
    }
}

pub fn motion_file_name(id: usize) -> String {
    format!("motion_{id:05}.txt")
}

fn summary_row(m: &MotionMeta, im: &IMRecord) -> Vec<String> {
    let p = &m.params;
    let tau = std::f64::consts::TAU;
    vec![
        m.id.to_string(),
        num(p.arias_intensity),
        num(p.effective_duration),
        num(p.t_mid),
        num(p.omega_mid / tau),
        num(p.omega_slope / tau),
        num(p.bandwidth_zeta),
        m.rejected.to_string(),
        u8::from(m.frequency_clipped).to_string(),
        num(im.arias),
        num(im.d595),
        num(im.t_mid_emp),
    ]
}

pub fn record_row(r: &DemandRecord) -> Vec<String> {
    vec![
        r.motion_id.to_string(),
        num(r.im.pga),
        num(r.im.sa),
        num(r.im.psa),
        num(r.im.arias),
        num(r.im.d595),
        num(r.delta),
    ]
}

/// Energy descriptors only, without the spectral oscillator.
fn energy_descriptors(acc: &Accelerogram) -> CliResult<IMRecord> {
    use seisfrag::intensity::{arias_intensity, d595, pga, t_alpha};
    let arias = arias_intensity(acc);
    let (d, t) = if arias > 0.0 {
        (d595(acc)?, t_alpha(acc, 0.45)?)
    } else {
        (0.0, 0.0)
    };
    Ok(IMRecord {
        pga: pga(acc),
        sa: f64::NAN,
        psa: f64::NAN,
        arias,
        d595: d,
        t_mid_emp: t,
    })
}

fn note_motion(manifest: &mut RunManifest, m: &MotionMeta) {
    if m.rejected > 0 {
        manifest.warn(format!(
            "motion {}: {} infeasible descriptor draw(s) redrawn",
            m.id, m.rejected
        ));
        manifest.count("rejected_draws", m.rejected as usize);
    }
    if m.frequency_clipped {
        manifest.warn(format!(
            "motion {}: filter frequency clipped at its lower bound",
            m.id
        ));
        manifest.count("frequency_clipped", 1);
    }
}

/// Writes the motions and the descriptor summary.
pub fn generate(ctx: &mut Context) -> CliResult<()> {
    let gen = MotionGenerator::from_config(&ctx.cfg)?;
    let n = ctx.cfg.motions;
    let out = ctx.out.clone();
    let results: Vec<CliResult<(MotionMeta, IMRecord)>> = ctx.manifest.time("generate", |_| {
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let m = gen.motion(i)?;
                let im = energy_descriptors(&m.accelerogram)?;
                let path = out.join("motions").join(motion_file_name(i));
                write_motion(&path, &m.accelerogram)?;
                Ok((m.meta, im))
            })
            .collect())
    })?;
    let mut rows = Vec::with_capacity(n);
    for r in results {
        let (m, im) = r?;
        note_motion(&mut ctx.manifest, &m);
        ctx.manifest
            .record_output(&out, &out.join("motions").join(motion_file_name(m.id)))?;
        rows.push(summary_row(&m, &im));
    }
    ctx.manifest.count("motions", rows.len());
    ctx.emit_csv("gm_summary.csv", &SUMMARY_COLUMNS, &rows)?;
    Ok(())
}

fn write_motion(path: &Path, acc: &Accelerogram) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, acc.to_text()).map_err(CliError::io(path))
}

/// Reads a motion file in the native format or as two columns.
pub fn ingest_recorded(path: &Path, units: Option<AccelUnit>) -> CliResult<Accelerogram> {
    Ok(Accelerogram::read(path, units)?)
}

/// Motion files in a directory, sorted by name.
pub fn motion_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no motion files",
            dir.display()
        )));
    }
    Ok(files)
}

/// Motion id from a `motion_NNNNN` file stem, else the position in the list.
fn motion_id(path: &Path, index: usize) -> usize {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("motion_"))
        .and_then(|s| s.parse().ok())
        .unwrap_or(index)
}

/// Outcome of analysing a set of motions.
pub struct SimulateOutcome {
    pub records: Vec<DemandRecord>,
    pub failures: Vec<(usize, String, String)>,
}

/// Runs the structural analysis on motion files.
pub fn simulate(ctx: &mut Context, files: &[PathBuf]) -> CliResult<SimulateOutcome> {
    let analysis = Analysis::from_config(&ctx.cfg)?;
    let units = ctx.units;
    let results: Vec<(usize, String, CliResult<DemandRecord>)> =
        ctx.manifest.time("simulate", |_| {
            Ok(files
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let id = motion_id(p, i);
                    let r = ingest_recorded(p, units).and_then(|acc| analysis.run(id, &acc));
                    (id, p.display().to_string(), r)
                })
                .collect())
        })?;
    let mut outcome = SimulateOutcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for (id, src, r) in results {
        match r {
            Ok(rec) => outcome.records.push(rec),
            Err(e) => outcome.failures.push((id, src, e.to_string())),
        }
    }
    write_records(ctx, &outcome)?;
    Ok(outcome)
}

fn write_records(ctx: &mut Context, outcome: &SimulateOutcome) -> CliResult<()> {
    for (id, src, why) in &outcome.failures {
        ctx.manifest
            .warn(format!("motion {id} ({src}) excluded: {why}"));
    }
    ctx.manifest.count("records", outcome.records.len());
    ctx.manifest
        .count("failed_analyses", outcome.failures.len());
    let rows: Vec<Vec<String>> = outcome.records.iter().map(record_row).collect();
    ctx.emit_csv("demand_records.csv", &RECORD_COLUMNS, &rows)?;
    let fails: Vec<Vec<String>> = outcome
        .failures
        .iter()
        .map(|(id, src, why)| vec![id.to_string(), src.clone(), why.clone()])
        .collect();
    ctx.emit_csv("failed_analyses.csv", &FAILURE_COLUMNS, &fails)?;
    if outcome.records.is_empty() {
        return Err(CliError::Data("every structural analysis failed".into()));
    }
    Ok(())
}

/// Generation and analysis in one pass, without re-reading motion files.
pub fn generate_and_simulate(ctx: &mut Context) -> CliResult<SimulateOutcome> {
    let gen = MotionGenerator::from_config(&ctx.cfg)?;
    let analysis = Analysis::from_config(&ctx.cfg)?;
    let write = ctx.cfg.ground_motion.write_motions();
    let n = ctx.cfg.motions;
    let out = ctx.out.clone();
    type Item = (MotionMeta, CliResult<DemandRecord>);
    let results: Vec<CliResult<Item>> = ctx.manifest.time("generate+simulate", |_| {
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let m = gen.motion(i)?;
                if write {
                    write_motion(
                        &out.join("motions").join(motion_file_name(i)),
                        &m.accelerogram,
                    )?;
                }
                Ok((m.meta, analysis.run(i, &m.accelerogram)))
            })
            .collect())
    })?;
    let mut rows = Vec::with_capacity(n);
    let mut outcome = SimulateOutcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        let (m, rec) = r?;
        note_motion(&mut ctx.manifest, &m);
        if write {
            ctx.manifest
                .record_output(&out, &out.join("motions").join(motion_file_name(m.id)))?;
        }
        match rec {
            Ok(rec) => {
                rows.push(summary_row(&m, &rec.im));
                outcome.records.push(rec);
            }
            Err(e) => {
                let nan = IMRecord {
                    pga: f64::NAN,
                    sa: f64::NAN,
                    psa: f64::NAN,
                    arias: f64::NAN,
                    d595: f64::NAN,
                    t_mid_emp: f64::NAN,
                };
                rows.push(summary_row(&m, &nan));
                outcome
                    .failures
                    .push((m.id, "synthetic".into(), e.to_string()));
            }
        }
    }
    ctx.manifest.count("motions", rows.len());
    ctx.emit_csv("gm_summary.csv", &SUMMARY_COLUMNS, &rows)?;
    write_records(ctx, &outcome)?;
    Ok(outcome)
}

/// Parses a demand-records CSV written by `simulate`.
pub fn read_records(path: &Path) -> CliResult<Vec<DemandRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    let header = rdr.headers().map_err(CliError::csv(path))?.clone();
    if header.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(CliError::Data(format!(
            "{}: expected columns {}",
            path.display(),
            RECORD_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(CliError::csv(path))?;
        let bad =
            |what: &str| CliError::Data(format!("{} row {}: bad {what}", path.display(), line + 2));
        let f = |k: usize| row[k].parse::<f64>().map_err(|_| bad(RECORD_COLUMNS[k]));
        let id = row[0].parse::<usize>().map_err(|_| bad("motion_id"))?;
        let im = IMRecord {
            pga: f(1)?,
            sa: f(2)?,
            psa: f(3)?,
            arias: f(4)?,
            d595: f(5)?,
            t_mid_emp: f64::NAN,
        };
        out.push(DemandRecord::new(id, im, f(6)?)?);
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("{}: no records", path.display())));
    }
    Ok(out)
}

/// Tag used in file names: `0.007` → `0.007`, `1e-3` → `0.001`.
pub fn threshold_tag(t: f64) -> String {
    let s = format!("{t:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Records with a positive IM, as `(IM, Δ)` points.
fn usable_points(records: &[DemandRecord], kind: ImKind) -> Vec<DemandPoint> {
    demand_points(records, kind)
        .into_iter()
        .filter(|p| p.im > 0.0 && p.im.is_finite())
        .collect()
}

/// Kernel bandwidths for one IM; LSCV falls back to normal reference.
fn kde_estimator(
    cfg: &RunConfig,
    points: &[DemandPoint],
    warnings: &mut Vec<String>,
    kind: ImKind,
) -> CliResult<Estimator> {
    let log_scale = cfg.fit.log_scale;
    let samples = transform(points, log_scale)?;
    let h = match cfg.fit.bandwidth {
        BandwidthMode::NormalReference => bandwidth_normal_reference_2d(&samples)?,
        BandwidthMode::Lscv => {
            let r = bandwidth_lscv_2d(&samples)?;
            if r.fell_back {
                warnings.push(format!("kde {kind}: cross-validation hit the singular boundary, normal-reference bandwidth used"));
            }
            r.bandwidth
        }
    };
    Ok(Estimator::Kde {
        bandwidth: KdeBandwidth::Fixed {
            h_im: Bandwidth1D::new(h.h22.sqrt())?,
            h,
        },
        log_scale,
    })
}

/// One fitted combination of estimator, IM and threshold.
pub struct FitEntry {
    pub method: String,
    pub im: ImKind,
    pub threshold: f64,
    pub curve: Result<FragilityCurve, String>,
}

fn parameter_row(
    method: &str,
    kind: ImKind,
    t: f64,
    points: &[DemandPoint],
    warnings: &mut Vec<String>,
) -> Vec<String> {
    let mut row = vec![String::new(); PARAMETER_COLUMNS.len()];
    row[0] = method.into();
    row[1] = kind.name().into();
    row[2] = num(t);
    row[15] = "ok".into();
    let fail = |row: &mut Vec<String>, e: String| {
        row[15] = "failed".into();
        row[16] = e;
    };
    match method {
        "mle" => match fit_mle(points, t, kind) {
            Ok(f) => {
                row[3] = num(f.curve.alpha);
                row[4] = num(f.curve.beta);
                row[13] = num(f.log_likelihood);
                row[14] = points.len().to_string();
                if !f.warnings.is_empty() {
                    row[15] = "warning".into();
                    row[16] = f.warnings.join("; ");
                    for w in &f.warnings {
                        warnings.push(format!("mle {kind} {t}: {w}"));
                    }
                }
            }
            Err(e) => fail(&mut row, e.to_string()),
        },
        "lr" => match fit_linear_demand(points)
            .and_then(|f| lr_to_fragility(&f, t, kind).map(|c| (f, c)))
        {
            Ok((f, c)) => {
                row[3] = num(c.alpha);
                row[4] = num(c.beta);
                row[5] = num(f.slope);
                row[6] = num(f.intercept);
                row[7] = num(f.zeta_res);
                row[8] = num(f.r2);
                row[14] = f.n.to_string();
            }
            Err(e) => fail(&mut row, e.to_string()),
        },
        "segmented" => match fit_segmented(points) {
            Ok(f) => {
                row[5] = num(f.lower.slope);
                row[6] = num(f.lower.intercept);
                row[7] = num(f.lower.zeta_res);
                row[8] = num(f.lower.r2);
                row[9] = num(f.break_im);
                row[10] = num(f.upper.slope);
                row[11] = num(f.upper.intercept);
                row[12] = num(f.upper.zeta_res);
                row[14] = points.len().to_string();
                let flag = if f.fallback_linear {
                    Some("no admissible break point, single line used")
                } else if f.effectively_linear {
                    Some("break does not improve the single-line fit")
                } else {
                    None
                };
                if let Some(m) = flag {
                    row[15] = "warning".into();
                    row[16] = m.into();
                    warnings.push(format!("segmented {kind} {t}: {m}"));
                }
            }
            Err(e) => fail(&mut row, e.to_string()),
        },
        _ => {
            row[14] = points.len().to_string();
        }
    }
    row
}

/// Fits every configured estimator for every IM kind and threshold.
pub fn fit(ctx: &mut Context, records: &[DemandRecord]) -> CliResult<Vec<FitEntry>> {
    let cfg = ctx.cfg.clone();
    let kinds = cfg.analysis.kinds()?;
    let mut entries = Vec::new();
    let mut param_rows = Vec::new();
    let mut warnings = Vec::new();
    let t0 = std::time::Instant::now();
    for &kind in &kinds {
        let points = usable_points(records, kind);
        if points.len() < records.len() {
            warnings.push(format!(
                "{kind}: {} record(s) with non-positive IM left out",
                records.len() - points.len()
            ));
        }
        let grid = match default_grid(&points, cfg.analysis.grid_points) {
            Ok(g) => g,
            Err(e) => {
                warnings.push(format!("{kind}: no IM grid: {e}"));
                continue;
            }
        };
        let kde = if cfg.fit.methods.iter().any(|m| m == "kde") {
            Some(kde_estimator(&cfg, &points, &mut warnings, kind).map_err(|e| e.to_string()))
        } else {
            None
        };
        for &t in &cfg.analysis.thresholds {
            for method in &cfg.fit.methods {
                let est = match (method.as_str(), &kde) {
                    ("kde", Some(k)) => k.clone(),
                    _ => Ok(cfg.estimator(method)?),
                };
                let curve = est.and_then(|e| {
                    e.evaluate(&points, t, &grid, kind)
                        .map_err(|e| e.to_string())
                });
                param_rows.push(parameter_row(method, kind, t, &points, &mut warnings));
                match &curve {
                    Ok(c) => {
                        let undefined = c.probabilities.iter().filter(|p| p.is_none()).count();
                        if undefined > 0 {
                            ctx.manifest.count("undefined_grid_points", undefined);
                        }
                        let rows: Vec<Vec<String>> = (0..grid.len())
                            .map(|k| {
                                let mut r = vec![num(grid[k]), opt(c.probabilities[k])];
                                if let Some(s) = &c.support {
                                    r.push(s[k].to_string());
                                }
                                r
                            })
                            .collect();
                        let header: &[&str] = if c.support.is_some() {
                            &["im_g", "probability", "support_count"]
                        } else {
                            &["im_g", "probability"]
                        };
                        ctx.emit_csv(
                            &format!("curves/{method}_{kind}_{}.csv", threshold_tag(t)),
                            header,
                            &rows,
                        )?;
                    }
                    Err(e) => warnings.push(format!("{method} {kind} {t}: {e}")),
                }
                entries.push(FitEntry {
                    method: method.clone(),
                    im: kind,
                    threshold: t,
                    curve,
                });
            }
            if ctx.plot {
                let family: Vec<&FitEntry> = entries
                    .iter()
                    .filter(|e| e.im == kind && e.threshold == t && e.curve.is_ok())
                    .collect();
                if !family.is_empty() {
                    let series: Vec<Series> = family
                        .iter()
                        .map(|e| Series {
                            label: &e.method,
                            values: &e.curve.as_ref().expect("filtered").probabilities,
                        })
                        .collect();
                    let svg = fragility_chart(
                        &format!("Fragility, drift threshold {t}"),
                        &format!("{} (g)", kind.name().to_uppercase()),
                        &grid,
                        &series,
                        None,
                    );
                    ctx.emit_text(
                        &format!("plots/fragility_{kind}_{}.svg", threshold_tag(t)),
                        &svg,
                    )?;
                }
            }
        }
    }
    ctx.emit_csv("parameters.csv", &PARAMETER_COLUMNS, &param_rows)?;
    ctx.manifest.timings.push(crate::output::StageTiming {
        stage: "fit".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    for w in warnings {
        ctx.manifest.warn(w);
    }
    ctx.manifest.count(
        "fitted_curves",
        entries.iter().filter(|e| e.curve.is_ok()).count(),
    );
    if !entries.is_empty() && entries.iter().all(|e| e.curve.is_err()) {
        return Err(CliError::Data("no estimator produced a curve".into()));
    }
    Ok(entries)
}

/// Bootstrap ensembles for the configured estimators.
pub fn bootstrap(ctx: &mut Context, records: &[DemandRecord]) -> CliResult<()> {
    let cfg = ctx.cfg.clone();
    let kinds = cfg.analysis.kinds()?;
    let mut summary = Vec::new();
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    let t0 = std::time::Instant::now();
    let base = RandomStream::new(cfg.seed, 0).derive(BOOTSTRAP_DOMAIN);
    for &kind in &kinds {
        let points = usable_points(records, kind);
        let grid = default_grid(&points, cfg.analysis.grid_points)?;
        for &t in &cfg.analysis.thresholds {
            for method in &cfg.bootstrap.methods {
                let est = if method == "kde" && cfg.fit.bandwidth == BandwidthMode::Lscv {
                    // one cross-validated matrix for all replicates
                    kde_estimator(&cfg, &points, &mut warnings, kind)?
                } else {
                    cfg.estimator(method)?
                };
                let tag = format!("{method}_{kind}_{}", threshold_tag(t));
                let original = est.evaluate(&points, t, &grid, kind);
                let ens = match bootstrap_curves(
                    &points,
                    est,
                    t,
                    &grid,
                    kind,
                    cfg.bootstrap.replicates,
                    cfg.bootstrap.level,
                    base,
                ) {
                    Ok(e) => e,
                    Err(e) => {
                        errors.push(format!("bootstrap {tag}: {e}"));
                        continue;
                    }
                };
                if ens.failures() > 0 {
                    warnings.push(format!(
                        "bootstrap {tag}: {} of {} replicates failed",
                        ens.failures(),
                        ens.curves.len()
                    ));
                }
                let orig_probs: Vec<Option<f64>> = match &original {
                    Ok(c) => c.probabilities.clone(),
                    Err(e) => {
                        warnings.push(format!("bootstrap {tag}: original-data curve failed: {e}"));
                        vec![None; grid.len()]
                    }
                };
                let rows: Vec<Vec<String>> = (0..grid.len())
                    .map(|k| {
                        vec![
                            num(grid[k]),
                            opt(orig_probs[k]),
                            opt(ens.median[k]),
                            opt(ens.lower[k]),
                            opt(ens.upper[k]),
                            ens.valid_counts[k].to_string(),
                        ]
                    })
                    .collect();
                ctx.emit_csv(&format!("bootstrap/{tag}.csv"), &BOOTSTRAP_COLUMNS, &rows)?;
                let med_rows: Vec<Vec<String>> = ens
                    .curves
                    .iter()
                    .zip(&ens.median_ims)
                    .enumerate()
                    .map(|(r, (c, m))| {
                        let status = match (c, m) {
                            (Err(_), _) => "failed",
                            (Ok(_), None) => "missing",
                            (Ok(_), Some(_)) => "ok",
                        };
                        vec![r.to_string(), opt(*m), status.to_string()]
                    })
                    .collect();
                ctx.emit_csv(
                    &format!("bootstrap/median_im_{tag}.csv"),
                    &MEDIAN_IM_COLUMNS,
                    &med_rows,
                )?;
                let (logstd, valid) = match median_im_logstd(&ens.median_ims) {
                    Ok(s) => (Some(s.log_std), s.valid),
                    Err(e) => {
                        warnings.push(format!("bootstrap {tag}: {e}"));
                        (None, ens.median_ims.iter().flatten().count())
                    }
                };
                let orig_median = original.as_ref().ok().and_then(median_im);
                summary.push(vec![
                    method.clone(),
                    kind.name().to_string(),
                    num(t),
                    ens.curves.len().to_string(),
                    ens.failures().to_string(),
                    valid.to_string(),
                    opt(logstd),
                    opt(orig_median),
                ]);
                if ctx.plot {
                    let series = [
                        Series {
                            label: "original",
                            values: &orig_probs,
                        },
                        Series {
                            label: "bootstrap median",
                            values: &ens.median,
                        },
                    ];
                    let svg = fragility_chart(
                        &format!(
                            "{method}, drift threshold {t}, {:.0}% band",
                            100.0 * ens.level
                        ),
                        &format!("{} (g)", kind.name().to_uppercase()),
                        &grid,
                        &series,
                        Some(Band {
                            lower: &ens.lower,
                            upper: &ens.upper,
                        }),
                    );
                    ctx.emit_text(&format!("plots/bootstrap_{tag}.svg"), &svg)?;
                }
            }
        }
    }
    ctx.emit_csv(
        "bootstrap/summary.csv",
        &BOOTSTRAP_SUMMARY_COLUMNS,
        &summary,
    )?;
    ctx.manifest.timings.push(crate::output::StageTiming {
        stage: "bootstrap".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    for w in warnings.into_iter().chain(errors.iter().cloned()) {
        ctx.manifest.warn(w);
    }
    if summary.is_empty() && !errors.is_empty() {
        return Err(CliError::Numerical(errors.join("; ")));
    }
    Ok(())
}

/// Sub-stream domain of bootstrap resampling.
pub const BOOTSTRAP_DOMAIN: u64 = 0x626f_6f74;

/// All stages: generate, simulate, fit, bootstrap.
pub fn pipeline(ctx: &mut Context) -> CliResult<()> {
    let outcome = generate_and_simulate(ctx)?;
    fit(ctx, &outcome.records)?;
    bootstrap(ctx, &outcome.records)?;
    Ok(())
}
