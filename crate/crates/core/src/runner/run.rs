//! Experiment dispatch and result persistence.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, GateChoice};
use crate::dynamics::{DressedOptions, Engine};
use crate::error::{Error, Result};
use crate::formats;
use crate::linalg::CMat;
use crate::model::{map_condition_report, TwoTransmon};
use crate::protocols::{
    calibrate_refocused, compare_zeta, extract_lines, ideal_refocused_target, rabi_spectroscopy, ramsey_scan, sweep_gate_time,
    CalibrationOptions, DivergenceCause, InitLabel, LineSearch, RamseyKind, SweepOptions,
};
use crate::tomography::{qpt_pipeline, GateSpec, ProjectionOptions, QptOptions};
use crate::units::{ghz, mhz, ns, to_ghz, to_mhz, to_ns};

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn code_version() -> String {
    format!("mapgate {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub code_version: String,
    pub experiment: String,
    /// Output files, relative to the output directory, in write order.
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub timings: Vec<Timing>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Files produced by one experiment, kept in memory until the run succeeds.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    warnings: Vec<String>,
    timings: Vec<Timing>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new(), warnings: Vec::new(), timings: Vec::new() }
    }

    fn file(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        Ok(out)
    }
}

/// Files listed by an earlier manifest in `dir`.
fn previous_outputs(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST_NAME);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|_| Error::Config(vec![format!("{} is not a readable manifest", path.display())]))?;
    Ok(table
        .get("files")
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default())
}

/// Removes the outputs of an earlier run. Anything else in the directory
/// is left alone and reported.
fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let old = previous_outputs(dir)?;
    for name in &old {
        let p = dir.join(name);
        if Path::new(name).components().count() == 1 && p.is_file() {
            fs::remove_file(p)?;
        }
    }
    let manifest = dir.join(MANIFEST_NAME);
    if manifest.exists() {
        fs::remove_file(manifest)?;
    }
    let mut foreign: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    foreign.sort();
    if !foreign.is_empty() {
        return Err(Error::Config(vec![format!(
            "output directory {} holds files not produced by an earlier run: {}",
            dir.display(),
            foreign.join(", ")
        )]));
    }
    Ok(())
}

/// Runs the configured experiment, writes its outputs and the manifest
/// into the output directory, and returns the manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let experiment = config
        .experiment
        .ok_or_else(|| Error::Config(vec!["no experiment selected".into()]))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.numerics.workers)
        .build()
        .map_err(|e| Error::Config(vec![format!("worker pool: {e}")]))?;
    let start = Instant::now();
    let mut out = pool.install(|| dispatch(config, experiment))?;
    out.timings.push(Timing { stage: "total".into(), seconds: start.elapsed().as_secs_f64() });
    let dir = &config.output.dir;
    prepare_output_dir(dir)?;
    let mut names = Vec::with_capacity(out.files.len());
    for (name, bytes) in &out.files {
        fs::write(dir.join(name), bytes)?;
        names.push(name.clone());
    }
    let manifest = RunManifest {
        code_version: code_version(),
        experiment: experiment.name().into(),
        files: names,
        warnings: out.warnings,
        timings: out.timings,
        config: config.clone(),
    };
    fs::write(dir.join(MANIFEST_NAME), manifest.to_toml())?;
    Ok(manifest)
}

fn dispatch(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Outputs> {
    let params = cfg.device_params();
    let model = TwoTransmon::with_max_dim(&params, cfg.numerics.max_dim)?;
    let engine = Engine::with_options(&model, cfg.engine_options());
    let mut out = Outputs::new();
    match experiment {
        Experiment::Spectroscopy => spectroscopy(cfg, &engine, &mut out)?,
        Experiment::RamseyDirect => ramsey(cfg, &engine, RamseyKind::Direct, &mut out)?,
        Experiment::RamseyRefocused => ramsey(cfg, &engine, RamseyKind::Refocused, &mut out)?,
        Experiment::Sweep => sweep(cfg, &engine, &mut out)?,
        Experiment::PertCompare => pert_compare(cfg, &model, &mut out)?,
        Experiment::Qpt => qpt(cfg, &engine, &mut out)?,
    }
    Ok(out)
}

fn grid(g: &Option<super::config::Grid>, default: &[f64]) -> Vec<f64> {
    g.as_ref().map_or_else(|| default.to_vec(), |g| g.values())
}

fn spectroscopy(cfg: &ExperimentConfig, engine: &Engine, out: &mut Outputs) -> Result<()> {
    let s = &cfg.spectroscopy;
    let freqs: Vec<f64> = grid(&s.drive_GHz, &[]).into_iter().map(ghz).collect();
    let amps: Vec<f64> = grid(&s.Omega_MHz, &[]).into_iter().map(mhz).collect();
    let map = out.time("spectroscopy", || rabi_spectroscopy(engine, &freqs, &amps, ns(s.pulse_ns), s.port.port()))?;
    let lines = extract_lines(&map, engine, &LineSearch { window: mhz(s.window_MHz), min_signal: s.min_signal });
    for l in &lines {
        if l.fitted.is_none() {
            out.warnings.push(format!(
                "no {}-photon line of {:?} found near {:.4} GHz",
                l.photons,
                l.qubit,
                to_ghz(l.predicted)
            ));
        }
    }
    out.file("spectroscopy.csv", |w| formats::write_spectroscopy_csv(w, &map))?;
    out.file("lines.csv", |w| formats::write_lines_csv(w, &lines))
}

fn init_file_label(i: InitLabel) -> &'static str {
    match i {
        InitLabel::ControlGround => "control_ground",
        InitLabel::ControlExcited => "control_excited",
    }
}

fn ramsey(cfg: &ExperimentConfig, engine: &Engine, kind: RamseyKind, out: &mut Outputs) -> Result<()> {
    let rc = cfg.ramsey_config();
    let dts: Vec<f64> = grid(&cfg.ramsey.dt_ns, &[]).into_iter().map(ns).collect();
    let inits = cfg.inits();
    let recs = out.time("ramsey", || ramsey_scan(engine, kind, &rc, &dts, &inits, &cfg.readout()))?;
    let mut summary = String::new();
    summary.push_str(&format!("ramsey {kind:?}\n"));
    for r in &recs {
        let name = format!("fringe_{}.csv", init_file_label(r.init));
        out.file(name, |w| formats::write_fringe_csv(w, r))?;
        summary.push_str(&format!("init {}\n", r.init_label()));
        summary.push_str(&format!("  phase_rate_MHz: {}\n", to_mhz(r.phase_rate())));
        match &r.fit {
            Some(f) => summary.push_str(&format!(
                "  fit: omega_rad_per_ns = {}, phase_rad = {}, contrast = {}, residual = {}, method = {:?}\n",
                f.omega,
                f.phase,
                f.contrast(),
                f.residual,
                f.method
            )),
            None => summary.push_str("  fit: none\n"),
        }
        if let Some(e) = &r.fit_error {
            summary.push_str(&format!("  fit_error: {e}\n"));
        }
        if r.fit_failed(rc.fit_threshold) {
            out.warnings.push(format!("fringe fit for {} failed or exceeds residual threshold", r.init_label()));
        }
    }
    if recs.len() == 2 {
        let cp = recs[1].phase_rate() - recs[0].phase_rate();
        summary.push_str(&format!("conditional_phase_rate_MHz: {}\n", to_mhz(cp)));
    }
    out.file("ramsey.txt", |w| {
        w.extend_from_slice(summary.as_bytes());
        Ok(())
    })
}

fn sweep(cfg: &ExperimentConfig, engine: &Engine, out: &mut Outputs) -> Result<()> {
    let rc = cfg.ramsey_config();
    let ws: Vec<f64> = grid(&cfg.sweep.omega_d_GHz, &[]).into_iter().map(ghz).collect();
    let amps: Vec<f64> = grid(&cfg.sweep.Omega_MHz, &[]).into_iter().map(mhz).collect();
    let opts = SweepOptions { kind: cfg.sweep_kind(), scan: cfg.scan_options(), min_label_overlap: cfg.sweep.min_label_overlap };
    let res = out.time("sweep", || sweep_gate_time(engine, &rc, &ws, &amps, &opts))?;
    for r in &res {
        let at = format!("ω_d = {:.4} GHz, Ω = {:.3} MHz", to_ghz(r.omega_d), to_mhz(r.amplitude));
        match &r.cause {
            Some(DivergenceCause::Leakage { label, overlap }) => {
                out.warnings.push(format!("{at}: diverged, {label} lost its label (overlap {overlap:.3})"))
            }
            Some(DivergenceCause::Horizon) => out.warnings.push(format!("{at}: diverged, no π crossing within the horizon")),
            None => {}
        }
    }
    out.file("sweep.csv", |w| formats::write_sweep_csv(w, &res))
}

fn pert_compare(cfg: &ExperimentConfig, model: &TwoTransmon, out: &mut Outputs) -> Result<()> {
    let closed = TwoTransmon::with_max_dim(&model.params.closed(), cfg.numerics.max_dim)?;
    let ws = grid(&cfg.pert_compare.omega_d_GHz, &[cfg.drive.omega_d_GHz]);
    let amps = grid(&cfg.pert_compare.Omega_MHz, &[]);
    let points: Vec<(f64, f64)> = ws.iter().flat_map(|&w| amps.iter().map(move |&a| (ghz(w), mhz(a)))).collect();
    let opts = DressedOptions {
        port: cfg.drive.port.port(),
        min_label_overlap: Some(cfg.pert_compare.min_label_overlap),
        ..DressedOptions::default()
    };
    let rows = out.time("pert-compare", || compare_zeta(&closed, &points, &opts, mhz(cfg.pert_compare.resonance_floor_MHz)))?;
    let report = map_condition_report(&closed.params)?;
    out.warnings.push(format!(
        "perturbation theory invalid between {:.4} and {:.4} GHz",
        to_ghz(report.window.0),
        to_ghz(report.window.1)
    ));
    for r in rows.iter().filter(|r| r.flagged) {
        out.warnings.push(format!(
            "ω_d = {:.4} GHz, Ω = {:.3} MHz flagged: {}",
            to_ghz(r.omega_d),
            to_mhz(r.amplitude),
            r.note.as_deref().unwrap_or("")
        ));
    }
    out.file("pert_compare.csv", |w| formats::write_pert_compare_csv(w, &rows))
}

fn qpt(cfg: &ExperimentConfig, engine: &Engine, out: &mut Outputs) -> Result<()> {
    let ideal = ideal_refocused_target();
    let mut header: Vec<(String, String)> = vec![("gate".into(), format!("{:?}", cfg.qpt.gate).to_lowercase())];
    let (spec, propagator): (GateSpec, CMat) = match cfg.qpt.gate {
        GateChoice::Ideal => (GateSpec::Unitary(ideal.clone()), ideal.clone()),
        GateChoice::Calibrated => {
            let closed_model = TwoTransmon::with_max_dim(&engine.model().params.closed(), cfg.numerics.max_dim)?;
            let closed = Engine::with_options(&closed_model, cfg.engine_options());
            let opts = CalibrationOptions { scan: cfg.scan_options(), time_tol: ns(cfg.numerics.time_tol_ns) };
            let rc = cfg.ramsey_config();
            let g = out.time("calibration", || calibrate_refocused(&closed, &rc, &opts))?;
            header.push(("gate_time_ns".into(), format!("{:.4}", to_ns(g.total_time))));
            header.push(("drive_pulse_ns".into(), format!("{:.4}", to_ns(g.half))));
            header.push(("ramsey_pulse_ns".into(), format!("{:.4}", to_ns(g.ramsey_half))));
            header.push(("virtual_z_rad".into(), format!("{:.6}, {:.6}", g.virtual_z.0, g.virtual_z.1)));
            header.push(("conditional_phase_error_rad".into(), format!("{:.3e}", g.conditional_phase_error)));
            header.push(("closed_leakage".into(), format!("{:.3e}", g.leakage)));
            let (u, _) = closed.propagate_unitary(&g.sequence)?;
            (GateSpec::Sequence(g.sequence), u)
        }
    };
    let noisy = cfg.qpt.open_system && engine.model().params.has_noise();
    header.push(("open_system".into(), noisy.to_string()));
    header.push(("shots".into(), cfg.numerics.shots.map_or("inf".into(), |n| n.to_string())));
    let opts = QptOptions {
        readout: cfg.readout(),
        open_system: cfg.qpt.open_system,
        leakage_threshold: cfg.qpt.leakage_threshold,
        projection: ProjectionOptions::default(),
    };
    let r = out.time("tomography", || qpt_pipeline(engine, &spec, &ideal, &opts))?;
    out.warnings.extend(r.warnings.iter().cloned());
    out.file("ptm_raw.csv", |w| formats::write_ptm_csv(w, &r.ptm_raw))?;
    out.file("ptm.csv", |w| formats::write_ptm_csv(w, &r.ptm))?;
    out.file("choi_raw.csv", |w| formats::write_complex_csv(w, &r.choi_raw))?;
    out.file("choi.csv", |w| formats::write_complex_csv(w, &r.choi))?;
    out.file("propagator.txt", |w| formats::write_propagator(w, &propagator))?;
    out.file("report.txt", |w| formats::write_qpt_report(w, &r, &header))
}
