//! Experiment configuration: TOML ingestion and validation.
//!
//! Every key carries its unit in its name. Unknown keys, type errors and
//! invariant violations are all collected before reporting.

// field names mirror the unit-suffixed config keys
#![allow(non_snake_case)]

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::dynamics::{EngineOptions, Port, RotationMode};
use crate::error::{Error, Result};
use crate::model::{default_resonance_floor, Coherence, DeviceParams, DEFAULT_MAX_DIM};
use crate::protocols::{InitLabel, Qubit, RamseyConfig, RamseyKind, Readout, ScanOptions};
use crate::units::{ghz, mhz, ns, to_mhz, us};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectroscopy,
    RamseyDirect,
    RamseyRefocused,
    Sweep,
    PertCompare,
    Qpt,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Spectroscopy,
        Experiment::RamseyDirect,
        Experiment::RamseyRefocused,
        Experiment::Sweep,
        Experiment::PertCompare,
        Experiment::Qpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectroscopy => "spectroscopy",
            Experiment::RamseyDirect => "ramsey-direct",
            Experiment::RamseyRefocused => "ramsey-refocused",
            Experiment::Sweep => "sweep",
            Experiment::PertCompare => "pert-compare",
            Experiment::Qpt => "qpt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Experiments that rely on the |12⟩/|03⟩ resonance.
    pub fn needs_map(self) -> bool {
        !matches!(self, Experiment::Spectroscopy)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A list of values or an inclusive linear range.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PortName {
    Q1,
    Q2,
    Both,
}

impl PortName {
    pub fn port(self) -> Port {
        match self {
            PortName::Q1 => Port::Q1,
            PortName::Q2 => Port::Q2,
            PortName::Both => Port::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GateChoice {
    /// Refocused gate tuned on the configured device and drive.
    Calibrated,
    /// Instantaneous (X⊗X)·exp(−iπ/4 Z⊗Z).
    Ideal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceSection {
    pub omega1_GHz: f64,
    pub omega2_GHz: f64,
    pub delta1_MHz: f64,
    pub delta2_MHz: f64,
    pub J_MHz: f64,
    pub d1: usize,
    pub d2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub T1_q1_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub T2_q1_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub T1_q2_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub T2_q2_us: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriveSection {
    pub omega_d_GHz: f64,
    pub Omega_MHz: f64,
    pub port: PortName,
    pub rise_ns: f64,
    pub rotation_length_ns: f64,
    pub rotation_mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RamseySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_ns: Option<Grid>,
    pub measured: PortName,
    pub final_flip: bool,
    pub open_system: bool,
    pub fit_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d_GHz: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Omega_MHz: Option<Grid>,
    pub kind: String,
    pub step_ns: f64,
    pub horizon_us: f64,
    pub min_label_overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectroscopySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_GHz: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Omega_MHz: Option<Grid>,
    pub pulse_ns: f64,
    pub port: PortName,
    pub window_MHz: f64,
    pub min_signal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PertCompareSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d_GHz: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub Omega_MHz: Option<Grid>,
    pub resonance_floor_MHz: f64,
    pub min_label_overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QptSection {
    pub gate: GateChoice,
    pub open_system: bool,
    pub leakage_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericsSection {
    pub tol: f64,
    pub max_steps: usize,
    pub lindblad_step_ns: f64,
    pub max_dim: usize,
    pub workers: usize,
    pub seed: u64,
    /// None means exact expectation values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub time_tol_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub device: DeviceSection,
    pub drive: DriveSection,
    pub ramsey: RamseySection,
    pub sweep: SweepSection,
    pub spectroscopy: SpectroscopySection,
    pub pert_compare: PertCompareSection,
    pub qpt: QptSection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
}

/// Key-by-key reader that remembers what it consumed.
struct Doc<'a> {
    root: &'a Table,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

const SECTIONS: [&str; 9] = ["device", "drive", "ramsey", "sweep", "spectroscopy", "pert_compare", "qpt", "numerics", "output"];

impl<'a> Doc<'a> {
    fn value(&mut self, sec: &str, key: &str) -> Option<&'a Value> {
        let path = format!("{sec}.{key}");
        self.used.insert(path);
        self.root.get(sec)?.as_table()?.get(key)
    }

    fn f64(&mut self, sec: &str, key: &str) -> Option<f64> {
        let v = self.value(sec, key)?;
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.errors.push(format!("{sec}.{key}: expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn f64_or(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.f64(sec, key).unwrap_or(default)
    }

    fn required(&mut self, sec: &str, key: &str) -> f64 {
        let present = self.root.get(sec).and_then(Value::as_table).is_some_and(|t| t.contains_key(key));
        match self.f64(sec, key) {
            Some(v) => v,
            None => {
                if !present {
                    self.errors.push(format!("{sec}.{key} is required"));
                }
                f64::NAN
            }
        }
    }

    fn uint(&mut self, sec: &str, key: &str, default: u64) -> u64 {
        match self.value(sec, key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(other) => {
                self.errors.push(format!("{sec}.{key}: expected a non-negative integer, found {}", describe(other)));
                default
            }
        }
    }

    fn boolean(&mut self, sec: &str, key: &str, default: bool) -> bool {
        match self.value(sec, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                self.errors.push(format!("{sec}.{key}: expected true or false, found {}", other.type_str()));
                default
            }
        }
    }

    fn string(&mut self, sec: &str, key: &str, default: &str) -> String {
        match self.value(sec, key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                self.errors.push(format!("{sec}.{key}: expected a string, found {}", other.type_str()));
                default.to_string()
            }
        }
    }

    fn choice<T: Copy>(&mut self, sec: &str, key: &str, default: T, options: &[(&str, T)]) -> T {
        let s = self.string(sec, key, "");
        if s.is_empty() && self.root.get(sec).and_then(|t| t.get(key)).is_none() {
            return default;
        }
        match options.iter().find(|(n, _)| *n == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.errors.push(format!("{sec}.{key}: {s:?} is not one of {}", names.join(", ")));
                default
            }
        }
    }

    fn grid(&mut self, sec: &str, key: &str) -> Option<Grid> {
        let v = self.value(sec, key)?;
        match v {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    match it {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.errors.push(format!("{sec}.{key}: grid entries must be numbers, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(Grid::List(out))
            }
            Value::Table(t) => {
                let mut bad = Vec::new();
                for k in t.keys() {
                    if !["start", "stop", "points"].contains(&k.as_str()) {
                        bad.push(format!("unknown key {sec}.{key}.{k}"));
                    }
                }
                let num = |k: &str| match t.get(k) {
                    Some(Value::Float(x)) => Some(*x),
                    Some(Value::Integer(i)) => Some(*i as f64),
                    _ => None,
                };
                let points = match t.get("points") {
                    Some(Value::Integer(i)) if *i >= 0 => Some(*i as usize),
                    _ => None,
                };
                match (num("start"), num("stop"), points) {
                    (Some(start), Some(stop), Some(points)) if bad.is_empty() => Some(Grid::Range { start, stop, points }),
                    _ => {
                        self.errors.extend(bad);
                        self.errors.push(format!(
                            "{sec}.{key}: range grids need numeric start and stop and a non-negative integer points"
                        ));
                        None
                    }
                }
            }
            other => {
                self.errors.push(format!("{sec}.{key}: expected a list or {{start, stop, points}}, found {}", other.type_str()));
                None
            }
        }
    }

    fn finish(mut self) -> Vec<String> {
        for (name, v) in self.root {
            if name == "experiment" {
                continue;
            }
            if !SECTIONS.contains(&name.as_str()) {
                self.errors.push(format!("unknown key {name}"));
                continue;
            }
            match v.as_table() {
                Some(t) => {
                    for k in t.keys() {
                        let path = format!("{name}.{k}");
                        if !self.used.contains(&path) {
                            self.errors.push(format!("unknown key {path}"));
                        }
                    }
                }
                None => self.errors.push(format!("{name} must be a table")),
            }
        }
        self.errors
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Integer(i) => i.to_string(),
        other => other.type_str().to_string(),
    }
}

const PORTS: [(&str, PortName); 3] = [("q1", PortName::Q1), ("q2", PortName::Q2), ("both", PortName::Both)];

impl ExperimentConfig {
    /// Parses and validates. All problems are reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![format!("TOML syntax: {}", e.message())]))?;
        let mut d = Doc { root: &root, used: BTreeSet::new(), errors: Vec::new() };
        let experiment = match root.get("experiment") {
            None => None,
            Some(Value::String(s)) => match Experiment::parse(s) {
                Some(e) => Some(e),
                None => {
                    let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                    d.errors.push(format!("experiment {s:?} is not one of {}", names.join(", ")));
                    None
                }
            },
            Some(other) => {
                d.errors.push(format!("experiment: expected a string, found {}", other.type_str()));
                None
            }
        };
        let device = DeviceSection {
            omega1_GHz: d.required("device", "omega1_GHz"),
            omega2_GHz: d.required("device", "omega2_GHz"),
            delta1_MHz: d.required("device", "delta1_MHz"),
            delta2_MHz: d.required("device", "delta2_MHz"),
            J_MHz: d.required("device", "J_MHz"),
            d1: d.uint("device", "d1", 3) as usize,
            d2: d.uint("device", "d2", 5) as usize,
            T1_q1_us: d.f64("device", "T1_q1_us"),
            T2_q1_us: d.f64("device", "T2_q1_us"),
            T1_q2_us: d.f64("device", "T1_q2_us"),
            T2_q2_us: d.f64("device", "T2_q2_us"),
        };
        let drive = DriveSection {
            omega_d_GHz: d.f64_or("drive", "omega_d_GHz", 5.43),
            Omega_MHz: d.f64_or("drive", "Omega_MHz", 15.0),
            port: d.choice("drive", "port", PortName::Q2, &PORTS),
            rise_ns: d.f64_or("drive", "rise_ns", 80.0),
            rotation_length_ns: d.f64_or("drive", "rotation_length_ns", 40.0),
            rotation_mode: d.string("drive", "rotation_mode", "ideal"),
        };
        let ramsey = RamseySection {
            dt_ns: d.grid("ramsey", "dt_ns"),
            measured: d.choice("ramsey", "measured", PortName::Q2, &PORTS[..2]),
            final_flip: d.boolean("ramsey", "final_flip", true),
            open_system: d.boolean("ramsey", "open_system", false),
            fit_threshold: d.f64_or("ramsey", "fit_threshold", crate::protocols::fit::DEFAULT_FIT_THRESHOLD),
        };
        let sweep = SweepSection {
            omega_d_GHz: d.grid("sweep", "omega_d_GHz"),
            Omega_MHz: d.grid("sweep", "Omega_MHz"),
            kind: d.string("sweep", "kind", "refocused"),
            step_ns: d.f64_or("sweep", "step_ns", 10.0),
            horizon_us: d.f64_or("sweep", "horizon_us", 5.0),
            min_label_overlap: d.f64_or("sweep", "min_label_overlap", 0.5),
        };
        let spectroscopy = SpectroscopySection {
            drive_GHz: d.grid("spectroscopy", "drive_GHz"),
            Omega_MHz: d.grid("spectroscopy", "Omega_MHz"),
            pulse_ns: d.f64_or("spectroscopy", "pulse_ns", 1000.0),
            port: d.choice("spectroscopy", "port", PortName::Both, &PORTS),
            window_MHz: d.f64_or("spectroscopy", "window_MHz", 30.0),
            min_signal: d.f64_or("spectroscopy", "min_signal", 0.2),
        };
        let pert_compare = PertCompareSection {
            omega_d_GHz: d.grid("pert_compare", "omega_d_GHz"),
            Omega_MHz: d.grid("pert_compare", "Omega_MHz"),
            resonance_floor_MHz: d.f64_or("pert_compare", "resonance_floor_MHz", to_mhz(default_resonance_floor())),
            min_label_overlap: d.f64_or("pert_compare", "min_label_overlap", 0.5),
        };
        let qpt = QptSection {
            gate: d.choice("qpt", "gate", GateChoice::Calibrated, &[("calibrated", GateChoice::Calibrated), ("ideal", GateChoice::Ideal)]),
            open_system: d.boolean("qpt", "open_system", true),
            leakage_threshold: d.f64_or("qpt", "leakage_threshold", crate::tomography::DEFAULT_LEAKAGE_THRESHOLD),
        };
        let shots = match d.value("numerics", "shots") {
            None => None,
            Some(Value::String(s)) if s == "inf" => None,
            Some(Value::Integer(i)) if *i > 0 => Some(*i as u64),
            Some(other) => {
                d.errors.push(format!("numerics.shots: expected a positive integer or \"inf\", found {}", describe(other)));
                None
            }
        };
        let numerics = NumericsSection {
            tol: d.f64_or("numerics", "tol", 1e-7),
            max_steps: d.uint("numerics", "max_steps", 200_000) as usize,
            lindblad_step_ns: d.f64_or("numerics", "lindblad_step_ns", 1.0),
            max_dim: d.uint("numerics", "max_dim", DEFAULT_MAX_DIM as u64) as usize,
            workers: d.uint("numerics", "workers", 1) as usize,
            seed: d.uint("numerics", "seed", 0),
            shots,
            time_tol_ns: d.f64_or("numerics", "time_tol_ns", 1e-3),
        };
        let output = OutputSection { dir: PathBuf::from(d.string("output", "dir", "out")) };
        let mut errors = d.finish();
        let cfg = ExperimentConfig { experiment, device, drive, ramsey, sweep, spectroscopy, pert_compare, qpt, numerics, output };
        errors.extend(cfg.issues());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn device_params(&self) -> DeviceParams {
        let d = &self.device;
        let coh = |t1: Option<f64>, t2: Option<f64>| match (t1, t2) {
            (Some(t1), Some(t2)) => Some(Coherence { t1: us(t1), t2: us(t2) }),
            _ => None,
        };
        DeviceParams {
            omega1: ghz(d.omega1_GHz),
            omega2: ghz(d.omega2_GHz),
            delta1: mhz(d.delta1_MHz),
            delta2: mhz(d.delta2_MHz),
            j: mhz(d.J_MHz),
            d1: d.d1,
            d2: d.d2,
            coherence_q1: coh(d.T1_q1_us, d.T2_q1_us),
            coherence_q2: coh(d.T1_q2_us, d.T2_q2_us),
        }
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions { tol: self.numerics.tol, max_steps: self.numerics.max_steps, lindblad_step: ns(self.numerics.lindblad_step_ns) }
    }

    pub fn rotation_mode(&self) -> RotationMode {
        if self.drive.rotation_mode == "resonant" {
            RotationMode::Resonant
        } else {
            RotationMode::Ideal
        }
    }

    pub fn ramsey_config(&self) -> RamseyConfig {
        RamseyConfig {
            port: self.drive.port.port(),
            rise: ns(self.drive.rise_ns),
            rotation_length: ns(self.drive.rotation_length_ns),
            rotation_mode: self.rotation_mode(),
            measured: if self.ramsey.measured == PortName::Q1 { Qubit::Q1 } else { Qubit::Q2 },
            final_flip: self.ramsey.final_flip,
            open_system: self.ramsey.open_system,
            fit_threshold: self.ramsey.fit_threshold,
            ..RamseyConfig::new(ghz(self.drive.omega_d_GHz), mhz(self.drive.Omega_MHz))
        }
    }

    pub fn sweep_kind(&self) -> RamseyKind {
        if self.sweep.kind == "direct" {
            RamseyKind::Direct
        } else {
            RamseyKind::Refocused
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions { step: ns(self.sweep.step_ns), horizon: us(self.sweep.horizon_us) }
    }

    pub fn readout(&self) -> Readout {
        match self.numerics.shots {
            None => Readout::exact(),
            Some(n) => Readout::shots(n, self.numerics.seed),
        }
    }

    pub fn inits(&self) -> [InitLabel; 2] {
        [InitLabel::ControlGround, InitLabel::ControlExcited]
    }

    /// Invariant violations of an already-parsed configuration.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let p = self.device_params();
        let dv = &self.device;
        if dv.omega1_GHz.is_nan() || dv.omega2_GHz.is_nan() || dv.delta1_MHz.is_nan() || dv.delta2_MHz.is_nan() || dv.J_MHz.is_nan() {
            // missing required keys are already reported
        } else {
            out.extend(p.issues().into_iter().map(|s| format!("device: {s}")));
        }
        for (q, t1, t2) in [("q1", dv.T1_q1_us, dv.T2_q1_us), ("q2", dv.T1_q2_us, dv.T2_q2_us)] {
            if t1.is_some() != t2.is_some() {
                out.push(format!("device: T1_{q}_us and T2_{q}_us must be given together"));
            }
        }
        if p.dim() > self.numerics.max_dim {
            out.push(format!("device: d1·d2 = {} exceeds numerics.max_dim = {}", p.dim(), self.numerics.max_dim));
        }
        if let Some(e) = self.experiment {
            if e.needs_map() {
                out.extend(p.map_issues().into_iter().map(|s| format!("device: {s} (experiment {e})")));
            }
        }
        let pos = |out: &mut Vec<String>, name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be positive"));
            }
        };
        pos(&mut out, "drive.omega_d_GHz", self.drive.omega_d_GHz);
        if !(self.drive.Omega_MHz.is_finite() && self.drive.Omega_MHz >= 0.0) {
            out.push("drive.Omega_MHz must be non-negative".into());
        }
        if !(self.drive.rise_ns.is_finite() && self.drive.rise_ns >= 0.0) {
            out.push("drive.rise_ns must be non-negative".into());
        }
        pos(&mut out, "drive.rotation_length_ns", self.drive.rotation_length_ns);
        if !["ideal", "resonant"].contains(&self.drive.rotation_mode.as_str()) {
            out.push(format!("drive.rotation_mode: {:?} is not one of ideal, resonant", self.drive.rotation_mode));
        }
        if !["direct", "refocused"].contains(&self.sweep.kind.as_str()) {
            out.push(format!("sweep.kind: {:?} is not one of direct, refocused", self.sweep.kind));
        }
        pos(&mut out, "sweep.step_ns", self.sweep.step_ns);
        pos(&mut out, "sweep.horizon_us", self.sweep.horizon_us);
        pos(&mut out, "spectroscopy.pulse_ns", self.spectroscopy.pulse_ns);
        pos(&mut out, "spectroscopy.window_MHz", self.spectroscopy.window_MHz);
        pos(&mut out, "numerics.tol", self.numerics.tol);
        pos(&mut out, "numerics.lindblad_step_ns", self.numerics.lindblad_step_ns);
        pos(&mut out, "numerics.time_tol_ns", self.numerics.time_tol_ns);
        if self.numerics.workers == 0 {
            out.push("numerics.workers must be at least 1".into());
        }
        if self.numerics.max_steps == 0 {
            out.push("numerics.max_steps must be at least 1".into());
        }
        for (name, v) in [
            ("sweep.min_label_overlap", self.sweep.min_label_overlap),
            ("pert_compare.min_label_overlap", self.pert_compare.min_label_overlap),
            ("qpt.leakage_threshold", self.qpt.leakage_threshold),
            ("spectroscopy.min_signal", self.spectroscopy.min_signal),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.pert_compare.resonance_floor_MHz >= 0.0) {
            out.push("pert_compare.resonance_floor_MHz must be non-negative".into());
        }
        if !(self.ramsey.fit_threshold > 0.0) {
            out.push("ramsey.fit_threshold must be positive".into());
        }
        let grid_checks: [(&str, &Option<Grid>, bool, bool); 7] = [
            ("ramsey.dt_ns", &self.ramsey.dt_ns, matches!(self.experiment, Some(Experiment::RamseyDirect | Experiment::RamseyRefocused)), true),
            ("sweep.omega_d_GHz", &self.sweep.omega_d_GHz, self.experiment == Some(Experiment::Sweep), false),
            ("sweep.Omega_MHz", &self.sweep.Omega_MHz, self.experiment == Some(Experiment::Sweep), true),
            ("spectroscopy.drive_GHz", &self.spectroscopy.drive_GHz, self.experiment == Some(Experiment::Spectroscopy), false),
            ("spectroscopy.Omega_MHz", &self.spectroscopy.Omega_MHz, self.experiment == Some(Experiment::Spectroscopy), true),
            ("pert_compare.omega_d_GHz", &self.pert_compare.omega_d_GHz, false, false),
            ("pert_compare.Omega_MHz", &self.pert_compare.Omega_MHz, self.experiment == Some(Experiment::PertCompare), true),
        ];
        for (name, grid, needed, zero_ok) in grid_checks {
            match grid {
                None if needed => out.push(format!("{name} is required for this experiment")),
                None => {}
                Some(g) => {
                    let v = g.values();
                    if v.is_empty() {
                        out.push(format!("{name} must not be empty"));
                    }
                    if v.len() > 1_000_000 {
                        out.push(format!("{name} has {} points; at most 1000000 are allowed", v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite() || *x < 0.0 || (!zero_ok && *x == 0.0)) {
                        out.push(format!("{name} values must be finite and {}", if zero_ok { "non-negative" } else { "positive" }));
                    }
                }
            }
        }
        out
    }

    /// Re-checks after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[device]
omega1_GHz = 5.166
omega2_GHz = 5.668
delta1_MHz = -220
delta2_MHz = -220
J_MHz = 9
"#;

    fn errors(text: &str) -> Vec<String> {
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.device.d2, 5);
        assert_eq!(c.device_params().coherence_q1, None);
        assert_eq!(c.readout(), Readout::exact());
    }

    #[test]
    fn all_problems_reported_together() {
        let text = format!("{MINIMAL}T1_q1_us = 2\nT2_q1_us = 6\nbogus = 1\n[drive]\nport = \"q3\"\n[numerics]\nworkers = 0\n");
        let e = errors(&text);
        assert!(e.iter().any(|s| s.contains("exceeds 2·T1")), "{e:?}");
        assert!(e.iter().any(|s| s.contains("unknown key device.bogus")), "{e:?}");
        assert!(e.iter().any(|s| s.contains("drive.port")), "{e:?}");
        assert!(e.iter().any(|s| s.contains("workers")), "{e:?}");
    }

    #[test]
    fn map_experiment_needs_d2_of_four() {
        let text = format!("experiment = \"ramsey-direct\"\n{MINIMAL}d2 = 3\n[ramsey]\ndt_ns = [0, 10]\n");
        let e = errors(&text);
        assert!(e.iter().any(|s| s.contains("|03⟩")), "{e:?}");
    }

    #[test]
    fn missing_required_keys() {
        let e = errors("[device]\nomega1_GHz = 5.0\n");
        assert!(e.iter().any(|s| s == "device.J_MHz is required"), "{e:?}");
        assert_eq!(e.iter().filter(|s| s.contains("required")).count(), 4);
    }

    #[test]
    fn grids_and_shots() {
        let text = format!("{MINIMAL}[sweep]\nomega_d_GHz = {{ start = 5.4, stop = 5.5, points = 3 }}\nOmega_MHz = [1, 2]\n[numerics]\nshots = 100\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let v = c.sweep.omega_d_GHz.unwrap().values();
        assert_eq!(v.len(), 3);
        assert!((v[1] - 5.45).abs() < 1e-12);
        assert_eq!(c.numerics.shots, Some(100));
        let e = errors(&format!("{MINIMAL}[numerics]\nshots = -3\n"));
        assert!(e[0].contains("shots"));
    }

    #[test]
    fn snapshot_reparses() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
