//! Gate-time extraction: the first time the conditional phase reaches π,
//! swept over drive frequency and amplitude.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::fit::first_crossing;
use super::ramsey::{conditional_phase_at, RamseyConfig, RamseyKind};
use crate::dynamics::{driven_dressed_with, DressedOptions, Engine};
use crate::error::{Error, Result};
use crate::linalg::wrap_angle;
use crate::units::{ns, to_ghz, to_mhz, us};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// Increment of the total drive time (s).
    pub step: f64,
    /// Longest total sequence time searched (s).
    pub horizon: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { step: ns(10.0), horizon: us(5.0) }
    }
}

/// Conditional phase against total sequence time up to the first π
/// crossing.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseScan {
    /// (total drive time, total sequence time, unwrapped conditional phase).
    pub curve: Vec<(f64, f64, f64)>,
    /// Total drive time at the crossing.
    pub dt_zzpi: Option<f64>,
    /// Total sequence time at the crossing.
    pub t_zzpi: Option<f64>,
}

impl PhaseScan {
    pub fn last_phase(&self) -> f64 {
        self.curve.last().map_or(0.0, |c| c.2)
    }
}

/// Largest amplitude increment when fixing the phase branch of the first
/// scan point (rad/s).
pub const ANCHOR_AMPLITUDE_STEP: f64 = 2.0 * PI * 5e6;

/// Steps the drive time from the shortest full-ramp pulse until |Δφ| ≥ π or the horizon is passed.
/// The unwrapping assumes the phase moves by less than π per step.
pub fn scan_conditional_phase(engine: &Engine, kind: RamseyKind, cfg: &RamseyConfig, opts: &ScanOptions) -> Result<PhaseScan> {
    if !(opts.step > 0.0 && opts.horizon > 0.0) {
        return Err(Error::InvalidParams(vec!["scan step and horizon must be positive".into()]));
    }
    // the search starts at the shortest pulse with full ramps; shorter
    // pulses are non-adiabatic and their phase excursions are not gates
    let pulses = match kind {
        RamseyKind::Direct => 1.0,
        RamseyKind::Refocused => 2.0,
    };
    let full_ramps = 2.0 * pulses * cfg.rise;
    let mut curve: Vec<(f64, f64, f64)> = Vec::new();
    let mut dt = full_ramps;
    // branch of the first point: continuation in amplitude from zero drive
    let steps = (cfg.amplitude.abs() / ANCHOR_AMPLITUDE_STEP).ceil().max(1.0) as usize;
    let mut anchor = None;
    for k in 0..steps {
        let c = RamseyConfig { amplitude: cfg.amplitude * k as f64 / steps as f64, ..*cfg };
        let w = conditional_phase_at(engine, kind, &c, dt)?;
        anchor = Some(anchor.map_or(w, |p: f64| p + wrap_angle(w - p)));
    }
    loop {
        let total = cfg.total_time(kind, dt);
        if total > opts.horizon {
            return Ok(PhaseScan { curve, dt_zzpi: None, t_zzpi: None });
        }
        let w = conditional_phase_at(engine, kind, cfg, dt)?;
        let phase = match curve.last().map(|c| c.2).or(anchor) {
            Some(prev) => prev + wrap_angle(w - prev),
            None => w,
        };
        curve.push((dt, total, phase));
        if phase.abs() >= PI {
            let dts: Vec<f64> = curve.iter().map(|c| c.0).collect();
            let phases: Vec<f64> = curve.iter().map(|c| c.2).collect();
            let dt_x = first_crossing(&dts, &phases, PI);
            return Ok(PhaseScan { curve, dt_zzpi: dt_x, t_zzpi: dt_x.map(|d| cfg.total_time(kind, d)) });
        }
        dt += opts.step;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DivergenceCause {
    /// A computational state lost its identity under the drive.
    Leakage { label: String, overlap: f64 },
    /// No π crossing before the horizon.
    Horizon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateTimeResult {
    pub omega_d: f64,
    pub amplitude: f64,
    /// Total sequence time at the first π crossing (s).
    pub t_zzpi: Option<f64>,
    pub diverged: bool,
    pub cause: Option<DivergenceCause>,
    /// (total sequence time, conditional phase) samples.
    pub phase_curve: Vec<(f64, f64)>,
}

impl GateTimeResult {
    pub fn phase_diff(&self) -> f64 {
        self.phase_curve.last().map_or(0.0, |c| c.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub kind: RamseyKind,
    pub scan: ScanOptions,
    /// Overlap of a driven computational state with its undriven
    /// counterpart at or below which the point is flagged as leaked.
    pub min_label_overlap: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { kind: RamseyKind::Refocused, scan: ScanOptions::default(), min_label_overlap: 0.5 }
    }
}

/// Gate time at one (ω_d, Ω) point.
pub fn gate_time_point(engine: &Engine, base: &RamseyConfig, omega_d: f64, amplitude: f64, opts: &SweepOptions) -> Result<GateTimeResult> {
    let cfg = RamseyConfig { omega_d, amplitude, ..*base };
    let dressed = DressedOptions { port: cfg.port, min_label_overlap: Some(opts.min_label_overlap), ..DressedOptions::default() };
    match driven_dressed_with(engine.model(), omega_d, amplitude, &dressed) {
        Err(Error::LeakageRegion { label, overlap, .. }) => {
            return Ok(GateTimeResult {
                omega_d,
                amplitude,
                t_zzpi: None,
                diverged: true,
                cause: Some(DivergenceCause::Leakage { label, overlap }),
                phase_curve: Vec::new(),
            })
        }
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let scan = scan_conditional_phase(engine, opts.kind, &cfg, &opts.scan)?;
    let phase_curve = scan.curve.iter().map(|c| (c.1, c.2)).collect();
    Ok(GateTimeResult {
        omega_d,
        amplitude,
        t_zzpi: scan.t_zzpi,
        diverged: scan.t_zzpi.is_none(),
        cause: scan.t_zzpi.is_none().then_some(DivergenceCause::Horizon),
        phase_curve,
    })
}

/// Gate time over the product grid, ω_d varying fastest within each Ω.
pub fn sweep_gate_time(engine: &Engine, base: &RamseyConfig, omega_d_grid: &[f64], amp_grid: &[f64], opts: &SweepOptions) -> Result<Vec<GateTimeResult>> {
    if omega_d_grid.is_empty() || amp_grid.is_empty() {
        return Err(Error::InvalidParams(vec!["sweep grids must be nonempty".into()]));
    }
    engine.model().params.validate_map()?;
    let points: Vec<(f64, f64)> = amp_grid.iter().flat_map(|&a| omega_d_grid.iter().map(move |&w| (w, a))).collect();
    points
        .par_iter()
        .map(|&(w, a)| {
            gate_time_point(engine, base, w, a, opts)
                .map_err(|e| e.at(format!("ω_d = {:.4} GHz, Ω = {:.3} MHz", to_ghz(w), to_mhz(a))))
        })
        .collect()
}

/// True when the flagged points of `flags` form one contiguous run.
pub fn is_contiguous(flags: &[bool]) -> bool {
    let first = flags.iter().position(|&f| f);
    let last = flags.iter().rposition(|&f| f);
    match (first, last) {
        (Some(a), Some(b)) => flags[a..=b].iter().all(|&f| f),
        _ => true,
    }
}
