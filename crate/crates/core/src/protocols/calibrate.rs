//! Tune-up of the refocused conditional-phase gate.
//!
//! The drive time comes from the first π crossing of the refocused Ramsey
//! conditional phase, refined by bisection. Residual single-qubit phases of
//! the gate are removed with a leading virtual Z.

use std::f64::consts::{FRAC_PI_4, PI};

use super::ramsey::{conditional_phase_at, RamseyConfig, RamseyKind};
use super::sweep::{scan_conditional_phase, ScanOptions};
use crate::dynamics::{DrivePulse, Engine, PulseSequence, Rotation, Target};
use crate::error::{Error, Result};
use crate::linalg::{wrap_angle, CMat};
use crate::model::Ket;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationOptions {
    pub scan: ScanOptions,
    /// Bisection stops once the drive-time bracket is below this (s).
    pub time_tol: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { scan: ScanOptions::default(), time_tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct CalibratedGate {
    pub config: RamseyConfig,
    /// Pulse length from the Ramsey π crossing (s).
    pub ramsey_half: f64,
    /// Length of each of the two drive pulses (s).
    pub half: f64,
    /// 2·half plus the refocusing rotation (s).
    pub total_time: f64,
    /// Virtual Z angles (Q1, Q2) applied before the gate.
    pub virtual_z: (f64, f64),
    /// VirtualZ · drive · X_π⊗X_π · drive.
    pub sequence: PulseSequence,
    /// Conditional phase of the closed-system gate minus π, wrapped.
    pub conditional_phase_error: f64,
    /// Largest population leaving the computational subspace from a
    /// computational input (closed system).
    pub leakage: f64,
}

/// Refocused gate body for drive pulses of length `half`.
pub fn refocused_gate(cfg: &RamseyConfig, half: f64, virtual_z: (f64, f64)) -> PulseSequence {
    let pulse = DrivePulse::flat_top(cfg.port, cfg.omega_d, cfg.amplitude, half, cfg.rise.min(0.5 * half));
    let mut seq = PulseSequence::with_rotations(cfg.rotation_length, cfg.rotation_mode);
    if virtual_z != (0.0, 0.0) {
        seq = seq.virtual_z(virtual_z.0, virtual_z.1);
    }
    seq.drive(pulse).rotate(Rotation::x(PI, Target::Both)).drive(pulse)
}

/// Computational 4×4 block in the order 00, 01, 10, 11.
pub fn computational_block(engine: &Engine, u: &CMat) -> CMat {
    let c = engine.model().basis.computational();
    CMat::from_fn(4, 4, |i, j| u[(c[i], c[j])])
}

/// Diagonal phases of (X⊗X)·U relative to (X⊗X)·exp(−iπ/4 Z⊗Z).
fn phase_errors(block: &CMat) -> [f64; 4] {
    let ideal = [-FRAC_PI_4, FRAC_PI_4, FRAC_PI_4, -FRAC_PI_4];
    // (X⊗X) maps 00↔11 and 01↔10
    let flip = [3, 2, 1, 0];
    let mut d = [0.0; 4];
    for a in 0..4 {
        d[a] = wrap_angle(block[(flip[a], a)].arg() - ideal[a]);
    }
    d
}

/// Virtual Z angles that null the single-qubit phases of a gate with the
/// given computational block, and the residual conditional-phase error.
pub fn virtual_z_correction(block: &CMat) -> ((f64, f64), f64) {
    let d = phase_errors(block);
    let a1 = wrap_angle(d[2] - d[0]);
    let b1 = wrap_angle(d[3] - d[1]);
    let a2 = wrap_angle(d[1] - d[0]);
    let b2 = wrap_angle(d[3] - d[2]);
    let alpha = a1 + 0.5 * wrap_angle(b1 - a1);
    let beta = a2 + 0.5 * wrap_angle(b2 - a2);
    ((alpha, beta), wrap_angle(d[3] - d[2] - d[1] + d[0]))
}

/// Finds the drive time of the refocused π conditional phase and the
/// virtual Z correction of the resulting gate.
pub fn calibrate_refocused(engine: &Engine, cfg: &RamseyConfig, opts: &CalibrationOptions) -> Result<CalibratedGate> {
    engine.model().params.validate_map()?;
    let closed_cfg = RamseyConfig { open_system: false, ..*cfg };
    let kind = RamseyKind::Refocused;
    let scan = scan_conditional_phase(engine, kind, &closed_cfg, &opts.scan)?;
    let Some(_) = scan.dt_zzpi else {
        return Err(Error::Fit(format!(
            "conditional phase reached only {:.3} rad within the {:.3e} s horizon",
            scan.last_phase(),
            opts.scan.horizon
        )));
    };
    let n = scan.curve.len();
    if n < 2 {
        return Err(Error::Fit("conditional phase already at π at the shortest full-ramp pulse".into()));
    }
    let (mut lo, _, mut plo) = scan.curve[n - 2];
    let mut hi = scan.curve[n - 1].0;
    let sign = scan.last_phase().signum();
    while hi - lo > opts.time_tol {
        let mid = 0.5 * (lo + hi);
        let w = conditional_phase_at(engine, kind, &closed_cfg, mid)?;
        let pm = plo + wrap_angle(w - plo);
        if sign * pm >= PI {
            hi = mid;
        } else {
            lo = mid;
            plo = pm;
        }
    }
    let ramsey_half = 0.5 * hi;
    // the Ramsey phase includes idle coupling during the analysis pulses;
    // the gate itself is tuned on its own conditional phase
    let cp_error = |half: f64| -> Result<f64> {
        let (u, _) = engine.propagate_unitary(&refocused_gate(&closed_cfg, half, (0.0, 0.0)))?;
        Ok(virtual_z_correction(&computational_block(engine, &u)).1)
    };
    let half = refine_half(ramsey_half, opts.time_tol, cp_error)?;
    let body = refocused_gate(&closed_cfg, half, (0.0, 0.0));
    let (u, _) = engine.propagate_unitary(&body)?;
    let (vz, _) = virtual_z_correction(&computational_block(engine, &u));
    let sequence = refocused_gate(&closed_cfg, half, vz);
    let (u, _) = engine.propagate_unitary(&sequence)?;
    let block = computational_block(engine, &u);
    let (_, cp_err) = virtual_z_correction(&block);
    let leakage = (0..4).map(|j| 1.0 - (0..4).map(|i| block[(i, j)].norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
    Ok(CalibratedGate {
        config: *cfg,
        ramsey_half,
        half,
        total_time: sequence.duration(),
        virtual_z: vz,
        sequence,
        conditional_phase_error: cp_err,
        leakage,
    })
}

/// Secant search for a zero of the wrapped conditional-phase error near
/// `start`, falling back to bisection once a sign change is bracketed.
fn refine_half(start: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut x0 = start;
    let mut f0 = f(x0)?;
    let mut x1 = start * 1.01;
    let mut f1 = f(x1)?;
    for _ in 0..60 {
        if f1.abs() < 1e-10 || (x1 - x0).abs() < tol {
            return Ok(x1);
        }
        if f0.signum() != f1.signum() && (f0 - f1).abs() > PI {
            // wrap discontinuity between the two points; shrink toward x1
            x0 = 0.5 * (x0 + x1);
            f0 = f(x0)?;
            continue;
        }
        let x2 = if f1 != f0 { x1 - f1 * (x1 - x0) / (f1 - f0) } else { x1 + tol };
        let x2 = x2.clamp(0.5 * start, 1.5 * start);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
    }
    Err(Error::Fit(format!("conditional phase error {f1:.3e} rad after refinement")))
}

/// Ideal target (X⊗X)·exp(−iπ/4 Z⊗Z) on the computational subspace.
pub fn ideal_refocused_target() -> CMat {
    let mut m = CMat::zeros(4, 4);
    let ph = [-FRAC_PI_4, FRAC_PI_4, FRAC_PI_4, -FRAC_PI_4];
    let flip = [3, 2, 1, 0];
    for a in 0..4 {
        m[(flip[a], a)] = crate::linalg::C64::from_polar(1.0, ph[a]);
    }
    m
}

/// Computational label order used by gate blocks.
pub const BLOCK_ORDER: [Ket; 4] = [Ket(0, 0), Ket(0, 1), Ket(1, 0), Ket(1, 1)];
