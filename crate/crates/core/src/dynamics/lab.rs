//! Lab-frame propagation without the rotating-wave approximation, kept as a
//! cross-check of the rotating-frame engine.
//!
//! The drive Ω s(t) cos(ω_d t + φ)(A + A†) is integrated in the frame
//! rotating at ω_d per excitation, where it splits into a static
//! co-rotating tone and a counter-rotating tone at −2ω_d. The frame change
//! is undone exactly at the end.

use super::engine::{integrate_with, Generator, Profile, Tone};
use super::pulse::{DrivePulse, Port};
use crate::error::Result;
use crate::linalg::{c, CMat, CVec, C64};
use crate::model::TwoTransmon;

/// Lab-frame propagator of H_static + Ω s(t) cos(ω_d t + φ)(A + A†) over
/// the pulse.
pub fn lab_frame_propagator(model: &TwoTransmon, pulse: &DrivePulse, tol: f64, max_steps: usize) -> Result<CMat> {
    pulse.validate()?;
    let a = match pulse.port {
        Port::Q1 => model.a1.clone(),
        Port::Q2 => model.a2.clone(),
        Port::Both => &model.a1 + &model.a2,
    };
    let ntot = &model.n1 + &model.n2;
    let wd = pulse.omega_d;
    let mut h0 = model.h_static.data.clone();
    h0 -= &ntot * c(wd, 0.0);
    let profile = Profile::Pulse { pulse: *pulse, offset: 0.0 };
    let tone = |phase: f64, detuning: f64| Tone {
        op: a.clone(),
        op_dag: a.adjoint(),
        amp: pulse.amplitude,
        phase,
        detuning,
        profile,
    };
    let gen = Generator { h0, tones: vec![tone(pulse.phase, 0.0), tone(-pulse.phase, -2.0 * wd)], t_abs0: 0.0 };
    let u = integrate_with(&gen, 0.0, pulse.duration, tol, max_steps, false)?.full;
    let mut out = u;
    for i in 0..out.nrows() {
        let z = C64::from_polar(1.0, -wd * ntot[(i, i)].re * pulse.duration);
        for j in 0..out.ncols() {
            out[(i, j)] *= z;
        }
    }
    Ok(out)
}

pub fn lab_frame_state(model: &TwoTransmon, pulse: &DrivePulse, psi0: &CVec, tol: f64, max_steps: usize) -> Result<CVec> {
    Ok(lab_frame_propagator(model, pulse, tol, max_steps)? * psi0)
}
