//! Drive pulses, single-qubit rotations and pulse sequences.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::ns;

/// Subsystem a drive couples to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Port {
    Q1,
    Q2,
    /// Bus-like drive coupling to both transmons with equal strength.
    Both,
}

/// Pulse envelope shape. Amplitudes are scaled by the pulse's peak Ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    /// Cosine rise and fall of the given length around a flat top.
    FlatTop { rise: f64 },
    Square,
    /// Gaussian centred in the window, truncated at its edges.
    Gaussian { sigma: f64 },
}

pub fn default_rise() -> f64 {
    ns(10.0)
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope::FlatTop { rise: default_rise() }
    }
}

/// Cosine ramp from 0 to 1 over `rise`.
pub fn ramp_up(t: f64, rise: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= rise {
        1.0
    } else {
        0.5 * (1.0 - (PI * t / rise).cos())
    }
}

/// A drive applied in the rotating-wave approximation:
/// Ω(t)/2 · (e^{iφ} A + e^{−iφ} A†) in the frame rotating at ω_d, with A
/// the lowering operator(s) of the port. Ω is the resonant 0↔1 Rabi rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrivePulse {
    pub port: Port,
    pub omega_d: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub duration: f64,
    pub envelope: Envelope,
}

impl DrivePulse {
    pub fn flat_top(port: Port, omega_d: f64, amplitude: f64, duration: f64, rise: f64) -> Self {
        DrivePulse {
            port,
            omega_d,
            amplitude,
            phase: 0.0,
            duration,
            envelope: Envelope::FlatTop { rise },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPulse(m));
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return bad(format!("amplitude {} must be finite and non-negative", self.amplitude));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration {} must be finite and non-negative", self.duration));
        }
        if !self.omega_d.is_finite() || !self.phase.is_finite() {
            return bad("drive frequency and phase must be finite".into());
        }
        match self.envelope {
            Envelope::FlatTop { rise } => {
                if !(rise.is_finite() && rise >= 0.0) {
                    return bad(format!("rise time {rise} must be non-negative"));
                }
                if self.duration < 2.0 * rise * (1.0 - 1e-12) {
                    return bad(format!(
                        "flat-top duration {:.3e} s is shorter than twice the rise time {:.3e} s",
                        self.duration, rise
                    ));
                }
            }
            Envelope::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return bad(format!("gaussian width {sigma} must be positive"));
                }
            }
            Envelope::Square => {}
        }
        Ok(())
    }

    /// Envelope shape s(t) ∈ [0, 1] at time t from the pulse start.
    pub fn shape(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.envelope {
            Envelope::Square => 1.0,
            Envelope::FlatTop { rise } => ramp_up(t, rise).min(ramp_up(self.duration - t, rise)),
            Envelope::Gaussian { sigma } => {
                let x = (t - 0.5 * self.duration) / sigma;
                (-0.5 * x * x).exp()
            }
        }
    }

    /// ∫ s(t) dt over the pulse.
    pub fn shape_area(&self) -> f64 {
        match self.envelope {
            Envelope::Square => self.duration,
            Envelope::FlatTop { rise } => self.duration - rise,
            Envelope::Gaussian { .. } => {
                // composite Simpson
                let n = 2000;
                let h = self.duration / n as f64;
                let mut s = self.shape(0.0) + self.shape(self.duration);
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * self.shape(k as f64 * h);
                }
                s * h / 3.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// Drive phase that realises a rotation about this axis.
    pub fn drive_phase(self) -> f64 {
        match self {
            Axis::X => 0.0,
            Axis::Y => -0.5 * PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Q1,
    Q2,
    Both,
}

/// Single-qubit rotation exp(−iθ/2 σ_axis) on the target qubit(s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub axis: Axis,
    pub angle: f64,
    pub target: Target,
}

impl Rotation {
    pub fn x(angle: f64, target: Target) -> Self {
        Rotation { axis: Axis::X, angle, target }
    }

    pub fn y(angle: f64, target: Target) -> Self {
        Rotation { axis: Axis::Y, angle, target }
    }
}

/// How rotations are realised during propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RotationMode {
    /// Ideal qubit-subspace unitary applied at the centre of the gate slot.
    #[default]
    Ideal,
    /// Gaussian pulse resonant with the dressed qubit transition.
    Resonant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Drive(DrivePulse),
    Rotate(Rotation),
    Idle(f64),
    /// Zero-duration frame update exp(−i(θ₁n₁ + θ₂n₂)).
    VirtualZ { q1: f64, q2: f64 },
}

pub fn default_rotation_length() -> f64 {
    ns(40.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    pub rotation_length: f64,
    pub rotation_mode: RotationMode,
}

impl Default for PulseSequence {
    fn default() -> Self {
        PulseSequence {
            segments: Vec::new(),
            rotation_length: default_rotation_length(),
            rotation_mode: RotationMode::Ideal,
        }
    }
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rotations(rotation_length: f64, rotation_mode: RotationMode) -> Self {
        PulseSequence {
            segments: Vec::new(),
            rotation_length,
            rotation_mode,
        }
    }

    pub fn push(mut self, s: Segment) -> Self {
        self.segments.push(s);
        self
    }

    pub fn drive(self, p: DrivePulse) -> Self {
        self.push(Segment::Drive(p))
    }

    pub fn rotate(self, r: Rotation) -> Self {
        self.push(Segment::Rotate(r))
    }

    pub fn idle(self, t: f64) -> Self {
        self.push(Segment::Idle(t))
    }

    pub fn virtual_z(self, q1: f64, q2: f64) -> Self {
        self.push(Segment::VirtualZ { q1, q2 })
    }

    pub fn segment_duration(&self, s: &Segment) -> f64 {
        match s {
            Segment::Drive(p) => p.duration,
            Segment::Rotate(_) => self.rotation_length,
            Segment::Idle(t) => *t,
            Segment::VirtualZ { .. } => 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| self.segment_duration(s)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rotation_length.is_finite() && self.rotation_length >= 0.0) {
            return Err(Error::InvalidPulse("rotation length must be non-negative".into()));
        }
        if self.rotation_mode == RotationMode::Resonant
            && self.rotation_length <= 0.0
            && self.segments.iter().any(|s| matches!(s, Segment::Rotate(_)))
        {
            return Err(Error::InvalidPulse("resonant rotations need a positive gate length".into()));
        }
        for s in &self.segments {
            match s {
                Segment::Drive(p) => p.validate()?,
                Segment::Idle(t) if !(t.is_finite() && *t >= 0.0) => {
                    return Err(Error::InvalidPulse(format!("idle time {t} must be non-negative")));
                }
                Segment::Rotate(r) if !r.angle.is_finite() => {
                    return Err(Error::InvalidPulse("rotation angle must be finite".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_top_shape() {
        let p = DrivePulse::flat_top(Port::Q2, 1.0, 1.0, ns(100.0), ns(10.0));
        assert_eq!(p.shape(0.0), 0.0);
        assert!((p.shape(ns(5.0)) - 0.5).abs() < 1e-12);
        assert_eq!(p.shape(ns(50.0)), 1.0);
        assert!((p.shape(ns(95.0)) - 0.5).abs() < 1e-12);
        assert!(p.shape(ns(100.0)).abs() < 1e-12);
        assert!((p.shape_area() - ns(90.0)).abs() < 1e-20);
    }

    #[test]
    fn flat_top_too_short() {
        let p = DrivePulse::flat_top(Port::Q2, 1.0, 1.0, ns(15.0), ns(10.0));
        assert!(matches!(p.validate(), Err(Error::InvalidPulse(_))));
    }

    #[test]
    fn gaussian_area() {
        let p = DrivePulse {
            envelope: Envelope::Gaussian { sigma: ns(10.0) },
            ..DrivePulse::flat_top(Port::Q1, 1.0, 1.0, ns(200.0), 0.0)
        };
        let exact = ns(10.0) * (2.0 * PI).sqrt();
        assert!((p.shape_area() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn durations_add() {
        let seq = PulseSequence::new()
            .rotate(Rotation::x(PI / 2.0, Target::Q2))
            .idle(ns(30.0))
            .virtual_z(0.1, 0.2)
            .drive(DrivePulse::flat_top(Port::Q2, 1.0, 1.0, ns(100.0), ns(10.0)));
        assert!((seq.duration() - ns(170.0)).abs() < 1e-20);
    }
}
