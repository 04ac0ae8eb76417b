//! Ramsey tune-up of the conditional phase: the direct sequence
//! X_π/2 · drive(Δt) · X_π/2 and the refocused sequence
//! X_π/2 · drive(Δt/2) · X_π ⊗ X_π · drive(Δt/2) · Y_π/2 [· X_π ⊗ X_π].
//!
//! Besides the fringe itself every point is also measured with the other
//! analysis quadrature, which gives the Bloch phase of the measured qubit
//! without fitting.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::fit::{fit_cosine, linear_regression, unwrap, CosineFit, DEFAULT_FIT_THRESHOLD};
use super::readout::Readout;
use crate::dynamics::{
    default_rise, default_rotation_length, Axis, DrivePulse, Engine, PopulationSample, Port, PulseSequence, Rotation,
    RotationMode, State, Target,
};
use crate::error::{Error, Result};
use crate::linalg::{wrap_angle, CMat, CVec};
use crate::model::Ket;
use crate::units::to_ns;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RamseyKind {
    Direct,
    Refocused,
}

impl RamseyKind {
    /// Axis of the closing π/2 pulse whose fringe is reported.
    pub fn fringe_axis(self) -> Axis {
        match self {
            RamseyKind::Direct => Axis::X,
            RamseyKind::Refocused => Axis::Y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubit {
    Q1,
    Q2,
}

impl Qubit {
    pub fn target(self) -> Target {
        match self {
            Qubit::Q1 => Target::Q1,
            Qubit::Q2 => Target::Q2,
        }
    }

    /// Level of this qubit in a two-transmon label.
    pub fn level(self, k: Ket) -> usize {
        match self {
            Qubit::Q1 => k.0,
            Qubit::Q2 => k.1,
        }
    }
}

/// Initial state of the conditioning qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitLabel {
    ControlGround,
    ControlExcited,
}

impl InitLabel {
    pub fn ket(self, measured: Qubit) -> Ket {
        match (self, measured) {
            (InitLabel::ControlGround, _) => Ket(0, 0),
            (InitLabel::ControlExcited, Qubit::Q2) => Ket(1, 0),
            (InitLabel::ControlExcited, Qubit::Q1) => Ket(0, 1),
        }
    }

    pub fn label(self, measured: Qubit) -> String {
        self.ket(measured).to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamseyConfig {
    pub omega_d: f64,
    pub amplitude: f64,
    pub port: Port,
    /// Rise time of each drive pulse; shortened to half the pulse when the
    /// pulse is shorter than two rise times.
    pub rise: f64,
    pub rotation_length: f64,
    pub rotation_mode: RotationMode,
    pub measured: Qubit,
    /// Closing X_π on both qubits in the refocused sequence.
    pub final_flip: bool,
    /// Lindblad propagation when the device has coherence times.
    pub open_system: bool,
    pub fit_threshold: f64,
}

impl RamseyConfig {
    pub fn new(omega_d: f64, amplitude: f64) -> Self {
        RamseyConfig {
            omega_d,
            amplitude,
            port: Port::Q2,
            rise: default_rise(),
            rotation_length: default_rotation_length(),
            rotation_mode: RotationMode::Ideal,
            measured: Qubit::Q2,
            final_flip: true,
            open_system: false,
            fit_threshold: DEFAULT_FIT_THRESHOLD,
        }
    }

    fn map_pulse(&self, len: f64) -> Option<DrivePulse> {
        (len > 0.0).then(|| DrivePulse::flat_top(self.port, self.omega_d, self.amplitude, len, self.rise.min(0.5 * len)))
    }

    /// Total sequence time for a total drive time `dt`, excluding the
    /// analysis pulse and the closing flip.
    pub fn total_time(&self, kind: RamseyKind, dt: f64) -> f64 {
        match kind {
            RamseyKind::Direct => dt,
            RamseyKind::Refocused => dt + self.rotation_length,
        }
    }
}

/// Sequence for total drive time `dt` closed by a π/2 pulse about `analysis`.
pub fn ramsey_sequence(kind: RamseyKind, cfg: &RamseyConfig, dt: f64, analysis: Axis) -> Result<PulseSequence> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::InvalidPulse(format!("drive time {dt} must be non-negative")));
    }
    let q = cfg.measured.target();
    let close = Rotation { axis: analysis, angle: FRAC_PI_2, target: q };
    let mut seq = PulseSequence::with_rotations(cfg.rotation_length, cfg.rotation_mode).rotate(Rotation::x(FRAC_PI_2, q));
    match kind {
        RamseyKind::Direct => {
            if let Some(p) = cfg.map_pulse(dt) {
                seq = seq.drive(p);
            }
            seq = seq.rotate(close);
        }
        RamseyKind::Refocused => {
            let half = cfg.map_pulse(0.5 * dt);
            if let Some(p) = half {
                seq = seq.drive(p);
            }
            seq = seq.rotate(Rotation::x(std::f64::consts::PI, Target::Both));
            if let Some(p) = half {
                seq = seq.drive(p);
            }
            seq = seq.rotate(close);
            if cfg.final_flip {
                seq = seq.rotate(Rotation::x(std::f64::consts::PI, Target::Both));
            }
        }
    }
    Ok(seq)
}

/// Ramsey data of one initial state.
#[derive(Clone, Debug)]
pub struct FringeRecord {
    pub kind: RamseyKind,
    pub init: InitLabel,
    pub measured: Qubit,
    /// Total drive time per point (s).
    pub dt: Vec<f64>,
    /// Total sequence time per point (s).
    pub total_time: Vec<f64>,
    /// Excited-state population of the measured qubit.
    pub p1: Vec<f64>,
    /// Computational populations after the fringe sequence.
    pub populations: Vec<PopulationSample>,
    /// Unwrapped Bloch phase of the measured qubit from both quadratures.
    pub phase: Vec<f64>,
    /// Cosine fit of p1 against Δt in ns.
    pub fit: Option<CosineFit>,
    pub fit_error: Option<String>,
}

impl FringeRecord {
    pub fn init_label(&self) -> String {
        self.init.label(self.measured)
    }

    pub fn fitted_phase(&self) -> Option<f64> {
        self.fit.map(|f| f.phase)
    }

    pub fn fitted_contrast(&self) -> Option<f64> {
        self.fit.map(|f| f.contrast())
    }

    pub fn fit_residual(&self) -> Option<f64> {
        self.fit.map(|f| f.residual)
    }

    /// Signed phase accumulation rate (rad/s) from the quadrature phases.
    pub fn phase_rate(&self) -> f64 {
        linear_regression(&self.dt, &self.phase).0
    }

    /// True when the fit is missing or its residual exceeds `threshold`.
    pub fn fit_failed(&self, threshold: f64) -> bool {
        self.fit.is_none_or(|f| f.residual > threshold)
    }
}

/// Measured-qubit populations of one point: fringe quadrature, other
/// quadrature, computational populations of the fringe state.
struct PointData {
    p_fringe: f64,
    p_other: f64,
    populations: PopulationSample,
}

fn excited_population(pops: &[f64], engine: &Engine, measured: Qubit) -> f64 {
    let b = engine.model().basis;
    pops.iter().enumerate().filter(|(i, _)| measured.level(b.ket(*i)) == 1).map(|(_, p)| p).sum::<f64>().clamp(0.0, 1.0)
}

fn final_states(engine: &Engine, seq: &PulseSequence, inits: &[CVec], open: bool) -> Result<Vec<State>> {
    if open && engine.model().params.has_noise() {
        let rhos: Vec<CMat> = inits.iter().map(|v| v * v.adjoint()).collect();
        let (out, _) = engine.apply_channel(seq, &rhos)?;
        Ok(out.into_iter().map(State::Mixed).collect())
    } else {
        let (u, _) = engine.propagate_unitary(seq)?;
        Ok(inits.iter().map(|v| State::Pure(&u * v)).collect())
    }
}

fn measure_point(engine: &Engine, kind: RamseyKind, cfg: &RamseyConfig, dt: f64, inits: &[InitLabel]) -> Result<Vec<PointData>> {
    let fringe_axis = kind.fringe_axis();
    let other_axis = match fringe_axis {
        Axis::X => Axis::Y,
        Axis::Y => Axis::X,
    };
    let kets: Vec<CVec> = inits.iter().map(|i| engine.label_state(i.ket(cfg.measured))).collect();
    let s_fringe = final_states(engine, &ramsey_sequence(kind, cfg, dt, fringe_axis)?, &kets, cfg.open_system)?;
    let s_other = final_states(engine, &ramsey_sequence(kind, cfg, dt, other_axis)?, &kets, cfg.open_system)?;
    let basis = engine.model().basis;
    Ok(s_fringe
        .iter()
        .zip(&s_other)
        .map(|(a, b)| PointData {
            p_fringe: excited_population(&a.populations(), engine, cfg.measured),
            p_other: excited_population(&b.populations(), engine, cfg.measured),
            populations: PopulationSample::from_state(dt, basis, a),
        })
        .collect())
}

/// Bloch phase atan2(y, x) from the excited populations measured after
/// closing X_π/2 and Y_π/2 pulses.
pub fn bloch_phase(p_after_x: f64, p_after_y: f64, flipped: bool) -> f64 {
    let (px, py) = if flipped { (1.0 - p_after_x, 1.0 - p_after_y) } else { (p_after_x, p_after_y) };
    let y = 1.0 - 2.0 * px;
    let x = 2.0 * py - 1.0;
    y.atan2(x)
}

/// Stream identifiers keep shot noise independent across points, initial
/// states and quadratures while staying reproducible.
fn stream(kind: RamseyKind, point: usize, init: usize, quad: usize) -> u64 {
    let k = match kind {
        RamseyKind::Direct => 0u64,
        RamseyKind::Refocused => 1,
    };
    ((point as u64) << 8) | ((init as u64) << 4) | ((quad as u64) << 1) | k
}

/// Runs the Ramsey sequence over `dt_grid` (total drive time, s) for each
/// initial state, sharing propagations between them.
pub fn ramsey_scan(
    engine: &Engine,
    kind: RamseyKind,
    cfg: &RamseyConfig,
    dt_grid: &[f64],
    inits: &[InitLabel],
    readout: &Readout,
) -> Result<Vec<FringeRecord>> {
    if dt_grid.is_empty() {
        return Err(Error::InvalidParams(vec!["Ramsey time grid is empty".into()]));
    }
    engine.model().params.validate_map()?;
    let points: Vec<Vec<PointData>> = dt_grid
        .par_iter()
        .map(|&dt| measure_point(engine, kind, cfg, dt, inits).map_err(|e| e.at(format!("Δt = {:.3} ns", to_ns(dt)))))
        .collect::<Result<_>>()?;
    let flipped = kind == RamseyKind::Refocused && cfg.final_flip;
    let mut out = Vec::with_capacity(inits.len());
    for (ii, &init) in inits.iter().enumerate() {
        let mut p1 = Vec::with_capacity(dt_grid.len());
        let mut raw_phase = Vec::with_capacity(dt_grid.len());
        let mut populations = Vec::with_capacity(dt_grid.len());
        for (k, pt) in points.iter().enumerate() {
            let d = &pt[ii];
            let pf = readout.sample(d.p_fringe, stream(kind, k, ii, 0));
            let po = readout.sample(d.p_other, stream(kind, k, ii, 1));
            let (px, py) = match kind.fringe_axis() {
                Axis::X => (pf, po),
                Axis::Y => (po, pf),
            };
            p1.push(pf);
            raw_phase.push(bloch_phase(px, py, flipped));
            populations.push(d.populations);
        }
        let t_ns: Vec<f64> = dt_grid.iter().map(|&t| to_ns(t)).collect();
        let (fit, fit_error) = match fit_cosine(&t_ns, &p1, cfg.fit_threshold) {
            Ok(f) => {
                let err = (f.residual > cfg.fit_threshold)
                    .then(|| format!("fit residual {:.3e} exceeds {:.3e}", f.residual, cfg.fit_threshold));
                (Some(f), err)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(FringeRecord {
            kind,
            init,
            measured: cfg.measured,
            dt: dt_grid.to_vec(),
            total_time: dt_grid.iter().map(|&t| cfg.total_time(kind, t)).collect(),
            p1,
            populations,
            phase: unwrap(&raw_phase),
            fit,
            fit_error,
        });
    }
    Ok(out)
}

pub fn ramsey_map_direct(engine: &Engine, cfg: &RamseyConfig, dt_grid: &[f64], init: InitLabel, readout: &Readout) -> Result<FringeRecord> {
    Ok(ramsey_scan(engine, RamseyKind::Direct, cfg, dt_grid, &[init], readout)?.remove(0))
}

pub fn ramsey_map_refocused(engine: &Engine, cfg: &RamseyConfig, dt_grid: &[f64], init: InitLabel, readout: &Readout) -> Result<FringeRecord> {
    Ok(ramsey_scan(engine, RamseyKind::Refocused, cfg, dt_grid, &[init], readout)?.remove(0))
}

/// Unwrapped conditional phase φ(excited control) − φ(ground control) per
/// point, anchored so the first value lies in (−π, π].
pub fn conditional_phase(ground: &FringeRecord, excited: &FringeRecord) -> Vec<f64> {
    let wrapped: Vec<f64> = ground.phase.iter().zip(&excited.phase).map(|(a, b)| wrap_angle(b - a)).collect();
    unwrap(&wrapped)
}

/// Conditional phase of a single point (closed or open system, exact
/// readout).
pub fn conditional_phase_at(engine: &Engine, kind: RamseyKind, cfg: &RamseyConfig, dt: f64) -> Result<f64> {
    let d = measure_point(engine, kind, cfg, dt, &[InitLabel::ControlGround, InitLabel::ControlExcited])?;
    let flipped = kind == RamseyKind::Refocused && cfg.final_flip;
    let phase = |p: &PointData| {
        let (px, py) = match kind.fringe_axis() {
            Axis::X => (p.p_fringe, p.p_other),
            Axis::Y => (p.p_other, p.p_fringe),
        };
        bloch_phase(px, py, flipped)
    };
    Ok(wrap_angle(phase(&d[1]) - phase(&d[0])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::driven_dressed_energies;
    use crate::model::{DeviceParams, TwoTransmon};
    use crate::units::{ghz, mhz, ns};

    fn grid(n: usize, step_ns: f64) -> Vec<f64> {
        (0..n).map(|k| ns(step_ns * k as f64)).collect()
    }

    #[test]
    fn no_drive_no_coupling_gives_identical_fringes() {
        let mut p = DeviceParams::reference_device().closed();
        p.j = 1e-9;
        let e = Engine::new(&TwoTransmon::new(&p).unwrap());
        let cfg = RamseyConfig::new(ghz(5.43), 0.0);
        let r = ramsey_scan(
            &e,
            RamseyKind::Direct,
            &cfg,
            &grid(12, 20.0),
            &[InitLabel::ControlGround, InitLabel::ControlExcited],
            &Readout::exact(),
        )
        .unwrap();
        for (a, b) in r[0].p1.iter().zip(&r[1].p1) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(conditional_phase(&r[0], &r[1]).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn echo_without_drive_is_flat() {
        let mut p = DeviceParams::reference_device().closed();
        p.j = 1e-9;
        let e = Engine::new(&TwoTransmon::new(&p).unwrap());
        let cfg = RamseyConfig::new(ghz(5.43), 0.0);
        let r = ramsey_scan(
            &e,
            RamseyKind::Refocused,
            &cfg,
            &grid(10, 40.0),
            &[InitLabel::ControlGround, InitLabel::ControlExcited],
            &Readout::exact(),
        )
        .unwrap();
        for rec in &r {
            let first = rec.p1[0];
            assert!(rec.p1.iter().all(|p| (p - first).abs() < 1e-9));
        }
        assert!(conditional_phase(&r[0], &r[1]).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn ground_fringe_tracks_dressed_stark_shift() {
        let p = DeviceParams::reference_device().closed();
        let model = TwoTransmon::new(&p).unwrap();
        let e = Engine::new(&model);
        let (wd, om) = (ghz(5.43), mhz(5.0));
        let mut cfg = RamseyConfig::new(wd, om);
        cfg.rise = ns(100.0);
        let dts: Vec<f64> = (0..30).map(|k| ns(200.0 + 20.0 * k as f64)).collect();
        let rec = ramsey_map_direct(&e, &cfg, &dts, InitLabel::ControlGround, &Readout::exact()).unwrap();
        let d0 = driven_dressed_energies(&p, wd, 0.0).unwrap();
        let d = driven_dressed_energies(&p, wd, om).unwrap();
        // phase of |0⟩+|1⟩ under e^{-iEt}: φ decreases at the Q2 shift rate
        let shift = (d.e01 - d.e00) - (d0.e01 - d0.e00);
        let rate = rec.phase_rate();
        assert!((rate + shift).abs() < 0.02 * shift.abs(), "rate {rate} shift {shift}");
        let f = rec.fit.unwrap();
        assert!((f.omega - shift.abs() * 1e-9).abs() < 0.02 * shift.abs() * 1e-9);
        assert!(rec.p1.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn bloch_phase_quadratures() {
        // (x, y) = (cos φ, sin φ): P after X_π/2 = (1 − y)/2, after Y_π/2 = (1 + x)/2
        for phi in [-2.5, -1.0, 0.0, 0.7, 2.9] {
            let (x, y) = (f64::cos(phi), f64::sin(phi));
            assert!((bloch_phase((1.0 - y) / 2.0, (1.0 + x) / 2.0, false) - phi).abs() < 1e-12);
            assert!((bloch_phase((1.0 + y) / 2.0, (1.0 - x) / 2.0, true) - phi).abs() < 1e-12);
        }
    }
}
