//! Piecewise propagation of pulse sequences.
//!
//! Every segment is computed in a frame rotating at a common frequency ω_c on
//! both transmons (exchange-invariant) and converted to the dressed reference
//! frame: the basis of undriven eigenstates labeled |nm⟩, rotating at
//! f₁n + f₂m with f₁, f₂ the dressed qubit frequencies. In that frame idle
//! evolution of the computational states is a pure conditional phase.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::pulse::{Axis, DrivePulse, Envelope, Port, Rotation, RotationMode, Segment, Target, PulseSequence};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, expm_hermitian, max_abs, CMat, CVec, Eigh, C64};
use crate::model::{Ket, TwoTransmon};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineOptions {
    /// Target accuracy (max-abs entry error) of each time-dependent piece.
    pub tol: f64,
    pub max_steps: usize,
    /// Longest Strang splitting step of open-system propagation (s).
    pub lindblad_step: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { tol: 1e-9, max_steps: 200_000, lindblad_step: 1e-9 }
    }
}

/// Accuracy bookkeeping of a propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    pub max_step_error: f64,
    /// max |U†U − 1| (closed system).
    pub unitarity_error: f64,
    /// |‖ψ‖ − 1| or |Tr ρ − Tr ρ₀|.
    pub norm_drift: f64,
    /// Smallest eigenvalue of the final density matrix (open system).
    pub min_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct FlatKey {
    omega_c: u64,
    amp: u64,
    phase: u64,
    port: Port,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct SteppedKey {
    omega_c: u64,
    amp: u64,
    phase: u64,
    port: Port,
    profile: [u64; 4],
    length: u64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Profile {
    RampUp(f64),
    RampDown(f64),
    /// Shape of `pulse` evaluated `offset` after the pulse start.
    Pulse { pulse: DrivePulse, offset: f64 },
}

impl Profile {
    fn value(&self, tau: f64) -> f64 {
        match *self {
            Profile::RampUp(r) => super::pulse::ramp_up(tau, r),
            Profile::RampDown(r) => super::pulse::ramp_up(r - tau, r),
            Profile::Pulse { pulse, offset } => pulse.shape(tau + offset),
        }
    }

    fn key(&self) -> [u64; 4] {
        match *self {
            Profile::RampUp(r) => [1, r.to_bits(), 0, 0],
            Profile::RampDown(r) => [2, r.to_bits(), 0, 0],
            Profile::Pulse { pulse, offset } => {
                let (kind, p) = match pulse.envelope {
                    Envelope::Square => (3, 0.0),
                    Envelope::FlatTop { rise } => (4, rise),
                    Envelope::Gaussian { sigma } => (5, sigma),
                };
                [kind, p.to_bits(), pulse.duration.to_bits(), offset.to_bits()]
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Tone {
    pub(crate) op: CMat,
    pub(crate) op_dag: CMat,
    pub(crate) amp: f64,
    pub(crate) phase: f64,
    /// Tone frequency minus the frame frequency.
    pub(crate) detuning: f64,
    pub(crate) profile: Profile,
}

/// H(τ) = H₀ + Σ Ω s(τ)/2 (e^{iθ(τ)} A + h.c.), θ = φ + ν·(t_abs0 + τ).
#[derive(Clone, Debug)]
pub(crate) struct Generator {
    pub(crate) h0: CMat,
    pub(crate) tones: Vec<Tone>,
    pub(crate) t_abs0: f64,
}

impl Generator {
    pub(crate) fn at(&self, tau: f64) -> CMat {
        let mut h = self.h0.clone();
        for t in &self.tones {
            let s = 0.5 * t.amp * t.profile.value(tau);
            if s == 0.0 {
                continue;
            }
            let th = t.phase + t.detuning * (self.t_abs0 + tau);
            let z = C64::from_polar(s, th);
            h += &t.op * z + &t.op_dag * z.conj();
        }
        h
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FrameStep {
    pub a: f64,
    pub b: f64,
    pub u: CMat,
}

#[derive(Clone, Debug)]
pub(crate) struct SteppedData {
    pub steps: Vec<FrameStep>,
    pub full: CMat,
    pub max_err: f64,
}

/// A compiled piece of a sequence. Times are absolute (seconds).
#[derive(Clone, Debug)]
pub(crate) enum Piece {
    Static { t0: f64, t1: f64, omega_c: f64, eig: Arc<Eigh> },
    Stepped { t0: f64, t1: f64, omega_c: f64, gen: Arc<Generator>, data: Arc<SteppedData> },
    Instant { t: f64, u: CMat },
}

impl Piece {
    pub(crate) fn span(&self) -> (f64, f64) {
        match self {
            Piece::Static { t0, t1, .. } | Piece::Stepped { t0, t1, .. } => (*t0, *t1),
            Piece::Instant { t, .. } => (*t, *t),
        }
    }
}

const CF4_A1: f64 = 0.25 + 0.288_675_134_594_812_9; // 1/4 + √3/6
const CF4_A2: f64 = 0.25 - 0.288_675_134_594_812_9;
const GAUSS_C1: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_C2: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Step-doubling differences below this are rounding noise.
const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Fourth-order commutator-free Magnus step over [τ, τ + h].
fn cf4_step(gen: &Generator, tau: f64, h: f64) -> CMat {
    let h1 = gen.at(tau + GAUSS_C1 * h);
    let h2 = gen.at(tau + GAUSS_C2 * h);
    let first = &h1 * c(CF4_A1, 0.0) + &h2 * c(CF4_A2, 0.0);
    let second = &h1 * c(CF4_A2, 0.0) + &h2 * c(CF4_A1, 0.0);
    expm_hermitian(&second, h) * expm_hermitian(&first, h)
}

/// Adaptive integration of the generator over [a, b] (relative times) with
/// step-doubling error control. The accumulated error estimate stays below
/// `tol` (max-abs norm).
pub(crate) fn integrate(gen: &Generator, a: f64, b: f64, tol: f64, max_steps: usize) -> Result<SteppedData> {
    integrate_with(gen, a, b, tol, max_steps, true)
}

/// As [`integrate`]; `keep_steps = false` returns only the full propagator.
pub(crate) fn integrate_with(gen: &Generator, a: f64, b: f64, tol: f64, max_steps: usize, keep_steps: bool) -> Result<SteppedData> {
    let dim = gen.h0.nrows();
    let mut full = CMat::identity(dim, dim);
    let mut steps = Vec::new();
    let span = b - a;
    if span <= 0.0 {
        return Ok(SteppedData { steps, full, max_err: 0.0 });
    }
    let mut tau = a;
    let mut h = span / 8.0;
    let mut max_err: f64 = 0.0;
    let mut attempts = 0usize;
    while tau < b {
        attempts += 1;
        if attempts > max_steps {
            return Err(Error::ToleranceNotMet { tol, achieved: max_err, max_steps });
        }
        // stretch the step rather than leave a sliver at the end
        let last = tau + 1.05 * h >= b;
        if last {
            h = b - tau;
        }
        let big = cf4_step(gen, tau, h);
        let half = cf4_step(gen, tau + 0.5 * h, 0.5 * h) * cf4_step(gen, tau, 0.5 * h);
        let err = max_abs(&(&big - &half));
        let allowed = tol * h / span;
        if err <= allowed.max(ROUNDOFF_FLOOR) || h <= span * 1e-12 {
            max_err = max_err.max(err);
            full = &half * &full;
            if keep_steps {
                steps.push(FrameStep { a: tau, b: if last { b } else { tau + h }, u: half });
            }
            tau = if last { b } else { tau + h };
            let grow = if err == 0.0 { 3.0 } else { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 3.0) };
            h *= grow;
        } else {
            h *= (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9);
        }
    }
    Ok(SteppedData { steps, full, max_err })
}

/// Propagation engine bound to one device.
pub struct Engine {
    model: TwoTransmon,
    v: CMat,
    energies: Vec<f64>,
    ref_freq: Vec<f64>,
    ntot: Vec<f64>,
    f1: f64,
    f2: f64,
    pub(crate) opts: EngineOptions,
    flat_cache: Mutex<HashMap<FlatKey, Arc<Eigh>>>,
    stepped_cache: Mutex<HashMap<SteppedKey, Arc<SteppedData>>>,
}

impl Engine {
    pub fn new(model: &TwoTransmon) -> Self {
        Self::with_options(model, EngineOptions::default())
    }

    pub fn with_options(model: &TwoTransmon, opts: EngineOptions) -> Self {
        let spec = model.dressed();
        let e00 = spec.energy(Ket(0, 0));
        let f1 = spec.energy(Ket(1, 0)) - e00;
        let f2 = spec.energy(Ket(0, 1)) - e00;
        let d = model.dim();
        let ref_freq = (0..d)
            .map(|i| {
                let Ket(n, m) = model.basis.ket(i);
                f1 * n as f64 + f2 * m as f64
            })
            .collect();
        let ntot = (0..d)
            .map(|i| {
                let Ket(n, m) = model.basis.ket(i);
                (n + m) as f64
            })
            .collect();
        Engine {
            model: model.clone(),
            v: spec.vectors,
            energies: spec.energies,
            ref_freq,
            ntot,
            f1,
            f2,
            opts,
            flat_cache: Mutex::new(HashMap::new()),
            stepped_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &TwoTransmon {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Dressed qubit frequencies (f₁, f₂) defining the reference frame.
    pub fn qubit_frequencies(&self) -> (f64, f64) {
        (self.f1, self.f2)
    }

    /// Undriven eigenstates as columns, column i labeled by basis state i.
    pub fn dressed_vectors(&self) -> &CMat {
        &self.v
    }

    pub fn dressed_energies(&self) -> &[f64] {
        &self.energies
    }

    /// Basis vector of the dressed label |nm⟩ in the reference frame.
    pub fn label_state(&self, k: Ket) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[self.model.basis.index(k).expect("label inside truncation")] = c(1.0, 0.0);
        v
    }

    /// Lab-frame product-basis state corresponding to a reference-frame
    /// state at time t.
    pub fn lab_state(&self, psi: &CVec, t: f64) -> CVec {
        let mut x = psi.clone();
        for (i, z) in x.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -self.ref_freq[i] * t);
        }
        &self.v * x
    }

    pub(crate) fn frame_phase(&self, omega_c: f64, t: f64) -> Vec<C64> {
        (0..self.dim())
            .map(|l| C64::from_polar(1.0, (self.ref_freq[l] - omega_c * self.ntot[l]) * t))
            .collect()
    }

    /// D(t_b) V† U_f V D(t_a)*, where U_f is a propagator in the frame
    /// rotating at ω_c.
    pub(crate) fn to_reference(&self, u_f: &CMat, omega_c: f64, ta: f64, tb: f64) -> CMat {
        let mut m = self.v.adjoint() * u_f * &self.v;
        let pb = self.frame_phase(omega_c, tb);
        let pa = self.frame_phase(omega_c, ta);
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] *= pb[i] * pa[j].conj();
            }
        }
        m
    }

    /// Reference-frame operator → frame ω_c at time t.
    pub(crate) fn reference_to_frame(&self, x: &CMat, omega_c: f64, t: f64) -> CMat {
        let p = self.frame_phase(omega_c, t);
        let d = self.dim();
        let mut y = x.clone();
        for i in 0..d {
            for j in 0..d {
                y[(i, j)] *= p[i].conj() * p[j];
            }
        }
        &self.v * y * self.v.adjoint()
    }

    pub(crate) fn frame_to_reference(&self, x: &CMat, omega_c: f64, t: f64) -> CMat {
        let mut y = self.v.adjoint() * x * &self.v;
        let p = self.frame_phase(omega_c, t);
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                y[(i, j)] *= p[i] * p[j].conj();
            }
        }
        y
    }

    fn frame_hamiltonian(&self, omega_c: f64) -> CMat {
        let mut h = self.model.h_static.data.clone();
        for i in 0..self.dim() {
            h[(i, i)] -= c(omega_c * self.ntot[i], 0.0);
        }
        h
    }

    fn port_op(&self, port: Port) -> CMat {
        match port {
            Port::Q1 => self.model.a1.clone(),
            Port::Q2 => self.model.a2.clone(),
            Port::Both => &self.model.a1 + &self.model.a2,
        }
    }

    fn idle_eig(&self, omega_c: f64) -> Arc<Eigh> {
        Arc::new(Eigh {
            values: (0..self.dim()).map(|l| self.energies[l] - omega_c * self.ntot[l]).collect(),
            vectors: self.v.clone(),
        })
    }

    fn flat_eig(&self, omega_c: f64, amp: f64, phase: f64, port: Port) -> Arc<Eigh> {
        let key = FlatKey { omega_c: omega_c.to_bits(), amp: amp.to_bits(), phase: phase.to_bits(), port };
        if let Some(e) = self.flat_cache.lock().expect("cache lock").get(&key) {
            return e.clone();
        }
        let op = self.port_op(port);
        let z = C64::from_polar(0.5 * amp, phase);
        let h = self.frame_hamiltonian(omega_c) + &op * z + op.adjoint() * z.conj();
        let e = Arc::new(eigh(&h));
        self.flat_cache.lock().expect("cache lock").insert(key, e.clone());
        e
    }

    fn tone(&self, port: Port, amp: f64, phase: f64, detuning: f64, profile: Profile) -> Tone {
        let op = self.port_op(port);
        Tone { op_dag: op.adjoint(), op, amp, phase, detuning, profile }
    }

    /// Single-tone piece with the frame at the tone frequency; its frame
    /// propagator does not depend on the absolute start time and is cached.
    fn single_tone_piece(&self, t0: f64, len: f64, p: &DrivePulse, profile: Profile) -> Result<Piece> {
        let key = SteppedKey {
            omega_c: p.omega_d.to_bits(),
            amp: p.amplitude.to_bits(),
            phase: p.phase.to_bits(),
            port: p.port,
            profile: profile.key(),
            length: len.to_bits(),
        };
        let gen = Arc::new(Generator {
            h0: self.frame_hamiltonian(p.omega_d),
            tones: vec![self.tone(p.port, p.amplitude, p.phase, 0.0, profile)],
            t_abs0: 0.0,
        });
        let cached = self.stepped_cache.lock().expect("cache lock").get(&key).cloned();
        let data = match cached {
            Some(d) => d,
            None => {
                let d = Arc::new(integrate(&gen, 0.0, len, self.opts.tol, self.opts.max_steps)?);
                self.stepped_cache.lock().expect("cache lock").insert(key, d.clone());
                d
            }
        };
        Ok(Piece::Stepped { t0, t1: t0 + len, omega_c: p.omega_d, gen, data })
    }

    /// Ideal rotation in the dressed basis.
    pub fn rotation_unitary(&self, r: &Rotation) -> CMat {
        let b = self.model.basis;
        let (ch, sh) = ((0.5 * r.angle).cos(), (0.5 * r.angle).sin());
        // exp(−iθ/2 σ) = cos(θ/2) − i sin(θ/2) σ
        let block = match r.axis {
            Axis::X => [c(ch, 0.0), c(0.0, -sh), c(0.0, -sh), c(ch, 0.0)],
            Axis::Y => [c(ch, 0.0), c(-sh, 0.0), c(sh, 0.0), c(ch, 0.0)],
        };
        let embed = |on_q1: bool| {
            let mut u = CMat::identity(b.dim(), b.dim());
            let spectators = if on_q1 { b.d2 } else { b.d1 };
            for s in 0..spectators {
                let (i0, i1) = if on_q1 {
                    (b.index(Ket(0, s)).unwrap(), b.index(Ket(1, s)).unwrap())
                } else {
                    (b.index(Ket(s, 0)).unwrap(), b.index(Ket(s, 1)).unwrap())
                };
                u[(i0, i0)] = block[0];
                u[(i0, i1)] = block[1];
                u[(i1, i0)] = block[2];
                u[(i1, i1)] = block[3];
            }
            u
        };
        match r.target {
            Target::Q1 => embed(true),
            Target::Q2 => embed(false),
            Target::Both => embed(true) * embed(false),
        }
    }

    /// exp(−i(θ₁ñ₁ + θ₂ñ₂)) in the dressed basis.
    pub fn virtual_z_unitary(&self, q1: f64, q2: f64) -> CMat {
        let b = self.model.basis;
        let mut u = CMat::zeros(b.dim(), b.dim());
        for i in 0..b.dim() {
            let Ket(n, m) = b.ket(i);
            u[(i, i)] = C64::from_polar(1.0, -(q1 * n as f64 + q2 * m as f64));
        }
        u
    }

    fn rotation_pieces(&self, t0: f64, len: f64, r: &Rotation, mode: RotationMode, out: &mut Vec<Piece>) -> Result<()> {
        match mode {
            RotationMode::Ideal => {
                let mid = t0 + 0.5 * len;
                out.push(Piece::Static { t0, t1: mid, omega_c: self.f2, eig: self.idle_eig(self.f2) });
                out.push(Piece::Instant { t: mid, u: self.rotation_unitary(r) });
                out.push(Piece::Static { t0: mid, t1: t0 + len, omega_c: self.f2, eig: self.idle_eig(self.f2) });
            }
            RotationMode::Resonant => {
                let shape = DrivePulse {
                    port: Port::Q1,
                    omega_d: 0.0,
                    amplitude: 1.0,
                    phase: 0.0,
                    duration: len,
                    envelope: Envelope::Gaussian { sigma: 0.25 * len },
                };
                let amp = r.angle.abs() / shape.shape_area();
                let phase = r.axis.drive_phase() + if r.angle < 0.0 { std::f64::consts::PI } else { 0.0 };
                let profile = Profile::Pulse { pulse: shape, offset: 0.0 };
                match r.target {
                    Target::Q1 | Target::Q2 => {
                        let (port, f) = if r.target == Target::Q1 { (Port::Q1, self.f1) } else { (Port::Q2, self.f2) };
                        let p = DrivePulse { port, omega_d: f, amplitude: amp, phase, ..shape };
                        out.push(self.single_tone_piece(t0, len, &p, profile)?);
                    }
                    Target::Both => {
                        let omega_c = self.f2;
                        let gen = Arc::new(Generator {
                            h0: self.frame_hamiltonian(omega_c),
                            tones: vec![
                                self.tone(Port::Q1, amp, phase, self.f1 - omega_c, profile),
                                self.tone(Port::Q2, amp, phase, 0.0, profile),
                            ],
                            t_abs0: t0,
                        });
                        let data = Arc::new(integrate(&gen, 0.0, len, self.opts.tol, self.opts.max_steps)?);
                        out.push(Piece::Stepped { t0, t1: t0 + len, omega_c, gen, data });
                    }
                }
            }
        }
        Ok(())
    }

    fn drive_pieces(&self, t0: f64, p: &DrivePulse, out: &mut Vec<Piece>) -> Result<()> {
        p.validate()?;
        let t1 = t0 + p.duration;
        if p.duration == 0.0 {
            return Ok(());
        }
        if p.amplitude == 0.0 {
            out.push(Piece::Static { t0, t1, omega_c: self.f2, eig: self.idle_eig(self.f2) });
            return Ok(());
        }
        let flat = |a: f64, b: f64| Piece::Static {
            t0: a,
            t1: b,
            omega_c: p.omega_d,
            eig: self.flat_eig(p.omega_d, p.amplitude, p.phase, p.port),
        };
        match p.envelope {
            Envelope::Square => out.push(flat(t0, t1)),
            Envelope::FlatTop { rise } if rise == 0.0 => out.push(flat(t0, t1)),
            Envelope::FlatTop { rise } => {
                let rise = rise.min(0.5 * p.duration);
                out.push(self.single_tone_piece(t0, rise, p, Profile::RampUp(rise))?);
                if p.duration > 2.0 * rise {
                    out.push(flat(t0 + rise, t1 - rise));
                }
                out.push(self.single_tone_piece(t1 - rise, rise, p, Profile::RampDown(rise))?);
            }
            Envelope::Gaussian { .. } => {
                out.push(self.single_tone_piece(t0, p.duration, p, Profile::Pulse { pulse: *p, offset: 0.0 })?);
            }
        }
        Ok(())
    }

    pub(crate) fn compile(&self, seq: &PulseSequence) -> Result<Vec<Piece>> {
        seq.validate()?;
        let mut out = Vec::new();
        let mut t = 0.0;
        for s in &seq.segments {
            let len = seq.segment_duration(s);
            match s {
                Segment::Idle(d) => {
                    if *d > 0.0 {
                        out.push(Piece::Static { t0: t, t1: t + d, omega_c: self.f2, eig: self.idle_eig(self.f2) });
                    }
                }
                Segment::Drive(p) => self.drive_pieces(t, p, &mut out)?,
                Segment::Rotate(r) => self.rotation_pieces(t, len, r, seq.rotation_mode, &mut out)?,
                Segment::VirtualZ { q1, q2 } => out.push(Piece::Instant { t, u: self.virtual_z_unitary(*q1, *q2) }),
            }
            t += len;
        }
        Ok(out)
    }

    /// Reference-frame propagator of a piece over [ta, tb] ⊆ its span.
    pub(crate) fn piece_propagator(&self, piece: &Piece, ta: f64, tb: f64) -> Result<CMat> {
        match piece {
            Piece::Static { omega_c, eig, .. } => Ok(self.to_reference(&eig.propagator(tb - ta), *omega_c, ta, tb)),
            Piece::Stepped { t0, t1, omega_c, gen, data } => {
                let u_f = if ta == *t0 && tb == *t1 {
                    data.full.clone()
                } else {
                    integrate(gen, ta - t0, tb - t0, self.opts.tol, self.opts.max_steps)?.full
                };
                Ok(self.to_reference(&u_f, *omega_c, ta, tb))
            }
            Piece::Instant { u, .. } => Ok(u.clone()),
        }
    }

    /// Reference-frame propagator of a whole sequence.
    pub fn propagate_unitary(&self, seq: &PulseSequence) -> Result<(CMat, Diagnostics)> {
        let pieces = self.compile(seq)?;
        let mut u = CMat::identity(self.dim(), self.dim());
        let mut diag = Diagnostics::default();
        for p in &pieces {
            let (a, b) = p.span();
            u = self.piece_propagator(p, a, b)? * u;
            if let Piece::Stepped { data, .. } = p {
                diag.steps += data.steps.len();
                diag.max_step_error = diag.max_step_error.max(data.max_err);
            } else {
                diag.steps += 1;
            }
        }
        diag.unitarity_error = crate::linalg::unitarity_error(&u);
        Ok((u, diag))
    }

    /// Evolves a reference-frame state, recording it at the requested times
    /// (ascending, within [0, duration]).
    pub fn evolve_state(&self, seq: &PulseSequence, psi0: &CVec, samples: &[f64]) -> Result<(CVec, Vec<(f64, CVec)>, Diagnostics)> {
        let pieces = self.compile(seq)?;
        let total = seq.duration();
        check_samples(samples, total)?;
        let mut out = Vec::with_capacity(samples.len());
        let mut next = 0;
        while next < samples.len() && samples[next] <= 0.0 {
            out.push((samples[next], psi0.clone()));
            next += 1;
        }
        let mut psi = psi0.clone();
        let mut diag = Diagnostics::default();
        for p in &pieces {
            let (a, b) = p.span();
            while next < samples.len() && samples[next] <= b && b > a {
                let ts = samples[next];
                out.push((ts, self.piece_propagator(p, a, ts)? * &psi));
                next += 1;
            }
            psi = self.piece_propagator(p, a, b)? * psi;
            if let Piece::Stepped { data, .. } = p {
                diag.steps += data.steps.len();
                diag.max_step_error = diag.max_step_error.max(data.max_err);
            }
        }
        while next < samples.len() {
            out.push((samples[next], psi.clone()));
            next += 1;
        }
        diag.norm_drift = (psi.norm() - psi0.norm()).abs();
        Ok((psi, out, diag))
    }
}

pub(crate) fn check_samples(samples: &[f64], total: f64) -> Result<()> {
    let slack = 1e-12 * total.max(1e-9);
    if samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidPulse("sample times must be ascending".into()));
    }
    if samples.iter().any(|&t| !(t >= 0.0 && t <= total + slack)) {
        return Err(Error::InvalidPulse(format!("sample times must lie within [0, {total:.3e}] s")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, unitarity_error};
    use crate::model::DeviceParams;
    use crate::units::{ghz, mhz, ns};
    use std::f64::consts::PI;

    fn engine() -> Engine {
        Engine::new(&TwoTransmon::new(&DeviceParams::reference_device().closed()).unwrap())
    }

    #[test]
    fn empty_sequence_is_identity() {
        let e = engine();
        let (u, _) = e.propagate_unitary(&PulseSequence::new()).unwrap();
        assert!(max_abs_diff(&u, &identity(e.dim())) < 1e-15);
        let (u, _) = e.propagate_unitary(&PulseSequence::new().idle(0.0)).unwrap();
        assert!(max_abs_diff(&u, &identity(e.dim())) < 1e-15);
    }

    #[test]
    fn free_evolution_is_dressed_phases() {
        let e = engine();
        let t = ns(123.0);
        let (u, _) = e.propagate_unitary(&PulseSequence::new().idle(t)).unwrap();
        // back to the lab frame: V D(t)* U V†
        let d = e.dim();
        let mut lab = u.clone();
        let p = e.frame_phase(0.0, t);
        for i in 0..d {
            for j in 0..d {
                lab[(i, j)] *= p[i].conj();
            }
        }
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { C64::from_polar(1.0, -e.dressed_energies()[i] * t) } else { c(0.0, 0.0) };
                assert!((lab[(i, j)] - expect).norm() < 1e-9, "({i},{j})");
            }
        }
    }

    #[test]
    fn computational_idle_is_pure_zz() {
        let e = engine();
        let t = ns(500.0);
        let (u, _) = e.propagate_unitary(&PulseSequence::new().idle(t)).unwrap();
        let zeta = e.model().dressed().zeta();
        let [i00, i01, i10, i11] = e.model().basis.computational();
        let ph = |i: usize| u[(i, i)] / u[(i00, i00)];
        assert!((ph(i01) - c(1.0, 0.0)).norm() < 1e-9);
        assert!((ph(i10) - c(1.0, 0.0)).norm() < 1e-9);
        assert!((ph(i11) - C64::from_polar(1.0, -zeta * t)).norm() < 1e-9);
    }

    /// Isolated two-level Rabi oracle: resonant square pulse of area π/2.
    #[test]
    fn half_pi_pulse_transfers_half() {
        let mut p = DeviceParams::reference_device().closed();
        p.d1 = 2;
        p.d2 = 2;
        p.j = 1e-12;
        let e = Engine::new(&TwoTransmon::new(&p).unwrap());
        let (_, f2) = e.qubit_frequencies();
        let om = mhz(10.0);
        let dur = (PI / 2.0) / om;
        let pulse = DrivePulse { envelope: Envelope::Square, ..DrivePulse::flat_top(Port::Q2, f2, om, dur, 0.0) };
        let (psi, _, _) = e.evolve_state(&PulseSequence::new().drive(pulse), &e.label_state(Ket(0, 0)), &[]).unwrap();
        let p01 = psi[1].norm_sqr();
        assert!((p01 - 0.5).abs() < 1e-6, "{p01}");
    }

    #[test]
    fn ramps_are_unitary_and_compose() {
        let e = engine();
        let pulse = DrivePulse::flat_top(Port::Q2, ghz(5.43), mhz(20.0), ns(300.0), ns(60.0));
        let seq = PulseSequence::new().drive(pulse);
        let (u, d) = e.propagate_unitary(&seq).unwrap();
        assert!(unitarity_error(&u) < 1e-10);
        assert!(d.max_step_error <= 1e-9);
        // split into two back-to-back sequences at an interior time by
        // propagating the pieces separately
        let pieces = e.compile(&seq).unwrap();
        let mut prod = identity(e.dim());
        for p in &pieces {
            let (a, b) = p.span();
            let m = 0.5 * (a + b);
            prod = e.piece_propagator(p, m, b).unwrap() * e.piece_propagator(p, a, m).unwrap() * prod;
        }
        assert!(max_abs_diff(&prod, &u) < 1e-9);
    }

    #[test]
    fn integrator_matches_fine_midpoint() {
        let e = engine();
        let pulse = DrivePulse::flat_top(Port::Q2, ghz(5.43), mhz(30.0), ns(40.0), ns(20.0));
        let pieces = e.compile(&PulseSequence::new().drive(pulse)).unwrap();
        let Piece::Stepped { gen, data, .. } = &pieces[0] else { panic!("expected ramp") };
        let n = 20000;
        let h = ns(20.0) / n as f64;
        let mut u = identity(e.dim());
        for k in 0..n {
            u = expm_hermitian(&gen.at((k as f64 + 0.5) * h), h) * u;
        }
        assert!(max_abs_diff(&u, &data.full) < 1e-6);
    }

    #[test]
    fn ideal_rotations() {
        let e = engine();
        let x = e.rotation_unitary(&Rotation::x(PI, Target::Q2));
        let psi = &x * e.label_state(Ket(1, 0));
        assert!((psi[e.model().basis.index(Ket(1, 1)).unwrap()].norm_sqr() - 1.0).abs() < 1e-14);
        let y = e.rotation_unitary(&Rotation::y(PI / 2.0, Target::Both));
        assert!(unitarity_error(&y) < 1e-14);
    }

    #[test]
    fn resonant_rotation_close_to_ideal() {
        let e = engine();
        let seq = PulseSequence::with_rotations(ns(40.0), RotationMode::Resonant).rotate(Rotation::x(PI / 2.0, Target::Q2));
        let (psi, _, _) = e.evolve_state(&seq, &e.label_state(Ket(0, 0)), &[]).unwrap();
        let p1 = psi[1].norm_sqr();
        assert!((p1 - 0.5).abs() < 0.02, "{p1}");
    }
}
