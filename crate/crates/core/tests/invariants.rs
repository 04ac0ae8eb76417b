use std::f64::consts::PI;

use mapgate::dynamics::{DrivePulse, Engine, EngineOptions, Port, PulseSequence, Rotation, Target};
use mapgate::linalg::{identity, max_abs_diff};
use mapgate::model::{DeviceParams, TwoTransmon};
use mapgate::protocols::{
    conditional_phase, conditional_phase_at, ideal_refocused_target, is_contiguous, ramsey_scan, sweep_gate_time, InitLabel,
    Qubit, RamseyConfig, RamseyKind, Readout, ScanOptions, SweepOptions,
};
use mapgate::tomography::{qpt_pipeline, GateSpec, QptOptions};
use mapgate::units::{ghz, mhz, ns, us};

fn engine(p: &DeviceParams) -> Engine {
    Engine::with_options(&TwoTransmon::new(p).unwrap(), EngineOptions { tol: 1e-9, ..Default::default() })
}

fn closed() -> DeviceParams {
    DeviceParams::reference_device().closed()
}

#[test]
fn concatenation_is_a_product() {
    let e = engine(&closed());
    let pulse = DrivePulse::flat_top(Port::Q2, ghz(5.43), mhz(15.0), ns(240.0), ns(60.0));
    let tail = PulseSequence::new()
        .idle(ns(37.0))
        .rotate(Rotation::x(PI, Target::Both))
        .idle(ns(120.0))
        .rotate(Rotation::y(PI / 2.0, Target::Q1));
    let mut whole = PulseSequence::new().drive(pulse);
    for s in &tail.segments {
        whole = whole.push(s.clone());
    }
    let (u_head, _) = e.propagate_unitary(&PulseSequence::new().drive(pulse)).unwrap();
    let (u_tail, _) = e.propagate_unitary(&tail).unwrap();
    let (u, _) = e.propagate_unitary(&whole).unwrap();
    assert!(max_abs_diff(&u, &(&u_tail * &u_head)) < 1e-9);
}

#[test]
fn conditional_phase_grows_linearly_under_constant_drive() {
    let e = engine(&closed());
    let mut cfg = RamseyConfig::new(ghz(5.43), mhz(2.0));
    cfg.rise = ns(80.0);
    // shortest pulse with full ramps
    let t0 = 2.0 * cfg.rise;
    let t = ns(200.0);
    let phi = |dt: f64| conditional_phase_at(&e, RamseyKind::Direct, &cfg, dt).unwrap();
    let (a, b, c) = (phi(t0), phi(t0 + t), phi(t0 + 2.0 * t));
    let once = b - a;
    let twice = c - a;
    assert!((twice / once - 2.0).abs() < 0.01, "{once} {twice}");
}

#[test]
fn conditional_rate_is_symmetric_in_the_measured_qubit() {
    let e = engine(&closed());
    let grid: Vec<f64> = (0..6).map(|k| ns(160.0 + 60.0 * k as f64)).collect();
    let rate = |measured: Qubit| {
        let mut cfg = RamseyConfig::new(ghz(5.43), mhz(2.0));
        cfg.rise = ns(80.0);
        cfg.measured = measured;
        let r = ramsey_scan(&e, RamseyKind::Direct, &cfg, &grid, &[InitLabel::ControlGround, InitLabel::ControlExcited], &Readout::exact())
            .unwrap();
        let cp = conditional_phase(&r[0], &r[1]);
        (cp[cp.len() - 1] - cp[0]) / (grid[grid.len() - 1] - grid[0])
    };
    let (r2, r1) = (rate(Qubit::Q2), rate(Qubit::Q1));
    assert!(((r1 - r2) / r2).abs() < 0.01, "{r1} vs {r2}");
}

#[test]
fn divergence_window_is_contiguous() {
    let p = DeviceParams::window_device();
    let e = Engine::with_options(&TwoTransmon::new(&p).unwrap(), EngineOptions { tol: 1e-7, ..Default::default() });
    let mut base = RamseyConfig::new(ghz(5.43), mhz(20.0));
    base.rise = ns(80.0);
    let grid: Vec<f64> = (0..17).map(|i| ghz(5.40 + 0.005 * i as f64)).collect();
    let opts = SweepOptions { kind: RamseyKind::Direct, scan: ScanOptions { step: ns(20.0), horizon: us(3.0) }, ..SweepOptions::default() };
    let r = sweep_gate_time(&e, &base, &grid, &[mhz(20.0)], &opts).unwrap();
    let flags: Vec<bool> = r.iter().map(|x| x.diverged).collect();
    assert!(flags.iter().any(|&f| f));
    assert!(is_contiguous(&flags), "{flags:?}");
}

#[test]
fn finite_shots_leave_a_small_negative_eta() {
    let e = engine(&closed());
    let ideal = ideal_refocused_target();
    let mut etas = Vec::new();
    for seed in 0..3 {
        let opts = QptOptions { readout: Readout::shots(1000, seed), ..QptOptions::default() };
        let r = qpt_pipeline(&e, &GateSpec::Unitary(ideal.clone()), &ideal, &opts).unwrap();
        assert!(r.fidelity.average <= 1.0 + 1e-9 && r.fidelity.average > 0.9);
        etas.push(r.eta);
    }
    assert!(etas.iter().all(|&x| x < 0.0 && x > -0.1), "{etas:?}");
    assert!(etas.iter().any(|&x| x < -1e-3), "{etas:?}");
}

#[test]
fn exact_readout_of_the_ideal_gate_is_physical() {
    let e = engine(&closed());
    let ideal = ideal_refocused_target();
    let r = qpt_pipeline(&e, &GateSpec::Unitary(ideal.clone()), &ideal, &QptOptions::default()).unwrap();
    assert_eq!(r.eta, 0.0);
    assert!(max_abs_diff(&(&ideal * ideal.adjoint()), &identity(4)) < 1e-12);
}
