//! Acceptance checks AC1–AC10. Each prints one PASS/FAIL line to stdout,
//! bypassing the test harness capture, then asserts.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mapgate::dynamics::{
    driven_dressed_energies, lab_frame_propagator, DressedOptions, DrivePulse, Engine, EngineOptions, Port, PulseSequence,
    Rotation, Target,
};
use mapgate::linalg::{c, eigh, trace, unitarity_error, CMat};
use mapgate::model::{default_resonance_floor, map_condition_report, splitting_xi, DeviceParams, Ket, TwoTransmon};
use mapgate::protocols::{
    calibrate_refocused, compare_zeta, gate_time_point, ideal_refocused_target, is_contiguous, ramsey_scan,
    scan_conditional_phase, sweep_gate_time, CalibrationOptions, DivergenceCause, InitLabel, RamseyConfig, RamseyKind,
    Readout, ScanOptions, SweepOptions,
};
use mapgate::tomography::{choi_from_ptm, pauli, ptm_from_choi, qpt_pipeline, GateSpec, Ptm, QptOptions};
use mapgate::units::{ghz, mhz, ns, to_ghz, to_mhz, to_ns, us};

fn report(id: &str, ok: bool, detail: &str) {
    let line = format!("{id} {}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{line}");
}

fn reference_closed() -> DeviceParams {
    DeviceParams::reference_device().closed()
}

fn engine(p: &DeviceParams, tol: f64) -> Engine {
    Engine::with_options(&TwoTransmon::new(p).unwrap(), EngineOptions { tol, ..Default::default() })
}

/// Shipped drive operating point.
fn operating_point() -> RamseyConfig {
    let mut cfg = RamseyConfig::new(ghz(5.43), mhz(15.0));
    cfg.rise = ns(80.0);
    cfg
}

#[test]
fn ac1_splitting_matches_two_level_diagonalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for _ in 0..1000 {
        let j = mhz(rng.random_range(0.1..50.0));
        let delta = mhz(rng.random_range(-500.0..500.0));
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(j, 0.0), c(j, 0.0), c(delta, 0.0)]);
        let upper = eigh(&h).values.iter().cloned().fold(f64::MIN, f64::max);
        let xi = splitting_xi(j, delta);
        let scale = (2.0 * j).hypot(delta);
        worst = worst.max((xi - upper).abs() / scale);
        // the product of the two eigenvalues is −J²; residual in units of the spectrum scale
        worst_identity = worst_identity.max((xi * (xi - delta) - j * j).abs() / (scale * scale));
    }
    report(
        "AC1",
        worst < 1e-12 && worst_identity < 1e-12,
        &format!("max relative deviation {worst:.2e} (eigensolver), {worst_identity:.2e} (ξ(ξ−Δ) = J²) over 1000 pairs"),
    );
}

#[test]
fn ac2_perturbation_agrees_at_weak_drive() {
    let m = TwoTransmon::new(&reference_closed()).unwrap();
    let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0].iter().map(|&a| (ghz(5.43), mhz(a))).collect();
    let rows = compare_zeta(&m, &pts, &DressedOptions::default(), default_resonance_floor()).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.relative_error().unwrap_or(f64::INFINITY)).collect();
    let detail = rows
        .iter()
        .zip(&errs)
        .map(|(r, e)| format!("Ω {:.0} MHz {:.1}%", to_mhz(r.amplitude), 100.0 * e))
        .collect::<Vec<_>>()
        .join(", ");
    report("AC2", errs.iter().all(|&e| e <= 0.10), &detail);
}

#[test]
fn ac3_perturbation_valid_outside_the_window() {
    let p = reference_closed();
    let m = TwoTransmon::new(&p).unwrap();
    let (lo, hi) = map_condition_report(&p).unwrap().window;
    let grid: Vec<f64> = (0..=60).map(|i| ghz(5.30 + 0.005 * i as f64)).collect();
    let pts: Vec<(f64, f64)> = grid.iter().map(|&w| (w, mhz(5.0))).collect();
    let rows = compare_zeta(&m, &pts, &DressedOptions::default(), default_resonance_floor()).unwrap();
    let margin = mhz(30.0);
    let mut outside = 0;
    let mut bad = Vec::new();
    let mut excluded = Vec::new();
    let mut inside_unflagged = Vec::new();
    let mut inside = 0;
    for r in &rows {
        let w = r.omega_d;
        if w > lo && w < hi {
            inside += 1;
            if !r.flagged {
                inside_unflagged.push(to_ghz(w));
            }
        } else if w <= lo - margin || w >= hi + margin {
            if r.near_transition {
                excluded.push(format!("{:.3}", to_ghz(w)));
                continue;
            }
            outside += 1;
            match r.relative_error() {
                Some(e) if e <= 0.10 => {}
                e => bad.push(format!("{:.3} GHz ({:?})", to_ghz(w), e)),
            }
        }
    }
    let ok = bad.is_empty() && inside_unflagged.is_empty() && inside > 0 && outside > 20;
    report(
        "AC3",
        ok,
        &format!(
            "window [{:.4}, {:.4}] GHz; {outside} points outside agree within 10% (failures {bad:?}); {inside} inside all flagged; excluded near other transitions: {excluded:?}",
            to_ghz(lo),
            to_ghz(hi)
        ),
    );
}

#[test]
fn ac4_gate_rate_saturates() {
    let p = reference_closed();
    let e = engine(&p, 1e-7);
    let mut base = operating_point();
    // ramps long enough to stay adiabatic at the strongest drive
    base.rise = ns(120.0);
    let opts = SweepOptions { scan: ScanOptions { step: ns(10.0), horizon: us(3.0) }, ..SweepOptions::default() };
    let amps: Vec<f64> = (1..=13).map(|k| 5.0 * k as f64).collect();
    let mut times = Vec::new();
    let mut zetas = Vec::new();
    for &a in &amps {
        let r = gate_time_point(&e, &base, ghz(5.43), mhz(a), &opts).unwrap();
        times.push(r.t_zzpi.map_or(f64::INFINITY, to_ns));
        zetas.push(driven_dressed_energies(&p, ghz(5.43), mhz(a)).unwrap().zeta.abs());
    }
    // slope of the numerical rate against Ω² beyond 10 MHz
    let slopes: Vec<f64> = (1..amps.len()).map(|i| (zetas[i] - zetas[i - 1]) / (amps[i].powi(2) - amps[i - 1].powi(2))).collect();
    let slope_ok = slopes[1..].windows(2).all(|w| w[1] <= w[0]);
    let monotone = times.windows(2).all(|w| w[1] <= w[0]);
    let n = times.len();
    let last_gain = (times[n - 2] - times[n - 1]) / times[n - 2];
    let curve = amps.iter().zip(&times).map(|(a, t)| format!("{a:.0}:{t:.0}")).collect::<Vec<_>>().join(" ");
    report(
        "AC4",
        slope_ok && monotone && last_gain < 0.02,
        &format!("t_zzpi (MHz:ns) {curve}; rate slope non-increasing {slope_ok}; last step gain {:.2}%", 100.0 * last_gain),
    );
}

fn ghz_3(w: f64) -> f64 {
    (to_ghz(w) * 1e3).round() / 1e3
}

#[test]
fn ac5_leakage_window_diverges() {
    let p = DeviceParams::window_device();
    let rep = map_condition_report(&p).unwrap();
    let (lo, hi) = rep.window;
    let edges_ok = (to_ghz(lo) - 5.443).abs() <= 0.005 && (to_ghz(hi) - 5.466).abs() <= 0.005;
    let e = engine(&p, 1e-7);
    let mut base = RamseyConfig::new(ghz(5.43), mhz(20.0));
    base.rise = ns(80.0);
    let grid: Vec<f64> = (0..=20).map(|i| ghz(5.40 + 0.005 * i as f64)).collect();
    let opts = SweepOptions { scan: ScanOptions { step: ns(20.0), horizon: us(3.0) }, ..SweepOptions::default() };
    let r = sweep_gate_time(&e, &base, &grid, &[mhz(20.0)], &opts).unwrap();
    let leaked: Vec<bool> = r.iter().map(|x| matches!(x.cause, Some(DivergenceCause::Leakage { .. }))).collect();
    let flagged: Vec<f64> = r.iter().zip(&leaked).filter(|(_, &l)| l).map(|(x, _)| ghz_3(x.omega_d)).collect();
    let slow: Vec<f64> = r.iter().filter(|x| x.cause == Some(DivergenceCause::Horizon)).map(|x| ghz_3(x.omega_d)).collect();
    let overlaps = flagged.iter().any(|&w| (5.443..=5.466).contains(&w));
    report(
        "AC5",
        edges_ok && overlaps && is_contiguous(&leaked),
        &format!(
            "model window [{:.4}, {:.4}] GHz; leakage-diverged {:?}; contiguous {}; beyond horizon (ζ ≈ 0) {:?}",
            to_ghz(lo),
            to_ghz(hi),
            flagged,
            is_contiguous(&leaked),
            slow
        ),
    );
}

#[test]
fn ac6_echo_suppresses_single_qubit_phase() {
    let e = engine(&reference_closed(), 1e-9);
    let grid: Vec<f64> = (0..5).map(|k| ns(200.0 + 100.0 * k as f64)).collect();
    let shift = |kind: RamseyKind| -> f64 {
        let phase = |om: f64| {
            let mut cfg = RamseyConfig::new(ghz(5.43), mhz(om));
            cfg.rise = ns(80.0);
            ramsey_scan(&e, kind, &cfg, &grid, &[InitLabel::ControlGround], &Readout::exact()).unwrap().remove(0).phase
        };
        let (a, b) = (phase(1.0), phase(2.0));
        a.iter().zip(&b).map(|(x, y)| (y - x).abs()).fold(0.0, f64::max)
    };
    let direct = shift(RamseyKind::Direct);
    let echo = shift(RamseyKind::Refocused);
    let ratio = direct / echo;
    report(
        "AC6",
        ratio >= 10.0,
        &format!("|00⟩ phase change Ω→2Ω (Ω = 1 MHz): direct {direct:.4} rad, refocused {echo:.4} rad, ratio {ratio:.1}"),
    );
}

#[test]
fn ac7_ideal_gate_tomography_is_exact() {
    let e = engine(&reference_closed(), 1e-9);
    let ideal = ideal_refocused_target();
    let r = qpt_pipeline(&e, &GateSpec::Unitary(ideal.clone()), &ideal, &QptOptions::default()).unwrap();
    let f = r.fidelity.average;
    report("AC7", (f - 1.0).abs() < 1e-8 && r.eta == 0.0, &format!("F_avg = {f:.12}, F_pro = {:.12}, eta = {:e}", r.fidelity.process, r.eta));
}

#[test]
fn ac8_calibrated_gate_fidelity_band() {
    let noisy = DeviceParams::reference_device();
    let closed = engine(&noisy.closed(), 1e-7);
    let gate = calibrate_refocused(&closed, &operating_point(), &CalibrationOptions::default()).unwrap();
    let ideal = ideal_refocused_target();
    let spec = GateSpec::Sequence(gate.sequence.clone());
    let rc = qpt_pipeline(&closed, &spec, &ideal, &QptOptions::default()).unwrap();
    let rn = qpt_pipeline(&engine(&noisy, 1e-7), &spec, &ideal, &QptOptions::default()).unwrap();
    let (fc, fnoisy) = (rc.fidelity.average, rn.fidelity.average);
    report(
        "AC8",
        (0.80..=0.92).contains(&fnoisy) && fc >= 0.98,
        &format!(
            "gate {:.1} ns; T1 = 6 µs, T2 = 4 µs: F_avg {fnoisy:.4} (F_pro {:.4}, eta {:.1e}); closed F_avg {fc:.4}",
            to_ns(gate.total_time),
            rn.fidelity.process,
            rn.eta
        ),
    );
}

#[test]
fn ac9_gate_times_match_target_scale() {
    let e = engine(&reference_closed(), 1e-7);
    let cfg = operating_point();
    let opts = ScanOptions { step: ns(10.0), horizon: us(3.0) };
    let direct = scan_conditional_phase(&e, RamseyKind::Direct, &cfg, &opts).unwrap().t_zzpi.map(to_ns);
    let refocused = scan_conditional_phase(&e, RamseyKind::Refocused, &cfg, &opts).unwrap().t_zzpi.map(to_ns);
    let (Some(d), Some(r)) = (direct, refocused) else {
        report("AC9", false, &format!("no π crossing: direct {direct:?}, refocused {refocused:?}"));
        return;
    };
    let within2 = |t: f64, target: f64| t >= target / 2.0 && t <= target * 2.0;
    let agree = (r - d).abs() / d.min(r) <= 0.10;
    report(
        "AC9",
        within2(d, 514.0) && within2(r, 510.0) && agree,
        &format!("direct {d:.1} ns (target 514), refocused {r:.1} ns (target 510), differ by {:.1}%", 100.0 * (r - d).abs() / d.min(r)),
    );
}

fn random_channel_ptm(rng: &mut ChaCha8Rng) -> Ptm {
    // Kraus operators from a random isometry C⁴ → C⁴ ⊗ C³
    let g = DMatrix::from_fn(12, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let gg = g.adjoint() * &g;
    let e = eigh(&gg);
    let inv_sqrt = &e.vectors * CMat::from_diagonal(&nalgebra::DVector::from_iterator(4, e.values.iter().map(|v| c(1.0 / v.sqrt(), 0.0)))) * e.vectors.adjoint();
    let v = g * inv_sqrt;
    let kraus: Vec<CMat> = (0..3).map(|k| v.rows(4 * k, 4).into_owned()).collect();
    Ptm::from_fn(16, 16, |i, j| {
        let out = kraus.iter().fold(CMat::zeros(4, 4), |acc, k| acc + k * pauli(j) * k.adjoint());
        0.25 * trace(&(pauli(i) * out)).re
    })
}

#[test]
fn ac10_invariant_suites() {
    let mut notes = Vec::new();
    let mut ok = true;

    // unitarity and trace preservation
    let p = DeviceParams::reference_device();
    let seq = PulseSequence::new()
        .rotate(Rotation::x(PI / 2.0, Target::Q2))
        .drive(DrivePulse::flat_top(Port::Q2, ghz(5.43), mhz(15.0), ns(200.0), ns(80.0)))
        .rotate(Rotation::x(PI, Target::Both));
    let (u, _) = engine(&p.closed(), 1e-9).propagate_unitary(&seq).unwrap();
    let en = engine(&p, 1e-9);
    let psi = en.label_state(Ket(1, 0));
    let rho = en.evolve_density(&seq, &(&psi * psi.adjoint()), &[]).unwrap().final_state;
    let (ue, te) = (unitarity_error(&u), (trace(&rho).re - 1.0).abs());
    ok &= ue < 1e-9 && te < 1e-8;
    notes.push(format!("unitarity {ue:.1e}, trace {te:.1e}"));

    // PTM ↔ Choi round trips
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut rt: f64 = 0.0;
    for _ in 0..20 {
        let r = random_channel_ptm(&mut rng);
        rt = rt.max((ptm_from_choi(&choi_from_ptm(&r)) - &r).abs().max());
    }
    ok &= rt < 1e-10;
    notes.push(format!("PTM↔Choi {rt:.1e}"));

    // lab frame against the rotating frame
    let pc = reference_closed();
    let model = TwoTransmon::new(&pc).unwrap();
    let e = engine(&pc, 1e-9);
    let pulse = DrivePulse::flat_top(Port::Q2, ghz(5.43), mhz(10.0), ns(200.0), ns(40.0));
    let mut frame: f64 = 0.0;
    let u_lab = lab_frame_propagator(&model, &pulse, 1e-6, 1_000_000).unwrap();
    for start in [Ket(0, 0), Ket(0, 1), Ket(1, 0), Ket(1, 1)] {
        let psi0 = e.label_state(start);
        let (psi, _, _) = e.evolve_state(&PulseSequence::new().drive(pulse), &psi0, &[]).unwrap();
        let rwa = e.lab_state(&psi, pulse.duration);
        let lab = &u_lab * e.lab_state(&psi0, 0.0);
        for k in [Ket(0, 0), Ket(0, 1), Ket(1, 0), Ket(1, 1)] {
            let i = model.basis.index(k).unwrap();
            frame = frame.max((rwa[i].norm_sqr() - lab[i].norm_sqr()).abs());
        }
    }
    ok &= frame < 0.02;
    notes.push(format!("lab vs RWA populations {frame:.1e}"));

    // truncation convergence
    let mut trunc: f64 = 0.0;
    for om in [5.0, 10.0, 20.0] {
        let z = driven_dressed_energies(&pc, ghz(5.43), mhz(om)).unwrap().zeta;
        let z1 = driven_dressed_energies(&pc.with_levels(pc.d1 + 1, pc.d2 + 1), ghz(5.43), mhz(om)).unwrap().zeta;
        trunc = trunc.max(((z1 - z) / z).abs());
    }
    ok &= trunc < 0.01;
    notes.push(format!("ζ shift for d+1 {:.2}%", 100.0 * trunc));

    report("AC10", ok, &notes.join("; "));
}
