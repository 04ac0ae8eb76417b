//! Process tomography: linear-inversion PTM, Choi conversion, physicality
//! projection and gate fidelities.

use nalgebra::DMatrix;

use super::pauli::{embed, pauli, pauli_vector, prepare_input_states, state_tomography_truncated, InputState, PAULI_LABELS};
use crate::dynamics::{Engine, PulseSequence};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, frobenius, hermitian_part, kron, trace, CMat};
use crate::protocols::Readout;

/// 16×16 real Pauli transfer matrix, R_kl = ¼ Tr(P_k E(P_l)).
pub type Ptm = DMatrix<f64>;

/// PTM of ρ ↦ UρU† for a 4×4 unitary.
pub fn ptm_from_unitary(u: &CMat) -> Ptm {
    let ud = u.adjoint();
    let images: Vec<CMat> = (0..16).map(|l| u * pauli(l) * &ud).collect();
    Ptm::from_fn(16, 16, |k, l| 0.25 * trace(&(pauli(k) * &images[l])).re)
}

/// Least-squares PTM from input and output Pauli vectors, R = P_out·P_in⁺.
/// Fails when the inputs do not span the 16-dimensional operator space.
pub fn ptm_linear_inversion(inputs: &[CMat], outputs: &[CMat]) -> Result<Ptm> {
    if inputs.len() != outputs.len() {
        return Err(Error::InvalidParams(vec![format!(
            "{} tomography inputs but {} outputs",
            inputs.len(),
            outputs.len()
        )]));
    }
    let n = inputs.len();
    let p_in = DMatrix::from_fn(16, n, |k, m| pauli_vector(&inputs[m])[k]);
    let p_out = DMatrix::from_fn(16, n, |k, m| pauli_vector(&outputs[m])[k]);
    let svd = p_in.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < 16 {
        let u = svd.u.as_ref().expect("left vectors requested");
        let mut dirs = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > cutoff {
                continue;
            }
            let col = u.column(i);
            let terms: Vec<String> = (0..16)
                .filter(|&k| col[k].abs() > 1e-6)
                .map(|k| format!("{:+.3}·{}", col[k], PAULI_LABELS[k]))
                .collect();
            dirs.push(format!("[{}]", terms.join(" ")));
        }
        return Err(Error::RankDeficient { rank, directions: dirs.join(", ") });
    }
    let gram = &p_in * p_in.transpose();
    let inv = gram.try_inverse().ok_or(Error::RankDeficient { rank, directions: "singular Gram matrix".into() })?;
    Ok(p_out * p_in.transpose() * inv)
}

fn transpose(m: &CMat) -> CMat {
    m.transpose()
}

/// Choi matrix (output ⊗ input), unit trace: (1/16) Σ R_kl P_k ⊗ P_lᵀ.
pub fn choi_from_ptm(r: &Ptm) -> CMat {
    let mut out = CMat::zeros(16, 16);
    let paulis: Vec<CMat> = (0..16).map(pauli).collect();
    let pt: Vec<CMat> = paulis.iter().map(transpose).collect();
    for k in 0..16 {
        for l in 0..16 {
            let v = r[(k, l)];
            if v != 0.0 {
                out += kron(&paulis[k], &pt[l]) * c(v / 16.0, 0.0);
            }
        }
    }
    out
}

/// Inverse of [`choi_from_ptm`]: R_kl = Tr(Λ (P_k ⊗ P_lᵀ)).
pub fn ptm_from_choi(choi: &CMat) -> Ptm {
    let paulis: Vec<CMat> = (0..16).map(pauli).collect();
    let pt: Vec<CMat> = paulis.iter().map(transpose).collect();
    Ptm::from_fn(16, 16, |k, l| trace(&(choi * kron(&paulis[k], &pt[l]))).re)
}

/// Trace over the output (first) factor of a 16×16 Choi matrix.
pub fn trace_output(choi: &CMat) -> CMat {
    CMat::from_fn(4, 4, |i, j| (0..4).map(|k| choi[(k * 4 + i, k * 4 + j)]).sum())
}

fn project_tp(x: &CMat) -> CMat {
    let excess = trace_output(x) - CMat::identity(4, 4) * c(0.25, 0.0);
    x - kron(&(CMat::identity(4, 4) * c(0.25, 0.0)), &excess)
}

fn project_psd(x: &CMat) -> CMat {
    let mut e = eigh(&hermitian_part(x));
    for v in e.values.iter_mut() {
        *v = v.max(0.0);
    }
    e.reconstruct()
}

/// Sum of the negative eigenvalues of the Hermitian part of a Choi matrix.
/// Eigenvalues of magnitude below this are round-off and do not count as
/// negative.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

pub fn negativity(choi: &CMat) -> f64 {
    eigh(&hermitian_part(choi)).values.iter().filter(|&&v| v < -EIGENVALUE_FLOOR).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { tol: 1e-10, max_iterations: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub ptm: Ptm,
    pub choi: CMat,
    /// Sum of negative eigenvalues of the unprojected Choi matrix (≤ 0).
    pub eta: f64,
    pub iterations: usize,
}

/// Nearest completely positive, trace-preserving map in Choi space, by
/// Dykstra alternation between the PSD cone and the TP affine set.
pub fn physicality_projection(r: &Ptm, opts: &ProjectionOptions) -> Result<Projection> {
    let raw = hermitian_part(&choi_from_ptm(r));
    let eta = negativity(&raw);
    let psd_tol = 1e-9;
    let mut x = project_tp(&raw);
    if eigh(&x).values[0] >= -psd_tol * 0.1 {
        return Ok(Projection { ptm: ptm_from_choi(&x), choi: x, eta, iterations: 0 });
    }
    let mut p = CMat::zeros(16, 16);
    let mut q = CMat::zeros(16, 16);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let x_new = project_tp(&(&y + &q));
        q = &y + &q - &x_new;
        let step = frobenius(&(&x_new - &x));
        x = x_new;
        if step < opts.tol {
            let min = eigh(&x).values[0];
            residual = step.max(-min);
            if min >= -psd_tol {
                let x = hermitian_part(&x);
                return Ok(Projection { ptm: ptm_from_choi(&x), choi: x, eta, iterations: it });
            }
        } else {
            residual = step;
        }
    }
    Err(Error::ProjectionNotConverged { iterations: opts.max_iterations, residual })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fidelity {
    /// (Tr(R_idealᵀ R) + 4) / 20.
    pub average: f64,
    /// Tr(R_idealᵀ R) / 16.
    pub process: f64,
}

pub fn gate_fidelity(r: &Ptm, r_ideal: &Ptm) -> Fidelity {
    let overlap = (r_ideal.transpose() * r).trace();
    Fidelity { average: (overlap + 4.0) / 20.0, process: overlap / 16.0 }
}

/// What process tomography is run on.
#[derive(Clone, Debug)]
pub enum GateSpec {
    /// 4×4 computational unitary, applied exactly.
    Unitary(CMat),
    /// Pulse sequence, propagated by the engine (open system when the
    /// device has noise and `open_system` is set).
    Sequence(PulseSequence),
}

#[derive(Clone, Debug)]
pub struct QptOptions {
    pub readout: Readout,
    pub open_system: bool,
    pub leakage_threshold: f64,
    pub projection: ProjectionOptions,
}

impl Default for QptOptions {
    fn default() -> Self {
        QptOptions {
            readout: Readout::exact(),
            open_system: true,
            leakage_threshold: super::pauli::DEFAULT_LEAKAGE_THRESHOLD,
            projection: ProjectionOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QptResult {
    pub inputs: Vec<InputState>,
    pub ptm_raw: Ptm,
    pub ptm: Ptm,
    pub choi_raw: CMat,
    pub choi: CMat,
    pub eta: f64,
    pub fidelity_raw: Fidelity,
    pub fidelity: Fidelity,
    /// Largest leaked population over the input states.
    pub max_leakage: f64,
    pub warnings: Vec<String>,
}

/// Full tomography pipeline: 36 inputs, state tomography of each output,
/// linear inversion, projection and fidelity against `ideal`.
pub fn qpt_pipeline(engine: &Engine, gate: &GateSpec, ideal: &CMat, opts: &QptOptions) -> Result<QptResult> {
    let inputs = prepare_input_states();
    let rhos: Vec<CMat> = inputs.iter().map(|s| s.rho.clone()).collect();
    let basis = engine.model().basis;
    let outputs_full: Vec<CMat> = match gate {
        GateSpec::Unitary(u) => {
            let full = embed(u, basis);
            rhos.iter().map(|r| embed(r, basis)).map(|r| &full * r * full.adjoint()).collect()
        }
        GateSpec::Sequence(seq) => {
            let embedded: Vec<CMat> = rhos.iter().map(|r| embed(r, basis)).collect();
            if opts.open_system && engine.model().params.has_noise() {
                engine.apply_channel(seq, &embedded)?.0
            } else {
                let (u, _) = engine.propagate_unitary(seq)?;
                embedded.iter().map(|r| &u * r * u.adjoint()).collect()
            }
        }
    };
    let mut warnings = Vec::new();
    let mut max_leakage: f64 = 0.0;
    let mut measured = Vec::with_capacity(outputs_full.len());
    for (n, (rho, inp)) in outputs_full.iter().zip(&inputs).enumerate() {
        let est = state_tomography_truncated(rho, basis, &opts.readout, n as u64, opts.leakage_threshold);
        max_leakage = max_leakage.max(est.leakage);
        if let Some(w) = est.warning {
            warnings.push(format!("input {}: {w}", inp.label()));
        }
        measured.push(est.rho);
    }
    let ptm_raw = ptm_linear_inversion(&rhos, &measured)?;
    let choi_raw = choi_from_ptm(&ptm_raw);
    let proj = physicality_projection(&ptm_raw, &opts.projection)?;
    let r_ideal = ptm_from_unitary(ideal);
    Ok(QptResult {
        inputs,
        fidelity_raw: gate_fidelity(&ptm_raw, &r_ideal),
        fidelity: gate_fidelity(&proj.ptm, &r_ideal),
        ptm_raw,
        ptm: proj.ptm,
        choi_raw,
        choi: proj.choi,
        eta: proj.eta,
        max_leakage,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use proptest::prelude::*;

    fn cnot() -> CMat {
        let mut m = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(i, j)] = c(1.0, 0.0);
        }
        m
    }

    fn depolarizing_ptm(p: f64) -> Ptm {
        Ptm::from_fn(16, 16, |k, l| if k == l { if k == 0 { 1.0 } else { 1.0 - p } } else { 0.0 })
    }

    #[test]
    fn identity_ptm_and_choi() {
        let r = ptm_from_unitary(&CMat::identity(4, 4));
        assert!((r - Ptm::identity(16, 16)).abs().max() < 1e-14);
        let choi = choi_from_ptm(&Ptm::identity(16, 16));
        assert!((trace(&choi).re - 1.0).abs() < 1e-14);
        // maximally entangled projector
        let purity = trace(&(&choi * &choi)).re;
        assert!((purity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_round_trip() {
        let r = ptm_from_unitary(&cnot());
        let back = ptm_from_choi(&choi_from_ptm(&r));
        assert!((back - &r).abs().max() < 1e-13);
    }

    #[test]
    fn cnot_maps_xi_to_xx() {
        let r = ptm_from_unitary(&cnot());
        assert!((r[(5, 4)] - 1.0).abs() < 1e-14);
        assert!((r[(12, 12)] - 1.0).abs() < 1e-14);
        assert!((r[(15, 3)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_values() {
        let id = Ptm::identity(16, 16);
        let f = gate_fidelity(&id, &id);
        assert!((f.average - 1.0).abs() < 1e-15 && (f.process - 1.0).abs() < 1e-15);
        // completely depolarizing: process 1/16, average (1+4)/20
        let f = gate_fidelity(&depolarizing_ptm(1.0), &id);
        assert!((f.process - 1.0 / 16.0).abs() < 1e-15);
        assert!((f.average - 0.25).abs() < 1e-15);
        // F_avg = (d·F_pro + 1)/(d + 1)
        let f = gate_fidelity(&depolarizing_ptm(0.3), &id);
        assert!((f.average - (4.0 * f.process + 1.0) / 5.0).abs() < 1e-14);
    }

    #[test]
    fn unitary_pipeline_is_exact() {
        let m = crate::model::TwoTransmon::new(&crate::model::DeviceParams::reference_device().closed()).unwrap();
        let e = Engine::new(&m);
        let r = qpt_pipeline(&e, &GateSpec::Unitary(cnot()), &cnot(), &QptOptions::default()).unwrap();
        assert!((r.ptm_raw.clone() - ptm_from_unitary(&cnot())).abs().max() < 1e-12);
        assert!((r.fidelity.average - 1.0).abs() < 1e-10);
        assert!(r.eta.abs() < 1e-10);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn rank_deficient_frame_is_reported() {
        let s = prepare_input_states();
        let few: Vec<CMat> = s.iter().take(6).map(|x| x.rho.clone()).collect();
        match ptm_linear_inversion(&few, &few) {
            Err(Error::RankDeficient { rank, directions }) => {
                assert!(rank < 16);
                assert!(!directions.is_empty());
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn projection_fixes_unphysical_map() {
        // overshooting depolarizing strength gives a non-CP map
        let r = depolarizing_ptm(-0.1);
        let pr = physicality_projection(&r, &ProjectionOptions::default()).unwrap();
        assert!(pr.eta < -1e-3);
        assert!(eigh(&pr.choi).values[0] > -1e-9);
        let tp = trace_output(&pr.choi);
        assert!(max_abs_diff(&tp, &(CMat::identity(4, 4) * c(0.25, 0.0))) < 1e-9);
        assert!((pr.ptm.clone() - Ptm::identity(16, 16)).abs().max() < 1e-6);
    }

    fn zz_quarter() -> CMat {
        let ph = [-1.0, 1.0, 1.0, -1.0];
        CMat::from_fn(4, 4, |i, j| if i == j { crate::linalg::C64::from_polar(1.0, ph[i] * std::f64::consts::FRAC_PI_4) } else { c(0.0, 0.0) })
    }

    fn random_unitary(seed: &[f64]) -> CMat {
        // QR of a seeded complex matrix
        let m = CMat::from_fn(4, 4, |i, j| c(seed[(4 * i + j) % seed.len()] + i as f64 * 0.31, seed[(5 * i + 3 * j + 1) % seed.len()] - j as f64 * 0.17));
        m.qr().q()
    }

    #[test]
    fn zz_conjugation_of_paulis() {
        let r = ptm_from_unitary(&zz_quarter());
        // XI → YZ, IX → ZY, ZI and IZ fixed
        assert!((r[(11, 4)] - 1.0).abs() < 1e-14);
        assert!((r[(14, 1)] - 1.0).abs() < 1e-14);
        assert!((r[(12, 12)] - 1.0).abs() < 1e-14);
        assert!((r[(3, 3)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ideal_target_against_identity() {
        // the target is off-diagonal, so |Tr U|² = 0 and only II survives
        let target = crate::protocols::ideal_refocused_target();
        let f = gate_fidelity(&Ptm::identity(16, 16), &ptm_from_unitary(&target));
        assert!((f.average - 0.2).abs() < 1e-14);
        assert!(f.process.abs() < 1e-14);
    }

    #[test]
    fn injected_negative_eigenvalue_is_recovered() {
        // mix the identity Choi with a negative multiple of an orthogonal
        // Bell projector so the spectrum is {1.01, −0.01, 0, ...}
        let choi = choi_from_ptm(&Ptm::identity(16, 16));
        let x = ptm_from_unitary(&kron(&super::super::pauli::sigma(1), &CMat::identity(2, 2)));
        let other = choi_from_ptm(&x);
        let raw = choi * c(1.01, 0.0) - other * c(0.01, 0.0);
        let r = ptm_from_choi(&raw);
        let pr = physicality_projection(&r, &ProjectionOptions::default()).unwrap();
        assert!((pr.eta + 0.01).abs() < 1e-12, "{}", pr.eta);
    }

    #[test]
    fn random_unitary_ptm_is_orthogonal() {
        let u = random_unitary(&[0.3, -1.2, 0.8, 0.1, 2.0, -0.4, 0.9]);
        let r = ptm_from_unitary(&u);
        assert!((r.transpose() * &r - Ptm::identity(16, 16)).abs().max() < 1e-8);
        // oracle: channel applied to each Pauli directly
        for l in 0..16 {
            let img = &u * pauli(l) * u.adjoint();
            for k in 0..16 {
                let v = 0.25 * trace(&(pauli(k) * &img)).re;
                assert!((v - r[(k, l)]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn physical_maps_are_left_alone(p in 0.0f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let u = CMat::from_fn(4, 4, |i, j| if i == j { crate::linalg::C64::from_polar(1.0, [0.0, a, b, a + b + 0.3][i]) } else { c(0.0, 0.0) });
            let r = depolarizing_ptm(p) * ptm_from_unitary(&(cnot() * u));
            let pr = physicality_projection(&r, &ProjectionOptions::default()).unwrap();
            prop_assert!(pr.eta.abs() < 1e-10);
            prop_assert!((pr.ptm - &r).abs().max() < 1e-9);
        }

        #[test]
        fn noiseless_unitary_inverts_exactly(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let u = CMat::from_fn(4, 4, |i, j| if i == j { crate::linalg::C64::from_polar(1.0, [0.0, a, b, 0.7][i]) } else { c(0.0, 0.0) });
            let g = cnot() * u;
            let ins: Vec<CMat> = prepare_input_states().into_iter().map(|s| s.rho).collect();
            let outs: Vec<CMat> = ins.iter().map(|r| &g * r * g.adjoint()).collect();
            let r = ptm_linear_inversion(&ins, &outs).unwrap();
            prop_assert!((r - ptm_from_unitary(&g)).abs().max() < 1e-10);
        }

        #[test]
        fn fidelity_invariant_under_pauli_conjugation(k in 0usize..16, p in 0.0f64..0.5, a in -3.0f64..3.0) {
            let u = CMat::from_fn(4, 4, |i, j| if i == j { crate::linalg::C64::from_polar(1.0, [0.0, a, 0.4, -a][i]) } else { c(0.0, 0.0) });
            let ideal = ptm_from_unitary(&zz_quarter());
            let r = depolarizing_ptm(p) * ptm_from_unitary(&(zz_quarter() * u));
            let q = ptm_from_unitary(&pauli(k));
            let f0 = gate_fidelity(&r, &ideal);
            let f1 = gate_fidelity(&(&q * &r * q.transpose()), &(&q * &ideal * q.transpose()));
            prop_assert!((f0.average - f1.average).abs() < 1e-12);
        }

        #[test]
        fn projected_maps_are_tp(p in -0.2f64..0.3, off in -0.05f64..0.05, k in 1usize..16) {
            let mut r = depolarizing_ptm(p);
            r[(k, 0)] += off;
            r[(0, k)] += off;
            let pr = physicality_projection(&r, &ProjectionOptions::default()).unwrap();
            prop_assert!((pr.ptm[(0, 0)] - 1.0).abs() < 1e-8);
            for l in 1..16 {
                prop_assert!(pr.ptm[(0, l)].abs() < 1e-8);
            }
            // ‖col₀‖² = 4·Tr(E(I/4)²) ≤ 4
            prop_assert!(pr.ptm.column(0).norm() <= 2.0 + 1e-8);
            prop_assert!(eigh(&pr.choi).values[0] > -1e-9);
            let f = gate_fidelity(&pr.ptm, &Ptm::identity(16, 16));
            prop_assert!(f.average >= -1e-8 && f.average <= 1.0 + 1e-8, "{}", f.average);
        }

        #[test]
        fn choi_round_trip_random_channels(p in 0.0f64..1.0, s0 in -2.0f64..2.0, s1 in -2.0f64..2.0) {
            let u = random_unitary(&[s0, s1, 0.7, -0.2, s0 * s1]);
            let r = depolarizing_ptm(p) * ptm_from_unitary(&u);
            let back = ptm_from_choi(&choi_from_ptm(&r));
            prop_assert!((back - &r).abs().max() < 1e-10);
        }
    }
}
