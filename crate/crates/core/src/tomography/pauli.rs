//! Two-qubit Pauli basis, input-state frame and state tomography.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::linalg::{c, kron, trace, CMat, C64};
use crate::model::Basis;
use crate::protocols::Readout;

/// Pauli labels in matrix order: index 4i + j is σ_i ⊗ σ_j, Q1 first.
pub const PAULI_LABELS: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

pub fn sigma(k: usize) -> CMat {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let m = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("single-qubit Pauli index {k} out of range"),
    };
    CMat::from_row_slice(2, 2, &m)
}

/// σ_i ⊗ σ_j for index 4i + j in the basis |00⟩, |01⟩, |10⟩, |11⟩.
pub fn pauli(k: usize) -> CMat {
    kron(&sigma(k / 4), &sigma(k % 4))
}

pub fn pauli_basis() -> Vec<CMat> {
    (0..16).map(pauli).collect()
}

/// (Tr(P_k ρ))_k.
pub fn pauli_vector(rho: &CMat) -> [f64; 16] {
    let mut p = [0.0; 16];
    for (k, v) in p.iter_mut().enumerate() {
        *v = trace(&(pauli(k) * rho)).re;
    }
    p
}

/// ρ = ¼ Σ p_k P_k.
pub fn rho_from_pauli(p: &[f64; 16]) -> CMat {
    let mut rho = CMat::zeros(4, 4);
    for (k, &v) in p.iter().enumerate() {
        rho += pauli(k) * c(0.25 * v, 0.0);
    }
    rho
}

/// Single-qubit preparation pulses applied to |0⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Prep {
    I,
    XPi,
    XHalf,
    XMinusHalf,
    YHalf,
    YMinusHalf,
}

impl Prep {
    pub const ALL: [Prep; 6] = [Prep::I, Prep::XPi, Prep::XHalf, Prep::XMinusHalf, Prep::YHalf, Prep::YMinusHalf];

    pub fn label(self) -> &'static str {
        match self {
            Prep::I => "I",
            Prep::XPi => "X180",
            Prep::XHalf => "X90",
            Prep::XMinusHalf => "X-90",
            Prep::YHalf => "Y90",
            Prep::YMinusHalf => "Y-90",
        }
    }

    /// exp(−iθσ/2) of the pulse.
    pub fn unitary(self) -> CMat {
        let (axis, angle) = match self {
            Prep::I => (1, 0.0),
            Prep::XPi => (1, PI),
            Prep::XHalf => (1, FRAC_PI_2),
            Prep::XMinusHalf => (1, -FRAC_PI_2),
            Prep::YHalf => (2, FRAC_PI_2),
            Prep::YMinusHalf => (2, -FRAC_PI_2),
        };
        CMat::identity(2, 2) * c((0.5 * angle).cos(), 0.0) - sigma(axis) * c(0.0, (0.5 * angle).sin())
    }
}

/// One of the 36 product input states.
#[derive(Clone, Debug, PartialEq)]
pub struct InputState {
    pub preps: (Prep, Prep),
    /// 4×4 density matrix.
    pub rho: CMat,
}

impl InputState {
    pub fn label(&self) -> String {
        format!("{}⊗{}", self.preps.0.label(), self.preps.1.label())
    }
}

/// All 6×6 preparation pairs applied to |00⟩, Q1 varying slowest.
pub fn prepare_input_states() -> Vec<InputState> {
    let mut ground = CMat::zeros(2, 2);
    ground[(0, 0)] = c(1.0, 0.0);
    let mut out = Vec::with_capacity(36);
    for a in Prep::ALL {
        for b in Prep::ALL {
            let ua = a.unitary();
            let ub = b.unitary();
            let ra = &ua * &ground * ua.adjoint();
            let rb = &ub * &ground * ub.adjoint();
            out.push(InputState { preps: (a, b), rho: kron(&ra, &rb) });
        }
    }
    out
}

/// Embeds a 4×4 computational operator into the truncated space.
pub fn embed(op: &CMat, basis: Basis) -> CMat {
    let idx = basis.computational();
    let mut m = CMat::zeros(basis.dim(), basis.dim());
    for i in 0..4 {
        for j in 0..4 {
            m[(idx[i], idx[j])] = op[(i, j)];
        }
    }
    m
}

/// Restriction of a truncated-space density matrix to the qubit subspace,
/// renormalized, with the leaked population.
pub fn project_qubit_subspace(rho: &CMat, basis: Basis) -> (CMat, f64) {
    let idx = basis.computational();
    let block = CMat::from_fn(4, 4, |i, j| rho[(idx[i], idx[j])]);
    let kept = trace(&block).re;
    let total = trace(rho).re;
    let leak = (total - kept).max(0.0);
    let norm = if kept > 0.0 { block / c(kept, 0.0) } else { block };
    (norm, leak)
}

/// Default leakage above which a tomography warning is attached.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimate {
    /// Linear-inversion estimate; not forced to be positive.
    pub rho: CMat,
    pub expectations: [f64; 16],
    pub leakage: f64,
    pub warning: Option<String>,
}

/// Linear-inversion state tomography from the 15 Pauli expectations. With
/// shots, each ±1 Pauli outcome is sampled binomially.
pub fn state_tomography(rho: &CMat, readout: &Readout, stream: u64) -> StateEstimate {
    let exact = pauli_vector(rho);
    let mut e = [0.0; 16];
    e[0] = 1.0;
    for k in 1..16 {
        let p_plus = 0.5 * (1.0 + exact[k]);
        e[k] = 2.0 * readout.sample(p_plus, stream.wrapping_mul(16).wrapping_add(k as u64)) - 1.0;
    }
    StateEstimate { rho: rho_from_pauli(&e), expectations: e, leakage: 0.0, warning: None }
}

/// State tomography of a truncated-space state: leakage is projected out,
/// reported and flagged above `threshold`.
pub fn state_tomography_truncated(rho: &CMat, basis: Basis, readout: &Readout, stream: u64, threshold: f64) -> StateEstimate {
    let (q, leak) = project_qubit_subspace(rho, basis);
    let mut est = state_tomography(&q, readout, stream);
    est.leakage = leak;
    if leak > threshold {
        est.warning = Some(format!("leakage {leak:.4} exceeds {threshold:.4}; estimate renormalized on the qubit subspace"));
    }
    est
}

/// Expectation value Tr(P ρ) as a complex number.
pub fn expectation(p: &CMat, rho: &CMat) -> C64 {
    trace(&(p * rho))
}
