//! Two-transmon Duffing model and its closed-form rate expressions.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, identity, kron, CMat, ZERO};
use crate::units::{ghz, khz, mhz, us};

/// Largest product-space dimension accepted by default.
pub const DEFAULT_MAX_DIM: usize = 64;

/// Default floor below which a detuning is treated as resonant.
pub fn default_resonance_floor() -> f64 {
    khz(100.0)
}

/// Relaxation and coherence times of one transmon (seconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coherence {
    pub t1: f64,
    pub t2: f64,
}

impl Coherence {
    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1
    }

    /// Pure dephasing rate 1/T_φ = 1/T2 − 1/(2 T1).
    pub fn gamma_phi(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }
}

/// Device parameters in internal units (rad/s, s).
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub j: f64,
    pub d1: usize,
    pub d2: usize,
    pub coherence_q1: Option<Coherence>,
    pub coherence_q2: Option<Coherence>,
}

impl DeviceParams {
    /// 5.166 / 5.668 GHz, −220 MHz anharmonicities, J/2π = 9 MHz,
    /// T1 = 6 µs, T2 = 4 µs on both transmons, d1 = 3, d2 = 5.
    pub fn reference_device() -> Self {
        let coh = Coherence { t1: us(6.0), t2: us(4.0) };
        DeviceParams {
            omega1: ghz(5.166),
            omega2: ghz(5.668),
            delta1: mhz(-220.0),
            delta2: mhz(-220.0),
            j: mhz(9.0),
            d1: 3,
            d2: 5,
            coherence_q1: Some(coh),
            coherence_q2: Some(coh),
        }
    }

    /// A device tuned to exact |12⟩/|03⟩ degeneracy whose dressed
    /// |11⟩→|12⟩,|03⟩ transitions sit near 5.443 and 5.466 GHz.
    pub fn window_device() -> Self {
        DeviceParams {
            omega1: ghz(5.2345),
            omega2: ghz(5.6745),
            j: mhz(8.0),
            ..Self::reference_device().closed()
        }
    }

    /// Copy with coherence times removed.
    pub fn closed(&self) -> Self {
        DeviceParams {
            coherence_q1: None,
            coherence_q2: None,
            ..self.clone()
        }
    }

    pub fn with_levels(&self, d1: usize, d2: usize) -> Self {
        DeviceParams { d1, d2, ..self.clone() }
    }

    pub fn with_j(&self, j: f64) -> Self {
        DeviceParams { j, ..self.clone() }
    }

    pub fn has_noise(&self) -> bool {
        self.coherence_q1.is_some() || self.coherence_q2.is_some()
    }

    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    /// All violated invariants, in a fixed order.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be a positive finite frequency"));
            }
        }
        if self.d1 < 2 {
            out.push(format!("d1 = {} but at least 2 levels are required", self.d1));
        }
        if self.d2 < 2 {
            out.push(format!("d2 = {} but at least 2 levels are required", self.d2));
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(v.is_finite() && v < 0.0) {
                out.push(format!("{name} must be negative (transmon anharmonicity)"));
            }
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            out.push("J must be positive".to_string());
        }
        for (name, coh) in [("q1", self.coherence_q1), ("q2", self.coherence_q2)] {
            if let Some(coh) = coh {
                if !(coh.t1.is_finite() && coh.t1 > 0.0) {
                    out.push(format!("T1_{name} must be positive"));
                }
                if !(coh.t2.is_finite() && coh.t2 > 0.0) {
                    out.push(format!("T2_{name} must be positive"));
                }
                if coh.t2 > 2.0 * coh.t1 {
                    out.push(format!("T2_{name} exceeds 2·T1_{name}"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(issues))
        }
    }

    /// Issues specific to MAP analysis (Q2 must hold |03⟩).
    pub fn map_issues(&self) -> Vec<String> {
        if self.d2 < 4 {
            vec![format!(
                "d2 = {} cannot represent the |03⟩ state required by the MAP resonance (need d2 ≥ 4)",
                self.d2
            )]
        } else {
            Vec::new()
        }
    }

    pub fn validate_map(&self) -> Result<()> {
        let mut issues = self.issues();
        issues.extend(self.map_issues());
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(issues))
        }
    }

    /// Bare Duffing energy of |nm⟩ (valid beyond the truncation).
    pub fn bare_energy(&self, k: Ket) -> f64 {
        let (n, m) = (k.0 as f64, k.1 as f64);
        n * self.omega1 + 0.5 * self.delta1 * n * (n - 1.0) + m * self.omega2 + 0.5 * self.delta2 * m * (m - 1.0)
    }
}

/// Product-basis ket |n m⟩: n excitations in Q1, m in Q2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ket(pub usize, pub usize);

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}{}⟩", self.0, self.1)
    }
}

/// Row-major product basis: index(n, m) = n·d2 + m.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Basis {
    pub d1: usize,
    pub d2: usize,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn index(&self, k: Ket) -> Option<usize> {
        (k.0 < self.d1 && k.1 < self.d2).then(|| k.0 * self.d2 + k.1)
    }

    pub fn ket(&self, i: usize) -> Ket {
        Ket(i / self.d2, i % self.d2)
    }

    /// Indices of |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn computational(&self) -> [usize; 4] {
        [0, 1, self.d2, self.d2 + 1]
    }
}

/// Dense operator on the two-transmon product space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub basis: Basis,
    pub data: CMat,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn entry(&self, bra: Ket, ket: Ket) -> crate::linalg::C64 {
        match (self.basis.index(bra), self.basis.index(ket)) {
            (Some(i), Some(j)) => self.data[(i, j)],
            _ => ZERO,
        }
    }
}

/// Single-mode lowering operator truncated to d levels.
pub fn lowering(d: usize) -> CMat {
    let mut a = CMat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Operators of the truncated two-transmon system.
#[derive(Clone, Debug)]
pub struct TwoTransmon {
    pub params: DeviceParams,
    pub basis: Basis,
    pub a1: CMat,
    pub a2: CMat,
    pub n1: CMat,
    pub n2: CMat,
    pub h_static: OperatorMatrix,
}

impl TwoTransmon {
    pub fn new(params: &DeviceParams) -> Result<Self> {
        Self::with_max_dim(params, DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(params: &DeviceParams, max_dim: usize) -> Result<Self> {
        params.validate()?;
        let basis = Basis { d1: params.d1, d2: params.d2 };
        if basis.dim() > max_dim {
            return Err(Error::DimensionTooLarge { dim: basis.dim(), limit: max_dim });
        }
        let a1 = kron(&lowering(params.d1), &identity(params.d2));
        let a2 = kron(&identity(params.d1), &lowering(params.d2));
        let n1 = a1.adjoint() * &a1;
        let n2 = a2.adjoint() * &a2;
        let dim = basis.dim();
        let id = identity(dim);
        let r = |x: f64| c(x, 0.0);
        let h = &n1 * r(params.omega1)
            + (&n1 * (&n1 - &id)) * r(0.5 * params.delta1)
            + &n2 * r(params.omega2)
            + (&n2 * (&n2 - &id)) * r(0.5 * params.delta2)
            + (a1.adjoint() * &a2 + &a1 * a2.adjoint()) * r(params.j);
        Ok(TwoTransmon {
            params: params.clone(),
            basis,
            a1,
            a2,
            n1,
            n2,
            h_static: OperatorMatrix { basis, data: h },
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Diagonal of n1 and n2 in the product basis.
    pub fn occupations(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        ((0..d).map(|i| self.basis.ket(i).0 as f64).collect(), (0..d).map(|i| self.basis.ket(i).1 as f64).collect())
    }

    pub fn level_pair(&self, upper: Ket, lower: Ket) -> LevelPair {
        LevelPair {
            upper,
            lower,
            matrix_element: self.h_static.entry(upper, lower).re,
            detuning: self.params.bare_energy(upper) - self.params.bare_energy(lower),
        }
    }

    pub fn dressed(&self) -> DressedSpectrum {
        DressedSpectrum::label(&self.h_static.data, self.basis)
    }
}

/// Static Duffing Hamiltonian H = Σ ωᵢnᵢ + (δᵢ/2)nᵢ(nᵢ−1) + J(a₁†a₂ + a₁a₂†).
pub fn build_static_hamiltonian(params: &DeviceParams) -> Result<OperatorMatrix> {
    Ok(TwoTransmon::new(params)?.h_static)
}

/// Coupling element and bare detuning between two product states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelPair {
    pub upper: Ket,
    pub lower: Ket,
    /// ⟨upper|H|lower⟩; zero when either level lies outside the truncation.
    pub matrix_element: f64,
    /// E(upper) − E(lower) of the bare Duffing levels.
    pub detuning: f64,
}

/// Half-splitting ξ = ½(√(4J²+Δ²) + Δ) of two exchange-coupled levels.
///
/// Equals the upper dressed energy measured from the lower bare level of
/// the pair (|03⟩ for Δ = E12 − E03).
pub fn splitting_xi(j12_03: f64, delta12_03: f64) -> f64 {
    let root = (2.0 * j12_03).hypot(delta12_03);
    if delta12_03 >= 0.0 {
        0.5 * (root + delta12_03)
    } else if root == 0.0 {
        0.0
    } else {
        2.0 * j12_03 * j12_03 / (root - delta12_03)
    }
}

/// Terms of the second-order conditional-phase rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaTerms {
    pub zeta0: f64,
    pub zeta2: f64,
    /// Δ_d = Δ12,11 − ω_d.
    pub delta_d: f64,
    pub zeta: f64,
}

pub fn zeta_perturbative(params: &DeviceParams, omega_d: f64, omega: f64) -> Result<f64> {
    Ok(zeta_terms(params, omega_d, omega, default_resonance_floor())?.zeta)
}

/// ζ ≈ ζ₀ + Ω²/(2Δ_d)·ζ₂ with every coupling and detuning taken from the
/// Hamiltonian of the same parameters.
pub fn zeta_terms(params: &DeviceParams, omega_d: f64, omega: f64, floor: f64) -> Result<ZetaTerms> {
    let model = TwoTransmon::new(params)?;
    let p20 = model.level_pair(Ket(1, 1), Ket(2, 0));
    let p02 = model.level_pair(Ket(1, 1), Ket(0, 2));
    let p1203 = model.level_pair(Ket(1, 2), Ket(0, 3));
    let p1211 = model.level_pair(Ket(1, 2), Ket(1, 1));
    let p0311 = model.level_pair(Ket(0, 3), Ket(1, 1));

    let inv = |x: f64| if x == 0.0 { 0.0 } else { 1.0 / x };
    let zeta0 = p20.matrix_element * p02.matrix_element * (inv(p20.detuning) + inv(p02.detuning));

    let delta_d = p1211.detuning - omega_d;
    if delta_d.abs() < floor {
        return Err(Error::Resonance { what: "drive detuning Δ_d", detuning: delta_d, floor });
    }
    let g2 = p1203.matrix_element * p1203.matrix_element;
    let (a, b) = (p1211.detuning, p0311.detuning);
    // roots in ω_d of J² + Δ_d(ω_d − Δ03,11)
    let centre = 0.5 * (a + b);
    let half = (0.5 * (a - b)).hypot(p1203.matrix_element);
    let nearest = (omega_d - centre - half).abs().min((omega_d - centre + half).abs());
    if nearest < floor {
        return Err(Error::Resonance { what: "ζ₂ denominator", detuning: nearest, floor });
    }
    let zeta2 = g2 / (g2 + delta_d * (omega_d - b));
    Ok(ZetaTerms {
        zeta0,
        zeta2,
        delta_d,
        zeta: zeta0 + omega * omega / (2.0 * delta_d) * zeta2,
    })
}

/// Eigenstates of a Hamiltonian labeled by maximum overlap with product
/// states.
#[derive(Clone, Debug)]
pub struct DressedSpectrum {
    pub basis: Basis,
    /// energies[i] is the energy of the eigenstate labeled by basis state i.
    pub energies: Vec<f64>,
    /// Column i is the eigenstate labeled by basis state i.
    pub vectors: CMat,
    /// |⟨i|ψ_i⟩|² for each label.
    pub overlaps: Vec<f64>,
}

impl DressedSpectrum {
    /// Greedy assignment: repeatedly take the largest remaining overlap.
    pub fn label(h: &CMat, basis: Basis) -> Self {
        let e = eigh(h);
        let assign = assign_max_overlap(&identity(basis.dim()), &e.vectors);
        let n = basis.dim();
        let mut energies = vec![0.0; n];
        let mut vectors = CMat::zeros(n, n);
        let mut overlaps = vec![0.0; n];
        for (label, &col) in assign.iter().enumerate() {
            energies[label] = e.values[col];
            vectors.set_column(label, &e.vectors.column(col));
            overlaps[label] = e.vectors[(label, col)].norm_sqr();
        }
        DressedSpectrum { basis, energies, vectors, overlaps }
    }

    pub fn energy(&self, k: Ket) -> f64 {
        self.energies[self.basis.index(k).expect("ket inside truncation")]
    }

    /// Ẽ11 − Ẽ01 − Ẽ10 + Ẽ00.
    pub fn zeta(&self) -> f64 {
        self.energy(Ket(1, 1)) - self.energy(Ket(0, 1)) - self.energy(Ket(1, 0)) + self.energy(Ket(0, 0))
    }
}

/// For each reference column, the index of the target column with the
/// largest overlap, assigned greedily without reuse.
pub fn assign_max_overlap(reference: &CMat, target: &CMat) -> Vec<usize> {
    let n = reference.ncols();
    let m = target.ncols();
    let ov = reference.adjoint() * target;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            pairs.push((ov[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = vec![usize::MAX; n];
    let mut used = vec![false; m];
    let mut left = n.min(m);
    for (_, i, j) in pairs {
        if left == 0 {
            break;
        }
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
            left -= 1;
        }
    }
    out
}

/// Resonance bookkeeping for the |12⟩/|03⟩ pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MapConditionReport {
    pub delta12_03: f64,
    pub j12_03: f64,
    pub xi: f64,
    /// Ẽ02 − Ẽ01.
    pub e_a: f64,
    /// Ẽ12 − Ẽ11.
    pub e_b: f64,
    /// E_B − E_A.
    pub conditional_anharmonicity: f64,
    /// Static ζ₀ from the diagonalization.
    pub zeta_static: f64,
    /// Dressed |11⟩ → {|12⟩,|03⟩} transition frequencies, ascending.
    pub window: (f64, f64),
}

pub fn map_condition_report(params: &DeviceParams) -> Result<MapConditionReport> {
    params.validate_map()?;
    let model = TwoTransmon::new(params)?;
    let pair = model.level_pair(Ket(1, 2), Ket(0, 3));
    let spec = model.dressed();
    let e_a = spec.energy(Ket(0, 2)) - spec.energy(Ket(0, 1));
    let e_b = spec.energy(Ket(1, 2)) - spec.energy(Ket(1, 1));

    let e = eigh(&model.h_static.data);
    let i12 = model.basis.index(Ket(1, 2)).unwrap_or(usize::MAX);
    let i03 = model.basis.index(Ket(0, 3)).unwrap_or(usize::MAX);
    let mut weights: Vec<(f64, usize)> = (0..model.dim())
        .map(|k| {
            let w = |i: usize| if i == usize::MAX { 0.0 } else { e.vectors[(i, k)].norm_sqr() };
            (w(i12) + w(i03), k)
        })
        .collect();
    weights.sort_by(|x, y| y.0.total_cmp(&x.0));
    let e11 = spec.energy(Ket(1, 1));
    let f_a = e.values[weights[0].1] - e11;
    let f_b = e.values[weights[1].1] - e11;

    Ok(MapConditionReport {
        delta12_03: pair.detuning,
        j12_03: pair.matrix_element,
        xi: splitting_xi(pair.matrix_element, pair.detuning),
        e_a,
        e_b,
        conditional_anharmonicity: e_b - e_a,
        zeta_static: spec.zeta(),
        window: (f_a.min(f_b), f_a.max(f_b)),
    })
}
