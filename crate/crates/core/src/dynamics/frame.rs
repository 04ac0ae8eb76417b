//! Rotating-frame transforms.

use crate::linalg::c;
use crate::model::{Ket, OperatorMatrix, TwoTransmon};

/// H expressed in a frame rotating at (g₁, g₂) on the two transmons.
#[derive(Clone, Debug, PartialEq)]
pub struct RotatingFrame {
    /// H − g₁n₁ − g₂n₂, with the exchange terms evaluated at t = 0.
    pub hamiltonian: OperatorMatrix,
    /// Exchange elements ⟨n+1,m−1|H|n,m⟩ pick up e^{i·rate·t} in this frame
    /// (rate = g₁ − g₂); zero when both transmons rotate together.
    pub exchange_rate: f64,
}

pub fn to_rotating_frame(h_static: &OperatorMatrix, frame: (f64, f64)) -> RotatingFrame {
    let mut h = h_static.clone();
    for i in 0..h.dim() {
        let Ket(n, m) = h.basis.ket(i);
        h.data[(i, i)] -= c(frame.0 * n as f64 + frame.1 * m as f64, 0.0);
    }
    RotatingFrame {
        hamiltonian: h,
        exchange_rate: frame.0 - frame.1,
    }
}

/// Dressed qubit frequencies (Ẽ10 − Ẽ00, Ẽ01 − Ẽ00) of the undriven device.
pub fn dressed_qubit_frequencies(model: &TwoTransmon) -> (f64, f64) {
    let s = model.dressed();
    let e00 = s.energy(Ket(0, 0));
    (s.energy(Ket(1, 0)) - e00, s.energy(Ket(0, 1)) - e00)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, max_abs, CMat};
    use crate::model::DeviceParams;
    use crate::units::{ghz, mhz};

    #[test]
    fn bare_frame_leaves_anharmonicity() {
        let mut p = DeviceParams::reference_device().closed();
        p.j = 1e-300;
        let m = TwoTransmon::new(&p).unwrap();
        let r = to_rotating_frame(&m.h_static, (p.omega1, p.omega2));
        for i in 0..m.dim() {
            let Ket(n, k) = m.basis.ket(i);
            let (n, k) = (n as f64, k as f64);
            let expect = 0.5 * p.delta1 * n * (n - 1.0) + 0.5 * p.delta2 * k * (k - 1.0);
            assert!((r.hamiltonian.data[(i, i)].re - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn common_frame_keeps_exchange() {
        let p = DeviceParams::reference_device();
        let m = TwoTransmon::new(&p).unwrap();
        let wd = ghz(5.43);
        let r = to_rotating_frame(&m.h_static, (wd, wd));
        assert_eq!(r.exchange_rate, 0.0);
        let mut off = r.hamiltonian.data.clone() - &m.h_static.data;
        for i in 0..m.dim() {
            off[(i, i)] = c(0.0, 0.0);
        }
        assert_eq!(max_abs(&off), 0.0);
    }

    /// Quasi-energies of a driven two-level system ω₀σz/2 + Ω cos(ω_d t)σx
    /// against the rotating-wave energies ±½√(Δ² + Ω²).
    #[test]
    fn floquet_quasi_energies_match_rwa() {
        let w0 = ghz(5.0);
        let wd = ghz(5.02);
        let om = mhz(5.0);
        let period = std::f64::consts::TAU / wd;
        let sx = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let sz = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let n = 4000;
        let h = period / n as f64;
        let mut u = CMat::identity(2, 2);
        for k in 0..n {
            let t = (k as f64 + 0.5) * h;
            let hm = &sz * c(0.5 * w0, 0.0) + &sx * c(om * (wd * t).cos(), 0.0);
            u = crate::linalg::expm_hermitian(&hm, h) * u;
        }
        // eigenphases of the one-period propagator
        let tr = u[(0, 0)] + u[(1, 1)];
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        let disc = (tr * tr * 0.25 - det).sqrt();
        let quasi: Vec<f64> = [tr * 0.5 + disc, tr * 0.5 - disc].iter().map(|z| -z.arg() / period).collect();
        // In the frame rotating at ω_d the Hamiltonian is Δσz/2 + Ωσx/2 with
        // Δ = ω₀ − ω_d; the frame change over one period is a global phase,
        // so quasi-energy differences equal rotating-frame splittings mod ω_d.
        let delta = w0 - wd;
        let rwa = eigh(&(&sz * c(0.5 * delta, 0.0) + &sx * c(0.5 * om, 0.0)));
        let split_rwa = rwa.values[1] - rwa.values[0];
        let d = (quasi[1] - quasi[0]).rem_euclid(wd);
        let best = (d - split_rwa).abs().min((wd - d - split_rwa).abs());
        // Bloch–Siegert scale Ω²/(4ω_d)
        let bound = 10.0 * om * om / (4.0 * wd);
        assert!(best < bound, "deviation {best} vs bound {bound}");
    }
}
