//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// max |U†U − 1| entrywise.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

impl Eigh {
    /// exp(−i H t) built from the stored decomposition.
    pub fn propagator(&self, t: f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, e) in self.values.iter().enumerate() {
            let ph = C64::from_polar(1.0, -e * t);
            for i in 0..n {
                scaled[(i, j)] *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        let d = CMat::from_diagonal(&CVec::from_iterator(
            self.values.len(),
            self.values.iter().map(|&e| c(e, 0.0)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }
}

pub fn eigh(h: &CMat) -> Eigh {
    let n = h.nrows();
    let sym = hermitian_part(h);
    let dec = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let values = order.iter().map(|&k| dec.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &dec.eigenvectors.column(k));
    }
    Eigh { values, vectors }
}

/// exp(−i H t) for Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    eigh(h).propagator(t)
}

/// Diagonal matrix exp(i·d_k·t).
pub fn diag_phase(d: &[f64], t: f64) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        d.len(),
        d.iter().map(|&x| C64::from_polar(1.0, x * t)),
    ))
}

/// Projects a Hermitian matrix onto the positive semidefinite cone
/// (nearest in Frobenius norm).
pub fn psd_projection(a: &CMat) -> CMat {
    let mut e = eigh(a);
    for v in e.values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    e.reconstruct()
}

/// Partial trace over the second factor of a (da·db)-dimensional operator.
pub fn partial_trace_second(a: &CMat, da: usize, db: usize) -> CMat {
    let mut out = CMat::zeros(da, da);
    for i in 0..da {
        for j in 0..da {
            let mut s = ZERO;
            for k in 0..db {
                s += a[(i * db + k, j * db + k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}
