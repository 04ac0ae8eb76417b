//! Fringe fitting and phase-series utilities.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMethod {
    LeastSquares,
    Hilbert,
}

/// y ≈ offset + amplitude·cos(ω t + phase).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineFit {
    /// Angular frequency in units of 1/[t].
    pub omega: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub method: FitMethod,
}

impl CosineFit {
    /// Peak-to-peak contrast 2A, limited to [0, 1].
    pub fn contrast(&self) -> f64 {
        (2.0 * self.amplitude).clamp(0.0, 1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t + self.phase).cos()
    }
}

/// Residual threshold above which the Hilbert-transform estimate is tried.
pub const DEFAULT_FIT_THRESHOLD: f64 = 0.05;

fn linear_fit(t: &[f64], y: &[f64], omega: f64) -> (f64, f64, f64, f64) {
    let n = t.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => (omega * t[i]).cos(),
        _ => (omega * t[i]).sin(),
    });
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-10).unwrap_or_else(|_| DVector::zeros(3));
    let r = &a * &x - b;
    let rms = (r.norm_squared() / n as f64).sqrt();
    (x[0], x[1], x[2], rms)
}

/// Least-squares cosine fit with offset, amplitude, phase and frequency free
/// (variable projection over ω), falling back to a Hilbert-transform phase
/// slope when the residual exceeds `threshold`.
pub fn fit_cosine(t: &[f64], y: &[f64], threshold: f64) -> Result<CosineFit> {
    let n = t.len();
    if n != y.len() {
        return Err(Error::Fit("time and value series differ in length".into()));
    }
    if n < 4 {
        return Err(Error::Fit(format!("{n} points are too few for a cosine fit")));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite samples".into()));
    }
    let span = t[n - 1] - t[0];
    if span <= 0.0 {
        return Err(Error::Fit("sample times must increase".into()));
    }
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if dt_min <= 0.0 {
        return Err(Error::Fit("sample times must increase".into()));
    }
    let w_max = PI / dt_min;
    let m = 8 * n;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=m {
        let w = w_max * k as f64 / m as f64;
        let r = linear_fit(t, y, w).3;
        if r < best.1 {
            best = (w, r);
        }
    }
    // golden-section refinement around the best grid frequency
    let step = w_max / m as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(w_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = linear_fit(t, y, x1).3;
    let mut f2 = linear_fit(t, y, x2).3;
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = linear_fit(t, y, x1).3;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = linear_fit(t, y, x2).3;
        }
    }
    let w = if f1 < f2 { x1 } else { x2 };
    let (w, (c0, a, b, rms)) = {
        let refined = linear_fit(t, y, w);
        if refined.3 <= best.1 {
            (w, refined)
        } else {
            (best.0, linear_fit(t, y, best.0))
        }
    };
    let ls = CosineFit {
        omega: w,
        phase: (-b).atan2(a),
        amplitude: a.hypot(b),
        offset: c0,
        residual: rms,
        method: FitMethod::LeastSquares,
    };
    if ls.residual <= threshold {
        return Ok(ls);
    }
    match hilbert_fit(t, y) {
        Ok(h) if h.residual < ls.residual => Ok(h),
        _ => Ok(ls),
    }
}

/// Phase slope of the analytic signal of a uniformly sampled series.
pub fn hilbert_fit(t: &[f64], y: &[f64]) -> Result<CosineFit> {
    let n = t.len();
    if n < 4 {
        return Err(Error::Fit("too few points for a Hilbert estimate".into()));
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs()) {
        return Err(Error::Fit("Hilbert estimate needs uniform sampling".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = y.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let factor = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let analytic: Vec<Complex64> = buf.iter().map(|z| z / n as f64).collect();
    let phases = unwrap(&analytic.iter().map(|z| z.arg()).collect::<Vec<_>>());
    let (slope, intercept) = linear_regression(t, &phases);
    let amplitude = analytic.iter().map(|z| z.norm()).sum::<f64>() / n as f64;
    let mut fit = CosineFit {
        omega: slope.abs(),
        phase: if slope >= 0.0 { intercept } else { -intercept },
        amplitude,
        offset: mean,
        residual: 0.0,
        method: FitMethod::Hilbert,
    };
    fit.residual = (t.iter().zip(y).map(|(&ti, &yi)| (fit.eval(ti) - yi).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok(fit)
}

/// Removes 2π jumps between consecutive phases.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            let d = p - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Ordinary least-squares line y = slope·x + intercept.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// First x at which |y| reaches `level`, linearly interpolated between
/// samples.
pub fn first_crossing(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    for i in 0..y.len() {
        if y[i].abs() >= level {
            if i == 0 {
                return Some(x[0]);
            }
            let (a, b) = (y[i - 1].abs(), y[i].abs());
            let f = if b > a { (level - a) / (b - a) } else { 1.0 };
            return Some(x[i - 1] + f * (x[i] - x[i - 1]));
        }
    }
    None
}
