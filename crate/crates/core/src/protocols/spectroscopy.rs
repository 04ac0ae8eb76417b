//! Rabi amplitude spectroscopy: a square pulse swept in frequency and
//! amplitude, recording 1 − P(ground) after the pulse.
//!
//! Resolving a line needs a pulse of at least several periods of the
//! slowest feature of interest; a k-photon line of effective Rabi rate Ω_k
//! is resolved once Ω_k·T ≳ π.

use rayon::prelude::*;

use super::ramsey::Qubit;
use crate::dynamics::{DrivePulse, Engine, Envelope, Port, PulseSequence};
use crate::error::{Error, Result};
use crate::model::Ket;
use crate::units::to_mhz;

#[derive(Clone, Debug)]
pub struct SpectroscopyMap {
    /// Drive frequencies (rad/s).
    pub freqs: Vec<f64>,
    /// Drive amplitudes (rad/s).
    pub amps: Vec<f64>,
    pub pulse_len: f64,
    /// excited[a][f] = 1 − P(ground) at amplitude a and frequency f.
    pub excited: Vec<Vec<f64>>,
}

pub fn rabi_spectroscopy(engine: &Engine, freqs: &[f64], amps: &[f64], pulse_len: f64, port: Port) -> Result<SpectroscopyMap> {
    let mut issues = Vec::new();
    if freqs.is_empty() {
        issues.push("frequency grid is empty".to_string());
    }
    if amps.is_empty() {
        issues.push("amplitude grid is empty".to_string());
    }
    if !(pulse_len.is_finite() && pulse_len > 0.0) {
        issues.push(format!("pulse length {pulse_len} must be positive"));
    }
    if !issues.is_empty() {
        return Err(Error::InvalidParams(issues));
    }
    let ground = engine.label_state(Ket(0, 0));
    let g = engine.model().basis.index(Ket(0, 0)).expect("ground label");
    let points: Vec<(usize, usize)> = (0..amps.len()).flat_map(|a| (0..freqs.len()).map(move |f| (a, f))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(a, f)| {
            let pulse = DrivePulse {
                port,
                omega_d: freqs[f],
                amplitude: amps[a],
                phase: 0.0,
                duration: pulse_len,
                envelope: Envelope::Square,
            };
            let (u, _) = engine.propagate_unitary(&PulseSequence::new().drive(pulse)).map_err(|e| {
                e.at(format!("f = {:.6} GHz, Ω = {:.3} MHz", freqs[f] / (2.0 * std::f64::consts::PI * 1e9), to_mhz(amps[a])))
            })?;
            let psi = u * &ground;
            Ok((1.0 - psi[g].norm_sqr()).clamp(0.0, 1.0))
        })
        .collect::<Result<_>>()?;
    let excited = values.chunks(freqs.len()).map(|r| r.to_vec()).collect();
    Ok(SpectroscopyMap { freqs: freqs.to_vec(), amps: amps.to_vec(), pulse_len, excited })
}

/// A k-photon transition |0⟩ → |k⟩ of one transmon, seen at f₀ₖ/k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionLine {
    pub qubit: Qubit,
    pub photons: usize,
    /// (Ẽ_k − Ẽ_0)/k from the undriven dressed spectrum (rad/s).
    pub predicted: f64,
    /// Peak position in the map (rad/s), if a peak was found.
    pub fitted: Option<f64>,
    pub peak: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearch {
    /// Half-width of the search window around the predicted line (rad/s).
    pub window: f64,
    /// Lowest peak height accepted; the weakest amplitude reaching it is
    /// used so that power broadening and Stark shifts stay small.
    pub min_signal: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch { window: crate::units::mhz(30.0), min_signal: 0.2 }
    }
}

/// Locates the f₀₁, f₀₂/2 and f₀₃/3 lines of both transmons (where the
/// truncation holds the level) by parabolic peak interpolation.
pub fn extract_lines(map: &SpectroscopyMap, engine: &Engine, search: &LineSearch) -> Vec<TransitionLine> {
    let b = engine.model().basis;
    let e = engine.dressed_energies();
    let e00 = e[b.index(Ket(0, 0)).expect("ground label")];
    let mut out = Vec::new();
    for qubit in [Qubit::Q1, Qubit::Q2] {
        for k in 1..=3 {
            let ket = match qubit {
                Qubit::Q1 => Ket(k, 0),
                Qubit::Q2 => Ket(0, k),
            };
            let Some(i) = b.index(ket) else { continue };
            let predicted = (e[i] - e00) / k as f64;
            let (fitted, peak) = find_peak(map, predicted, search);
            out.push(TransitionLine { qubit, photons: k, predicted, fitted, peak });
        }
    }
    out
}

fn find_peak(map: &SpectroscopyMap, centre: f64, search: &LineSearch) -> (Option<f64>, f64) {
    let cols: Vec<usize> = (0..map.freqs.len()).filter(|&f| (map.freqs[f] - centre).abs() <= search.window).collect();
    if cols.is_empty() {
        return (None, 0.0);
    }
    let row_peak = |row: &Vec<f64>| cols.iter().map(|&f| (f, row[f])).fold((cols[0], -1.0), |a, x| if x.1 > a.1 { x } else { a });
    let mut order: Vec<usize> = (0..map.amps.len()).collect();
    order.sort_by(|&a, &b| map.amps[a].total_cmp(&map.amps[b]));
    let chosen = order
        .iter()
        .map(|&a| (a, row_peak(&map.excited[a])))
        .find(|(_, (_, h))| *h >= search.min_signal)
        .or_else(|| {
            order.iter().map(|&a| (a, row_peak(&map.excited[a]))).max_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        });
    let Some((a, (f, h))) = chosen else { return (None, 0.0) };
    if h <= 0.0 {
        return (None, h);
    }
    let row = &map.excited[a];
    let x = &map.freqs;
    let refined = if f > 0 && f + 1 < x.len() {
        let (y0, y1, y2) = (row[f - 1], row[f], row[f + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        let h0 = x[f + 1] - x[f];
        if denom < 0.0 {
            x[f] + 0.5 * h0 * (y0 - y2) / denom
        } else {
            x[f]
        }
    } else {
        x[f]
    };
    (Some(refined), h)
}
