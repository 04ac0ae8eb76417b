//! Perturbative conditional-phase rate against the driven dressed spectrum.

use rayon::prelude::*;

use crate::dynamics::{driven_dressed_with, DressedOptions};
use crate::error::{Error, Result};
use crate::model::{zeta_terms, TwoTransmon};

/// Perturbative and numerical ζ at one drive point. A `None` value carries
/// its reason in `note`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZetaComparison {
    pub omega_d: f64,
    pub amplitude: f64,
    pub zeta_pert: Option<f64>,
    pub zeta_numeric: Option<f64>,
    /// Drive frequency lies between the two roots of the ζ₂ denominator,
    /// where the perturbative state labeling fails.
    pub in_window: bool,
    /// Some computational state is strongly mixed with a non-computational
    /// one, i.e. the drive sits on another (multi-photon) transition.
    pub near_transition: bool,
    /// Perturbation theory flagged as invalid at this point.
    pub flagged: bool,
    pub note: Option<String>,
}

impl ZetaComparison {
    pub fn relative_error(&self) -> Option<f64> {
        match (self.zeta_pert, self.zeta_numeric) {
            (Some(p), Some(n)) if n != 0.0 => Some(((p - n) / n).abs()),
            _ => None,
        }
    }
}

/// Label overlap below which a point counts as near a transition.
pub const TRANSITION_OVERLAP: f64 = 0.9;

/// Compares ζ at each (ω_d, Ω) point. `floor` is the resonance floor of the
/// perturbative formula.
pub fn compare_zeta(model: &TwoTransmon, points: &[(f64, f64)], opts: &DressedOptions, floor: f64) -> Result<Vec<ZetaComparison>> {
    let report = crate::model::map_condition_report(&model.params)?;
    let (lo, hi) = report.window;
    points
        .par_iter()
        .map(|&(omega_d, amplitude)| {
            let mut notes = Vec::new();
            let in_window = omega_d > lo && omega_d < hi;
            let pert = match zeta_terms(&model.params, omega_d, amplitude, floor) {
                Ok(z) => Some(z.zeta),
                Err(e @ Error::Resonance { .. }) => {
                    notes.push(e.to_string());
                    None
                }
                Err(e) => return Err(e),
            };
            let mut near_transition = false;
            let numeric = match driven_dressed_with(model, omega_d, amplitude, opts) {
                Ok(d) => {
                    if d.min_label_overlap < TRANSITION_OVERLAP {
                        near_transition = true;
                        notes.push(format!("computational state hybridized (overlap {:.3}); drive near a transition", d.min_label_overlap));
                    }
                    Some(d.zeta)
                }
                Err(e @ Error::LeakageRegion { .. }) => {
                    notes.push(e.to_string());
                    None
                }
                Err(e) => return Err(e),
            };
            if in_window {
                notes.push("drive inside the |12⟩/|03⟩ transition window".into());
            }
            Ok(ZetaComparison {
                omega_d,
                amplitude,
                zeta_pert: pert,
                zeta_numeric: numeric,
                in_window,
                near_transition,
                flagged: in_window || near_transition || pert.is_none() || numeric.is_none(),
                note: (!notes.is_empty()).then(|| notes.join("; ")),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_resonance_floor, DeviceParams};
    use crate::units::{ghz, mhz};

    #[test]
    fn inside_window_is_flagged() {
        let p = DeviceParams::reference_device().closed();
        let m = TwoTransmon::new(&p).unwrap();
        let (lo, hi) = crate::model::map_condition_report(&p).unwrap().window;
        let r = compare_zeta(&m, &[(0.5 * (lo + hi), mhz(5.0)), (ghz(5.3), mhz(5.0))], &DressedOptions::default(), default_resonance_floor())
            .unwrap();
        assert!(r[0].flagged && r[0].in_window);
        assert!(!r[1].flagged);
        assert!(r[1].relative_error().unwrap() < 0.1);
    }

    #[test]
    fn two_photon_line_is_flagged() {
        // |01⟩ → |03⟩ absorbs two drive photons near (E03 − E01)/2
        let p = DeviceParams::reference_device().closed();
        let m = TwoTransmon::new(&p).unwrap();
        let r = compare_zeta(&m, &[(ghz(5.34), mhz(5.0)), (ghz(5.30), mhz(5.0))], &DressedOptions::default(), default_resonance_floor()).unwrap();
        assert!(r[0].near_transition && r[0].flagged && !r[0].in_window);
        assert!(!r[1].flagged);
    }
}
