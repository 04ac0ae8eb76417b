//! Simulated tune-up experiments: Rabi spectroscopy, direct and refocused
//! Ramsey, gate-time sweeps and gate calibration.

mod calibrate;
mod compare;
pub mod fit;
mod ramsey;
mod readout;
mod spectroscopy;
mod sweep;

pub use calibrate::{
    calibrate_refocused, computational_block, ideal_refocused_target, refocused_gate, virtual_z_correction,
    CalibratedGate, CalibrationOptions, BLOCK_ORDER,
};
pub use compare::{compare_zeta, ZetaComparison};
pub use fit::{fit_cosine, CosineFit, FitMethod};
pub use ramsey::{
    bloch_phase, conditional_phase, conditional_phase_at, ramsey_map_direct, ramsey_map_refocused, ramsey_scan,
    ramsey_sequence, FringeRecord, InitLabel, Qubit, RamseyConfig, RamseyKind,
};
pub use readout::Readout;
pub use spectroscopy::{extract_lines, rabi_spectroscopy, LineSearch, SpectroscopyMap, TransitionLine};
pub use sweep::{
    gate_time_point, is_contiguous, scan_conditional_phase, sweep_gate_time, DivergenceCause, GateTimeResult,
    PhaseScan, ScanOptions, SweepOptions,
};
