//! State and process tomography on the two-qubit subspace.

mod pauli;
mod process;

pub use pauli::{
    embed, expectation, pauli, pauli_basis, pauli_vector, prepare_input_states, project_qubit_subspace, rho_from_pauli, sigma,
    state_tomography, state_tomography_truncated, InputState, Prep, StateEstimate, DEFAULT_LEAKAGE_THRESHOLD, PAULI_LABELS,
};
pub use process::{
    choi_from_ptm, gate_fidelity, negativity, physicality_projection, ptm_from_choi, ptm_from_unitary, ptm_linear_inversion,
    qpt_pipeline, trace_output, Fidelity, EIGENVALUE_FLOOR, GateSpec, Projection, ProjectionOptions, Ptm, QptOptions, QptResult,
};
