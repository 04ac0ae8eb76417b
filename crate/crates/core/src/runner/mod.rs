//! Configuration, orchestration and result persistence.

mod config;
mod run;

pub use config::{
    DeviceSection, DriveSection, Experiment, ExperimentConfig, GateChoice, Grid, NumericsSection, OutputSection, PertCompareSection,
    PortName, QptSection, RamseySection, SpectroscopySection, SweepSection,
};
pub use run::{code_version, run, RunManifest, Timing, MANIFEST_NAME};
