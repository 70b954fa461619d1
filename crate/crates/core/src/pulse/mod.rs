//! Pulse sequences and their propagation through the register.

mod engine;
mod experiments;
mod propagator;
mod sequence;
mod state;

pub use engine::{apply_pumping, run_sequence, run_sequence_with, run_steps, OpticalPumping, PointResult, RunOptions};
pub use experiments::{
    bell_generation, bell_reversal, bell_sequence, bell_start_label, bell_transitions, initialization_sequence, make_experiment, rotation_pulse,
    BellState, Experiment, ExperimentKind, ExperimentSpec, InitOptions, Observable, DEFAULT_MW_RABI_MHZ,
    DEFAULT_RF_RABI_MHZ,
};
pub use propagator::{pulse_propagator, FrameRecord, Propagator, PropagatorWarnings, RwaCutoff};
pub use sequence::{Item, LaserLine, Param, Pulse, PulseStep, Sequence, Step, Sweep};
pub use state::DensityMatrix;
