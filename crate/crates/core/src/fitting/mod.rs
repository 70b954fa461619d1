//! Curve fitting: decays, fringes, scaling laws and change points.

mod decay;
mod jump;
pub mod lsq;
mod ramsey;
mod scaling;

pub use decay::{fit_stretched_exp, DecayFit};
pub use jump::{detect_frequency_jump, FrequencyJump, JUMP_RESOLUTION_CYCLES, JUMP_SIGMA_THRESHOLD, MIN_PERIODS_PER_SEGMENT};
pub use lsq::{linear_least_squares, Covariance, LsqSolution};
pub use ramsey::{dominant_frequency, fit_ramsey, fit_ramsey_fixed_frequency, RamseyFit, PEAK_TO_FLOOR_MIN};
pub use scaling::{estimate_pi_fidelity, fit_dd_scaling, PiFidelity, ScalingFit};
