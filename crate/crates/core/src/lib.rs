#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Pure jump Markov models of interacting spiking neurons: exact simulation,
//! truncated-chain numerics and checkers for drift, Poincaré and
//! concentration constants.

pub mod certificates;
pub mod error;
pub mod model;
pub mod simulator;
pub mod spectral;
pub mod state_space;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    lyapunov_function, IntensityFunction, JumpWindow, LyapunovCertificate, ModelSpec,
    PotentialState, SynapticNetwork,
};
pub use spectral::{GapResult, StationaryDistribution};
pub use state_space::{assemble_generator, enumerate_states, EnumeratedSpace, SparseGenerator};
pub use stats::EstimatorResult;
