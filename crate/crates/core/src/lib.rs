//! Spin-boson memory effects: exact dynamics of a spin coupled to a truncated
//! bosonic mode, the trace-distance non-Markovianity measure, and the bias that
//! projection noise and finite sampling induce in it.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod hilbert;
pub mod measure;
pub mod qpn;

pub use dynamics::{
    bloch_vector, diagonalize, evolve, fidelity, partial_trace_env, simulate_distance_series,
    trace_distance, Bloch, BlochTrajectory, DistanceSeries, PropagatorBundle, Simulator, TimeGrid,
};
pub use error::{Error, Result};
pub use hilbert::{
    build_displacement, build_hamiltonian, build_operators, initial_state, thermal_populations,
    CMatrix, DensityMatrix, ModelParams, Spin, Subsystem,
};
pub use measure::{
    delta_d, delta_n, estimate_true_n, nonmarkovianity, NmResult, TrueStaircase, TrueValueEstimate,
};
pub use qpn::{
    bias_surface, inject_qpn, noisy_measure, qpn_sigma, resample_gamma, resample_r, BiasSurface,
    NoiseModel, QpnConfig, Repetitions,
};
