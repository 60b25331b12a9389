//! Simulation toolkit for noisy quantum measurements: POVM and PTM models,
//! quantum-noise witnesses and their Fourier fitting, twirling-based noise
//! elimination, classical readout mitigation, and end-to-end experiments.

pub mod detect;
pub mod eliminate;
pub mod error;
pub mod experiments;
pub mod mitigate;
pub mod noisemodel;
pub mod povm;
pub mod qcore;
pub mod random;

pub use error::{Error, Result};
pub use noisemodel::{Histogram, ProbVector, SeededRng};
pub use povm::{FourierSeries, Povm, Ptm, WitnessReport};
pub use qcore::{DensityState, Operator, Pauli, PauliString, C64};
