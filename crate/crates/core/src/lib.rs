//! Distributed multi-parameter quantum metrology on small qubit networks.
//!
//! The crate simulates three strategies for sensing vector fields and their
//! gradients with entangled qubit probes under sequential control:
//!
//! * remote sensing (RS): one sensor qubit entangled with an ancilla,
//! * non-local entanglement (NLE): a 4-qubit probe spread over two sensor
//!   modules that reads the gradient directly,
//! * local entanglement (LE): one entangled pair per module, with the
//!   gradient taken as the difference of the two field estimates.
//!
//! Layers, bottom up: [`qcore`] (states, unitaries, Bell POVMs), [`field`]
//! (field parametrizations, signal unitaries, generators), [`fisher`]
//! (QFIM/CFIM and closed-form precision bounds), [`protocols`] (probe,
//! evolution and outcome distributions), [`noise`] (channels and readout
//! mitigation), [`estimation`] (sampling, MLE, adaptive control) and
//! [`studies`] (Monte-Carlo experiments shared by tests and the CLI).
//!
//! Units follow ħ = 1: `B` is an angular frequency and `T` a time, so only
//! the phase `BT` matters.

pub mod error;
pub mod estimation;
pub mod field;
pub mod fisher;
pub mod noise;
pub mod protocols;
pub mod qcore;
pub mod studies;

pub use error::{Error, Result};
pub use field::{EncodingConfig, GradientSumPair, VectorField};
pub use fisher::{FisherMatrix, PrecisionBound};
pub use protocols::{ParamSpace, ProtocolRun, RunTemplate, Signal, Strategy, StrategyKind};

pub use qcore::{DensityMatrix, OutcomeDistribution, PovmSet, StateVector, Unitary};
