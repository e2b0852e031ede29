//! Number-on-the-forehead protocol simulation: classical simultaneous protocols, their
//! Fourier analysis, a small exact statevector engine, quantum NOF protocols with erasure,
//! the classical-to-quantum compiler, and generalized inner product protocols.
//!
//! Probabilities are generic over [`Probability`] (`f32`, `f64`, exact [`Rational`]);
//! amplitudes over [`Real`] (`f32`, `f64`).

pub mod bits;
pub mod classical;
pub mod compiler;
pub mod error;
pub mod fourier;
pub mod gip;
pub mod matrix;
pub mod qstate;
pub mod quantum;
pub mod scalar;

pub use bits::BitString;
pub use classical::{
    correctness_exhaustive, correctness_sampled, AnswerMap, ClassicalSpec, CorrectnessReport, EvaluationMode,
    NofProtocol, Referee, SimultaneousProtocol, TwoRoundProtocol,
};
pub use compiler::{compile, verify_theorem1, xor_combine, CompiledProtocol, PairDecoder, Theorem1Report};
pub use error::{NofError, Result};
pub use fourier::{extract_parity_referee, fourier_transform, ParityExtraction, ParityReferee};
pub use gip::{build_quantum_gip, grolmusz, grolmusz_block, GrolmuszRun, GrolmuszTranscript};
pub use matrix::{gip_eval, ForeheadView, InputMatrix, ENUMERATION_CAP};
pub use qstate::{DensityMatrix, Povm, RegisterLayout, StateVector};
pub use quantum::{unpurified_input, LegalityReport, LegalityWitness, OutputDistribution, QCostReport, QuantumNofProtocol, QuantumSpec};
pub use scalar::{Probability, Rational, Real};

pub type StateVec = StateVector<f64>;
pub type StateVec32 = StateVector<f32>;
pub type QuantumProtocol = QuantumNofProtocol<f64>;
pub type Compiled = CompiledProtocol<f64>;
pub type ExactReport = CorrectnessReport<Rational>;
pub type FloatReport = CorrectnessReport<f64>;
