use thiserror::Error;

/// Errors raised by the simulation, Fisher-information and estimation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {dim} is not a power of two")]
    NotPowerOfTwo { dim: usize },

    #[error("register of {qubits} qubits exceeds the {max}-qubit limit")]
    TooManyQubits { qubits: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("qubit index {index} out of range for {qubits} qubits")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("empty qubit selection")]
    EmptySelection,

    #[error("qubit pairs overlap at qubit {qubit}")]
    OverlappingPairs { qubit: usize },

    #[error("POVM elements do not sum to identity (max deviation {deviation:e})")]
    IncompletePovm { deviation: f64 },

    #[error("probability {value:e} for outcome {label} is negative")]
    NegativeProbability { label: String, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    BadNormalization { sum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible correlations: constraint `{constraint}` violated by {excess:e}")]
    InfeasibleCorrelations { constraint: &'static str, excess: f64 },

    #[error("strategy {strategy} does not support {components} components")]
    UnsupportedStrategy { strategy: String, components: usize },

    #[error("confusion matrix is singular")]
    SingularConfusion,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
