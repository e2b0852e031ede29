use thiserror::Error;

/// Everything that can go wrong while building, running or verifying a protocol.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NofError {
    #[error("player index {index} out of range for {players} players")]
    PlayerOutOfRange { index: usize, players: usize },
    #[error("protocol expects {expected} players, input has {actual}")]
    PlayerCountMismatch { expected: usize, actual: usize },
    #[error("protocol expects {expected} bits per row, input has {actual}")]
    RowWidthMismatch { expected: usize, actual: usize },
    #[error("invalid matrix shape: {0}")]
    Shape(String),
    #[error("enumeration needs k*n = {kn} <= {cap}; use sampled mode")]
    EnumerationCap { kn: usize, cap: usize },
    #[error("block of {columns} columns exceeds capacity {capacity} for k = {k}")]
    BlockCapacity { columns: usize, capacity: usize, k: usize },
    #[error("answer map for player {player} returned {actual} bits, declared {declared}")]
    AnswerWidth { player: usize, declared: usize, actual: usize },
    #[error("{0} requires an even number of players; pad with a silent player first")]
    OddPlayerCount(usize),
    #[error("{0} requires an odd number of players; pad the input with an all-ones row first")]
    EvenPlayerCount(usize),
    #[error("invalid input distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("invalid register layout: {0}")]
    Layout(String),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("basis map is not injective on the support")]
    NonInjective,
    #[error("measurement family is not an orthonormal basis: {0}")]
    NotOrthonormal(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("answer register not cleared before the player step")]
    AnswerRegisterNotClear,
    #[error("input register does not hold the view of seat {seat}; cannot erase")]
    InconsistentErasure { seat: usize },
    #[error("register of width {width} exceeds the dense cap of {cap} qubits")]
    DimensionCap { width: usize, cap: usize },
    #[error("malformed referee: {0}")]
    Referee(String),
    #[error("probability {value} is not a multiple of 2^-{bits} within tolerance")]
    NotDyadic { value: f64, bits: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = NofError> = std::result::Result<T, E>;
