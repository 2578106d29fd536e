use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("language {language:?} lists vowel {symbol:?} more than once")]
    DuplicateVowel { language: String, symbol: String },

    #[error("vowel {0:?} has no record with usable F1/F2 formants")]
    NoFormants(String),

    #[error("unknown vowel symbol {0:?}")]
    UnknownSymbol(String),

    #[error("universe of {0} symbols exceeds the supported maximum of {max}", max = crate::vowelset::MAX_UNIVERSE)]
    UniverseTooLarge(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite objective: inventory of {language:?} has zero probability")]
    ZeroProbability { language: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration of {count} subsets exceeds the budget of {budget}; use a smaller size")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("MPP log-probability requires a log-partition estimate")]
    MissingPartition,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
