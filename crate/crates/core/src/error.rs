//! Error type shared by all modules.

use std::fmt;

use crate::algebra::VarId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An enumeration or search exceeded its caller-supplied budget.
    BudgetExceeded { visited: u64, budget: u64 },
    /// A polynomial evaluation was missing an assignment for a variable.
    MissingVariable(VarId),
    /// Expanding a circuit to a polynomial exceeded the term cap.
    TermBudgetExceeded { terms: usize, budget: usize },
    /// A formula did not satisfy the layering contract.
    NotLayered(String),
    /// A summation variable occurred somewhere other than an input label.
    YVariableMisplaced(String),
    /// A tree decomposition failed validation.
    InvalidDecomposition(String),
    /// Expanding a circuit into a formula exceeded the size cap.
    SizeBudgetExceeded { size: usize, budget: usize },
    /// The dynamic program produced more states than allowed.
    StateBudgetExceeded { states: usize, budget: usize },
    /// A text artifact could not be parsed.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BudgetExceeded { visited, budget } => {
                write!(f, "enumeration budget exceeded: visited {visited} states, budget {budget}")
            }
            Error::MissingVariable(v) => write!(f, "no assignment for variable {v}"),
            Error::TermBudgetExceeded { terms, budget } => {
                write!(f, "polynomial term budget exceeded: {terms} terms, budget {budget}")
            }
            Error::NotLayered(msg) => write!(f, "formula is not layered: {msg}"),
            Error::YVariableMisplaced(msg) => write!(f, "summation variable misplaced: {msg}"),
            Error::InvalidDecomposition(msg) => write!(f, "invalid tree decomposition: {msg}"),
            Error::SizeBudgetExceeded { size, budget } => {
                write!(f, "formula size budget exceeded: {size} gates, budget {budget}")
            }
            Error::StateBudgetExceeded { states, budget } => {
                write!(f, "DP state budget exceeded: {states} states, budget {budget}")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
