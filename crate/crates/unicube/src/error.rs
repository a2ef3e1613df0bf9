//! Error type shared by every module.
//!
//! Two failure classes exist: malformed input (wrong dimensions, values out
//! of range, unparsable files) and blown resource budgets (an exact
//! computation whose cost model exceeds the configured limit). The CLI maps
//! them to exit codes 2 and 3 respectively.

use std::fmt;

/// Library-wide error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// The input violates a precondition; the message names the violation.
    Input(String),
    /// An exact computation would exceed its operation budget. `required`
    /// and `budget` are in the operation's own cost unit (documented per
    /// operation); `hint` names the cheaper alternative when one exists.
    Budget {
        required: u128,
        budget: u128,
        hint: String,
    },
}

impl Error {
    /// Shorthand for an input error with a formatted message.
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Shorthand for a resource-budget error.
    pub fn budget(required: u128, budget: u128, hint: impl Into<String>) -> Self {
        Error::Budget {
            required,
            budget,
            hint: hint.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Budget {
                required,
                budget,
                hint,
            } => write!(
                f,
                "resource budget exceeded: needs {required} operations, budget is {budget} ({hint})"
            ),
        }
    }
}

impl std::error::Error for Error {}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
