use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Position of a lexical or syntax error in model or expectation text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("value {value} of `{var}` lies outside the admissible range {min}..={max}")]
    ValueOutOfRange {
        var: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("value {value} is not in the initial domain of `{var}`")]
    ValueOutOfDomain { var: String, value: i64 },
    #[error("constraint `{constraint}` expects {expected} variable(s), got {found}")]
    Arity {
        constraint: String,
        expected: String,
        found: usize,
    },
    #[error("table constraint `{constraint}`: {reason}")]
    BadTable { constraint: String, reason: String },
    #[error("environment is not a tuple: `{0}` has more than one value")]
    NotATuple(String),
    #[error("tuple does not assign variable `{0}`")]
    PartialTuple(String),
    #[error("search space of {size} tuples exceeds the enumeration cap of {cap}; restrict the domains or the variable set")]
    EnumerationCap { size: u128, cap: u128 },
    #[error("unsupported relation: {0}")]
    Unsupported(String),
    #[error("{location}: {message}")]
    Syntax { location: Location, message: String },
    #[error("{location}: {error}")]
    At { location: Location, error: Box<Error> },
    #[error("{0} is not a symptom")]
    NotASymptom(String),
    #[error("diagnosis session is already finished")]
    SessionDone,
    #[error("diagnosis session is still waiting for an answer")]
    SessionNotDone,
    #[error("answer given for {got}, but the pending question is about {expected}")]
    StaleQuestion { expected: String, got: String },
    #[error("expectation for {0} is already settled")]
    ExpectationConflict(String),
    #[error("malformed explanation document: {0}")]
    Document(String),
}

impl Error {
    pub(crate) fn at(self, location: Location) -> Error {
        match self {
            located @ (Error::At { .. } | Error::Syntax { .. }) => located,
            error => Error::At {
                location,
                error: Box::new(error),
            },
        }
    }

    /// The error without its source position.
    pub fn cause(&self) -> &Error {
        match self {
            Error::At { error, .. } => error.cause(),
            other => other,
        }
    }

    pub fn location(&self) -> Option<Location> {
        match self {
            Error::At { location, .. } | Error::Syntax { location, .. } => Some(*location),
            _ => None,
        }
    }
}
