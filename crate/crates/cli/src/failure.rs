use std::fmt;

use mvhedge::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad configuration or input data.
    Validation,
    /// An engine produced a non-finite or out-of-domain value mid-run.
    Numerical,
    /// Every cell of a calibration surface failed.
    AllCellsFailed,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Numerical,
            message: message.into(),
        }
    }

    pub fn all_cells_failed(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::AllCellsFailed,
            message: message.into(),
        }
    }

    /// Engine errors that describe inputs are validation failures; the rest are numerical.
    pub fn from_engine(e: Error) -> Self {
        let numerical = matches!(
            e,
            Error::NonFinite(_) | Error::Domain { .. } | Error::NodeOutOfRange { .. }
        );
        if numerical {
            Self::numerical(e.to_string())
        } else {
            Self::validation(e.to_string())
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 2,
            Kind::Numerical => 3,
            Kind::AllCellsFailed => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::from_engine(e)
    }
}
