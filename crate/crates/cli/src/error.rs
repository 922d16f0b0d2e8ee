use std::fmt;

/// Run failures, each with its own process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Fault {
    /// Malformed command line or config.
    Parse(String),
    /// The config parses but describes an invalid or unsupported scenario.
    Scenario(String),
    /// A record could not be computed.
    Numerical {
        record: usize,
        label: String,
        message: String,
    },
}

impl Fault {
    pub fn exit_code(&self) -> u8 {
        match self {
            Fault::Parse(_) => 2,
            Fault::Scenario(_) => 3,
            Fault::Numerical { .. } => 4,
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::Parse(m) => write!(f, "parse error: {m}"),
            Fault::Scenario(m) => write!(f, "scenario error: {m}"),
            Fault::Numerical { record, label, message } => {
                write!(f, "numerical failure in record {record} ({label}): {message}")
            }
        }
    }
}

impl std::error::Error for Fault {}

pub fn scenario_error(msg: impl Into<String>) -> Fault {
    Fault::Scenario(msg.into())
}
