use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
    SelfCheck(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
            Failure::SelfCheck(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numeric(m) => write!(f, "error: {m}"),
            Failure::SelfCheck(m) => write!(f, "self-check failed: {m}"),
        }
    }
}

/// Out-of-domain inputs come from the command line; anything else is a
/// numerical problem.
impl From<dpmqkd::Error> for Failure {
    fn from(e: dpmqkd::Error) -> Self {
        match e {
            dpmqkd::Error::Domain { .. } | dpmqkd::Error::Precondition(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numeric(format!("csv: {e}"))
    }
}
