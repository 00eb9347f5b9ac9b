use std::fmt;

/// Failures surfaced by the command line, each with a stable exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Io(String),
    Parse(String),
    Usage(String),
    Core(luequiv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use luequiv::Error as E;
        match self {
            Self::Io(_) => 3,
            Self::Parse(_) => 4,
            Self::Usage(_) => 64,
            Self::Core(e) => match e {
                E::DimensionMismatch(_) => 5,
                E::NotHermitian { .. } => 6,
                E::NotUnitTrace { .. } => 7,
                E::NotPositiveSemidefinite { .. } => 8,
                E::NotUnitary { .. } => 9,
                E::BudgetExceeded { .. } => 10,
                _ => 11,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Parse(m) => write!(f, "parse error: {m}"),
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<luequiv::Error> for CliError {
    fn from(e: luequiv::Error) -> Self {
        Self::Core(e)
    }
}
