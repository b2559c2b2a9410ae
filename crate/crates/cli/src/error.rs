use std::fmt;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.code {
            EXIT_CONFIG => "config error",
            EXIT_NUMERICAL => "numerical error",
            _ => "i/o error",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

impl From<fluxnoise::Error> for CliError {
    fn from(e: fluxnoise::Error) -> Self {
        use fluxnoise::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter { .. } | E::OutOfRange(_) => CliError::config(msg),
            E::NonConvergence { .. } | E::NonDecaying(_) => CliError::numerical(msg),
            E::Format { .. } | E::Io(_) | E::Csv(_) | E::Json(_) => CliError::io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
