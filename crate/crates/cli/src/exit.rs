//! Process exit codes.
//!
//! | code | meaning                                        |
//! |-----:|------------------------------------------------|
//! | 0    | success                                        |
//! | 2    | invalid configuration or command line          |
//! | 3    | I/O failure                                    |
//! | 4    | malformed stack or unusable input images       |
//! | 5    | a figure of merit could not be computed        |

use speckle_ghost::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;
pub const EXIT_METROLOGY: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    /// A failure of the figures of merit, whatever its underlying kind.
    pub fn metrology(e: Error) -> Self {
        Self::new(EXIT_METROLOGY, e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Csv(_) | Error::ResourceExhausted { .. } => EXIT_IO,
            Error::Format(_) | Error::Ingest(_) => EXIT_FORMAT,
            Error::Unresolved | Error::Degenerate(_) | Error::Domain { .. } | Error::NonFinite(_) => EXIT_METROLOGY,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}
