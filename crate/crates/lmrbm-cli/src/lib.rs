//! Library side of the experiment CLI: config files, subcommand
//! implementations, the suite runner, and plot emission.

pub mod cfg;
pub mod commands;
pub mod plot;
pub mod suite;

use lmrbm::Error;

/// Process exit codes: 0 success, 1 usage, 2 data/format, 3 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::SizeGuard(_) => 1,
        Error::NonFinite(_) => 3,
        Error::Format(_)
        | Error::Io(_)
        | Error::EmptyDataset
        | Error::DimMismatch { .. } => 2,
    }
}
