//! File-based pipeline around `summrank-core`: configuration, on-disk
//! formats, the persistent score cache, the remote scorer client and the
//! stage runners behind the `summrank` binary.

pub mod cache;
pub mod config;
pub mod formats;
pub mod remote;
pub mod report;
pub mod stages;

use summrank_core::error::{Error as CoreError, ScorerFailure};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SCORER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Process exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let mut code = EXIT_IO;
    for cause in err.chain() {
        if cause.is::<stages::InvariantViolation>() {
            return EXIT_INVARIANT;
        }
        if cause.is::<ScorerFailure>() {
            return EXIT_SCORER;
        }
        match cause.downcast_ref::<CoreError>() {
            Some(CoreError::Scorer(_)) => return EXIT_SCORER,
            Some(_) => code = EXIT_VALIDATION,
            None if cause.is::<config::Invalid>() => code = EXIT_VALIDATION,
            None => {}
        }
    }
    code
}
